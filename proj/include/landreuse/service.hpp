#pragma once

#include <array>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "landreuse/classifier.hpp"
#include "landreuse/error.hpp"
#include "landreuse/geograph.hpp"
#include "landreuse/project.hpp"

namespace landreuse::service {

// HTTP status for a library error.
int http_status(const Error& e);

struct AreaReportOptions {
    bool include_weather = false;
};

// Application state behind the CLI server. Readers run concurrently; each
// label space has one writer lock and at most one training job.
class Service {
public:
    Service(project::Layout layout, std::shared_ptr<const classifier::Backend> backend);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // Opens AL checkpoints under the layout's al dir and loads graph and
    // weather files that exist. Missing pieces leave endpoints answering
    // not-found.
    void load();
    void attach_session(project::Session session, const std::filesystem::path& checkpoint_dir);
    void set_graph(geo::Graph graph);
    void set_isobands(std::vector<geo::Isoband> bands);
    void set_documents_text(std::map<std::string, std::vector<ocr::PageText>> pages);

    nlohmann::json get_next_batch(LabelSpace space);
    // Body: {"labels": {sentence_id: [label names]}, "iteration": n (optional)}.
    nlohmann::json submit_labels(LabelSpace space, const nlohmann::json& body);
    nlohmann::json status(LabelSpace space) const;
    // Blocks until no training job is running for the space.
    void wait_idle(LabelSpace space);

    nlohmann::json areas() const;
    nlohmann::json area_report(const std::string& area_id, AreaReportOptions options) const;
    nlohmann::json topic_areas(const std::string& topic) const;
    nlohmann::json document(const std::string& doc_id) const;
    nlohmann::json features_geojson() const;
    nlohmann::json weather_geojson() const;

    std::string model_version_header() const;
    std::string graph_version() const;

private:
    struct Slot {
        mutable std::mutex mutex;
        std::condition_variable idle;
        std::optional<project::Session> session;
        std::filesystem::path dir;
        bool training = false;
        std::uint64_t job_id = 0;
        std::string last_error;
        std::jthread worker;
    };

    Slot& slot(LabelSpace space) { return *slots_[static_cast<std::size_t>(space)]; }
    const Slot& slot(LabelSpace space) const { return *slots_[static_cast<std::size_t>(space)]; }
    std::shared_ptr<const geo::Graph> graph() const;
    void train_job(LabelSpace space, al::ALState snapshot, std::uint64_t job);

    project::Layout layout_;
    std::shared_ptr<const classifier::Backend> backend_;
    std::array<std::unique_ptr<Slot>, 2> slots_;

    mutable std::mutex geo_mutex_;
    std::shared_ptr<const geo::Graph> graph_;
    std::shared_ptr<const std::vector<geo::Isoband>> isobands_;
    std::shared_ptr<const std::map<std::string, std::vector<ocr::PageText>>> pages_;
};

// HTTP JSON front end over a Service.
class HttpServer {
public:
    explicit HttpServer(Service& service);
    ~HttpServer();

    // Binds to the port (0 picks a free one) and returns the bound port.
    int bind(const std::string& host, int port);
    // Blocks until stop().
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace landreuse::service
