#include <doctest.h>

#include <condition_variable>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "landreuse/error.hpp"
#include "landreuse/service.hpp"
#include "landreuse/synth.hpp"
#include "test_util.hpp"

using namespace landreuse;
using namespace landreuse::service;

namespace {

// Linear backend whose training blocks while the gate is closed.
class GatedBackend final : public classifier::Backend {
public:
    std::string id() const override { return inner_.id(); }
    classifier::FeatureVector featurize(std::string_view s) const override { return inner_.featurize(s); }
    classifier::ModelSnapshot initial(LabelSpace space) const override { return inner_.initial(space); }
    std::vector<classifier::Prediction> predict(const classifier::ModelSnapshot& m,
                                                std::span<const classifier::FeatureVector> b) const override {
        return inner_.predict(m, b);
    }
    classifier::TrainResult train(const classifier::ModelSnapshot& warm, std::span<const classifier::Example> labeled,
                                  std::span<const classifier::Example> validation,
                                  const classifier::TrainConfig& config) const override {
        {
            std::unique_lock lock(mutex_);
            ++waiting_;
            cv_.notify_all();
            cv_.wait(lock, [&] { return open_; });
            --waiting_;
        }
        return inner_.train(warm, labeled, validation, config);
    }

    void set_open(bool open) {
        std::lock_guard lock(mutex_);
        open_ = open;
        cv_.notify_all();
    }
    void wait_for_waiter() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return waiting_ > 0; });
    }

private:
    classifier::LinearBackend inner_{classifier::FeaturizerConfig{1u << 12}};
    mutable std::mutex mutex_;
    mutable std::condition_variable cv_;
    mutable bool open_ = true;
    mutable int waiting_ = 0;
};

geo::Polygon square(double x, double y, double side) {
    return geo::make_polygon({{x, y}, {x + side, y}, {x + side, y + side}, {x, y + side}});
}

struct Fixture {
    testutil::TempDir dir{"svc"};
    std::shared_ptr<GatedBackend> backend = std::make_shared<GatedBackend>();
    std::unique_ptr<Service> svc;
    std::unique_ptr<HttpServer> http;
    std::thread server_thread;
    std::unique_ptr<httplib::Client> client;
    std::vector<std::string> pool;

    explicit Fixture(int iterations = 5) {
        svc = std::make_unique<Service>(project::Layout::open(dir.path()), backend);

        bootstrap::SynthConfig sc;
        sc.size = 600;
        sc.seed = 9;
        const auto corpus = bootstrap::generate_synthetic_corpus(sc);
        project::Session session;
        session.store = std::make_unique<al::SentenceStore>(*backend);
        std::vector<al::LabeledItem> train;
        for (std::size_t i = 0; i < corpus.sentences.size(); ++i) {
            const auto& s = corpus.sentences[i];
            session.store->add(s.sentence_id, s.text);
            if (i < 60) {
                train.push_back({s.sentence_id, s.gold.topics});
            } else if (i < 120) {
                session.eval.validation.push_back({s.sentence_id, s.gold.topics});
            } else {
                pool.push_back(s.sentence_id);
            }
        }
        std::sort(pool.begin(), pool.end());
        al::ALConfig cfg;
        cfg.iterations = iterations;
        cfg.seed = 3;
        cfg.subsample_size = 100;
        cfg.train.max_epochs = 3;
        session.state = al::initialize(cfg, *session.store, train, pool, session.eval);
        svc->attach_session(std::move(session), dir / "al_topics");

        std::vector<ocr::DocumentMeta> docs = {{"D1", "Betriebsplan", "Lausitz", {"A1"}},
                                               {"D2", "Gutachten", "Lausitz", {"A1", "A3"}}};
        std::vector<geo::GeoFeature> areas = {{"A1", "dump", square(0, 0, 10), {{"name", "Kippe"}}},
                                              {"A2", "lake", square(100, 100, 10), {}},
                                              {"A3", "shore", square(40, 0, 10), {}}};
        geo::ClassifiedSentence weather;
        weather.sentence_id = "D1:p1:s0";
        weather.doc_id = "D1";
        weather.restriction_type = geo::RestrictionType::prohibition;
        weather.topics[0] = 1;
        weather.confidence = 0.93;
        weather.text = "Bei Starkniederschlag ist das Betreten verboten.";
        geo::ClassifiedSentence need = weather;
        need.sentence_id = "D2:p1:s3";
        need.doc_id = "D2";
        need.restriction_type = geo::RestrictionType::requirement;
        need.topics = MultiHot(kTopicCount, 0);
        need.topics[3] = 1;
        need.confidence = 0.71;
        need.text = "Der Aufenthalt muss vorher gemeldet werden.";
        std::vector<geo::ClassifiedSentence> cs = {weather, need};
        svc->set_graph(geo::Graph::build(docs, areas, cs));
        svc->set_isobands({{square(-5, -5, 30), 25.0}, {square(30, -5, 30), 2.0}});
        svc->set_documents_text({{"D1", {{"D1", 1, 90.0, "Bei Starkniederschlag ist das Betreten verboten."}}}});

        http = std::make_unique<HttpServer>(*svc);
        const int port = http->bind("127.0.0.1", 0);
        server_thread = std::thread([this] { http->listen(); });
        client = std::make_unique<httplib::Client>("127.0.0.1", port);
        client->set_read_timeout(30, 0);
        // Wait until the listener accepts.
        for (int i = 0; i < 200; ++i) {
            if (client->Get("/api/areas")) break;
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
    }

    ~Fixture() {
        backend->set_open(true);
        http->stop();
        server_thread.join();
        svc->wait_idle(LabelSpace::topics);
    }

    nlohmann::json get(const std::string& path, int expected = 200) {
        auto res = client->Get(path);
        REQUIRE(res);
        CHECK(res->status == expected);
        return nlohmann::json::parse(res->body);
    }

    httplib::Result post(const std::string& path, const nlohmann::json& body) {
        return client->Post(path, body.dump(), "application/json");
    }

    static nlohmann::json empty_labels(const nlohmann::json& batch) {
        nlohmann::json labels = nlohmann::json::object();
        for (const auto& it : batch["items"]) labels[it["sentence_id"].get<std::string>()] = nlohmann::json::array();
        return {{"labels", labels}};
    }
};

}  // namespace

TEST_CASE("batch fetch is idempotent and sized") {
    Fixture f;
    const auto a = f.get("/api/al/topics/batch");
    REQUIRE(a["items"].size() == 10);
    CHECK(a["done"] == false);
    CHECK(a["iteration"] == 1);
    CHECK(a["labels"].size() == 7);
    const auto& item = a["items"][0];
    CHECK(item["text"].is_string());
    CHECK(item["prediction"].size() == 7);
    CHECK(item["uncertainty"].get<double>() >= 0.0);
    CHECK(f.get("/api/al/topics/batch")["items"] == a["items"]);
    CHECK(f.get("/api/al/restrictions/batch", 404).contains("error"));
    f.get("/api/al/colours/batch", 404);
}

TEST_CASE("label submission") {
    Fixture f;
    const auto batch = f.get("/api/al/topics/batch");
    const auto before = f.get("/api/al/topics/status");

    // A foreign id is rejected and nothing changes.
    auto foreign = Fixture::empty_labels(batch);
    foreign["labels"].erase(batch["items"][0]["sentence_id"].get<std::string>());
    foreign["labels"]["not-in-batch"] = nlohmann::json::array();
    auto res = f.post("/api/al/topics/labels", foreign);
    REQUIRE(res);
    CHECK(res->status == 400);
    const auto after = f.get("/api/al/topics/status");
    CHECK(after["iteration"] == before["iteration"]);
    CHECK(after["labeled"] == before["labeled"]);
    CHECK(f.get("/api/al/topics/batch")["items"] == batch["items"]);

    // Partial coverage and unknown label names are rejected too.
    auto partial = Fixture::empty_labels(batch);
    partial["labels"].erase(batch["items"][1]["sentence_id"].get<std::string>());
    CHECK(f.post("/api/al/topics/labels", partial)->status == 400);
    auto unknown = Fixture::empty_labels(batch);
    unknown["labels"][batch["items"][0]["sentence_id"].get<std::string>()] = {"Colour"};
    CHECK(f.post("/api/al/topics/labels", unknown)->status == 400);
    CHECK(f.client->Post("/api/al/topics/labels", "{not json", "application/json")->status == 400);
    auto stale = Fixture::empty_labels(batch);
    stale["iteration"] = 7;
    CHECK(f.post("/api/al/topics/labels", stale)->status == 409);

    // All-empty labels are accepted and advance the round.
    auto ok = Fixture::empty_labels(batch);
    ok["labels"][batch["items"][0]["sentence_id"].get<std::string>()] = {"Weather", "Disposal"};
    res = f.post("/api/al/topics/labels", ok);
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto body = nlohmann::json::parse(res->body);
    CHECK(body["iteration"] == before["iteration"].get<int>() + 1);
    CHECK(body["training"] == true);
    f.svc->wait_idle(LabelSpace::topics);
    const auto status = f.get("/api/al/topics/status");
    CHECK(status["labeled"] == before["labeled"].get<int>() + 10);
    CHECK(status["model_version"] == before["model_version"].get<int>() + 1);
    CHECK(status["training"] == false);
    CHECK(status["last_error"].is_null());
    CHECK(f.get("/api/al/topics/batch")["iteration"] == 2);
}

TEST_CASE("requests during training") {
    Fixture f;
    const auto batch = f.get("/api/al/topics/batch");
    f.backend->set_open(false);
    REQUIRE(f.post("/api/al/topics/labels", Fixture::empty_labels(batch))->status == 200);
    f.backend->wait_for_waiter();

    auto res = f.client->Get("/api/al/topics/batch");
    REQUIRE(res);
    CHECK(res->status == 503);
    CHECK(res->get_header_value("Retry-After") == "1");
    CHECK(f.post("/api/al/topics/labels", Fixture::empty_labels(batch))->status == 409);
    CHECK(f.get("/api/al/topics/status")["training"] == true);
    // Geo endpoints stay available.
    CHECK(f.get("/api/areas")["areas"].size() == 3);

    f.backend->set_open(true);
    f.svc->wait_idle(LabelSpace::topics);
    CHECK(f.get("/api/al/topics/batch")["items"].size() == 10);
}

TEST_CASE("session completion") {
    Fixture f(2);
    for (int round = 0; round < 2; ++round) {
        const auto batch = f.get("/api/al/topics/batch");
        REQUIRE(f.post("/api/al/topics/labels", Fixture::empty_labels(batch))->status == 200);
        f.svc->wait_idle(LabelSpace::topics);
    }
    const auto done = f.get("/api/al/topics/batch");
    CHECK(done["done"] == true);
    CHECK(done["items"].empty());
    // The checkpoint on disk reflects the finished run.
    const auto state = al::load_checkpoint(f.dir / "al_topics");
    CHECK(state.iteration == 2);
    CHECK(state.history.size() == 3);
}

TEST_CASE("version headers") {
    Fixture f;
    auto res = f.client->Get("/api/areas");
    REQUIRE(res);
    const auto mv = res->get_header_value("X-Model-Version");
    CHECK(mv == "restrictions=none;topics=" + std::to_string(f.get("/api/al/topics/status")["model_version"].get<int>()));
    CHECK(res->get_header_value("X-Graph-Version").size() == 16);
    auto missing = f.client->Get("/api/nothing");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    CHECK(missing->has_header("X-Graph-Version"));
}

TEST_CASE("area report") {
    Fixture f;
    const auto r = f.get("/api/areas/A1/report?weather=1");
    REQUIRE(r["restrictions"]["Prohibition"].size() == 1);
    CHECK(r["restrictions"]["Prohibition"][0]["topic"] == "Weather");
    CHECK(r["restrictions"]["Prohibition"][0]["document_title"] == "Betriebsplan");
    CHECK(r["restrictions"]["Requirement"][0]["confidence"] == 0.71);
    CHECK(r["weather"]["max_band_value"] == 25.0);
    CHECK(r["weather"]["band_values"] == nlohmann::json::array({25.0}));
    CHECK(r["documents"].size() == 2);
    CHECK(r["similar_areas"]["RestrictedArea"] == nlohmann::json::array({"A3"}));

    const auto plain = f.get("/api/areas/A1/report");
    CHECK_FALSE(plain.contains("weather"));
    const auto quiet = f.get("/api/areas/A2/report?weather=1");
    CHECK(quiet["restrictions"]["Prohibition"].empty());
    CHECK(quiet["restrictions"]["Requirement"].empty());
    CHECK(quiet["weather"]["band_values"].empty());
    CHECK(quiet["weather"]["max_band_value"].is_null());
    f.get("/api/areas/A9/report", 404);
}

TEST_CASE("map endpoints") {
    Fixture f;
    CHECK(f.get("/api/topics/RestrictedArea/areas")["areas"] == nlohmann::json::array({"A1", "A3"}));
    CHECK(f.get("/api/topics/Weather/areas")["areas"] == nlohmann::json::array({"A1"}));
    f.get("/api/topics/Colour/areas", 404);
    const auto doc = f.get("/api/docs/D1");
    CHECK(doc["title"] == "Betriebsplan");
    CHECK(doc["pages"].size() == 1);
    CHECK(doc["text"].get<std::string>().find("Starkniederschlag") != std::string::npos);
    f.get("/api/docs/D9", 404);
    auto res = f.client->Get("/api/geo/features.geojson");
    REQUIRE(res);
    CHECK(res->get_header_value("Content-Type") == "application/geo+json");
    CHECK(nlohmann::json::parse(res->body)["features"].size() == 3);
    CHECK(f.get("/api/geo/weather.geojson")["features"].size() == 2);
}

TEST_CASE("error kinds map to statuses") {
    CHECK(http_status(Error("x")) == 400);
    CHECK(http_status(NotFound("x")) == 404);
    CHECK(http_status(Conflict("x")) == 409);
    CHECK(http_status(RetryLater("x")) == 503);
    CHECK(http_status(IoError("x")) == 500);
}

TEST_CASE("service without data answers not found") {
    testutil::TempDir dir("empty");
    Service svc(project::Layout::open(dir.path()), std::make_shared<classifier::LinearBackend>());
    svc.load();
    CHECK_THROWS_AS(svc.get_next_batch(LabelSpace::topics), NotFound);
    CHECK_THROWS_AS(svc.areas(), NotFound);
    CHECK(svc.status(LabelSpace::topics)["active"] == false);
    CHECK(svc.model_version_header() == "restrictions=none;topics=none");
    CHECK(svc.graph_version() == "none");
}
