#include "landreuse/service.hpp"

#include <algorithm>
#include <set>

#include <httplib.h>

#include "landreuse/io.hpp"

namespace landreuse::service {

namespace fs = std::filesystem;

int http_status(const Error& e) {
    switch (e.kind()) {
        case Error::Kind::invalid_input: return 400;
        case Error::Kind::not_found: return 404;
        case Error::Kind::conflict: return 409;
        case Error::Kind::retry_later: return 503;
        case Error::Kind::io: return 500;
    }
    return 500;
}

Service::Service(project::Layout layout, std::shared_ptr<const classifier::Backend> backend)
    : layout_(std::move(layout)), backend_(std::move(backend)) {
    for (auto& s : slots_) s = std::make_unique<Slot>();
}

Service::~Service() {
    for (auto& s : slots_) {
        if (s->worker.joinable()) s->worker.join();
    }
}

void Service::load() {
    for (auto space : {LabelSpace::restrictions, LabelSpace::topics}) {
        const auto dir = layout_.al_dir(space);
        if (fs::exists(dir / "state.json")) attach_session(project::open_session(dir, *backend_), dir);
    }
    if (fs::exists(layout_.graph)) set_graph(geo::Graph::load(io::read_json(layout_.graph)));
    if (fs::exists(layout_.weather)) set_isobands(geo::read_isobands(layout_.weather));
    if (fs::exists(layout_.pages)) {
        std::map<std::string, std::vector<ocr::PageText>> pages;
        for (auto& p : ocr::read_pages(layout_.pages)) pages[p.doc_id].push_back(std::move(p));
        set_documents_text(std::move(pages));
    }
}

void Service::attach_session(project::Session session, const fs::path& checkpoint_dir) {
    const auto space = session.state.config.space;
    auto& s = slot(space);
    std::unique_lock lock(s.mutex);
    if (s.training) throw Conflict("cannot replace a session while it is training");
    if (s.worker.joinable()) s.worker.join();
    s.session = std::move(session);
    s.dir = checkpoint_dir;
    s.last_error.clear();
    if (s.session->state.needs_retrain) {
        // Labels were committed but the retrain did not finish; redo it.
        s.training = true;
        const auto job = ++s.job_id;
        s.worker = std::jthread([this, space, snap = s.session->state, job]() mutable { train_job(space, std::move(snap), job); });
    }
}

void Service::set_graph(geo::Graph graph) {
    auto g = std::make_shared<const geo::Graph>(std::move(graph));
    std::lock_guard lock(geo_mutex_);
    graph_ = std::move(g);
}

void Service::set_isobands(std::vector<geo::Isoband> bands) {
    auto b = std::make_shared<const std::vector<geo::Isoband>>(std::move(bands));
    std::lock_guard lock(geo_mutex_);
    isobands_ = std::move(b);
}

void Service::set_documents_text(std::map<std::string, std::vector<ocr::PageText>> pages) {
    auto p = std::make_shared<const std::map<std::string, std::vector<ocr::PageText>>>(std::move(pages));
    std::lock_guard lock(geo_mutex_);
    pages_ = std::move(p);
}

std::shared_ptr<const geo::Graph> Service::graph() const {
    std::lock_guard lock(geo_mutex_);
    if (!graph_) throw NotFound("no graph has been built for this project");
    return graph_;
}

namespace {

nlohmann::json prediction_json(LabelSpace space, const classifier::Prediction& p) {
    nlohmann::json j = nlohmann::json::object();
    const auto names = label_names(space);
    for (std::size_t i = 0; i < p.size() && i < names.size(); ++i) j[names[i]] = p[i];
    return j;
}

}  // namespace

nlohmann::json Service::get_next_batch(LabelSpace space) {
    auto& s = slot(space);
    std::lock_guard lock(s.mutex);
    if (!s.session) throw NotFound("no active AL session for " + std::string(to_string(space)));
    if (s.training || s.session->state.needs_retrain) throw RetryLater("the model is being retrained");
    auto& st = s.session->state;
    const bool done = !st.pending && (st.iteration >= st.config.iterations || st.unlabeled.empty());
    nlohmann::json out = {{"space", to_string(space)}, {"model_version", st.model.version}, {"done", done}};
    if (done) {
        out["iteration"] = st.iteration;
        out["items"] = nlohmann::json::array();
        return out;
    }
    if (!st.pending) {
        st.pending = al::select_batch(st, *s.session->store);
        al::save_checkpoint(st, s.dir);
    }
    nlohmann::json items = nlohmann::json::array();
    for (const auto& c : st.pending->items) {
        items.push_back({{"sentence_id", c.sentence_id},
                         {"text", s.session->store->text(c.sentence_id)},
                         {"prediction", prediction_json(space, c.prediction)},
                         {"uncertainty", c.score}});
    }
    out["iteration"] = st.pending->iteration;
    out["items"] = std::move(items);
    out["labels"] = label_names(space);
    return out;
}

nlohmann::json Service::submit_labels(LabelSpace space, const nlohmann::json& body) {
    auto& s = slot(space);
    std::unique_lock lock(s.mutex);
    if (!s.session) throw NotFound("no active AL session for " + std::string(to_string(space)));
    if (s.training) throw Conflict("a training job is already running for " + std::string(to_string(space)));
    auto& st = s.session->state;
    if (!st.pending) throw Conflict("there is no pending batch; fetch one first");
    const auto& batch = *st.pending;
    if (!body.is_object() || !body.contains("labels") || !body.at("labels").is_object()) {
        throw Error("body must be an object with a \"labels\" object");
    }
    if (body.contains("iteration") && body.at("iteration").get<int>() != batch.iteration) {
        throw Conflict("labels are for round " + std::to_string(body.at("iteration").get<int>()) +
                       ", pending round is " + std::to_string(batch.iteration));
    }
    const auto& assigned = body.at("labels");
    std::set<std::string> expected;
    for (const auto& c : batch.items) expected.insert(c.sentence_id);
    std::vector<std::string> foreign, missing;
    for (const auto& [id, v] : assigned.items()) {
        if (!expected.count(id)) foreign.push_back(id);
    }
    for (const auto& id : expected) {
        if (!assigned.contains(id)) missing.push_back(id);
    }
    if (!foreign.empty() || !missing.empty()) {
        std::string msg = "assignments must cover exactly the pending batch";
        if (!missing.empty()) msg += "; missing " + std::to_string(missing.size()) + " (first: " + missing.front() + ")";
        if (!foreign.empty()) msg += "; not in batch: " + foreign.front();
        throw Error(msg);
    }
    std::vector<MultiHot> labels;
    for (const auto& c : batch.items) labels.push_back(names_from_json(space, assigned.at(c.sentence_id)));

    const al::QueryBatch committed = batch;
    al::commit_batch(st, committed, labels);
    al::save_checkpoint(st, s.dir);

    s.training = true;
    s.last_error.clear();
    const auto job = ++s.job_id;
    if (s.worker.joinable()) s.worker.join();
    s.worker = std::jthread([this, space, snap = st, job]() mutable { train_job(space, std::move(snap), job); });
    return {{"iteration", st.iteration}, {"job_id", job}, {"training", true}};
}

void Service::train_job(LabelSpace space, al::ALState snapshot, std::uint64_t job) {
    auto& s = slot(space);
    try {
        auto outcome = al::compute_retrain(snapshot, *s.session->store, s.session->eval);
        std::lock_guard lock(s.mutex);
        al::apply_retrain(s.session->state, std::move(outcome));
        al::save_checkpoint(s.session->state, s.dir);
    } catch (const std::exception& e) {
        std::lock_guard lock(s.mutex);
        s.last_error = "training job " + std::to_string(job) + " failed: " + e.what();
    }
    std::lock_guard lock(s.mutex);
    s.training = false;
    s.idle.notify_all();
}

void Service::wait_idle(LabelSpace space) {
    auto& s = slot(space);
    std::unique_lock lock(s.mutex);
    s.idle.wait(lock, [&] { return !s.training; });
}

nlohmann::json Service::status(LabelSpace space) const {
    const auto& s = slot(space);
    std::lock_guard lock(s.mutex);
    nlohmann::json j = {{"space", to_string(space)}, {"active", s.session.has_value()}};
    if (!s.session) return j;
    const auto& st = s.session->state;
    j["iteration"] = st.iteration;
    j["iterations"] = st.config.iterations;
    j["labeled"] = st.labeled.size();
    j["unlabeled"] = st.unlabeled.size();
    j["training"] = s.training;
    j["job_id"] = s.job_id;
    j["model_version"] = st.model.version;
    j["pending"] = st.pending.has_value();
    j["needs_retrain"] = st.needs_retrain;
    j["last_error"] = s.last_error.empty() ? nlohmann::json() : nlohmann::json(s.last_error);
    if (!st.history.empty() && st.history.back().test) {
        const auto& t = *st.history.back().test;
        j["test"] = {{"micro_f1", t.micro_f1}, {"macro_f1", t.macro_f1}};
    }
    return j;
}

nlohmann::json Service::areas() const {
    const auto g = graph();
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t a = 0; a < g->areas().size(); ++a) {
        const auto& f = g->areas()[a];
        std::size_t restrictions = 0;
        for (auto d : g->documents_of_area(a)) restrictions += g->edges_of_document(d).size();
        arr.push_back({{"area_id", f.area_id},
                       {"category", f.category},
                       {"properties", f.properties},
                       {"documents", g->documents_of_area(a).size()},
                       {"restriction_edges", restrictions}});
    }
    return {{"areas", arr}};
}

nlohmann::json Service::area_report(const std::string& area_id, AreaReportOptions options) const {
    const auto g = graph();
    const auto& f = g->area(area_id);
    const auto grouped = geo::restrictions_by_area(*g, area_id);

    std::set<std::string> topics;
    for (const auto* group : {&grouped.prohibitions, &grouped.requirements}) {
        for (const auto& e : *group) topics.insert(e.topic);
    }
    nlohmann::json similar = nlohmann::json::object();
    for (const auto& t : topics) {
        nlohmann::json ids = nlohmann::json::array();
        for (const auto& id : geo::similar_areas(*g, t)) {
            if (id != area_id) ids.push_back(id);
        }
        similar[t] = ids;
    }
    nlohmann::json docs = nlohmann::json::array();
    const auto a = *g->find_area(area_id);
    for (auto d : g->documents_of_area(a)) {
        docs.push_back({{"doc_id", g->documents()[d].doc_id}, {"title", g->documents()[d].title}});
    }
    nlohmann::json out = {{"area_id", f.area_id},     {"category", f.category}, {"properties", f.properties},
                          {"documents", docs},        {"restrictions", geo::to_json(grouped)},
                          {"similar_areas", similar}};
    if (options.include_weather) {
        std::shared_ptr<const std::vector<geo::Isoband>> bands;
        {
            std::lock_guard lock(geo_mutex_);
            bands = isobands_;
        }
        std::vector<double> values;
        if (bands) values = geo::weather_overlay(*g, area_id, *bands);
        out["weather"] = {{"band_values", values},
                          {"max_band_value", values.empty() ? nlohmann::json() : nlohmann::json(values.front())}};
    }
    return out;
}

nlohmann::json Service::topic_areas(const std::string& topic) const {
    const auto g = graph();
    geo::parse_topic(topic);
    return {{"topic", topic}, {"areas", geo::similar_areas(*g, topic)}};
}

nlohmann::json Service::document(const std::string& doc_id) const {
    const auto g = graph();
    const auto d = g->find_document(doc_id);
    if (!d) throw NotFound("unknown document '" + doc_id + "'");
    const auto& meta = g->documents()[*d];
    std::shared_ptr<const std::map<std::string, std::vector<ocr::PageText>>> pages;
    {
        std::lock_guard lock(geo_mutex_);
        pages = pages_;
    }
    nlohmann::json page_list = nlohmann::json::array();
    std::string full;
    if (pages) {
        if (auto it = pages->find(doc_id); it != pages->end()) {
            for (const auto& p : it->second) {
                page_list.push_back({{"page_no", p.page_no}, {"text", p.text}, {"score", p.score}});
                if (!full.empty()) full += "\n\n";
                full += p.text;
            }
        }
    }
    return {{"doc_id", meta.doc_id}, {"title", meta.title}, {"region", meta.region},
            {"area_ids", meta.area_ids}, {"pages", page_list}, {"text", full}};
}

nlohmann::json Service::features_geojson() const {
    const auto g = graph();
    return geo::features_to_geojson(g->areas());
}

nlohmann::json Service::weather_geojson() const {
    std::lock_guard lock(geo_mutex_);
    if (!isobands_) throw NotFound("no weather isobands loaded");
    return geo::isobands_to_geojson(*isobands_);
}

std::string Service::model_version_header() const {
    std::string out;
    for (auto space : {LabelSpace::restrictions, LabelSpace::topics}) {
        const auto& s = slot(space);
        std::lock_guard lock(s.mutex);
        if (!out.empty()) out += ';';
        out += std::string(to_string(space)) + '=' + (s.session ? std::to_string(s.session->state.model.version) : "none");
    }
    return out;
}

std::string Service::graph_version() const {
    std::lock_guard lock(geo_mutex_);
    return graph_ ? graph_->version() : "none";
}

struct HttpServer::Impl {
    Service& service;
    httplib::Server server;

    explicit Impl(Service& s) : service(s) { routes(); }

    using Handler = std::function<nlohmann::json(const httplib::Request&)>;

    void respond(const httplib::Request& req, httplib::Response& res, const Handler& fn,
                 const char* content_type = "application/json") {
        try {
            const auto body = fn(req);
            res.status = 200;
            res.set_content(body.dump(), content_type);
        } catch (const Error& e) {
            res.status = http_status(e);
            if (e.kind() == Error::Kind::retry_later) res.set_header("Retry-After", "1");
            res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
        } catch (const nlohmann::json::exception& e) {
            res.status = 400;
            res.set_content(nlohmann::json{{"error", std::string("malformed JSON: ") + e.what()}}.dump(),
                            "application/json");
        } catch (const std::exception& e) {
            res.status = 500;
            res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
        }
        res.set_header("X-Model-Version", service.model_version_header());
        res.set_header("X-Graph-Version", service.graph_version());
    }

    static LabelSpace space_of(const httplib::Request& req) {
        try {
            return parse_label_space(req.matches[1].str());
        } catch (const Error&) {
            throw NotFound("unknown label space '" + req.matches[1].str() + "'");
        }
    }

    void get(const std::string& pattern, Handler fn, const char* type = "application/json") {
        server.Get(pattern, [this, fn, type](const httplib::Request& req, httplib::Response& res) { respond(req, res, fn, type); });
    }

    void routes() {
        get(R"(/api/al/([^/]+)/batch)", [this](const auto& req) { return service.get_next_batch(space_of(req)); });
        server.Post(R"(/api/al/([^/]+)/labels)", [this](const httplib::Request& req, httplib::Response& res) {
            respond(req, res, [this](const auto& r) {
                return service.submit_labels(space_of(r), nlohmann::json::parse(r.body));
            });
        });
        get(R"(/api/al/([^/]+)/status)", [this](const auto& req) { return service.status(space_of(req)); });
        get("/api/areas", [this](const auto&) { return service.areas(); });
        get(R"(/api/areas/([^/]+)/report)", [this](const auto& req) {
            const auto w = req.has_param("weather") ? req.get_param_value("weather") : std::string("0");
            return service.area_report(req.matches[1].str(), {w == "1" || w == "true"});
        });
        get(R"(/api/topics/([^/]+)/areas)", [this](const auto& req) { return service.topic_areas(req.matches[1].str()); });
        get(R"(/api/docs/([^/]+))", [this](const auto& req) { return service.document(req.matches[1].str()); });
        get("/api/geo/features.geojson", [this](const auto&) { return service.features_geojson(); },
            "application/geo+json");
        get("/api/geo/weather.geojson", [this](const auto&) { return service.weather_geojson(); },
            "application/geo+json");
        server.set_error_handler([this](const httplib::Request&, httplib::Response& res) {
            if (res.body.empty()) res.set_content(nlohmann::json{{"error", "no such endpoint"}}.dump(), "application/json");
            res.set_header("X-Model-Version", service.model_version_header());
            res.set_header("X-Graph-Version", service.graph_version());
        });
    }
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int p = impl_->server.bind_to_any_port(host);
        if (p < 0) throw IoError("cannot bind to " + host);
        return p;
    }
    if (!impl_->server.bind_to_port(host, port)) throw IoError("cannot bind to " + host + ":" + std::to_string(port));
    return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace landreuse::service
