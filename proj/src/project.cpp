#include "landreuse/project.hpp"

#include <set>

#include "landreuse/bootstrap.hpp"
#include "landreuse/error.hpp"
#include "landreuse/io.hpp"

namespace landreuse::project {

namespace fs = std::filesystem;

Layout Layout::open(const fs::path& root) {
    Layout l;
    l.root = root;
    nlohmann::json cfg = nlohmann::json::object();
    if (fs::exists(root / "project.json")) cfg = io::read_json(root / "project.json");
    auto path = [&](const char* key, const char* fallback) {
        return root / cfg.value(key, std::string(fallback));
    };
    l.documents = path("documents", "ingest/documents.jsonl");
    l.pages = path("pages", "ingest/pages.jsonl");
    l.sentences = path("sentences", "sentences.jsonl");
    l.areas = path("areas", "areas.geojson");
    l.weather = path("weather", "weather.geojson");
    l.graph = path("graph", "graph.json");
    l.models = path("models", "models");
    l.al = path("al", "al");
    return l;
}

SessionInputs SessionInputs::from_json(const nlohmann::json& j, const fs::path& base) {
    auto resolve = [&](const std::string& key) {
        const fs::path p = j.at(key).get<std::string>();
        return fs::absolute(p.is_absolute() ? p : base / p).lexically_normal();
    };
    SessionInputs in;
    in.sentences = resolve("sentences");
    in.train = resolve("train");
    in.validation = resolve("validation");
    in.test = resolve("test");
    if (j.contains("initial_model") && !j.at("initial_model").is_null()) in.initial_model = resolve("initial_model");
    if (j.contains("gold") && !j.at("gold").is_null()) in.gold = resolve("gold");
    in.flip_rate = j.value("flip_rate", in.flip_rate);
    in.annotator_seed = j.value("annotator_seed", in.annotator_seed);
    return in;
}

nlohmann::json SessionInputs::to_json() const {
    nlohmann::json j = {{"sentences", sentences.string()},
                        {"train", train.string()},
                        {"validation", validation.string()},
                        {"test", test.string()},
                        {"flip_rate", flip_rate},
                        {"annotator_seed", annotator_seed}};
    j["initial_model"] = initial_model ? nlohmann::json(initial_model->string()) : nlohmann::json();
    j["gold"] = gold ? nlohmann::json(gold->string()) : nlohmann::json();
    return j;
}

namespace {

struct Loaded {
    std::unique_ptr<al::SentenceStore> store;
    std::vector<al::LabeledItem> train;
    al::EvalSets eval;
    std::vector<std::string> pool;
};

Loaded load_inputs(const SessionInputs& in, LabelSpace space, const classifier::Backend& backend) {
    Loaded out;
    out.store = std::make_unique<al::SentenceStore>(backend);
    std::set<std::string> split_ids;
    auto items = [&](const fs::path& p) {
        std::vector<al::LabeledItem> v;
        for (const auto& r : bootstrap::read_labeled(p)) {
            if (!split_ids.insert(r.sentence_id).second) {
                throw Error("sentence '" + r.sentence_id + "' appears in more than one split");
            }
            if (!out.store->contains(r.sentence_id)) out.store->add(r.sentence_id, r.text);
            v.push_back({r.sentence_id, r.labels.space(space)});
        }
        return v;
    };
    out.train = items(in.train);
    out.eval.validation = items(in.validation);
    out.eval.test = items(in.test);
    io::for_each_jsonl(in.sentences, [&](std::size_t line, const nlohmann::json& j) {
        if (!j.contains("sentence_id") || !j.contains("text")) {
            throw Error(in.sentences.string() + " line " + std::to_string(line) + ": needs sentence_id and text");
        }
        const auto id = j.at("sentence_id").get<std::string>();
        if (split_ids.count(id)) return;
        out.store->add(id, j.at("text").get<std::string>());
        out.pool.push_back(id);
    });
    return out;
}

}  // namespace

Session create_session(const al::ALConfig& config, const SessionInputs& inputs, const classifier::Backend& backend) {
    auto loaded = load_inputs(inputs, config.space, backend);
    std::optional<classifier::ModelSnapshot> initial;
    if (inputs.initial_model) initial = classifier::ModelSnapshot::load(*inputs.initial_model);
    Session s;
    s.state = al::initialize(config, *loaded.store, std::move(loaded.train), std::move(loaded.pool), loaded.eval,
                             std::move(initial));
    s.state.inputs = inputs.to_json();
    s.store = std::move(loaded.store);
    s.eval = std::move(loaded.eval);
    return s;
}

Session open_session(const fs::path& dir, const classifier::Backend& backend) {
    Session s;
    s.state = al::load_checkpoint(dir);
    const auto inputs = SessionInputs::from_json(s.state.inputs, dir);
    auto loaded = load_inputs(inputs, s.state.config.space, backend);
    // The pool in the state is authoritative; the store only has to cover it.
    for (const auto& id : s.state.unlabeled) loaded.store->features(id);
    for (const auto& it : s.state.labeled) loaded.store->features(it.sentence_id);
    s.store = std::move(loaded.store);
    s.eval = std::move(loaded.eval);
    return s;
}

std::map<std::string, MultiHot> read_gold(const fs::path& path, LabelSpace space) {
    std::map<std::string, MultiHot> gold;
    for (const auto& r : bootstrap::read_labeled(path)) gold[r.sentence_id] = r.labels.space(space);
    return gold;
}

std::vector<geo::ClassifiedSentence> classify_sentences(std::span<const textprep::SentenceRecord> sentences,
                                                        const classifier::ModelSnapshot& restrictions,
                                                        const classifier::ModelSnapshot& topics,
                                                        const classifier::Backend& backend, double threshold) {
    if (restrictions.space != LabelSpace::restrictions) throw Error("restriction model has the wrong label space");
    if (topics.space != LabelSpace::topics) throw Error("topic model has the wrong label space");
    std::vector<geo::ClassifiedSentence> out;
    for (const auto& s : sentences) {
        const auto x = backend.featurize(s.text);
        const auto pr = classifier::predict_one(restrictions, x);
        const auto topic_set = classifier::decide(classifier::predict_one(topics, x), threshold);
        for (std::size_t r = 0; r < pr.size(); ++r) {
            if (pr[r] < threshold) continue;
            geo::ClassifiedSentence c;
            c.sentence_id = s.sentence_id;
            c.doc_id = s.doc_id;
            c.restriction_type = r == 0 ? geo::RestrictionType::prohibition : geo::RestrictionType::requirement;
            c.topics = topic_set;
            c.confidence = pr[r];
            c.text = s.text;
            out.push_back(std::move(c));
        }
    }
    return out;
}

}  // namespace landreuse::project
