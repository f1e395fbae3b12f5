#include "landreuse/active_learning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "landreuse/error.hpp"
#include "landreuse/io.hpp"

namespace landreuse::al {

namespace fs = std::filesystem;

std::string_view to_string(Strategy s) { return s == Strategy::uncertainty ? "uncertainty" : "random"; }

std::string_view to_string(Aggregation a) {
    switch (a) {
        case Aggregation::mean: return "mean";
        case Aggregation::max: return "max";
        case Aggregation::sum: return "sum";
    }
    return "mean";
}

Strategy parse_strategy(std::string_view name) {
    if (name == "uncertainty") return Strategy::uncertainty;
    if (name == "random") return Strategy::random;
    throw Error("unknown strategy '" + std::string(name) + "' (expected uncertainty or random)");
}

Aggregation parse_aggregation(std::string_view name) {
    if (name == "mean") return Aggregation::mean;
    if (name == "max") return Aggregation::max;
    if (name == "sum") return Aggregation::sum;
    throw Error("unknown aggregation '" + std::string(name) + "' (expected mean, max or sum)");
}

void ALConfig::check() const {
    if (batch_size < 1) throw Error("batch_size must be >= 1");
    if (subsample_size < batch_size) throw Error("subsample_size must be >= batch_size");
    if (iterations < 0) throw Error("iterations must be >= 0");
    if (!(threshold > 0.0 && threshold < 1.0)) throw Error("threshold must lie in (0,1)");
    train.check();
}

ALConfig ALConfig::from_json(const nlohmann::json& j) {
    ALConfig c;
    c.batch_size = j.value("batch_size", c.batch_size);
    c.iterations = j.value("iterations", c.iterations);
    c.subsample_size = j.value("subsample_size", c.subsample_size);
    c.seed = j.value("seed", c.seed);
    if (j.contains("space")) c.space = parse_label_space(j.at("space").get<std::string>());
    if (j.contains("strategy")) c.strategy = parse_strategy(j.at("strategy").get<std::string>());
    if (j.contains("aggregation")) c.aggregation = parse_aggregation(j.at("aggregation").get<std::string>());
    c.threshold = j.value("threshold", c.threshold);
    if (j.contains("train")) c.train = classifier::TrainConfig::from_json(j.at("train"));
    c.check();
    return c;
}

nlohmann::json ALConfig::to_json() const {
    return {{"batch_size", batch_size},
            {"iterations", iterations},
            {"subsample_size", subsample_size},
            {"seed", seed},
            {"space", to_string(space)},
            {"strategy", to_string(strategy)},
            {"aggregation", to_string(aggregation)},
            {"threshold", threshold},
            {"train", train.to_json()}};
}

void SentenceStore::add(const std::string& id, const std::string& text) {
    if (index_.count(id)) throw Conflict("duplicate sentence id '" + id + "'");
    features_.push_back(backend_->featurize(text));
    index_.emplace(id, texts_.size());
    texts_.push_back(text);
}

std::size_t SentenceStore::at(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw NotFound("unknown sentence id '" + id + "'");
    return it->second;
}

const std::string& SentenceStore::text(const std::string& id) const { return texts_[at(id)]; }

const classifier::FeatureVector& SentenceStore::features(const std::string& id) const { return features_[at(id)]; }

std::vector<std::string> QueryBatch::ids() const {
    std::vector<std::string> out;
    out.reserve(items.size());
    for (const auto& c : items) out.push_back(c.sentence_id);
    return out;
}

nlohmann::json QueryBatch::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : items) {
        arr.push_back({{"sentence_id", c.sentence_id}, {"prediction", c.prediction}, {"score", c.score}});
    }
    return {{"iteration", iteration}, {"items", arr}};
}

QueryBatch QueryBatch::from_json(const nlohmann::json& j) {
    QueryBatch b;
    b.iteration = j.at("iteration").get<int>();
    for (const auto& it : j.at("items")) {
        b.items.push_back({it.at("sentence_id").get<std::string>(), it.at("prediction").get<classifier::Prediction>(),
                           it.at("score").get<double>()});
    }
    return b;
}

nlohmann::json HistoryRecord::to_json(LabelSpace space) const {
    nlohmann::json labels_json = nlohmann::json::array();
    for (const auto& l : labels) labels_json.push_back(names_to_json(space, l));
    nlohmann::json j = {{"iteration", iteration},     {"batch", batch},         {"labels", labels_json},
                        {"scores", scores},           {"model_version", model_version},
                        {"labeled", labeled},         {"unlabeled", unlabeled}};
    if (test) {
        nlohmann::json per = nlohmann::json::object();
        for (const auto& s : test->labels) per[s.label] = s.f1;
        j["test"] = {{"micro_f1", test->micro_f1}, {"macro_f1", test->macro_f1}, {"f1", per}};
    }
    return j;
}

std::vector<std::string> subsample_pool(std::span<const std::string> unlabeled, std::size_t n, Rng& rng) {
    if (n >= unlabeled.size()) return {unlabeled.begin(), unlabeled.end()};
    auto picks = rng.sample_indices(unlabeled.size(), n);
    std::sort(picks.begin(), picks.end());
    std::vector<std::string> out;
    out.reserve(picks.size());
    for (auto i : picks) out.push_back(unlabeled[i]);
    return out;
}

double uncertainty_score(const classifier::Prediction& prediction, Aggregation aggregation) {
    if (prediction.empty()) return 0.0;
    double sum = 0.0, max = 0.0;
    for (double p : prediction) {
        if (!(p >= 0.0 && p <= 1.0)) throw Error("probability outside [0,1]");
        double h = 0.0;
        if (p > 0.0 && p < 1.0) h = -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
        sum += h;
        max = std::max(max, h);
    }
    switch (aggregation) {
        case Aggregation::mean: return sum / static_cast<double>(prediction.size());
        case Aggregation::max: return max;
        case Aggregation::sum: return sum;
    }
    return sum;
}

QueryBatch balanced_select(std::span<const Candidate> candidates, std::size_t k, double threshold) {
    if (k < 1) throw Error("batch size must be >= 1");
    // Candidate positions by descending score; stable so ties keep input order.
    std::vector<std::size_t> by_score(candidates.size());
    std::iota(by_score.begin(), by_score.end(), 0);
    std::stable_sort(by_score.begin(), by_score.end(),
                     [&](std::size_t a, std::size_t b) { return candidates[a].score > candidates[b].score; });

    std::size_t labels = 0;
    for (const auto& c : candidates) labels = std::max(labels, c.prediction.size());
    std::vector<std::vector<std::size_t>> buckets(labels);
    for (std::size_t pos : by_score) {
        const auto& p = candidates[pos].prediction;
        for (std::size_t l = 0; l < p.size(); ++l) {
            if (p[l] >= threshold) buckets[l].push_back(pos);
        }
    }

    std::vector<bool> chosen(candidates.size(), false);
    std::vector<std::size_t> cursor(labels, 0);
    QueryBatch batch;
    auto take = [&](std::size_t pos) {
        chosen[pos] = true;
        batch.items.push_back(candidates[pos]);
    };
    bool progress = true;
    while (batch.items.size() < k && progress) {
        progress = false;
        for (std::size_t l = 0; l < labels && batch.items.size() < k; ++l) {
            auto& b = buckets[l];
            while (cursor[l] < b.size() && chosen[b[cursor[l]]]) ++cursor[l];
            if (cursor[l] < b.size()) {
                take(b[cursor[l]++]);
                progress = true;
            }
        }
    }
    for (std::size_t pos : by_score) {
        if (batch.items.size() >= k) break;
        if (!chosen[pos]) take(pos);
    }
    return batch;
}

namespace {

std::vector<classifier::Example> examples_of(const SentenceStore& store, std::span<const LabeledItem> items) {
    std::vector<classifier::Example> out;
    out.reserve(items.size());
    for (const auto& it : items) out.push_back({store.features(it.sentence_id), it.labels});
    return out;
}

void check_items(std::span<const LabeledItem> items, LabelSpace space, const char* what) {
    for (const auto& it : items) {
        if (it.labels.size() != label_count(space)) {
            throw Error(std::string(what) + " item '" + it.sentence_id + "' has the wrong label width");
        }
    }
}

}  // namespace

metrics::EvalReport evaluate(const classifier::ModelSnapshot& model, const SentenceStore& store,
                             std::span<const LabeledItem> items, double threshold) {
    std::vector<MultiHot> gold, pred;
    gold.reserve(items.size());
    pred.reserve(items.size());
    for (const auto& it : items) {
        gold.push_back(it.labels);
        pred.push_back(classifier::decide(classifier::predict_one(model, store.features(it.sentence_id)), threshold));
    }
    const auto names = label_names(model.space);
    return metrics::prf1(gold, pred, names);
}

ALState initialize(const ALConfig& config, const SentenceStore& store, std::vector<LabeledItem> train,
                   std::vector<std::string> unlabeled, const EvalSets& eval,
                   std::optional<classifier::ModelSnapshot> initial) {
    config.check();
    check_items(train, config.space, "train");
    check_items(eval.validation, config.space, "validation");
    check_items(eval.test, config.space, "test");
    if (train.empty()) throw Error("the initial training set is empty");

    std::sort(unlabeled.begin(), unlabeled.end());
    if (std::adjacent_find(unlabeled.begin(), unlabeled.end()) != unlabeled.end()) {
        throw Error("duplicate ids in the unlabeled pool");
    }
    for (const auto& it : train) {
        if (std::binary_search(unlabeled.begin(), unlabeled.end(), it.sentence_id)) {
            throw Error("sentence '" + it.sentence_id + "' is both labeled and unlabeled");
        }
    }
    for (const auto& id : unlabeled) store.features(id);

    ALState s;
    s.config = config;
    s.labeled = std::move(train);
    s.unlabeled = std::move(unlabeled);
    RetrainOutcome outcome;
    if (initial) {
        if (initial->space != config.space) throw Error("initial model is for a different label space");
        if (initial->backend != store.backend().id()) throw Error("initial model comes from a different backend");
        outcome.model = std::move(*initial);
        if (!eval.test.empty()) outcome.test = evaluate(outcome.model, store, eval.test, config.threshold);
    } else {
        s.model = store.backend().initial(config.space);
        outcome = compute_retrain(s, store, eval);
    }
    s.model = std::move(outcome.model);
    HistoryRecord h;
    h.iteration = 0;
    h.model_version = s.model.version;
    h.labeled = s.labeled.size();
    h.unlabeled = s.unlabeled.size();
    h.test = std::move(outcome.test);
    s.history.push_back(std::move(h));
    return s;
}

QueryBatch select_batch(const ALState& state, const SentenceStore& store) {
    const auto& cfg = state.config;
    Rng rng({cfg.seed, static_cast<std::uint64_t>(state.iteration)});
    QueryBatch batch;
    batch.iteration = state.iteration + 1;
    if (state.unlabeled.empty()) return batch;

    std::vector<std::string> ids;
    if (cfg.strategy == Strategy::random) {
        ids = subsample_pool(state.unlabeled, std::min(cfg.batch_size, state.unlabeled.size()), rng);
    } else {
        ids = subsample_pool(state.unlabeled, cfg.subsample_size, rng);
    }
    std::vector<classifier::FeatureVector> xs;
    xs.reserve(ids.size());
    for (const auto& id : ids) xs.push_back(store.features(id));
    const auto preds = store.backend().predict(state.model, xs);

    std::vector<Candidate> cands;
    cands.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        cands.push_back({ids[i], preds[i], uncertainty_score(preds[i], cfg.aggregation)});
    }
    if (cfg.strategy == Strategy::random) {
        batch.items = std::move(cands);
    } else {
        batch.items = balanced_select(cands, cfg.batch_size, cfg.threshold).items;
    }
    return batch;
}

void commit_batch(ALState& state, const QueryBatch& batch, std::span<const MultiHot> labels) {
    if (state.needs_retrain) throw RetryLater("the previous batch has not been trained on yet");
    if (batch.iteration != state.iteration + 1) {
        throw Conflict("batch belongs to round " + std::to_string(batch.iteration) + ", current round is " +
                       std::to_string(state.iteration + 1));
    }
    if (labels.size() != batch.items.size()) throw Error("labels do not cover the batch");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < batch.items.size(); ++i) {
        const auto& id = batch.items[i].sentence_id;
        if (!seen.insert(id).second) throw Error("sentence '" + id + "' appears twice in the batch");
        if (!std::binary_search(state.unlabeled.begin(), state.unlabeled.end(), id)) {
            throw Error("sentence '" + id + "' is not in the unlabeled pool");
        }
        if (labels[i].size() != label_count(state.config.space)) {
            throw Error("labels for '" + id + "' have the wrong width");
        }
        for (auto v : labels[i]) {
            if (v > 1) throw Error("labels for '" + id + "' are not binary");
        }
    }

    HistoryRecord h;
    h.iteration = batch.iteration;
    for (std::size_t i = 0; i < batch.items.size(); ++i) {
        const auto& id = batch.items[i].sentence_id;
        state.labeled.push_back({id, labels[i]});
        state.unlabeled.erase(std::lower_bound(state.unlabeled.begin(), state.unlabeled.end(), id));
        h.batch.push_back(id);
        h.labels.push_back(labels[i]);
        h.scores.push_back(batch.items[i].score);
    }
    h.labeled = state.labeled.size();
    h.unlabeled = state.unlabeled.size();
    state.history.push_back(std::move(h));
    state.iteration = batch.iteration;
    state.pending.reset();
    state.needs_retrain = true;
}

RetrainOutcome compute_retrain(const ALState& state, const SentenceStore& store, const EvalSets& eval) {
    const auto train = examples_of(store, state.labeled);
    const auto val = examples_of(store, eval.validation);
    RetrainOutcome out;
    out.model = store.backend().train(state.model, train, val, state.config.train).model;
    if (!eval.test.empty()) out.test = evaluate(out.model, store, eval.test, state.config.threshold);
    return out;
}

void apply_retrain(ALState& state, RetrainOutcome outcome) {
    if (outcome.model.version <= state.model.version) throw Conflict("retrained model is not newer than the current one");
    state.model = std::move(outcome.model);
    if (!state.history.empty() && state.history.back().iteration == state.iteration) {
        state.history.back().model_version = state.model.version;
        state.history.back().test = std::move(outcome.test);
    }
    state.needs_retrain = false;
}

void retrain(ALState& state, const SentenceStore& store, const EvalSets& eval) {
    apply_retrain(state, compute_retrain(state, store, eval));
}

OracleAnnotator::OracleAnnotator(std::map<std::string, MultiHot> gold, double flip_rate, std::uint64_t seed)
    : gold_(std::move(gold)), flip_rate_(flip_rate), seed_(seed) {
    if (!(flip_rate >= 0.0 && flip_rate <= 1.0)) throw Error("flip rate must lie in [0,1]");
}

MultiHot OracleAnnotator::label(const std::string& sentence_id) const {
    auto it = gold_.find(sentence_id);
    if (it == gold_.end()) throw NotFound("no gold labels for sentence '" + sentence_id + "'");
    MultiHot out = it->second;
    if (flip_rate_ > 0.0) {
        Rng rng({seed_, io::fnv1a(sentence_id)});
        for (auto& v : out) {
            if (rng.bernoulli(flip_rate_)) v = v ? 0 : 1;
        }
    }
    return out;
}

std::optional<std::vector<MultiHot>> OracleAnnotator::annotate(const QueryBatch& batch, const SentenceStore&,
                                                               LabelSpace space) {
    std::vector<MultiHot> out;
    for (const auto& c : batch.items) {
        out.push_back(label(c.sentence_id));
        if (out.back().size() != label_count(space)) throw Error("gold labels have the wrong width for " + std::string(to_string(space)));
    }
    return out;
}

bool run_loop(ALState& state, const SentenceStore& store, const EvalSets& eval, Annotator& annotator,
              const CheckpointFn& checkpoint) {
    auto save = [&] {
        if (checkpoint) checkpoint(state);
    };
    if (state.needs_retrain) {
        retrain(state, store, eval);
        save();
    }
    while (state.iteration < state.config.iterations && !state.unlabeled.empty()) {
        if (!state.pending) {
            state.pending = select_batch(state, store);
            save();
        }
        auto labels = annotator.annotate(*state.pending, store, state.config.space);
        if (!labels) {
            save();
            return false;
        }
        const QueryBatch batch = *state.pending;
        commit_batch(state, batch, *labels);
        save();
        retrain(state, store, eval);
        save();
    }
    return true;
}

namespace {

std::string model_file(std::uint64_t version) { return "model_v" + std::to_string(version) + ".cbor"; }

nlohmann::json items_to_json(std::span<const LabeledItem> items, LabelSpace space) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& it : items) arr.push_back({{"sentence_id", it.sentence_id}, {"labels", names_to_json(space, it.labels)}});
    return arr;
}

}  // namespace

void write_history(const ALState& state, const fs::path& path) {
    std::vector<nlohmann::json> rows;
    rows.reserve(state.history.size());
    for (const auto& h : state.history) rows.push_back(h.to_json(state.config.space));
    io::write_jsonl_atomic(path, rows);
}

void save_checkpoint(const ALState& state, const fs::path& dir) {
    fs::create_directories(dir);
    const auto model_name = model_file(state.model.version);
    if (!fs::exists(dir / model_name)) state.model.save(dir / model_name);
    write_history(state, dir / "history.jsonl");

    nlohmann::json hist = nlohmann::json::array();
    for (const auto& h : state.history) {
        nlohmann::json r = h.to_json(state.config.space);
        if (h.test) r["test_report"] = h.test->to_json();
        hist.push_back(std::move(r));
    }
    nlohmann::json j = {{"format", "landreuse-al-state"},
                        {"config", state.config.to_json()},
                        {"iteration", state.iteration},
                        {"model", model_name},
                        {"model_version", state.model.version},
                        {"needs_retrain", state.needs_retrain},
                        {"labeled", items_to_json(state.labeled, state.config.space)},
                        {"unlabeled", state.unlabeled},
                        {"history", hist},
                        {"inputs", state.inputs}};
    if (state.pending) j["pending"] = state.pending->to_json();
    io::write_json_atomic(dir / "state.json", j, -1);
}

namespace {

metrics::EvalReport report_from_json(const nlohmann::json& j) {
    metrics::EvalReport r;
    for (const auto& s : j.at("labels")) {
        metrics::LabelScore ls;
        ls.label = s.at("label").get<std::string>();
        ls.precision = s.at("precision").get<double>();
        ls.recall = s.at("recall").get<double>();
        ls.f1 = s.at("f1").get<double>();
        ls.support = s.at("support").get<std::size_t>();
        ls.tp = s.at("tp").get<std::size_t>();
        ls.fp = s.at("fp").get<std::size_t>();
        ls.fn = s.at("fn").get<std::size_t>();
        r.labels.push_back(ls);
    }
    r.micro_precision = j.at("micro_precision").get<double>();
    r.micro_recall = j.at("micro_recall").get<double>();
    r.micro_f1 = j.at("micro_f1").get<double>();
    r.macro_f1 = j.at("macro_f1").get<double>();
    r.examples = j.at("examples").get<std::size_t>();
    return r;
}

}  // namespace

ALState load_checkpoint(const fs::path& dir) {
    const auto j = io::read_json(dir / "state.json");
    if (j.value("format", std::string{}) != "landreuse-al-state") throw Error((dir / "state.json").string() + " is not an AL state file");
    ALState s;
    s.config = ALConfig::from_json(j.at("config"));
    const auto space = s.config.space;
    s.iteration = j.at("iteration").get<int>();
    s.model = classifier::ModelSnapshot::load(dir / j.at("model").get<std::string>());
    if (s.model.version != j.at("model_version").get<std::uint64_t>()) throw Error("model file does not match the state");
    if (s.model.space != space) throw Error("model label space does not match the state");
    s.needs_retrain = j.at("needs_retrain").get<bool>();
    for (const auto& it : j.at("labeled")) {
        s.labeled.push_back({it.at("sentence_id").get<std::string>(), names_from_json(space, it.at("labels"))});
    }
    s.unlabeled = j.at("unlabeled").get<std::vector<std::string>>();
    if (!std::is_sorted(s.unlabeled.begin(), s.unlabeled.end())) throw Error("unlabeled ids in the state are not sorted");
    for (const auto& r : j.at("history")) {
        HistoryRecord h;
        h.iteration = r.at("iteration").get<int>();
        h.batch = r.at("batch").get<std::vector<std::string>>();
        for (const auto& l : r.at("labels")) h.labels.push_back(names_from_json(space, l));
        h.scores = r.at("scores").get<std::vector<double>>();
        h.model_version = r.at("model_version").get<std::uint64_t>();
        h.labeled = r.at("labeled").get<std::size_t>();
        h.unlabeled = r.at("unlabeled").get<std::size_t>();
        if (r.contains("test_report")) h.test = report_from_json(r.at("test_report"));
        s.history.push_back(std::move(h));
    }
    if (j.contains("pending")) s.pending = QueryBatch::from_json(j.at("pending"));
    s.inputs = j.value("inputs", nlohmann::json::object());
    return s;
}

}  // namespace landreuse::al
