#include <doctest.h>

#include <algorithm>
#include <set>

#include "landreuse/active_learning.hpp"
#include "landreuse/error.hpp"
#include "landreuse/io.hpp"
#include "landreuse/synth.hpp"
#include "test_util.hpp"

using namespace landreuse;
using namespace landreuse::al;

namespace {

std::vector<std::string> ids(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "s%05zu", i);
        out.push_back(buf);
    }
    return out;
}

Candidate cand(std::string id, classifier::Prediction p) {
    Candidate c{std::move(id), std::move(p), 0.0};
    c.score = uncertainty_score(c.prediction);
    return c;
}

// A small synthetic AL setup over the topics space.
struct Setup {
    classifier::LinearBackend backend{classifier::FeaturizerConfig{1u << 12}};
    SentenceStore store{backend};
    std::vector<LabeledItem> train;
    std::vector<std::string> pool;
    EvalSets eval;
    std::map<std::string, MultiHot> gold;

    explicit Setup(std::size_t size = 1200, std::uint64_t seed = 5) {
        bootstrap::SynthConfig sc;
        sc.size = size;
        sc.seed = seed;
        const auto corpus = bootstrap::generate_synthetic_corpus(sc);
        for (std::size_t i = 0; i < corpus.sentences.size(); ++i) {
            const auto& s = corpus.sentences[i];
            store.add(s.sentence_id, s.text);
            gold[s.sentence_id] = s.gold.topics;
            LabeledItem item{s.sentence_id, s.gold.topics};
            if (i < 100) {
                train.push_back(item);
            } else if (i < 200) {
                eval.validation.push_back(item);
            } else if (i < 400) {
                eval.test.push_back(item);
            } else {
                pool.push_back(s.sentence_id);
            }
        }
        std::sort(pool.begin(), pool.end());
    }

    ALConfig config(int iterations = 3) const {
        ALConfig c;
        c.iterations = iterations;
        c.seed = 11;
        c.subsample_size = 200;
        c.train.max_epochs = 5;
        return c;
    }
};

class ScriptedAnnotator final : public Annotator {
public:
    explicit ScriptedAnnotator(std::size_t stop_after, Annotator* inner = nullptr) : stop_after_(stop_after), inner_(inner) {}
    std::optional<std::vector<MultiHot>> annotate(const QueryBatch& batch, const SentenceStore& store,
                                                  LabelSpace space) override {
        if (calls_++ >= stop_after_) return std::nullopt;
        if (inner_) return inner_->annotate(batch, store, space);
        return std::vector<MultiHot>(batch.items.size(), MultiHot(label_count(space), 0));
    }

private:
    std::size_t stop_after_;
    Annotator* inner_;
    std::size_t calls_ = 0;
};

void check_pool_invariants(const ALState& s, std::size_t total) {
    std::set<std::string> lab;
    for (const auto& it : s.labeled) CHECK(lab.insert(it.sentence_id).second);
    for (const auto& id : s.unlabeled) CHECK(lab.count(id) == 0);
    CHECK(std::is_sorted(s.unlabeled.begin(), s.unlabeled.end()));
    CHECK(s.labeled.size() + s.unlabeled.size() == total);
}

}  // namespace

TEST_CASE("pool subsampling") {
    const auto small = ids(10);
    Rng r1(1);
    CHECK(subsample_pool(small, 4096, r1) == small);

    const auto big = ids(5000);
    Rng a(3), b(3), c(4);
    const auto sa = subsample_pool(big, 4096, a);
    CHECK(sa.size() == 4096);
    CHECK(std::set<std::string>(sa.begin(), sa.end()).size() == 4096);
    CHECK(std::is_sorted(sa.begin(), sa.end()));
    CHECK(std::includes(big.begin(), big.end(), sa.begin(), sa.end()));
    CHECK(subsample_pool(big, 4096, b) == sa);
    CHECK(subsample_pool(big, 4096, c) != sa);
}

TEST_CASE("uncertainty score") {
    CHECK(uncertainty_score({0.5, 0.5, 0.5}) == 1.0);
    CHECK(uncertainty_score({0.0, 1.0, 1.0}) == 0.0);
    CHECK(uncertainty_score({1.0, 0.5}) == 0.5);
    CHECK(uncertainty_score({1.0, 0.5}, Aggregation::max) == 1.0);
    CHECK(uncertainty_score({0.5, 0.5}, Aggregation::sum) == 2.0);
    CHECK(uncertainty_score({0.25}) == doctest::Approx(0.8112781244591328).epsilon(1e-15));
    CHECK(uncertainty_score({0.3}) == uncertainty_score({0.7}));
    CHECK_THROWS_AS(uncertainty_score({1.2}), Error);
}

TEST_CASE("balanced selection covers every predicted label first") {
    std::vector<Candidate> cands;
    // Three negatives with the highest uncertainty, then one candidate per label.
    for (int i = 0; i < 3; ++i) cands.push_back(cand("u" + std::to_string(i), {0.45, 0.45, 0.45, 0.45, 0.45, 0.45, 0.45}));
    for (std::size_t l = 0; l < 7; ++l) {
        for (int copy = 0; copy < 2; ++copy) {
            classifier::Prediction p(7, 0.02);
            p[l] = copy == 0 ? 0.6 : 0.9;
            cands.push_back(cand("l" + std::to_string(l) + "_" + std::to_string(copy), p));
        }
    }
    const auto batch = balanced_select(cands, 10);
    REQUIRE(batch.items.size() == 10);
    std::set<std::size_t> covered;
    for (std::size_t i = 0; i < 7; ++i) {
        const auto& p = batch.items[i].prediction;
        for (std::size_t l = 0; l < 7; ++l)
            if (p[l] >= 0.5) covered.insert(l);
        // The more uncertain copy of each label comes first.
        CHECK(batch.items[i].sentence_id == "l" + std::to_string(i) + "_0");
    }
    CHECK(covered.size() == 7);
    // Round two of the buckets continues before the fill.
    CHECK(batch.items[7].sentence_id == "l0_1");
}

TEST_CASE("balanced selection without predicted labels is top k by uncertainty") {
    std::vector<Candidate> cands;
    Rng rng(9);
    for (int i = 0; i < 50; ++i) cands.push_back(cand("c" + std::to_string(i), {0.49 * rng.uniform(), 0.49 * rng.uniform()}));
    auto sorted = cands;
    std::stable_sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.score > b.score; });
    const auto batch = balanced_select(cands, 10);
    REQUIRE(batch.items.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) CHECK(batch.items[i].sentence_id == sorted[i].sentence_id);

    std::vector<Candidate> few(cands.begin(), cands.begin() + 4);
    CHECK(balanced_select(few, 10).items.size() == 4);
    CHECK(balanced_select({}, 10).items.empty());
    CHECK_THROWS_AS(balanced_select(few, 0), Error);
}

TEST_CASE("oracle annotator") {
    std::map<std::string, MultiHot> gold = {{"a", {1, 0, 1}}, {"b", {0, 0, 0}}};
    QueryBatch batch{1, {{"a", {}, 0}, {"b", {}, 0}}};
    classifier::LinearBackend backend;
    SentenceStore store(backend);
    CHECK(OracleAnnotator(gold).label("a") == MultiHot{1, 0, 1});
    CHECK(OracleAnnotator(gold, 1.0).label("a") == MultiHot{0, 1, 0});
    const OracleAnnotator half(gold, 0.5, 42);
    CHECK(half.label("a") == OracleAnnotator(gold, 0.5, 42).label("a"));
    CHECK_THROWS_AS(OracleAnnotator(gold).label("zzz"), NotFound);
    CHECK_THROWS_AS(OracleAnnotator(gold, 1.5), Error);

    // Over many ids the flip frequency approaches the rate.
    std::map<std::string, MultiHot> many;
    for (const auto& id : ids(2000)) many[id] = MultiHot(7, 0);
    const OracleAnnotator noisy(many, 0.2, 3);
    std::size_t flips = 0;
    for (const auto& [id, g] : many)
        for (auto v : noisy.label(id)) flips += v;
    CHECK(static_cast<double>(flips) / 14000.0 == doctest::Approx(0.2).epsilon(0.1));
}

TEST_CASE("config validation") {
    ALConfig c;
    CHECK_NOTHROW(c.check());
    c.batch_size = 0;
    CHECK_THROWS_AS(c.check(), Error);
    c = {};
    c.subsample_size = 5;
    CHECK_THROWS_AS(c.check(), Error);
    c = {};
    c.strategy = Strategy::random;
    c.aggregation = Aggregation::max;
    c.space = LabelSpace::restrictions;
    const auto back = ALConfig::from_json(c.to_json());
    CHECK(back.strategy == Strategy::random);
    CHECK(back.aggregation == Aggregation::max);
    CHECK(back.space == LabelSpace::restrictions);
}

TEST_CASE("zero iterations leave the initial model untouched") {
    Setup s;
    auto cfg = s.config(0);
    auto initial = s.backend.initial(LabelSpace::topics);
    initial.version = 4;
    auto state = initialize(cfg, s.store, s.train, s.pool, s.eval, initial);
    OracleAnnotator oracle(s.gold);
    CHECK(run_loop(state, s.store, s.eval, oracle));
    CHECK(state.model == initial);
    CHECK(state.iteration == 0);
    REQUIRE(state.history.size() == 1);
    CHECK(state.history[0].test.has_value());
}

TEST_CASE("empty annotations still move sentences out of the pool") {
    Setup s;
    auto state = initialize(s.config(2), s.store, s.train, s.pool, s.eval);
    ScriptedAnnotator none(100);
    CHECK(run_loop(state, s.store, s.eval, none));
    CHECK(state.iteration == 2);
    CHECK(state.labeled.size() == s.train.size() + 20);
    for (std::size_t i = s.train.size(); i < state.labeled.size(); ++i) {
        CHECK(std::all_of(state.labeled[i].labels.begin(), state.labeled[i].labels.end(), [](auto v) { return v == 0; }));
    }
    check_pool_invariants(state, s.train.size() + s.pool.size());
}

TEST_CASE("loop bookkeeping") {
    Setup s;
    auto state = initialize(s.config(4), s.store, s.train, s.pool, s.eval);
    OracleAnnotator oracle(s.gold);
    std::size_t checkpoints = 0;
    CHECK(run_loop(state, s.store, s.eval, oracle, [&](const ALState& st) {
        ++checkpoints;
        check_pool_invariants(st, s.train.size() + s.pool.size());
    }));
    CHECK(checkpoints > 0);
    CHECK(state.iteration == 4);
    REQUIRE(state.history.size() == 5);
    for (std::size_t i = 0; i < state.history.size(); ++i) {
        const auto& h = state.history[i];
        CHECK(h.iteration == static_cast<int>(i));
        CHECK(h.test.has_value());
        if (i > 0) {
            CHECK(h.batch.size() == 10);
            CHECK(h.labels.size() == 10);
            CHECK(h.model_version > state.history[i - 1].model_version);
            for (std::size_t k = 0; k < h.batch.size(); ++k) CHECK(h.labels[k] == s.gold.at(h.batch[k]));
        }
    }
    CHECK(state.model.version == state.history.back().model_version);
    CHECK_FALSE(state.needs_retrain);
    CHECK_FALSE(state.pending.has_value());
}

TEST_CASE("commit preconditions") {
    Setup s;
    auto state = initialize(s.config(5), s.store, s.train, s.pool, s.eval);
    const auto batch = select_batch(state, s.store);
    CHECK(batch.iteration == 1);
    CHECK(batch.items.size() == 10);
    CHECK(select_batch(state, s.store).ids() == batch.ids());

    const auto before = state.unlabeled;
    std::vector<MultiHot> short_labels(9, MultiHot(7, 0));
    CHECK_THROWS_AS(commit_batch(state, batch, short_labels), Error);
    auto foreign = batch;
    foreign.items[0].sentence_id = s.train[0].sentence_id;
    std::vector<MultiHot> labels(10, MultiHot(7, 0));
    CHECK_THROWS_AS(commit_batch(state, foreign, labels), Error);
    auto wide = labels;
    wide[2] = MultiHot(2, 0);
    CHECK_THROWS_AS(commit_batch(state, batch, wide), Error);
    CHECK(state.unlabeled == before);
    CHECK(state.iteration == 0);

    commit_batch(state, batch, labels);
    CHECK(state.iteration == 1);
    CHECK(state.needs_retrain);
    CHECK_THROWS_AS(commit_batch(state, batch, labels), RetryLater);
    retrain(state, s.store, s.eval);
    CHECK_THROWS_AS(commit_batch(state, batch, labels), Conflict);
}

TEST_CASE("random strategy draws straight from the pool") {
    Setup s;
    auto cfg = s.config(2);
    cfg.strategy = Strategy::random;
    auto state = initialize(cfg, s.store, s.train, s.pool, s.eval);
    const auto batch = select_batch(state, s.store);
    CHECK(batch.items.size() == 10);
    for (const auto& id : batch.ids()) CHECK(std::binary_search(s.pool.begin(), s.pool.end(), id));
}

TEST_CASE("an exhausted pool ends the loop early") {
    Setup s(500);
    auto cfg = s.config(50);
    cfg.batch_size = 40;
    auto state = initialize(cfg, s.store, s.train, s.pool, s.eval);
    REQUIRE(s.pool.size() == 100);
    OracleAnnotator oracle(s.gold);
    CHECK(run_loop(state, s.store, s.eval, oracle));
    CHECK(state.unlabeled.empty());
    CHECK(state.iteration == 3);
    CHECK(state.history.back().batch.size() == 20);
    CHECK(select_batch(state, s.store).items.empty());
}

TEST_CASE("checkpoint and resume reproduce an uninterrupted run") {
    Setup s;
    testutil::TempDir dir("al");
    const auto cfg = s.config(5);

    auto full = initialize(cfg, s.store, s.train, s.pool, s.eval);
    OracleAnnotator oracle(s.gold, 0.1, 7);
    REQUIRE(run_loop(full, s.store, s.eval, oracle));
    write_history(full, dir / "full.jsonl");

    auto part = initialize(cfg, s.store, s.train, s.pool, s.eval);
    ScriptedAnnotator stopper(2, &oracle);
    const auto ckpt = dir / "ckpt";
    CHECK_FALSE(run_loop(part, s.store, s.eval, stopper, [&](const ALState& st) { save_checkpoint(st, ckpt); }));
    CHECK(part.iteration == 2);
    REQUIRE(part.pending.has_value());
    const auto pending_ids = part.pending->ids();

    auto resumed = load_checkpoint(ckpt);
    CHECK(resumed.iteration == 2);
    REQUIRE(resumed.pending.has_value());
    CHECK(resumed.pending->ids() == pending_ids);
    CHECK(resumed.model == part.model);
    CHECK(resumed.unlabeled == part.unlabeled);
    REQUIRE(run_loop(resumed, s.store, s.eval, oracle, [&](const ALState& st) { save_checkpoint(st, ckpt); }));
    CHECK(resumed.iteration == 5);
    write_history(resumed, dir / "resumed.jsonl");
    CHECK(io::read_file(dir / "resumed.jsonl") == io::read_file(dir / "full.jsonl"));
    CHECK(std::filesystem::exists(ckpt / "state.json"));
    CHECK(std::filesystem::exists(ckpt / "history.jsonl"));
    CHECK(std::filesystem::exists(ckpt / ("model_v" + std::to_string(resumed.model.version) + ".cbor")));
}

TEST_CASE("a checkpoint taken between commit and retrain resumes with the retrain") {
    Setup s;
    testutil::TempDir dir("al2");
    auto state = initialize(s.config(3), s.store, s.train, s.pool, s.eval);
    const auto batch = select_batch(state, s.store);
    commit_batch(state, batch, std::vector<MultiHot>(batch.items.size(), MultiHot(7, 0)));
    save_checkpoint(state, dir.path());
    auto back = load_checkpoint(dir.path());
    CHECK(back.needs_retrain);
    ScriptedAnnotator none(100);
    CHECK(run_loop(back, s.store, s.eval, none));
    CHECK(back.iteration == 3);
    CHECK(back.history.size() == 4);
}

TEST_CASE("initialization preconditions") {
    Setup s;
    const auto cfg = s.config();
    CHECK_THROWS_AS(initialize(cfg, s.store, {}, s.pool, s.eval), Error);
    auto overlap = s.pool;
    overlap.push_back(s.train[0].sentence_id);
    std::sort(overlap.begin(), overlap.end());
    CHECK_THROWS_AS(initialize(cfg, s.store, s.train, overlap, s.eval), Error);
    auto wrong_space = s.backend.initial(LabelSpace::restrictions);
    CHECK_THROWS_AS(initialize(cfg, s.store, s.train, s.pool, s.eval, wrong_space), Error);
    CHECK_THROWS_AS(s.store.add(s.train[0].sentence_id, "Doppelt."), Conflict);
    CHECK_THROWS_AS(s.store.text("missing"), NotFound);
}
