#include <doctest.h>

#include <cmath>

#include "landreuse/classifier.hpp"
#include "landreuse/error.hpp"
#include "landreuse/metrics.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace landreuse;
using namespace landreuse::classifier;

namespace {

std::vector<MultiHot> decide_all(const ModelSnapshot& m, const std::vector<Example>& xs) {
    std::vector<MultiHot> out;
    for (const auto& e : xs) out.push_back(decide(predict_one(m, e.features)));
    return out;
}

std::vector<MultiHot> gold_of(const std::vector<Example>& xs) {
    std::vector<MultiHot> out;
    for (const auto& e : xs) out.push_back(e.labels);
    return out;
}

}  // namespace

TEST_CASE("featurizer") {
    const auto a = featurize("Das Betreten der Kippe ist verboten.");
    CHECK(a == featurize("Das Betreten der Kippe ist verboten."));
    CHECK(a == featurize("  das   betreten der KIPPE ist verboten. "));
    CHECK(a.dimension == 65536);
    double norm = 0.0;
    for (std::size_t k = 0; k < a.nnz(); ++k) {
        norm += a.values[k] * a.values[k];
        CHECK(a.indices[k] < a.dimension);
        if (k) CHECK(a.indices[k - 1] < a.indices[k]);
    }
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(a != featurize("Das Befahren der Kippe ist verboten."));
    CHECK_THROWS_AS(featurize(""), Error);
    CHECK_THROWS_AS(featurize("   "), Error);
    FeaturizerConfig small;
    small.dimension = 16;
    for (auto i : featurize("Ein Satz.", small).indices) CHECK(i < 16);
}

TEST_CASE("predictions of the zero model are one half") {
    const auto m = ModelSnapshot::zeros(LabelSpace::topics, 128);
    FeaturizerConfig fc;
    fc.dimension = 128;
    const auto p = predict_one(m, featurize("Bei Sturm ist das Betreten verboten.", fc));
    REQUIRE(p.size() == 7);
    for (double v : p) CHECK(v == 0.5);
    CHECK_THROWS_AS(predict_one(m, featurize("Bei Sturm.")), Error);
}

TEST_CASE("decision rule") {
    CHECK(decide({0.9, 0.1}) == MultiHot{1, 0});
    CHECK(decide({0.5, 0.5}) == MultiHot{1, 1});
    CHECK(decide({0.9, 0.95, 0.5}, 0.99) == MultiHot{0, 0, 0});
    CHECK_THROWS_AS(decide({0.5}, 0.0), Error);
    CHECK_THROWS_AS(decide({0.5}, 1.0), Error);
}

TEST_CASE("train config validation") {
    TrainConfig c;
    CHECK_NOTHROW(c.check());
    c.max_epochs = 0;
    CHECK_THROWS_AS(c.check(), Error);
    c = {};
    c.patience = -1;
    CHECK_THROWS_AS(c.check(), Error);
    c = {};
    c.learning_rate = 0.0;
    CHECK_THROWS_AS(c.check(), Error);
    CHECK(parse_optimizer("sgd") == Optimizer::sgd);
    CHECK_THROWS_AS(parse_optimizer("adam"), Error);

    TrainConfig d;
    d.optimizer = Optimizer::sgd;
    d.batch_size = 0;
    d.seed = 99;
    const auto back = TrainConfig::from_json(d.to_json());
    CHECK(back.optimizer == Optimizer::sgd);
    CHECK(back.batch_size == 0);
    CHECK(back.seed == 99);
}

TEST_CASE("analytic gradient matches finite differences") {
    Rng rng(2024);
    for (int trial = 0; trial < 20; ++trial) {
        const auto c = oracle::random_gradient_case(rng);
        const auto analytic = loss_gradient(c.model, c.examples);
        const auto numeric = oracle::numeric_gradient(c.model, c.examples);
        CHECK(oracle::relative_error(analytic, numeric) < 1e-6);
    }
}

TEST_CASE("separable toy data is learned exactly") {
    const auto toy = oracle::separable_toy();
    const auto warm = ModelSnapshot::zeros(LabelSpace::restrictions, 6);
    for (auto opt : {Optimizer::adagrad, Optimizer::sgd}) {
        TrainConfig c;
        c.optimizer = opt;
        c.seed = 1;
        const auto r = train(warm, toy, toy, c);
        CHECK(r.epochs_run <= 40);
        const auto report = metrics::prf1(gold_of(toy), decide_all(r.model, toy));
        CHECK(report.micro_f1 == 1.0);
        CHECK(report.macro_f1 == 1.0);
        CHECK(r.model.version == 1);
        CHECK(r.model.provenance["best_epoch"] == r.best_epoch);
    }
}

TEST_CASE("a vanishing learning rate returns the warm start") {
    const auto toy = oracle::separable_toy();
    auto warm = ModelSnapshot::zeros(LabelSpace::restrictions, 6);
    Rng rng(3);
    for (auto& w : warm.parameters) w = 0.5 + rng.uniform();
    warm.version = 7;
    for (auto opt : {Optimizer::adagrad, Optimizer::sgd}) {
        TrainConfig c;
        c.optimizer = opt;
        c.learning_rate = 1e-300;
        c.lr_scale = 1.0;
        const auto r = train(warm, toy, toy, c);
        CHECK(r.model.parameters == warm.parameters);
        CHECK(r.model.version == 8);
    }
}

TEST_CASE("rising validation loss stops within patience plus one epochs") {
    const auto toy = oracle::separable_toy();
    auto flipped = toy;
    for (auto& e : flipped)
        for (auto& y : e.labels) y = 1 - y;
    const auto warm = ModelSnapshot::zeros(LabelSpace::restrictions, 6);
    for (int patience : {0, 1, 3, 5}) {
        TrainConfig c;
        c.patience = patience;
        c.optimizer = Optimizer::sgd;
        c.batch_size = 0;
        const auto r = train(warm, toy, flipped, c);
        for (std::size_t i = 1; i < r.validation_loss.size(); ++i)
            REQUIRE(r.validation_loss[i] > r.validation_loss[i - 1]);
        CHECK(r.epochs_run <= patience + 1);
        CHECK(r.best_epoch == 0);
        CHECK(r.model.parameters == warm.parameters);
    }
}

TEST_CASE("full batch gradient descent never increases the training loss") {
    Rng rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        auto c = oracle::random_gradient_case(rng, 32);
        TrainConfig cfg;
        cfg.optimizer = Optimizer::sgd;
        cfg.batch_size = 0;
        cfg.learning_rate = 1e-4;
        cfg.lr_scale = 1000.0;
        cfg.max_epochs = 30;
        const auto r = train(c.model, c.examples, {}, cfg);
        REQUIRE(r.train_loss.size() == 30);
        double prev = loss(c.model, c.examples);
        for (double l : r.train_loss) {
            CHECK(l <= prev);
            prev = l;
        }
    }
}

TEST_CASE("training is deterministic under a seed") {
    const auto toy = oracle::separable_toy();
    const auto warm = ModelSnapshot::zeros(LabelSpace::restrictions, 6);
    TrainConfig c;
    c.seed = 5;
    c.max_epochs = 3;
    const auto a = train(warm, toy, {}, c);
    const auto b = train(warm, toy, {}, c);
    CHECK(a.model == b.model);
    c.seed = 6;
    CHECK(train(warm, toy, {}, c).model.parameters != a.model.parameters);
}

TEST_CASE("training preconditions") {
    const auto warm = ModelSnapshot::zeros(LabelSpace::restrictions, 6);
    CHECK_THROWS_AS(train(warm, {}, {}, TrainConfig{}), Error);
    auto toy = oracle::separable_toy();
    toy[3].features.dimension = 7;
    CHECK_THROWS_AS(train(warm, toy, {}, TrainConfig{}), Error);
    auto short_labels = oracle::separable_toy();
    short_labels[0].labels = {1};
    CHECK_THROWS_AS(train(warm, short_labels, {}, TrainConfig{}), Error);
}

TEST_CASE("model container round trip") {
    testutil::TempDir dir("model");
    auto m = ModelSnapshot::zeros(LabelSpace::topics, 32);
    Rng rng(8);
    for (auto& w : m.parameters) w = rng.uniform() - 0.5;
    m.parameters[3] = -0.0;
    m.parameters[4] = 1e-310;
    m.version = 12;
    m.provenance = {{"data_hash", "abc"}};
    m.save(dir / "m.cbor");
    const auto back = ModelSnapshot::load(dir / "m.cbor");
    CHECK(back == m);
    CHECK(std::signbit(back.parameters[3]));
    CHECK(m.to_bytes() == back.to_bytes());

    auto bytes = m.to_bytes();
    bytes.resize(bytes.size() / 2);
    CHECK_THROWS_AS(ModelSnapshot::from_bytes(bytes), Error);
    const auto other = nlohmann::json::to_cbor(nlohmann::json{{"format", "something"}});
    CHECK_THROWS_AS(ModelSnapshot::from_bytes(other), Error);
}

TEST_CASE("linear backend") {
    FeaturizerConfig fc;
    fc.dimension = 256;
    LinearBackend backend(fc);
    CHECK(backend.id() == "linear-bce");
    const auto m = backend.initial(LabelSpace::restrictions);
    CHECK(m.dimension == 256);
    CHECK(m.parameters.size() == 2 * 256 + 2);
    std::vector<FeatureVector> batch = {backend.featurize("Ein Satz."), backend.featurize("Noch ein Satz.")};
    CHECK(backend.predict(m, batch).size() == 2);
}
