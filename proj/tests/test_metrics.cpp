#include <doctest.h>

#include <cmath>

#include "landreuse/error.hpp"
#include "landreuse/metrics.hpp"
#include "landreuse/random.hpp"
#include "oracles.hpp"

using namespace landreuse;
using namespace landreuse::metrics;

namespace {

RatingMatrix fixture() { return {{1, 1, 1}, {1, 1, 0}, {0, 0, 0}, {0, 0, 0}}; }

}  // namespace

TEST_CASE("prf1 basics") {
    std::vector<MultiHot> gold = {{1, 0}, {1, 1}, {0, 1}, {1, 0}};
    CHECK(prf1(gold, gold).micro_f1 == 1.0);
    CHECK(prf1(gold, gold).macro_f1 == 1.0);
    for (const auto& l : prf1(gold, gold).labels) CHECK(l.f1 == 1.0);

    // Label 0: TP=2, FP=1, FN=1.
    std::vector<MultiHot> g1 = {{1}, {1}, {1}, {0}};
    std::vector<MultiHot> p1 = {{1}, {1}, {0}, {1}};
    const auto r = prf1(g1, p1);
    CHECK(r.labels[0].precision == doctest::Approx(2.0 / 3.0));
    CHECK(r.labels[0].recall == doctest::Approx(2.0 / 3.0));
    CHECK(r.labels[0].f1 == doctest::Approx(2.0 / 3.0));
    CHECK(r.labels[0].support == 3);

    std::vector<MultiHot> g2 = {{1, 1}, {0, 1}};
    std::vector<MultiHot> p2 = {{1, 0}, {0, 0}};
    CHECK(prf1(g2, p2).macro_f1 == 0.5);

    // A label never present and never predicted scores 0.
    std::vector<MultiHot> g3 = {{1, 0}};
    CHECK(prf1(g3, g3).labels[1].f1 == 0.0);
    CHECK(prf1(g3, g3).macro_f1 == 0.5);

    std::vector<MultiHot> bad = {{1, 0}, {1, 0}};
    CHECK_THROWS_AS(prf1(gold, bad), Error);
    std::vector<MultiHot> narrow = {{1}, {1}, {1}, {1}};
    CHECK_THROWS_AS(prf1(gold, narrow), Error);
}

TEST_CASE("prf1 invariances") {
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = 1 + rng.index(30), w = 1 + rng.index(6);
        std::vector<MultiHot> g(n, MultiHot(w)), p(n, MultiHot(w));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t l = 0; l < w; ++l) {
                g[i][l] = rng.bernoulli(0.4);
                p[i][l] = rng.bernoulli(0.4);
            }
        const auto base = prf1(g, p);
        for (const auto& l : base.labels) {
            CHECK(l.f1 >= 0.0);
            CHECK(l.f1 <= 1.0);
        }
        double mean = 0.0;
        for (const auto& l : base.labels) mean += l.f1;
        CHECK(base.macro_f1 == doctest::Approx(mean / static_cast<double>(w)));

        // Column permutation keeps micro-F1, row permutation keeps macro-F1.
        std::vector<std::size_t> perm(w);
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        auto gc = g, pc = p;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t l = 0; l < w; ++l) {
                gc[i][l] = g[i][perm[l]];
                pc[i][l] = p[i][perm[l]];
            }
        CHECK(prf1(gc, pc).micro_f1 == base.micro_f1);
        std::vector<std::size_t> rows(n);
        std::iota(rows.begin(), rows.end(), 0);
        rng.shuffle(rows);
        std::vector<MultiHot> gr, pr;
        for (auto i : rows) {
            gr.push_back(g[i]);
            pr.push_back(p[i]);
        }
        CHECK(prf1(gr, pr).macro_f1 == base.macro_f1);
    }
}

TEST_CASE("mcnemar p-values") {
    CHECK(mcnemar_p_value(0, 0) == 1.0);
    CHECK(mcnemar_p_value(0, 10) == 0.001953125);
    CHECK(mcnemar_p_value(10, 0) == 0.001953125);
    CHECK(mcnemar_p_value(5, 5) == 1.0);
    for (std::size_t b = 0; b <= 25; ++b)
        for (std::size_t c = 0; b + c <= 25; ++c) {
            CHECK(std::abs(mcnemar_p_value(b, c) - oracle::mcnemar_exact(b, c)) < 1e-12);
            CHECK(mcnemar_p_value(b, c) == mcnemar_p_value(c, b));
        }
    // Continuity-corrected chi-square beyond the exact range: (|30-10|-1)^2/40.
    CHECK(mcnemar_p_value(30, 10) == doctest::Approx(std::erfc(std::sqrt(361.0 / 40.0 / 2.0))).epsilon(1e-12));
    // Both branches agree roughly where they meet.
    CHECK(std::abs(mcnemar_p_value(8, 17) - std::erfc(std::sqrt(64.0 / 25.0 / 2.0))) < 0.02);
    for (std::size_t b = 0; b < 60; ++b)
        for (std::size_t c = 0; c < 60; ++c) {
            const double p = mcnemar_p_value(b, c);
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
        }
}

TEST_CASE("mcnemar on predictions") {
    const std::vector<std::uint8_t> gold = {1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0};
    const std::vector<std::uint8_t> base = {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    const std::vector<std::uint8_t> chal = {1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0};
    const auto r = mcnemar(gold, base, chal, "Weather");
    CHECK(r.b == 0);
    CHECK(r.c == 10);
    CHECK(r.exact);
    CHECK(r.p_value == 0.001953125);
    CHECK(r.significant_05);
    CHECK(r.significant_01);
    CHECK(r.label == "Weather");
    const auto same = mcnemar(gold, base, base);
    CHECK(same.p_value == 1.0);
    CHECK_FALSE(same.significant_05);
    CHECK_THROWS_AS(mcnemar(gold, base, std::vector<std::uint8_t>{1}), Error);
}

TEST_CASE("agreement fixtures") {
    CHECK(krippendorff_alpha(fixture()) == doctest::Approx(24.0 / 35.0).epsilon(1e-12));
    CHECK(fleiss_kappa(fixture()) == doctest::Approx(23.0 / 35.0).epsilon(1e-12));
    const RatingMatrix perfect = {{1, 1}, {0, 0}, {1, 1}};
    CHECK(krippendorff_alpha(perfect) == 1.0);
    CHECK(fleiss_kappa(perfect) == 1.0);
    const RatingMatrix constant = {{1, 1, 1}, {1, 1, 1}};
    CHECK_THROWS_AS(fleiss_kappa(constant), Error);
    CHECK_THROWS_AS(krippendorff_alpha(constant), Error);
    CHECK_THROWS_AS(krippendorff_alpha(RatingMatrix{{1, kMissing}, {kMissing, 0}}), Error);
    CHECK_THROWS_AS(fleiss_kappa(RatingMatrix{{1, kMissing}, {1, 0}}), Error);
    CHECK_THROWS_AS(fleiss_kappa(RatingMatrix{{1, 0}, {1, 0, 1}}), Error);
}

TEST_CASE("agreement against exact oracles") {
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        const auto m = oracle::random_rating_matrix(rng, true);
        CHECK(std::abs(krippendorff_alpha(m) - oracle::to_double(oracle::alpha(m))) < 1e-9);
    }
    for (int trial = 0; trial < 100; ++trial) {
        const auto m = oracle::random_rating_matrix(rng, false);
        CHECK(std::abs(fleiss_kappa(m) - oracle::to_double(oracle::kappa(m))) < 1e-9);
    }
}

TEST_CASE("agreement is invariant to relabeling binary categories") {
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        auto m = oracle::random_rating_matrix(rng, false);
        for (auto& row : m)
            for (auto& v : row) v = v % 2;
        std::set<int> seen;
        for (const auto& row : m) seen.insert(row.begin(), row.end());
        if (seen.size() < 2) continue;
        auto swapped = m;
        for (auto& row : swapped)
            for (auto& v : row) v = 1 - v;
        CHECK(krippendorff_alpha(swapped) == doctest::Approx(krippendorff_alpha(m)).epsilon(1e-12));
        CHECK(fleiss_kappa(swapped) == doctest::Approx(fleiss_kappa(m)).epsilon(1e-12));
    }
}

TEST_CASE("a coin-flipping annotator gives alpha near zero") {
    Rng rng(2);
    RatingMatrix m(10000, std::vector<int>(2));
    for (auto& row : m) {
        row[0] = rng.bernoulli(0.5);
        row[1] = rng.bernoulli(0.5);
    }
    CHECK(std::abs(krippendorff_alpha(m)) < 0.1);
}

TEST_CASE("cooccurrence matrices") {
    const std::vector<MultiHot> one = {{1, 1, 0}};
    const auto c = cooccurrence(one, 3);
    CHECK(c.absolute[0][1] == 1.0);
    CHECK(c.relative[0][1] == 1.0);
    CHECK(c.absolute[2][2] == 0.0);
    CHECK(c.relative[2][0] == 0.0);

    const auto empty = cooccurrence(std::vector<MultiHot>{}, 3);
    for (const auto& row : empty.absolute)
        for (double v : row) CHECK(v == 0.0);

    const std::vector<MultiHot> several = {{1, 1, 0}, {1, 0, 0}, {1, 0, 1}, {0, 1, 1}};
    const auto s = cooccurrence(several, 3);
    CHECK(s.absolute[0][0] == 3.0);
    CHECK(s.absolute[0][1] == 1.0);
    CHECK(s.absolute[1][0] == 1.0);
    CHECK(s.relative[0][1] == doctest::Approx(1.0 / 3.0));
    CHECK(s.relative[1][0] == 0.5);
    const auto d = difference(s.absolute, c.absolute);
    CHECK(d[0][0] == 2.0);
    CHECK(d[0][1] == 0.0);
    CHECK_THROWS_AS(cooccurrence(one, 2), Error);
}

TEST_CASE("report json") {
    std::vector<MultiHot> g = {{1, 0}};
    std::vector<std::string> names = {"Prohibition", "Requirement"};
    const auto j = prf1(g, g, names).to_json();
    CHECK(j["labels"][0]["label"] == "Prohibition");
    CHECK(j.contains("macro_f1"));
}
