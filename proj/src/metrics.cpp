#include "landreuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "landreuse/error.hpp"

namespace landreuse::metrics {

namespace {

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

double f1_of(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

}  // namespace

EvalReport prf1(std::span<const MultiHot> gold, std::span<const MultiHot> pred,
                std::span<const std::string> label_names) {
    if (gold.size() != pred.size()) {
        throw Error("gold has " + std::to_string(gold.size()) + " rows, predictions " + std::to_string(pred.size()));
    }
    std::size_t width = label_names.size();
    if (!gold.empty()) {
        if (width == 0) width = gold.front().size();
        for (std::size_t i = 0; i < gold.size(); ++i) {
            if (gold[i].size() != width || pred[i].size() != width) {
                throw Error("row " + std::to_string(i) + " does not have " + std::to_string(width) + " labels");
            }
        }
    }
    EvalReport r;
    r.examples = gold.size();
    r.labels.resize(width);
    for (std::size_t l = 0; l < width; ++l) {
        r.labels[l].label = l < label_names.size() ? label_names[l] : std::to_string(l);
    }
    for (std::size_t i = 0; i < gold.size(); ++i) {
        for (std::size_t l = 0; l < width; ++l) {
            const bool g = gold[i][l] != 0, p = pred[i][l] != 0;
            if (g && p) ++r.labels[l].tp;
            else if (p) ++r.labels[l].fp;
            else if (g) ++r.labels[l].fn;
        }
    }
    std::size_t tp = 0, fp = 0, fn = 0;
    double macro = 0.0;
    for (auto& s : r.labels) {
        s.support = s.tp + s.fn;
        s.precision = ratio(s.tp, s.tp + s.fp);
        s.recall = ratio(s.tp, s.tp + s.fn);
        s.f1 = f1_of(s.precision, s.recall);
        macro += s.f1;
        tp += s.tp;
        fp += s.fp;
        fn += s.fn;
    }
    r.micro_precision = ratio(tp, tp + fp);
    r.micro_recall = ratio(tp, tp + fn);
    r.micro_f1 = f1_of(r.micro_precision, r.micro_recall);
    r.macro_f1 = width == 0 ? 0.0 : macro / static_cast<double>(width);
    return r;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& s : labels) {
        per.push_back({{"label", s.label},
                       {"precision", s.precision},
                       {"recall", s.recall},
                       {"f1", s.f1},
                       {"support", s.support},
                       {"tp", s.tp},
                       {"fp", s.fp},
                       {"fn", s.fn}});
    }
    return {{"labels", per},
            {"micro_precision", micro_precision},
            {"micro_recall", micro_recall},
            {"micro_f1", micro_f1},
            {"macro_f1", macro_f1},
            {"examples", examples}};
}

double mcnemar_p_value(std::size_t b, std::size_t c) {
    const std::size_t n = b + c;
    if (n == 0) return 1.0;
    if (n <= kMcNemarExactLimit) {
        // Binomial coefficients up to n = 25 are exact in a double.
        double tail = 0.0;
        double coeff = 1.0;  // C(n, k), walked from k = 0
        const std::size_t hi = std::max(b, c);
        for (std::size_t k = 0; k <= n; ++k) {
            if (k >= hi) tail += coeff;
            coeff = coeff * static_cast<double>(n - k) / static_cast<double>(k + 1);
        }
        return std::min(1.0, 2.0 * std::ldexp(tail, -static_cast<int>(n)));
    }
    const double d = std::abs(static_cast<double>(b) - static_cast<double>(c)) - 1.0;
    const double x = d * d / static_cast<double>(n);
    return std::min(1.0, std::erfc(std::sqrt(x / 2.0)));
}

McNemarResult mcnemar(std::span<const std::uint8_t> gold, std::span<const std::uint8_t> baseline,
                      std::span<const std::uint8_t> challenger, std::string label) {
    if (gold.size() != baseline.size() || gold.size() != challenger.size()) {
        throw Error("McNemar inputs differ in length");
    }
    McNemarResult r;
    r.label = std::move(label);
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const bool a_ok = (baseline[i] != 0) == (gold[i] != 0);
        const bool b_ok = (challenger[i] != 0) == (gold[i] != 0);
        if (a_ok && !b_ok) ++r.b;
        else if (b_ok && !a_ok) ++r.c;
    }
    r.exact = r.b + r.c <= kMcNemarExactLimit;
    r.p_value = mcnemar_p_value(r.b, r.c);
    r.significant_05 = r.p_value < 0.05;
    r.significant_01 = r.p_value < 0.01;
    return r;
}

nlohmann::json McNemarResult::to_json() const {
    return {{"label", label},       {"b", b}, {"c", c}, {"p_value", p_value}, {"exact", exact},
            {"significant_05", significant_05}, {"significant_01", significant_01}};
}

double krippendorff_alpha(const RatingMatrix& ratings) {
    std::map<std::pair<int, int>, double> o;
    std::map<int, double> n_c;
    double n = 0.0;
    for (const auto& unit : ratings) {
        std::vector<int> values;
        for (int v : unit) {
            if (v == kMissing) continue;
            if (v < 0) throw Error("rating values must be >= 0 or missing");
            values.push_back(v);
        }
        const std::size_t m = values.size();
        if (m < 2) continue;
        const double w = 1.0 / static_cast<double>(m - 1);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                if (i != j) o[{values[i], values[j]}] += w;
            }
        }
        for (int v : values) n_c[v] += 1.0;
        n += static_cast<double>(m);
    }
    if (n == 0.0) throw Error("Krippendorff's alpha is undefined without pairable values");
    double disagree = 0.0;
    for (const auto& [ck, v] : o) {
        if (ck.first != ck.second) disagree += v;
    }
    double expected = 0.0;
    for (const auto& [c, nc] : n_c) {
        for (const auto& [k, nk] : n_c) {
            if (c != k) expected += nc * nk;
        }
    }
    if (expected == 0.0) throw Error("Krippendorff's alpha is undefined when only one category occurs");
    const double d_o = disagree / n;
    const double d_e = expected / (n * (n - 1.0));
    return 1.0 - d_o / d_e;
}

double fleiss_kappa(const RatingMatrix& ratings) {
    if (ratings.empty()) throw Error("Fleiss' kappa needs at least one unit");
    const std::size_t m = ratings.front().size();
    if (m < 2) throw Error("Fleiss' kappa needs at least two annotators per unit");
    std::set<int> categories;
    for (const auto& unit : ratings) {
        if (unit.size() != m) throw Error("Fleiss' kappa needs the same number of annotators for every unit");
        for (int v : unit) {
            if (v < 0) throw Error("Fleiss' kappa does not accept missing ratings");
            categories.insert(v);
        }
    }
    std::map<int, double> totals;
    double p_bar = 0.0;
    for (const auto& unit : ratings) {
        std::map<int, double> counts;
        for (int v : unit) counts[v] += 1.0;
        double sq = 0.0;
        for (const auto& [c, k] : counts) {
            sq += k * k;
            totals[c] += k;
        }
        p_bar += (sq - static_cast<double>(m)) / static_cast<double>(m * (m - 1));
    }
    const double units = static_cast<double>(ratings.size());
    p_bar /= units;
    double p_e = 0.0;
    for (const auto& [c, t] : totals) {
        const double p = t / (units * static_cast<double>(m));
        p_e += p * p;
    }
    if (categories.size() < 2 || p_e >= 1.0) throw Error("Fleiss' kappa is undefined when expected agreement is 1");
    return (p_bar - p_e) / (1.0 - p_e);
}

Cooccurrence cooccurrence(std::span<const MultiHot> labelsets, std::size_t width) {
    Cooccurrence c;
    c.absolute.assign(width, std::vector<double>(width, 0.0));
    c.relative.assign(width, std::vector<double>(width, 0.0));
    for (const auto& row : labelsets) {
        if (row.size() != width) throw Error("label set width does not match cooccurrence width");
        for (std::size_t i = 0; i < width; ++i) {
            if (!row[i]) continue;
            for (std::size_t j = 0; j < width; ++j) {
                if (row[j]) c.absolute[i][j] += 1.0;
            }
        }
    }
    for (std::size_t i = 0; i < width; ++i) {
        const double d = c.absolute[i][i];
        if (d == 0.0) continue;
        for (std::size_t j = 0; j < width; ++j) c.relative[i][j] = c.absolute[i][j] / d;
    }
    return c;
}

std::vector<std::vector<double>> difference(const std::vector<std::vector<double>>& a,
                                            const std::vector<std::vector<double>>& b) {
    if (a.size() != b.size()) throw Error("matrix shapes differ");
    auto out = a;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != b[i].size()) throw Error("matrix shapes differ");
        for (std::size_t j = 0; j < a[i].size(); ++j) out[i][j] -= b[i][j];
    }
    return out;
}

}  // namespace landreuse::metrics
