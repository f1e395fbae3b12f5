#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "landreuse/labels.hpp"

namespace landreuse::metrics {

struct LabelScore {
    std::string label;
    std::size_t tp = 0, fp = 0, fn = 0;
    std::size_t support = 0;  // tp + fn
    double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct EvalReport {
    std::vector<LabelScore> labels;
    double micro_precision = 0.0, micro_recall = 0.0, micro_f1 = 0.0;
    double macro_f1 = 0.0;
    std::size_t examples = 0;

    nlohmann::json to_json() const;
};

// Rows are sentences; all rows of both matrices share one width. 0/0 is 0.
// label_names may be empty, otherwise it names the columns.
EvalReport prf1(std::span<const MultiHot> gold, std::span<const MultiHot> pred,
                std::span<const std::string> label_names = {});

struct McNemarResult {
    std::string label;
    std::size_t b = 0;  // baseline correct, challenger wrong
    std::size_t c = 0;  // challenger correct, baseline wrong
    double p_value = 1.0;
    bool exact = true;
    bool significant_05 = false;
    bool significant_01 = false;

    nlohmann::json to_json() const;
};

inline constexpr std::size_t kMcNemarExactLimit = 25;

// Two-sided p-value: exact binomial for b + c <= 25, otherwise chi-square
// with continuity correction and one degree of freedom.
double mcnemar_p_value(std::size_t b, std::size_t c);

McNemarResult mcnemar(std::span<const std::uint8_t> gold, std::span<const std::uint8_t> baseline,
                      std::span<const std::uint8_t> challenger, std::string label = {});

// Rating matrix for agreement statistics: units x annotators, category
// values >= 0, kMissing where an annotator did not rate the unit.
inline constexpr int kMissing = -1;
using RatingMatrix = std::vector<std::vector<int>>;

// Nominal Krippendorff's alpha from the coincidence matrix. Units with fewer
// than two ratings are skipped. Throws when alpha is undefined.
double krippendorff_alpha(const RatingMatrix& ratings);

// Fleiss' kappa; every unit must have the same number (>= 2) of ratings and
// no missing values. Throws when expected agreement is 1.
double fleiss_kappa(const RatingMatrix& ratings);

struct Cooccurrence {
    std::vector<std::vector<double>> absolute;
    // Each row divided by its diagonal entry; rows with a zero diagonal are 0.
    std::vector<std::vector<double>> relative;
};

Cooccurrence cooccurrence(std::span<const MultiHot> labelsets, std::size_t width);

// Elementwise a - b.
std::vector<std::vector<double>> difference(const std::vector<std::vector<double>>& a,
                                            const std::vector<std::vector<double>>& b);

}  // namespace landreuse::metrics
