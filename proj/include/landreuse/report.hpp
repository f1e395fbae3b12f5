#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "landreuse/bootstrap.hpp"
#include "landreuse/labels.hpp"
#include "landreuse/metrics.hpp"

namespace landreuse::report {

struct ChallengerColumn {
    std::string name;
    metrics::EvalReport scores;
    std::vector<metrics::McNemarResult> mcnemar;  // per label, against the baseline
};

struct SpaceTable {
    LabelSpace space = LabelSpace::topics;
    metrics::EvalReport baseline;
    std::vector<ChallengerColumn> challengers;
};

struct NamedPredictions {
    std::string name;
    std::vector<MultiHot> predictions;
};

SpaceTable compare(LabelSpace space, std::span<const MultiHot> gold, std::span<const MultiHot> baseline,
                   std::span<const NamedPredictions> challengers);

// Marker appended to a challenger cell: "**" for p < 0.01, "*" for p < 0.05.
std::string significance_marker(const metrics::McNemarResult& r);

// Aligned text: one block per label space with label, micro and macro rows;
// columns are the baseline F1, each challenger's F1 and their average.
std::string render_table(std::span<const SpaceTable> tables);
nlohmann::json to_json(const SpaceTable& table);

struct AgreementRow {
    std::string label;
    std::optional<double> alpha;
    std::optional<double> kappa;
    std::size_t units = 0;
    std::string note;  // why a value is missing
};

// Per-label Krippendorff's alpha and Fleiss' kappa over the nine labels.
// Kappa uses only units rated by every annotator.
std::vector<AgreementRow> agreement(std::span<const bootstrap::AnnotationRecord> records);
std::string render_agreement(std::span<const AgreementRow> rows);
nlohmann::json to_json(std::span<const AgreementRow> rows);

}  // namespace landreuse::report
