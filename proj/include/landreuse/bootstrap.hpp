#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "landreuse/labels.hpp"

namespace landreuse::bootstrap {

// Lowercase keyword stems per label, indexed like LabelSet::combined().
class KeywordTable {
public:
    KeywordTable() = default;

    // {label name: [keywords...]}. Every schema label needs at least one
    // keyword; unknown label names are rejected.
    static KeywordTable from_json(const nlohmann::json& j);
    static KeywordTable load(const std::filesystem::path& path);
    // German defaults.
    static KeywordTable defaults();

    nlohmann::json to_json() const;

    const std::vector<std::string>& keywords(std::size_t combined_label) const { return keywords_.at(combined_label); }
    std::size_t size() const { return keywords_.size(); }

private:
    std::vector<std::vector<std::string>> keywords_;
};

// Label l is set iff one of its stems is a case-insensitive substring.
LabelSet match_keywords(std::string_view sentence, const KeywordTable& table);

// Number of distinct stems of one label found in an already lowercased sentence.
std::size_t keyword_hits(std::string_view lowered, const KeywordTable& table, std::size_t combined_label);

struct CandidatePoolConfig {
    std::size_t target_size = 2000;
    std::size_t topic_cap = 150;         // taken when a topic has more than half_rule_limit matches
    std::size_t half_rule_limit = 300;   // at or below: floor(matches / 2)
    std::size_t min_random_fill = 700;
};

struct TopicSelection {
    std::string topic;
    std::size_t matched = 0;
    std::size_t quota = 0;
    std::size_t selected = 0;
};

struct CandidatePool {
    std::vector<std::size_t> selected;   // corpus indices: topic picks first, then random fill
    std::size_t restriction_candidates = 0;
    std::size_t topic_selected = 0;
    std::size_t random_fill = 0;
    std::vector<TopicSelection> topics;
};

// Topic quota for a topic with `matched` candidates.
std::size_t topic_quota(std::size_t matched, const CandidatePoolConfig& config);

CandidatePool build_candidate_pool(std::span<const std::string> sentences, const KeywordTable& table,
                                   std::uint64_t seed, const CandidatePoolConfig& config = {});

struct AnnotationRecord {
    std::string sentence_id;
    std::string annotator_id;
    LabelSet labels;
};

// Per label: set iff strictly more than half of the annotators set it.
LabelSet majority_vote(std::span<const AnnotationRecord> records);

// Groups records by sentence, rejecting duplicate (sentence, annotator) pairs.
std::map<std::string, std::vector<AnnotationRecord>> group_annotations(std::span<const AnnotationRecord> records);

nlohmann::json to_json(const AnnotationRecord& r);
AnnotationRecord annotation_from_json(const nlohmann::json& j);
std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path);

// Integer split sizes proportional to ratios (largest remainder).
std::vector<std::size_t> split_sizes(std::size_t n, std::span<const double> ratios);

// Iterative stratification over multi-hot rows of any width. Returns corpus
// indices per split, ascending. Split sizes are exactly split_sizes(n, ratios).
std::vector<std::vector<std::size_t>> stratified_split(std::span<const MultiHot> labels, std::span<const double> ratios,
                                                       std::uint64_t seed);

struct LabeledSentence {
    std::string sentence_id;
    std::string text;
    LabelSet labels;
};

struct DatasetSplit {
    std::vector<LabeledSentence> train;
    std::vector<LabeledSentence> validation;
    std::vector<LabeledSentence> test;
};

// Ratios are (train, validation, test).
DatasetSplit split_dataset(std::span<const LabeledSentence> dataset, std::span<const double> ratios,
                           std::uint64_t seed);

nlohmann::json to_json(const LabeledSentence& s);
LabeledSentence labeled_from_json(const nlohmann::json& j);
std::vector<LabeledSentence> read_labeled(const std::filesystem::path& path);
void write_labeled(const std::filesystem::path& path, std::span<const LabeledSentence> rows);

}  // namespace landreuse::bootstrap
