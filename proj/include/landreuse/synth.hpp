#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "landreuse/bootstrap.hpp"
#include "landreuse/geograph.hpp"
#include "landreuse/labels.hpp"
#include "landreuse/ocr_ingest.hpp"

namespace landreuse::bootstrap {

// Template-based stand-in for a real document corpus.
struct SynthConfig {
    std::size_t size = 24000;  // sentences
    // Label priors, indexed like LabelSet::combined().
    std::array<double, kAllLabelCount> priors = {0.08, 0.15, 0.01, 0.05, 0.03, 0.04, 0.015, 0.03, 0.02};
    // Probability that a positive label in a keyword-bearing sentence is
    // expressed with a schema keyword rather than a paraphrase.
    double signal_strength = 0.9;
    // Fraction of labeled sentences expressed without any schema keyword.
    double noise_rate = 0.1;
    std::uint64_t seed = 1;

    std::size_t sentences_per_page = 12;
    std::size_t pages_per_document = 3;
    std::size_t documents_per_area = 3;
    double bad_page_rate = 0.1;    // pages with low OCR confidence
    double empty_page_rate = 0.02; // pages without recognized words
    std::vector<double> annotator_flip_rates = {0.02, 0.04, 0.06};

    static SynthConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct SynthSentence {
    std::string sentence_id;  // matches the id textprep assigns
    std::string doc_id;
    int page_no = 0;
    std::string text;
    LabelSet gold;
    bool keyword_free = false;  // labels expressed only through paraphrases
};

struct SynthCorpus {
    std::vector<SynthSentence> sentences;
    std::vector<ocr::DocumentMeta> documents;
    std::vector<ocr::WordConfidenceRecord> words;
    std::vector<geo::GeoFeature> areas;
    std::vector<geo::Isoband> isobands;
    std::vector<AnnotationRecord> annotations;
};

SynthCorpus generate_synthetic_corpus(const SynthConfig& config);

// Writes ocr.tsv, documents.jsonl, gold.jsonl, annotations.jsonl,
// areas.geojson, weather.geojson and synth_config.json.
void write_synthetic_corpus(const SynthCorpus& corpus, const SynthConfig& config, const std::filesystem::path& dir);

// Phrase inventories, exposed so tests can check them against the keyword table.
struct PhraseBank {
    std::vector<std::vector<std::string>> keyword_phrases;     // per combined label
    std::vector<std::vector<std::string>> paraphrases;         // per combined label
    std::vector<std::string> openers;
    std::vector<std::string> neutral_subjects;
    std::vector<std::string> neutral_predicates;
};

const PhraseBank& phrase_bank();

}  // namespace landreuse::bootstrap
