#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace landreuse::ocr {

inline constexpr double kDefaultPageThreshold = 75.0;

struct WordConfidenceRecord {
    std::string doc_id;
    int page_no = 1;
    std::string word;
    double confidence = 0.0;  // percent
    int line_no = 0;          // optional column; 0 when absent
};

struct PageScore {
    std::string doc_id;
    int page_no = 0;
    double score = 0.0;
    std::size_t word_count = 0;
    bool accepted = false;
};

struct DocumentMeta {
    std::string doc_id;
    std::string title;
    std::string region;
    std::vector<std::string> area_ids;
};

// Mean word confidence of one page. All records must share doc_id and
// page_no; an empty page scores 0 with word_count 0.
PageScore aggregate_page_confidence(std::span<const WordConfidenceRecord> words);

struct PageFilterResult {
    std::vector<PageScore> accepted;
    std::vector<PageScore> rejected;
};

// Accepts pages with score >= threshold; both lists keep input order and
// carry the updated `accepted` flag.
PageFilterResult filter_pages(std::span<const PageScore> pages, double threshold = kDefaultPageThreshold);

struct PageText {
    std::string doc_id;
    int page_no = 0;
    double score = 0.0;
    std::string text;  // words joined by spaces, OCR lines separated by '\n'
};

struct IngestStats {
    std::size_t rows = 0;
    std::size_t malformed_rows = 0;
    std::size_t clamped_confidences = 0;
    std::size_t pages_total = 0;
    std::size_t pages_accepted = 0;
    std::size_t pages_rejected = 0;
    std::size_t documents = 0;
};

struct IngestResult {
    std::vector<PageText> pages;       // accepted pages, in file order
    std::vector<PageScore> rejected;
    std::vector<DocumentMeta> documents;
    std::vector<std::string> warnings;
    std::vector<std::string> errors;   // malformed rows, "line N: ..."
    IngestStats stats;
};

// Parses the TSV body (header line included). Exposed for tests.
IngestResult ingest_streams(std::istream& ocr_tsv, std::istream& meta_jsonl, double threshold = kDefaultPageThreshold);

IngestResult ingest_corpus(const std::filesystem::path& word_confidence_file,
                           const std::filesystem::path& document_meta_file,
                           double threshold = kDefaultPageThreshold);

// Writes pages.jsonl, rejected_pages.jsonl, documents.jsonl and ingest_stats.json.
void write_ingest_output(const IngestResult& result, const std::filesystem::path& out_dir);

std::vector<PageText> read_pages(const std::filesystem::path& pages_jsonl);
std::vector<DocumentMeta> read_documents(const std::filesystem::path& documents_jsonl);

nlohmann::json to_json(const PageScore& p);
nlohmann::json to_json(const DocumentMeta& d);
nlohmann::json to_json(const PageText& p);
nlohmann::json to_json(const IngestStats& s);
DocumentMeta document_from_json(const nlohmann::json& j);

}  // namespace landreuse::ocr
