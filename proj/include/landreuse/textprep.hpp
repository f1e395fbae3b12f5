#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "landreuse/ocr_ingest.hpp"

namespace landreuse::textprep {

struct SentenceRecord {
    std::string sentence_id;
    std::string doc_id;
    int page_no = 0;
    std::string text;
    double ocr_score = 0.0;
};

enum class RejectionCode { special_chars, lowercase_start, no_terminal_punct, too_short, too_long };

struct RejectionReason {
    RejectionCode code;
    std::string detail;
};

std::string_view to_string(RejectionCode code);

// Thresholds and abbreviation list. Loadable from the rules JSON file;
// missing keys keep their defaults.
struct Rules {
    double max_special_ratio = 0.2;
    std::size_t min_tokens = 3;
    std::size_t max_tokens = 120;
    std::vector<std::string> abbreviations = {"z.B.", "ca.", "Nr.", "bzw.", "u.a.", "Abs.", "ggf."};

    static Rules from_json(const nlohmann::json& j);
    static Rules load(const std::filesystem::path& path);
    nlohmann::json to_json() const;
};

// Joins hyphenated line wraps, turns remaining line breaks into spaces,
// collapses whitespace runs and trims.
std::string normalize_text(std::string_view raw);

// Splits normalized text after . ! ? : unless the token is a known
// abbreviation or the mark sits between digits. Joining the result with
// single spaces gives back the input.
std::vector<std::string> segment_sentences(std::string_view text, const Rules& rules = {});

// First failing rule, checked in RejectionCode order; nullopt when valid.
std::optional<RejectionReason> check_sentence(std::string_view sentence, const Rules& rules = {});

struct FilterOutcome {
    std::vector<std::string> kept;
    std::vector<std::pair<std::string, RejectionReason>> rejected;
};

FilterOutcome filter_valid_sentences(std::span<const std::string> sentences, const Rules& rules = {});

struct PageOutcome {
    std::vector<SentenceRecord> kept;
    std::vector<std::pair<SentenceRecord, RejectionReason>> rejected;
};

// Full pipeline for one page. Sentence ids are "<doc>:p<page>:s<k>" where k
// counts all segmented sentences, so ids do not shift when rules change.
PageOutcome prepare_page(const ocr::PageText& page, const Rules& rules = {});

std::string make_sentence_id(std::string_view doc_id, int page_no, std::size_t index);

nlohmann::json to_json(const SentenceRecord& s);
SentenceRecord sentence_from_json(const nlohmann::json& j);
std::vector<SentenceRecord> read_sentences(const std::filesystem::path& path);
void write_sentences(const std::filesystem::path& path, std::span<const SentenceRecord> sentences);

}  // namespace landreuse::textprep
