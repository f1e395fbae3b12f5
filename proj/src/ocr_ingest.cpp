#include "landreuse/ocr_ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "landreuse/error.hpp"
#include "landreuse/io.hpp"

namespace landreuse::ocr {

namespace fs = std::filesystem;

PageScore aggregate_page_confidence(std::span<const WordConfidenceRecord> words) {
    PageScore out;
    if (words.empty()) return out;
    out.doc_id = words.front().doc_id;
    out.page_no = words.front().page_no;
    double sum = 0.0;
    for (const auto& w : words) {
        if (w.doc_id != out.doc_id || w.page_no != out.page_no) {
            throw Error("malformed page: records for " + out.doc_id + "/" + std::to_string(out.page_no) +
                        " mixed with " + w.doc_id + "/" + std::to_string(w.page_no));
        }
        sum += w.confidence;
    }
    out.word_count = words.size();
    out.score = sum / static_cast<double>(words.size());
    return out;
}

PageFilterResult filter_pages(std::span<const PageScore> pages, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 100.0)) {
        throw Error("page threshold must lie in [0, 100], got " + std::to_string(threshold));
    }
    PageFilterResult out;
    for (auto p : pages) {
        p.accepted = p.score >= threshold;
        (p.accepted ? out.accepted : out.rejected).push_back(std::move(p));
    }
    return out;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find('\t', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

bool parse_int(const std::string& s, int& v) {
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    return ec == std::errc() && p == end;
}

bool parse_double(const std::string& s, double& v) {
    if (s.empty()) return false;
    char* end = nullptr;
    v = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(v);
}

struct PageAccumulator {
    std::vector<WordConfidenceRecord> words;
    std::string text;
    int last_line = 0;
};

}  // namespace

IngestResult ingest_streams(std::istream& ocr_tsv, std::istream& meta_jsonl, double threshold) {
    IngestResult result;

    // Document meta.
    std::map<std::string, std::size_t> meta_index;
    {
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(meta_jsonl, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                auto doc = document_from_json(nlohmann::json::parse(line));
                if (meta_index.count(doc.doc_id)) {
                    result.warnings.push_back("meta line " + std::to_string(line_no) + ": duplicate doc_id " +
                                              doc.doc_id + " ignored");
                    continue;
                }
                meta_index[doc.doc_id] = result.documents.size();
                result.documents.push_back(std::move(doc));
            } catch (const std::exception& e) {
                result.errors.push_back("meta line " + std::to_string(line_no) + ": " + e.what());
            }
        }
    }

    // Word confidences, grouped by page in order of first appearance.
    std::vector<std::pair<std::string, int>> page_order;
    std::map<std::pair<std::string, int>, PageAccumulator> pages;
    std::string line;
    std::size_t line_no = 0;
    bool has_line_column = false;
    bool header_seen = false;
    while (std::getline(ocr_tsv, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!header_seen) {
            if (line.empty()) continue;
            const auto cols = split_tabs(line);
            if (cols.size() < 4 || cols[0] != "doc_id" || cols[1] != "page_no" || cols[2] != "word" ||
                cols[3] != "confidence") {
                throw Error("word-confidence file: expected header 'doc_id\\tpage_no\\tword\\tconfidence'");
            }
            has_line_column = cols.size() >= 5 && cols[4] == "line_no";
            header_seen = true;
            continue;
        }
        if (line.empty()) continue;
        ++result.stats.rows;
        const auto cols = split_tabs(line);
        const std::size_t expected = has_line_column ? 5 : 4;
        WordConfidenceRecord rec;
        auto malformed = [&](const std::string& why) {
            ++result.stats.malformed_rows;
            result.errors.push_back("line " + std::to_string(line_no) + ": " + why);
        };
        if (cols.size() != expected) {
            malformed("expected " + std::to_string(expected) + " columns, got " + std::to_string(cols.size()));
            continue;
        }
        rec.doc_id = cols[0];
        rec.word = cols[2];
        if (rec.doc_id.empty()) {
            malformed("empty doc_id");
            continue;
        }
        if (!parse_int(cols[1], rec.page_no) || rec.page_no < 1) {
            malformed("page_no must be a positive integer, got '" + cols[1] + "'");
            continue;
        }
        if (!parse_double(cols[3], rec.confidence)) {
            malformed("confidence is not a number: '" + cols[3] + "'");
            continue;
        }
        if (has_line_column && (!parse_int(cols[4], rec.line_no) || rec.line_no < 0)) {
            malformed("line_no must be a non-negative integer, got '" + cols[4] + "'");
            continue;
        }

        const auto key = std::make_pair(rec.doc_id, rec.page_no);
        auto [it, inserted] = pages.try_emplace(key);
        if (inserted) page_order.push_back(key);
        auto& acc = it->second;

        // Rows with an empty word only register the page (engines emit them
        // for blocks and empty pages).
        if (rec.word.empty()) continue;

        if (rec.confidence < 0.0 || rec.confidence > 100.0) {
            ++result.stats.clamped_confidences;
            result.warnings.push_back("line " + std::to_string(line_no) + ": confidence " + cols[3] +
                                      " clamped to [0,100]");
            rec.confidence = std::clamp(rec.confidence, 0.0, 100.0);
        }
        if (!acc.text.empty()) acc.text += (rec.line_no != acc.last_line) ? '\n' : ' ';
        acc.text += rec.word;
        acc.last_line = rec.line_no;
        acc.words.push_back(std::move(rec));
    }

    std::vector<PageScore> scores;
    scores.reserve(page_order.size());
    for (const auto& key : page_order) {
        auto s = aggregate_page_confidence(pages[key].words);
        s.doc_id = key.first;
        s.page_no = key.second;
        scores.push_back(std::move(s));
    }
    auto filtered = filter_pages(scores, threshold);

    std::set<std::string> ocr_docs;
    for (const auto& key : page_order) ocr_docs.insert(key.first);
    for (const auto& doc : ocr_docs) {
        if (!meta_index.count(doc)) {
            result.warnings.push_back("doc " + doc + " has no document meta; pages kept");
        }
    }
    std::erase_if(result.documents, [&](const DocumentMeta& doc) {
        if (ocr_docs.count(doc.doc_id)) return false;
        result.warnings.push_back("doc " + doc.doc_id + " listed in meta but absent from OCR input; omitted");
        return true;
    });

    for (const auto& p : filtered.accepted) {
        result.pages.push_back({p.doc_id, p.page_no, p.score, pages[{p.doc_id, p.page_no}].text});
    }
    result.rejected = std::move(filtered.rejected);
    result.stats.pages_total = scores.size();
    result.stats.pages_accepted = result.pages.size();
    result.stats.pages_rejected = result.rejected.size();
    result.stats.documents = ocr_docs.size();
    return result;
}

IngestResult ingest_corpus(const fs::path& word_confidence_file, const fs::path& document_meta_file,
                           double threshold) {
    std::ifstream ocr(word_confidence_file);
    if (!ocr) throw IoError("cannot open " + word_confidence_file.string());
    std::ifstream meta(document_meta_file);
    if (!meta) throw IoError("cannot open " + document_meta_file.string());
    return ingest_streams(ocr, meta, threshold);
}

nlohmann::json to_json(const PageScore& p) {
    return {{"doc_id", p.doc_id}, {"page_no", p.page_no}, {"score", p.score},
            {"word_count", p.word_count}, {"accepted", p.accepted}};
}

nlohmann::json to_json(const DocumentMeta& d) {
    return {{"doc_id", d.doc_id}, {"title", d.title}, {"region", d.region}, {"area_ids", d.area_ids}};
}

nlohmann::json to_json(const PageText& p) {
    return {{"doc_id", p.doc_id}, {"page_no", p.page_no}, {"score", p.score}, {"text", p.text}};
}

nlohmann::json to_json(const IngestStats& s) {
    return {{"rows", s.rows},
            {"malformed_rows", s.malformed_rows},
            {"clamped_confidences", s.clamped_confidences},
            {"pages_total", s.pages_total},
            {"pages_accepted", s.pages_accepted},
            {"pages_rejected", s.pages_rejected},
            {"documents", s.documents}};
}

DocumentMeta document_from_json(const nlohmann::json& j) {
    DocumentMeta d;
    d.doc_id = j.at("doc_id").get<std::string>();
    if (d.doc_id.empty()) throw Error("empty doc_id");
    d.title = j.value("title", std::string{});
    d.region = j.value("region", std::string{});
    if (j.contains("area_ids")) d.area_ids = j.at("area_ids").get<std::vector<std::string>>();
    return d;
}

void write_ingest_output(const IngestResult& result, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    std::vector<nlohmann::json> rows;
    for (const auto& p : result.pages) rows.push_back(to_json(p));
    io::write_jsonl_atomic(out_dir / "pages.jsonl", rows);
    rows.clear();
    for (const auto& p : result.rejected) rows.push_back(to_json(p));
    io::write_jsonl_atomic(out_dir / "rejected_pages.jsonl", rows);
    rows.clear();
    for (const auto& d : result.documents) rows.push_back(to_json(d));
    io::write_jsonl_atomic(out_dir / "documents.jsonl", rows);
    nlohmann::json stats = to_json(result.stats);
    stats["warnings"] = result.warnings;
    stats["errors"] = result.errors;
    io::write_json_atomic(out_dir / "ingest_stats.json", stats);
}

std::vector<PageText> read_pages(const fs::path& pages_jsonl) {
    std::vector<PageText> out;
    io::for_each_jsonl(pages_jsonl, [&](std::size_t, const nlohmann::json& j) {
        out.push_back({j.at("doc_id").get<std::string>(), j.at("page_no").get<int>(), j.value("score", 0.0),
                       j.at("text").get<std::string>()});
    });
    return out;
}

std::vector<DocumentMeta> read_documents(const fs::path& documents_jsonl) {
    std::vector<DocumentMeta> out;
    io::for_each_jsonl(documents_jsonl,
                       [&](std::size_t, const nlohmann::json& j) { out.push_back(document_from_json(j)); });
    return out;
}

}  // namespace landreuse::ocr
