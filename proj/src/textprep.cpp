#include "landreuse/textprep.hpp"

#include <cstdio>

#include "landreuse/error.hpp"
#include "landreuse/io.hpp"
#include "landreuse/utf8.hpp"

namespace landreuse::textprep {

namespace fs = std::filesystem;

std::string_view to_string(RejectionCode code) {
    switch (code) {
        case RejectionCode::special_chars: return "special_chars";
        case RejectionCode::lowercase_start: return "lowercase_start";
        case RejectionCode::no_terminal_punct: return "no_terminal_punct";
        case RejectionCode::too_short: return "too_short";
        case RejectionCode::too_long: return "too_long";
    }
    return "unknown";
}

Rules Rules::from_json(const nlohmann::json& j) {
    Rules r;
    if (j.contains("max_special_ratio")) r.max_special_ratio = j.at("max_special_ratio").get<double>();
    if (j.contains("min_tokens")) r.min_tokens = j.at("min_tokens").get<std::size_t>();
    if (j.contains("max_tokens")) r.max_tokens = j.at("max_tokens").get<std::size_t>();
    if (j.contains("abbreviations")) r.abbreviations = j.at("abbreviations").get<std::vector<std::string>>();
    if (r.max_special_ratio < 0.0 || r.max_special_ratio > 1.0) throw Error("max_special_ratio must lie in [0,1]");
    if (r.min_tokens > r.max_tokens) throw Error("min_tokens exceeds max_tokens");
    return r;
}

Rules Rules::load(const fs::path& path) { return from_json(io::read_json(path)); }

nlohmann::json Rules::to_json() const {
    return {{"max_special_ratio", max_special_ratio},
            {"min_tokens", min_tokens},
            {"max_tokens", max_tokens},
            {"abbreviations", abbreviations}};
}

namespace {

bool is_inline_space(char32_t cp) { return cp == ' ' || cp == '\t' || cp == 0xA0; }

bool is_terminal(char32_t cp) { return cp == '.' || cp == '!' || cp == '?' || cp == ':'; }

bool is_quote(char32_t cp) { return cp == 0xAB || cp == 0xBB || (cp >= 0x2018 && cp <= 0x201E); }

bool is_closing(char32_t cp) { return cp == '"' || cp == '\'' || cp == ')' || cp == ']' || is_quote(cp); }

bool is_opening(char32_t cp) { return cp == '"' || cp == '\'' || cp == '(' || cp == '[' || is_quote(cp); }

bool is_allowed_punct(char32_t cp) {
    static constexpr std::u32string_view allowed = U".,;:!?()-/%§\"'";
    return allowed.find(cp) != std::u32string_view::npos || is_quote(cp);
}

std::u32string_view strip_closing(std::u32string_view tok) {
    while (!tok.empty() && is_closing(tok.back())) tok.remove_suffix(1);
    return tok;
}

bool ascii_iequals(std::u32string_view a, std::u32string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (utf8::to_lower(a[i]) != utf8::to_lower(b[i])) return false;
    }
    return true;
}

}  // namespace

std::string normalize_text(std::string_view raw) {
    const std::u32string in = utf8::decode(raw);

    // Word wraps: letter '-' [blanks] newline [blanks] lowercase letter.
    std::u32string joined;
    joined.reserve(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (in[i] == '-' && !joined.empty() && utf8::is_alpha(joined.back())) {
            std::size_t j = i + 1;
            while (j < in.size() && is_inline_space(in[j])) ++j;
            bool newline = false;
            if (j < in.size() && in[j] == '\r') ++j;
            if (j < in.size() && in[j] == '\n') {
                newline = true;
                ++j;
            }
            while (j < in.size() && is_inline_space(in[j])) ++j;
            if (newline && j < in.size() && utf8::is_lower(in[j])) {
                i = j - 1;
                continue;
            }
        }
        joined.push_back(in[i]);
    }

    std::u32string out;
    out.reserve(joined.size());
    for (char32_t cp : joined) {
        if (utf8::is_space(cp)) {
            if (!out.empty() && out.back() != ' ') out.push_back(' ');
        } else {
            out.push_back(cp);
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return utf8::encode(out);
}

std::vector<std::string> segment_sentences(std::string_view text, const Rules& rules) {
    std::vector<std::u32string> abbreviations;
    for (const auto& a : rules.abbreviations) abbreviations.push_back(utf8::decode(a));

    const std::u32string in = utf8::decode(text);
    std::vector<std::u32string_view> tokens;
    {
        std::size_t start = 0;
        for (std::size_t i = 0; i <= in.size(); ++i) {
            if (i == in.size() || in[i] == ' ') {
                if (i > start) tokens.emplace_back(in.data() + start, i - start);
                start = i + 1;
            }
        }
    }

    auto is_boundary = [&](std::size_t t) {
        const auto core = strip_closing(tokens[t]);
        if (core.empty() || !is_terminal(core.back())) return false;
        if (t + 1 == tokens.size()) return true;
        std::size_t run = core.size();
        while (run > 0 && is_terminal(core[run - 1])) --run;
        // Numeric context: no split between digits ("3. 4.").
        if (run > 0 && utf8::is_digit(core[run - 1]) && utf8::is_digit(tokens[t + 1].front())) return false;
        if (core.back() == '.') {
            auto word = core;
            while (!word.empty() && is_opening(word.front())) word.remove_prefix(1);
            for (const auto& a : abbreviations) {
                if (ascii_iequals(word, a)) return false;
            }
        }
        return true;
    };

    std::vector<std::string> out;
    std::u32string current;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (!current.empty()) current.push_back(' ');
        current.append(tokens[t]);
        if (is_boundary(t)) {
            out.push_back(utf8::encode(current));
            current.clear();
        }
    }
    if (!current.empty()) out.push_back(utf8::encode(current));
    return out;
}

std::optional<RejectionReason> check_sentence(std::string_view sentence, const Rules& rules) {
    const std::u32string cps = utf8::decode(sentence);
    char buf[128];

    std::size_t visible = 0;
    std::size_t special = 0;
    for (char32_t cp : cps) {
        if (utf8::is_space(cp)) continue;
        ++visible;
        if (!utf8::is_alnum(cp) && !is_allowed_punct(cp)) ++special;
    }
    const double ratio = visible ? static_cast<double>(special) / static_cast<double>(visible) : 0.0;
    if (ratio > rules.max_special_ratio) {
        std::snprintf(buf, sizeof buf, "special-character ratio %.3f > %.3f", ratio, rules.max_special_ratio);
        return RejectionReason{RejectionCode::special_chars, buf};
    }

    for (char32_t cp : cps) {
        if (!utf8::is_alpha(cp)) continue;
        if (utf8::is_lower(cp)) return RejectionReason{RejectionCode::lowercase_start, "first letter is lowercase"};
        break;
    }

    const auto core = strip_closing(cps);
    if (core.empty() || !is_terminal(core.back())) {
        return RejectionReason{RejectionCode::no_terminal_punct, "missing terminal punctuation"};
    }

    std::size_t tokens = 0;
    bool in_token = false;
    for (char32_t cp : cps) {
        const bool space = utf8::is_space(cp);
        if (!space && !in_token) ++tokens;
        in_token = !space;
    }
    if (tokens < rules.min_tokens) {
        return RejectionReason{RejectionCode::too_short,
                               std::to_string(tokens) + " tokens < " + std::to_string(rules.min_tokens)};
    }
    if (tokens > rules.max_tokens) {
        return RejectionReason{RejectionCode::too_long,
                               std::to_string(tokens) + " tokens > " + std::to_string(rules.max_tokens)};
    }
    return std::nullopt;
}

FilterOutcome filter_valid_sentences(std::span<const std::string> sentences, const Rules& rules) {
    FilterOutcome out;
    for (const auto& s : sentences) {
        if (auto reason = check_sentence(s, rules)) {
            out.rejected.emplace_back(s, std::move(*reason));
        } else {
            out.kept.push_back(s);
        }
    }
    return out;
}

std::string make_sentence_id(std::string_view doc_id, int page_no, std::size_t index) {
    return std::string(doc_id) + ":p" + std::to_string(page_no) + ":s" + std::to_string(index);
}

PageOutcome prepare_page(const ocr::PageText& page, const Rules& rules) {
    PageOutcome out;
    const auto sentences = segment_sentences(normalize_text(page.text), rules);
    for (std::size_t k = 0; k < sentences.size(); ++k) {
        SentenceRecord rec{make_sentence_id(page.doc_id, page.page_no, k), page.doc_id, page.page_no, sentences[k],
                           page.score};
        if (auto reason = check_sentence(rec.text, rules)) {
            out.rejected.emplace_back(std::move(rec), std::move(*reason));
        } else {
            out.kept.push_back(std::move(rec));
        }
    }
    return out;
}

nlohmann::json to_json(const SentenceRecord& s) {
    return {{"sentence_id", s.sentence_id},
            {"doc_id", s.doc_id},
            {"page_no", s.page_no},
            {"text", s.text},
            {"ocr_score", s.ocr_score}};
}

SentenceRecord sentence_from_json(const nlohmann::json& j) {
    SentenceRecord s;
    s.sentence_id = j.at("sentence_id").get<std::string>();
    s.doc_id = j.value("doc_id", std::string{});
    s.page_no = j.value("page_no", 0);
    s.text = j.at("text").get<std::string>();
    s.ocr_score = j.value("ocr_score", 0.0);
    return s;
}

std::vector<SentenceRecord> read_sentences(const fs::path& path) {
    std::vector<SentenceRecord> out;
    io::for_each_jsonl(path, [&](std::size_t, const nlohmann::json& j) { out.push_back(sentence_from_json(j)); });
    return out;
}

void write_sentences(const fs::path& path, std::span<const SentenceRecord> sentences) {
    std::vector<nlohmann::json> rows;
    rows.reserve(sentences.size());
    for (const auto& s : sentences) rows.push_back(to_json(s));
    io::write_jsonl_atomic(path, rows);
}

}  // namespace landreuse::textprep
