#include "landreuse/report.hpp"

#include <cstdio>
#include <map>
#include <set>

#include "landreuse/error.hpp"

namespace landreuse::report {

namespace {

std::vector<std::uint8_t> column(std::span<const MultiHot> rows, std::size_t l) {
    std::vector<std::uint8_t> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.at(l));
    return out;
}

std::string fixed(double v, int decimals = 2) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::string pad_left(const std::string& s, std::size_t w) { return s.size() >= w ? s : std::string(w - s.size(), ' ') + s; }
std::string pad_right(const std::string& s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }

}  // namespace

SpaceTable compare(LabelSpace space, std::span<const MultiHot> gold, std::span<const MultiHot> baseline,
                   std::span<const NamedPredictions> challengers) {
    const auto names = label_names(space);
    SpaceTable t;
    t.space = space;
    t.baseline = metrics::prf1(gold, baseline, names);
    for (const auto& ch : challengers) {
        ChallengerColumn col;
        col.name = ch.name;
        col.scores = metrics::prf1(gold, ch.predictions, names);
        for (std::size_t l = 0; l < names.size(); ++l) {
            col.mcnemar.push_back(
                metrics::mcnemar(column(gold, l), column(baseline, l), column(ch.predictions, l), names[l]));
        }
        t.challengers.push_back(std::move(col));
    }
    return t;
}

std::string significance_marker(const metrics::McNemarResult& r) {
    if (r.significant_01) return "**";
    if (r.significant_05) return "*";
    return "";
}

std::string render_table(std::span<const SpaceTable> tables) {
    const std::size_t label_w = 16, cell_w = 9;
    std::size_t columns = 0;
    for (const auto& t : tables) columns = std::max(columns, t.challengers.size());

    std::string out;
    auto rule = [&](char c) { out += std::string(label_w + cell_w * (columns + 2), c) + "\n"; };
    if (tables.empty()) return out;

    const auto& first = tables.front();
    out += pad_right("", label_w) + pad_left("F1 B.", cell_w);
    out += "   F1 AL\n";
    out += pad_right("LABEL", label_w) + pad_left("", cell_w);
    for (const auto& ch : first.challengers) out += pad_left(ch.name, cell_w);
    out += pad_left("Avg.", cell_w) + "\n";
    rule('=');

    for (const auto& t : tables) {
        const std::string title = t.space == LabelSpace::restrictions ? "Restrictions" : "Topics";
        out += title + "\n";
        rule('-');
        auto row = [&](const std::string& name, double base, auto&& cell_value, auto&& cell_marker) {
            out += pad_right(name, label_w) + pad_left(fixed(base), cell_w);
            double sum = 0.0;
            for (std::size_t c = 0; c < t.challengers.size(); ++c) {
                const double v = cell_value(t.challengers[c]);
                sum += v;
                out += pad_left(fixed(v) + cell_marker(t.challengers[c]), cell_w);
            }
            if (!t.challengers.empty()) {
                out += std::string(cell_w * (columns - t.challengers.size()), ' ');
                out += pad_left(fixed(sum / static_cast<double>(t.challengers.size())), cell_w);
            }
            out += "\n";
        };
        for (std::size_t l = 0; l < t.baseline.labels.size(); ++l) {
            row(t.baseline.labels[l].label, t.baseline.labels[l].f1,
                [&](const ChallengerColumn& c) { return c.scores.labels[l].f1; },
                [&](const ChallengerColumn& c) { return significance_marker(c.mcnemar[l]); });
        }
        rule('-');
        auto none = [](const ChallengerColumn&) { return std::string(); };
        row("micro", t.baseline.micro_f1, [](const ChallengerColumn& c) { return c.scores.micro_f1; }, none);
        row("macro", t.baseline.macro_f1, [](const ChallengerColumn& c) { return c.scores.macro_f1; }, none);
        rule('=');
    }
    out += "McNemar against the baseline per label: * p<0.05, ** p<0.01\n";
    return out;
}

nlohmann::json to_json(const SpaceTable& table) {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : table.challengers) {
        nlohmann::json tests = nlohmann::json::array();
        for (const auto& m : c.mcnemar) {
            auto j = m.to_json();
            j["marker"] = significance_marker(m);
            tests.push_back(j);
        }
        cols.push_back({{"name", c.name}, {"scores", c.scores.to_json()}, {"mcnemar", tests}});
    }
    return {{"space", to_string(table.space)}, {"baseline", table.baseline.to_json()}, {"challengers", cols}};
}

std::vector<AgreementRow> agreement(std::span<const bootstrap::AnnotationRecord> records) {
    const auto grouped = bootstrap::group_annotations(records);
    std::set<std::string> annotator_set;
    for (const auto& r : records) annotator_set.insert(r.annotator_id);
    const std::vector<std::string> annotators(annotator_set.begin(), annotator_set.end());

    std::vector<AgreementRow> rows;
    const auto names = all_label_names();
    for (std::size_t l = 0; l < names.size(); ++l) {
        metrics::RatingMatrix full, complete;
        for (const auto& [sid, recs] : grouped) {
            std::vector<int> unit(annotators.size(), metrics::kMissing);
            for (const auto& r : recs) {
                const auto pos = static_cast<std::size_t>(
                    std::lower_bound(annotators.begin(), annotators.end(), r.annotator_id) - annotators.begin());
                unit[pos] = r.labels.combined().at(l);
            }
            if (recs.size() == annotators.size()) complete.push_back(unit);
            full.push_back(std::move(unit));
        }
        AgreementRow row;
        row.label = names[l];
        row.units = full.size();
        try {
            row.alpha = metrics::krippendorff_alpha(full);
        } catch (const Error& e) {
            row.note = e.what();
        }
        try {
            row.kappa = metrics::fleiss_kappa(complete);
        } catch (const Error& e) {
            if (row.note.empty()) row.note = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string render_agreement(std::span<const AgreementRow> rows) {
    std::string out = pad_right("Label", 16) + pad_left("alpha", 10) + pad_left("kappa", 10) + "\n";
    out += std::string(36, '-') + "\n";
    for (const auto& r : rows) {
        out += pad_right(r.label, 16) + pad_left(r.alpha ? fixed(*r.alpha, 4) : "n/a", 10) +
               pad_left(r.kappa ? fixed(*r.kappa, 4) : "n/a", 10) + "\n";
    }
    return out;
}

nlohmann::json to_json(std::span<const AgreementRow> rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json j = {{"label", r.label}, {"units", r.units}};
        j["alpha"] = r.alpha ? nlohmann::json(*r.alpha) : nlohmann::json();
        j["kappa"] = r.kappa ? nlohmann::json(*r.kappa) : nlohmann::json();
        if (!r.note.empty()) j["note"] = r.note;
        arr.push_back(j);
    }
    return arr;
}

}  // namespace landreuse::report
