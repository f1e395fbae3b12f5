#include "landreuse/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "landreuse/error.hpp"
#include "landreuse/io.hpp"
#include "landreuse/random.hpp"
#include "landreuse/utf8.hpp"

namespace landreuse::bootstrap {

namespace fs = std::filesystem;

KeywordTable KeywordTable::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error("keyword table must be a JSON object");
    const auto names = all_label_names();
    KeywordTable t;
    t.keywords_.resize(names.size());
    for (const auto& [key, value] : j.items()) {
        const auto it = std::find(names.begin(), names.end(), key);
        if (it == names.end()) throw Error("keyword table: unknown label '" + key + "'");
        auto& dst = t.keywords_[static_cast<std::size_t>(it - names.begin())];
        for (const auto& kw : value) {
            auto lowered = utf8::to_lower(kw.get<std::string>());
            if (!lowered.empty()) dst.push_back(std::move(lowered));
        }
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (t.keywords_[i].empty()) throw Error("keyword table: label '" + names[i] + "' has no keywords");
    }
    return t;
}

KeywordTable KeywordTable::load(const fs::path& path) { return from_json(io::read_json(path)); }

KeywordTable KeywordTable::defaults() {
    return from_json({
        {"Prohibition", {"verboten", "nicht gestattet", "nicht erlaubt", "untersagt", "unbefugt", "darf nicht"}},
        {"Requirement", {"müssen", "muss", "darf", "nur", "maximal", "beachten"}},
        {"Weather",
         {"Nebel", "Wetter", "Sturm", "Starkniederschlag", "Frost", "Trockenheit", "Regen", "Schnee", "Temperatur"}},
        {"Construction", {"Bebauung", "überbauung", "errichten", "Fenster", "Mauer"}},
        {"Geotechnics", {"geotechnisch", "Gelände", "Risse", "Absenkung", "Boden", "Sohle"}},
        {"RestrictedArea", {"Aufenthalt", "Uferseitig", "betreten", "befahren", "anlegen"}},
        {"Planting", {"Bäume", "Baum", "Pflanzen", "fällen", "forst"}},
        {"Environment", {"Nester", "Arten", "Umwelt", "geschützt"}},
        {"Disposal", {"lager", "entsorg", "abfall", "verbringen", "verklappen"}},
    });
}

nlohmann::json KeywordTable::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    const auto names = all_label_names();
    for (std::size_t i = 0; i < keywords_.size(); ++i) j[names[i]] = keywords_[i];
    return j;
}

std::size_t keyword_hits(std::string_view lowered, const KeywordTable& table, std::size_t combined_label) {
    std::size_t hits = 0;
    for (const auto& kw : table.keywords(combined_label)) {
        if (lowered.find(kw) != std::string_view::npos) ++hits;
    }
    return hits;
}

namespace {

void match_lowered(std::string_view lowered, const KeywordTable& table, LabelSet& out) {
    for (std::size_t l = 0; l < kAllLabelCount; ++l) {
        bool hit = false;
        for (const auto& kw : table.keywords(l)) {
            if (lowered.find(kw) != std::string_view::npos) {
                hit = true;
                break;
            }
        }
        if (l < kRestrictionCount) {
            out.restrictions[l] = hit;
        } else {
            out.topics[l - kRestrictionCount] = hit;
        }
    }
}

}  // namespace

LabelSet match_keywords(std::string_view sentence, const KeywordTable& table) {
    LabelSet out;
    match_lowered(utf8::to_lower(sentence), table, out);
    return out;
}

std::size_t topic_quota(std::size_t matched, const CandidatePoolConfig& config) {
    if (matched > config.half_rule_limit) return std::min(config.topic_cap, matched);
    return matched / 2;
}

CandidatePool build_candidate_pool(std::span<const std::string> sentences, const KeywordTable& table,
                                   std::uint64_t seed, const CandidatePoolConfig& config) {
    if (sentences.size() < config.target_size) {
        throw Error("corpus has " + std::to_string(sentences.size()) + " sentences, " +
                    std::to_string(config.target_size - sentences.size()) + " short of the target size " +
                    std::to_string(config.target_size));
    }
    Rng rng(seed);
    CandidatePool pool;

    std::vector<std::string> lowered;
    lowered.reserve(sentences.size());
    for (const auto& s : sentences) lowered.push_back(utf8::to_lower(s));

    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < lowered.size(); ++i) {
        LabelSet m;
        match_lowered(lowered[i], table, m);
        if (std::any_of(m.restrictions.begin(), m.restrictions.end(), [](auto v) { return v != 0; })) {
            candidates.push_back(i);
        }
    }
    pool.restriction_candidates = candidates.size();

    std::vector<char> taken(sentences.size(), 0);
    for (std::size_t t = 0; t < kTopicCount; ++t) {
        const std::size_t label = kRestrictionCount + t;
        std::vector<std::pair<std::size_t, std::size_t>> matched;  // (hits, index)
        for (auto i : candidates) {
            if (auto h = keyword_hits(lowered[i], table, label)) matched.emplace_back(h, i);
        }
        // Most distinct keyword hits first; ties in seeded random order.
        rng.shuffle(matched);
        std::stable_sort(matched.begin(), matched.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

        TopicSelection sel{std::string(kTopicLabels[t]), matched.size(), topic_quota(matched.size(), config), 0};
        for (const auto& [hits, idx] : matched) {
            if (sel.selected == sel.quota) break;
            if (taken[idx]) continue;
            taken[idx] = 1;
            pool.selected.push_back(idx);
            ++sel.selected;
        }
        pool.topic_selected += sel.selected;
        pool.topics.push_back(std::move(sel));
    }

    if (pool.topic_selected > config.target_size ||
        config.target_size - pool.topic_selected < config.min_random_fill) {
        throw Error("topic selection of " + std::to_string(pool.topic_selected) + " leaves fewer than " +
                    std::to_string(config.min_random_fill) + " random sentences for target size " +
                    std::to_string(config.target_size));
    }
    std::vector<std::size_t> rest;
    rest.reserve(sentences.size());
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        if (!taken[i]) rest.push_back(i);
    }
    const std::size_t fill = config.target_size - pool.topic_selected;
    for (auto pos : rng.sample_indices(rest.size(), fill)) pool.selected.push_back(rest[pos]);
    pool.random_fill = fill;
    return pool;
}

LabelSet majority_vote(std::span<const AnnotationRecord> records) {
    if (records.empty()) throw Error("majority vote needs at least one annotation");
    std::vector<std::size_t> votes(kAllLabelCount, 0);
    for (const auto& r : records) {
        if (r.sentence_id != records.front().sentence_id) {
            throw Error("majority vote over mixed sentences " + records.front().sentence_id + " and " + r.sentence_id);
        }
        const auto hot = r.labels.combined();
        for (std::size_t l = 0; l < kAllLabelCount; ++l) votes[l] += hot[l] ? 1 : 0;
    }
    LabelSet out;
    for (std::size_t l = 0; l < kAllLabelCount; ++l) {
        const std::uint8_t v = 2 * votes[l] > records.size() ? 1 : 0;
        if (l < kRestrictionCount) {
            out.restrictions[l] = v;
        } else {
            out.topics[l - kRestrictionCount] = v;
        }
    }
    return out;
}

std::map<std::string, std::vector<AnnotationRecord>> group_annotations(std::span<const AnnotationRecord> records) {
    std::map<std::string, std::vector<AnnotationRecord>> out;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& r : records) {
        if (!seen.emplace(r.sentence_id, r.annotator_id).second) {
            throw Error("duplicate annotation by " + r.annotator_id + " for " + r.sentence_id);
        }
        out[r.sentence_id].push_back(r);
    }
    return out;
}

nlohmann::json to_json(const AnnotationRecord& r) {
    auto j = landreuse::to_json(r.labels);
    j["sentence_id"] = r.sentence_id;
    j["annotator_id"] = r.annotator_id;
    return j;
}

AnnotationRecord annotation_from_json(const nlohmann::json& j) {
    return {j.at("sentence_id").get<std::string>(), j.at("annotator_id").get<std::string>(), label_set_from_json(j)};
}

std::vector<AnnotationRecord> read_annotations(const fs::path& path) {
    std::vector<AnnotationRecord> out;
    io::for_each_jsonl(path, [&](std::size_t, const nlohmann::json& j) { out.push_back(annotation_from_json(j)); });
    return out;
}

std::vector<std::size_t> split_sizes(std::size_t n, std::span<const double> ratios) {
    if (ratios.empty()) throw Error("no split ratios given");
    double total = 0.0;
    for (double r : ratios) {
        if (!(r >= 0.0) || !std::isfinite(r)) throw Error("split ratios must be finite and non-negative");
        total += r;
    }
    if (total <= 0.0) throw Error("split ratios sum to zero");
    std::vector<std::size_t> sizes(ratios.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t j = 0; j < ratios.size(); ++j) {
        const double exact = static_cast<double>(n) * ratios[j] / total;
        sizes[j] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        assigned += sizes[j];
        remainders.emplace_back(exact - static_cast<double>(sizes[j]), j);
    }
    std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[remainders[k % remainders.size()].second];
    return sizes;
}

std::vector<std::vector<std::size_t>> stratified_split(std::span<const MultiHot> labels, std::span<const double> ratios,
                                                       std::uint64_t seed) {
    const std::size_t n = labels.size();
    if (n == 0) throw Error("cannot split an empty dataset");
    const std::size_t width = labels.front().size();
    for (const auto& row : labels) {
        if (row.size() != width) throw Error("label rows differ in width");
    }
    const auto sizes = split_sizes(n, ratios);
    const std::size_t k = sizes.size();
    double ratio_total = 0.0;
    for (double r : ratios) ratio_total += r;

    Rng rng(seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    std::vector<long long> capacity(sizes.begin(), sizes.end());
    std::vector<std::size_t> label_total(width, 0);
    for (const auto& row : labels)
        for (std::size_t l = 0; l < width; ++l) label_total[l] += row[l] ? 1 : 0;
    // desired[j][l]: examples of label l still wanted by split j.
    std::vector<std::vector<double>> desired(k, std::vector<double>(width));
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t l = 0; l < width; ++l)
            desired[j][l] = static_cast<double>(label_total[l]) * ratios[j] / ratio_total;

    std::vector<std::size_t> remaining = label_total;
    std::vector<int> split_of(n, -1);
    std::vector<std::vector<std::size_t>> out(k);

    constexpr double eps = 1e-9;
    auto pick = [&](auto&& primary) {
        std::vector<std::size_t> best;
        for (std::size_t j = 0; j < k; ++j) {
            if (capacity[j] <= 0) continue;
            if (best.empty()) {
                best = {j};
                continue;
            }
            const double a = primary(j), b = primary(best.front());
            if (a > b + eps) {
                best = {j};
            } else if (a > b - eps) {
                if (capacity[j] > capacity[best.front()]) {
                    best = {j};
                } else if (capacity[j] == capacity[best.front()]) {
                    best.push_back(j);
                }
            }
        }
        return best.size() == 1 ? best.front() : best[rng.index(best.size())];
    };
    auto assign = [&](std::size_t e, std::size_t j) {
        split_of[e] = static_cast<int>(j);
        out[j].push_back(e);
        --capacity[j];
        for (std::size_t l = 0; l < width; ++l) {
            if (labels[e][l]) {
                desired[j][l] -= 1.0;
                --remaining[l];
            }
        }
    };

    while (true) {
        std::size_t label = width;
        for (std::size_t l = 0; l < width; ++l) {
            if (remaining[l] > 0 && (label == width || remaining[l] < remaining[label])) label = l;
        }
        if (label == width) break;
        for (auto e : order) {
            if (split_of[e] >= 0 || !labels[e][label]) continue;
            assign(e, pick([&](std::size_t j) { return desired[j][label]; }));
        }
    }
    for (auto e : order) {
        if (split_of[e] < 0) assign(e, pick([](std::size_t) { return 0.0; }));
    }
    for (auto& s : out) std::sort(s.begin(), s.end());
    return out;
}

DatasetSplit split_dataset(std::span<const LabeledSentence> dataset, std::span<const double> ratios,
                           std::uint64_t seed) {
    if (ratios.size() != 3) throw Error("dataset split needs three ratios (train, validation, test)");
    std::vector<MultiHot> rows;
    rows.reserve(dataset.size());
    for (const auto& s : dataset) rows.push_back(s.labels.combined());
    const auto parts = stratified_split(rows, ratios, seed);
    DatasetSplit out;
    for (auto i : parts[0]) out.train.push_back(dataset[i]);
    for (auto i : parts[1]) out.validation.push_back(dataset[i]);
    for (auto i : parts[2]) out.test.push_back(dataset[i]);
    return out;
}

nlohmann::json to_json(const LabeledSentence& s) {
    auto j = landreuse::to_json(s.labels);
    j["sentence_id"] = s.sentence_id;
    j["text"] = s.text;
    return j;
}

LabeledSentence labeled_from_json(const nlohmann::json& j) {
    return {j.at("sentence_id").get<std::string>(), j.value("text", std::string{}), label_set_from_json(j)};
}

std::vector<LabeledSentence> read_labeled(const fs::path& path) {
    std::vector<LabeledSentence> out;
    io::for_each_jsonl(path, [&](std::size_t, const nlohmann::json& j) { out.push_back(labeled_from_json(j)); });
    return out;
}

void write_labeled(const fs::path& path, std::span<const LabeledSentence> rows) {
    std::vector<nlohmann::json> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(to_json(r));
    io::write_jsonl_atomic(path, out);
}

}  // namespace landreuse::bootstrap
