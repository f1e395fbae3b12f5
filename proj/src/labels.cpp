#include "landreuse/labels.hpp"

#include "landreuse/error.hpp"

namespace landreuse {

std::string_view to_string(LabelSpace space) {
    return space == LabelSpace::restrictions ? "restrictions" : "topics";
}

LabelSpace parse_label_space(std::string_view name) {
    if (name == "restrictions") return LabelSpace::restrictions;
    if (name == "topics") return LabelSpace::topics;
    throw Error("unknown label space '" + std::string(name) + "' (expected restrictions|topics)");
}

std::size_t label_count(LabelSpace space) {
    return space == LabelSpace::restrictions ? kRestrictionCount : kTopicCount;
}

std::vector<std::string> label_names(LabelSpace space) {
    std::vector<std::string> out;
    if (space == LabelSpace::restrictions) {
        for (auto n : kRestrictionLabels) out.emplace_back(n);
    } else {
        for (auto n : kTopicLabels) out.emplace_back(n);
    }
    return out;
}

std::vector<std::string> all_label_names() {
    auto out = label_names(LabelSpace::restrictions);
    for (auto& n : label_names(LabelSpace::topics)) out.push_back(std::move(n));
    return out;
}

std::optional<std::size_t> label_index(LabelSpace space, std::string_view name) {
    const auto names = label_names(space);
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return i;
    }
    return std::nullopt;
}

MultiHot LabelSet::combined() const {
    MultiHot out = restrictions;
    out.insert(out.end(), topics.begin(), topics.end());
    return out;
}

bool LabelSet::empty() const {
    for (auto v : restrictions)
        if (v) return false;
    for (auto v : topics)
        if (v) return false;
    return true;
}

nlohmann::json names_to_json(LabelSpace space, const MultiHot& hot) {
    const auto names = label_names(space);
    auto arr = nlohmann::json::array();
    for (std::size_t i = 0; i < hot.size() && i < names.size(); ++i) {
        if (hot[i]) arr.push_back(names[i]);
    }
    return arr;
}

MultiHot names_from_json(LabelSpace space, const nlohmann::json& names) {
    MultiHot hot(label_count(space), 0);
    if (names.is_null()) return hot;
    if (!names.is_array()) throw Error("label list must be a JSON array");
    for (const auto& n : names) {
        if (!n.is_string()) throw Error("label names must be strings");
        const auto idx = label_index(space, n.get<std::string>());
        if (!idx) {
            throw Error("label '" + n.get<std::string>() + "' is not in the " + std::string(to_string(space)) +
                        " space");
        }
        hot[*idx] = 1;
    }
    return hot;
}

nlohmann::json to_json(const LabelSet& labels) {
    return {{"restrictions", names_to_json(LabelSpace::restrictions, labels.restrictions)},
            {"topics", names_to_json(LabelSpace::topics, labels.topics)}};
}

LabelSet label_set_from_json(const nlohmann::json& j) {
    LabelSet out;
    if (j.contains("restrictions")) out.restrictions = names_from_json(LabelSpace::restrictions, j.at("restrictions"));
    if (j.contains("topics")) out.topics = names_from_json(LabelSpace::topics, j.at("topics"));
    return out;
}

}  // namespace landreuse
