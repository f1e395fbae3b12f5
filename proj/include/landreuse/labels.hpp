#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace landreuse {

// Multi-hot vector over one label space; entries are 0 or 1.
using MultiHot = std::vector<std::uint8_t>;

enum class LabelSpace { restrictions, topics };

inline constexpr std::array<std::string_view, 2> kRestrictionLabels = {"Prohibition", "Requirement"};
inline constexpr std::array<std::string_view, 7> kTopicLabels = {
    "Weather", "Construction", "Geotechnics", "RestrictedArea", "Planting", "Environment", "Disposal"};

inline constexpr std::size_t kRestrictionCount = kRestrictionLabels.size();
inline constexpr std::size_t kTopicCount = kTopicLabels.size();
inline constexpr std::size_t kAllLabelCount = kRestrictionCount + kTopicCount;

std::string_view to_string(LabelSpace space);
LabelSpace parse_label_space(std::string_view name);
std::size_t label_count(LabelSpace space);
std::vector<std::string> label_names(LabelSpace space);

// All nine labels, restrictions first, in schema order.
std::vector<std::string> all_label_names();

// Index into the given space, or nullopt when the name is not in it.
std::optional<std::size_t> label_index(LabelSpace space, std::string_view name);

struct LabelSet {
    MultiHot restrictions = MultiHot(kRestrictionCount, 0);
    MultiHot topics = MultiHot(kTopicCount, 0);

    const MultiHot& space(LabelSpace s) const { return s == LabelSpace::restrictions ? restrictions : topics; }
    MultiHot& space(LabelSpace s) { return s == LabelSpace::restrictions ? restrictions : topics; }

    // Concatenation restrictions ++ topics.
    MultiHot combined() const;
    bool empty() const;

    friend bool operator==(const LabelSet&, const LabelSet&) = default;
};

// JSON form is {"restrictions": [names...], "topics": [names...]}.
nlohmann::json names_to_json(LabelSpace space, const MultiHot& hot);
MultiHot names_from_json(LabelSpace space, const nlohmann::json& names);
nlohmann::json to_json(const LabelSet& labels);
LabelSet label_set_from_json(const nlohmann::json& j);

}  // namespace landreuse
