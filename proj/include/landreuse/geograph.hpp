#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "landreuse/geometry.hpp"
#include "landreuse/labels.hpp"
#include "landreuse/ocr_ingest.hpp"

namespace landreuse::geo {

struct GeoFeature {
    std::string area_id;
    std::string category;
    Geometry geometry;
    nlohmann::json properties = nlohmann::json::object();
};

struct Isoband {
    Geometry geometry;  // polygon or multipolygon
    double band_value = 0.0;  // precipitation, mm/h
};

std::vector<GeoFeature> read_features(const std::filesystem::path& geojson);
std::vector<GeoFeature> features_from_geojson(const nlohmann::json& collection);
nlohmann::json features_to_geojson(std::span<const GeoFeature> features);

std::vector<Isoband> read_isobands(const std::filesystem::path& geojson);
std::vector<Isoband> isobands_from_geojson(const nlohmann::json& collection);
nlohmann::json isobands_to_geojson(std::span<const Isoband> bands);

enum class RestrictionType { prohibition, requirement };
std::string_view to_string(RestrictionType t);
RestrictionType parse_restriction_type(std::string_view s);

// One restriction-bearing sentence as produced by the classifiers.
struct ClassifiedSentence {
    std::string sentence_id;
    std::string doc_id;
    RestrictionType restriction_type = RestrictionType::prohibition;
    MultiHot topics = MultiHot(kTopicCount, 0);
    double confidence = 0.0;
    std::string text;
};

inline constexpr std::size_t kGenericTopic = kTopicCount;  // topic node index of the generic node

struct RestrictionEdge {
    std::size_t topic = 0;  // 0..6 schema topics, kGenericTopic for the generic node
    std::size_t doc = 0;    // index into Graph::documents()
    std::string sentence_id;
    std::string sentence_text;
    RestrictionType restriction_type = RestrictionType::prohibition;
    double confidence = 0.0;
};

struct AreaDocEdge {
    std::size_t doc = 0;
    std::size_t area = 0;
};

struct RestrictionEntry {
    std::string doc_id;
    std::string document_title;
    std::string sentence_id;
    std::string sentence_text;
    std::string topic;
    double confidence = 0.0;
};

struct GroupedRestrictions {
    std::vector<RestrictionEntry> prohibitions;
    std::vector<RestrictionEntry> requirements;
};

nlohmann::json to_json(const GroupedRestrictions& g);

// Topic node name for an index ("generic" for the generic node).
std::string topic_name(std::size_t topic);
// Inverse of topic_name; throws NotFound for unknown names.
std::size_t parse_topic(std::string_view name);

// Document/area/topic graph. Immutable after construction.
class Graph {
public:
    // Throws Error listing every classified sentence whose doc_id is unknown.
    // Area ids in document meta that match no feature are skipped and reported
    // through warnings().
    static Graph build(std::vector<ocr::DocumentMeta> docs, std::vector<GeoFeature> areas,
                       std::span<const ClassifiedSentence> classified);

    const std::vector<ocr::DocumentMeta>& documents() const { return docs_; }
    const std::vector<GeoFeature>& areas() const { return areas_; }
    const std::vector<RestrictionEdge>& restriction_edges() const { return edges_; }
    const std::vector<AreaDocEdge>& area_doc_edges() const { return area_docs_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    std::optional<std::size_t> find_area(std::string_view area_id) const;
    std::optional<std::size_t> find_document(std::string_view doc_id) const;
    const GeoFeature& area(std::string_view area_id) const;  // throws NotFound

    // Documents linked to an area, ascending doc index.
    const std::vector<std::size_t>& documents_of_area(std::size_t area) const { return area_to_docs_.at(area); }
    const std::vector<std::size_t>& areas_of_document(std::size_t doc) const { return doc_to_areas_.at(doc); }
    const std::vector<std::size_t>& edges_of_document(std::size_t doc) const { return doc_to_edges_.at(doc); }
    const std::vector<std::size_t>& edges_of_topic(std::size_t topic) const { return topic_to_edges_.at(topic); }

    // Node and edge listing as JSON, plus the inputs needed to reload.
    nlohmann::json dump() const;
    static Graph load(const nlohmann::json& j);

    // Content fingerprint used as the graph version.
    std::string version() const { return version_; }

private:
    void index();

    std::vector<ocr::DocumentMeta> docs_;
    std::vector<GeoFeature> areas_;
    std::vector<RestrictionEdge> edges_;
    std::vector<AreaDocEdge> area_docs_;
    std::vector<std::string> warnings_;

    std::map<std::string, std::size_t, std::less<>> area_index_;
    std::map<std::string, std::size_t, std::less<>> doc_index_;
    std::vector<std::vector<std::size_t>> area_to_docs_;
    std::vector<std::vector<std::size_t>> doc_to_areas_;
    std::vector<std::vector<std::size_t>> doc_to_edges_;
    std::vector<std::vector<std::size_t>> topic_to_edges_;
    std::string version_;
};

// Restrictions of all documents linked to the area, grouped by type and
// sorted by confidence descending (ties keep edge order).
GroupedRestrictions restrictions_by_area(const Graph& graph, std::string_view area_id);

// Areas with at least one restriction edge under the topic, sorted by id.
std::vector<std::string> similar_areas(const Graph& graph, std::string_view topic);

// Band values of every isoband overlapping the area, descending.
std::vector<double> weather_overlay(const Graph& graph, std::string_view area_id, std::span<const Isoband> isobands);

}  // namespace landreuse::geo
