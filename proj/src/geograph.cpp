#include "landreuse/geograph.hpp"

#include <algorithm>
#include <set>

#include "landreuse/error.hpp"
#include "landreuse/io.hpp"

namespace landreuse::geo {

namespace fs = std::filesystem;

std::vector<GeoFeature> features_from_geojson(const nlohmann::json& collection) {
    if (collection.value("type", std::string{}) != "FeatureCollection") {
        throw Error("expected a GeoJSON FeatureCollection");
    }
    std::vector<GeoFeature> out;
    std::set<std::string> seen;
    for (const auto& f : collection.at("features")) {
        GeoFeature feat;
        feat.properties = f.value("properties", nlohmann::json::object());
        if (!feat.properties.contains("area_id")) throw Error("feature without area_id property");
        feat.area_id = feat.properties.at("area_id").get<std::string>();
        feat.category = feat.properties.value("category", std::string{});
        if (!seen.insert(feat.area_id).second) throw Error("duplicate area_id " + feat.area_id);
        try {
            feat.geometry = geometry_from_geojson(f.at("geometry"));
        } catch (const Error& e) {
            throw Error("area " + feat.area_id + ": " + e.what());
        }
        out.push_back(std::move(feat));
    }
    return out;
}

std::vector<GeoFeature> read_features(const fs::path& geojson) { return features_from_geojson(io::read_json(geojson)); }

nlohmann::json features_to_geojson(std::span<const GeoFeature> features) {
    auto arr = nlohmann::json::array();
    for (const auto& f : features) {
        auto props = f.properties;
        props["area_id"] = f.area_id;
        props["category"] = f.category;
        arr.push_back({{"type", "Feature"}, {"properties", props}, {"geometry", to_geojson(f.geometry)}});
    }
    return {{"type", "FeatureCollection"}, {"features", arr}};
}

std::vector<Isoband> isobands_from_geojson(const nlohmann::json& collection) {
    if (collection.value("type", std::string{}) != "FeatureCollection") {
        throw Error("expected a GeoJSON FeatureCollection of isobands");
    }
    std::vector<Isoband> out;
    for (const auto& f : collection.at("features")) {
        const auto& props = f.at("properties");
        if (!props.contains("band_value")) throw Error("isoband without band_value property");
        Isoband band{geometry_from_geojson(f.at("geometry")), props.at("band_value").get<double>()};
        if (band.geometry.index() < 2) throw Error("isoband geometry must be a polygon or multipolygon");
        out.push_back(std::move(band));
    }
    return out;
}

std::vector<Isoband> read_isobands(const fs::path& geojson) { return isobands_from_geojson(io::read_json(geojson)); }

nlohmann::json isobands_to_geojson(std::span<const Isoband> bands) {
    auto arr = nlohmann::json::array();
    for (const auto& b : bands) {
        arr.push_back({{"type", "Feature"},
                       {"properties", {{"band_value", b.band_value}}},
                       {"geometry", to_geojson(b.geometry)}});
    }
    return {{"type", "FeatureCollection"}, {"features", arr}};
}

std::string_view to_string(RestrictionType t) {
    return t == RestrictionType::prohibition ? "Prohibition" : "Requirement";
}

RestrictionType parse_restriction_type(std::string_view s) {
    if (s == "Prohibition") return RestrictionType::prohibition;
    if (s == "Requirement") return RestrictionType::requirement;
    throw Error("unknown restriction type '" + std::string(s) + "'");
}

std::string topic_name(std::size_t topic) {
    if (topic == kGenericTopic) return "generic";
    return std::string(kTopicLabels.at(topic));
}

std::size_t parse_topic(std::string_view name) {
    if (name == "generic") return kGenericTopic;
    if (auto idx = label_index(LabelSpace::topics, name)) return *idx;
    throw NotFound("unknown topic '" + std::string(name) + "'");
}

namespace {

nlohmann::json entry_json(const RestrictionEntry& e) {
    return {{"doc_id", e.doc_id},
            {"document_title", e.document_title},
            {"sentence_id", e.sentence_id},
            {"sentence", e.sentence_text},
            {"topic", e.topic},
            {"confidence", e.confidence}};
}

}  // namespace

nlohmann::json to_json(const GroupedRestrictions& g) {
    auto p = nlohmann::json::array();
    for (const auto& e : g.prohibitions) p.push_back(entry_json(e));
    auto r = nlohmann::json::array();
    for (const auto& e : g.requirements) r.push_back(entry_json(e));
    return {{"Prohibition", p}, {"Requirement", r}};
}

Graph Graph::build(std::vector<ocr::DocumentMeta> docs, std::vector<GeoFeature> areas,
                   std::span<const ClassifiedSentence> classified) {
    Graph g;
    g.docs_ = std::move(docs);
    g.areas_ = std::move(areas);
    for (std::size_t i = 0; i < g.docs_.size(); ++i) {
        if (!g.doc_index_.emplace(g.docs_[i].doc_id, i).second) throw Error("duplicate doc_id " + g.docs_[i].doc_id);
    }
    for (std::size_t i = 0; i < g.areas_.size(); ++i) {
        if (!g.area_index_.emplace(g.areas_[i].area_id, i).second) {
            throw Error("duplicate area_id " + g.areas_[i].area_id);
        }
    }

    std::vector<std::string> dangling;
    for (const auto& c : classified) {
        if (!g.doc_index_.count(c.doc_id)) dangling.push_back(c.sentence_id + " -> " + c.doc_id);
    }
    if (!dangling.empty()) {
        std::string msg = "classified sentences reference unknown documents:";
        for (const auto& d : dangling) msg += " " + d;
        throw Error(msg);
    }

    for (std::size_t d = 0; d < g.docs_.size(); ++d) {
        std::set<std::size_t> linked;
        for (const auto& area_id : g.docs_[d].area_ids) {
            auto it = g.area_index_.find(area_id);
            if (it == g.area_index_.end()) {
                g.warnings_.push_back("document " + g.docs_[d].doc_id + " references unknown area " + area_id);
                continue;
            }
            if (linked.insert(it->second).second) g.area_docs_.push_back({d, it->second});
        }
    }

    for (const auto& c : classified) {
        if (c.confidence < 0.0 || c.confidence > 1.0) {
            throw Error("confidence of " + c.sentence_id + " outside [0,1]");
        }
        if (c.topics.size() != kTopicCount) throw Error("topic vector of " + c.sentence_id + " has wrong length");
        const std::size_t doc = g.doc_index_.at(c.doc_id);
        bool any = false;
        for (std::size_t t = 0; t < kTopicCount; ++t) {
            if (!c.topics[t]) continue;
            any = true;
            g.edges_.push_back({t, doc, c.sentence_id, c.text, c.restriction_type, c.confidence});
        }
        if (!any) g.edges_.push_back({kGenericTopic, doc, c.sentence_id, c.text, c.restriction_type, c.confidence});
    }
    g.index();
    return g;
}

void Graph::index() {
    area_to_docs_.assign(areas_.size(), {});
    doc_to_areas_.assign(docs_.size(), {});
    doc_to_edges_.assign(docs_.size(), {});
    topic_to_edges_.assign(kTopicCount + 1, {});
    for (const auto& e : area_docs_) {
        area_to_docs_[e.area].push_back(e.doc);
        doc_to_areas_[e.doc].push_back(e.area);
    }
    for (auto& v : area_to_docs_) std::sort(v.begin(), v.end());
    for (auto& v : doc_to_areas_) std::sort(v.begin(), v.end());
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        doc_to_edges_[edges_[i].doc].push_back(i);
        topic_to_edges_[edges_[i].topic].push_back(i);
    }
    auto j = dump();
    j.erase("version");
    version_ = io::hex64(io::fnv1a(j.dump()));
}

std::optional<std::size_t> Graph::find_area(std::string_view area_id) const {
    auto it = area_index_.find(area_id);
    if (it == area_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> Graph::find_document(std::string_view doc_id) const {
    auto it = doc_index_.find(doc_id);
    if (it == doc_index_.end()) return std::nullopt;
    return it->second;
}

const GeoFeature& Graph::area(std::string_view area_id) const {
    auto idx = find_area(area_id);
    if (!idx) throw NotFound("unknown area '" + std::string(area_id) + "'");
    return areas_[*idx];
}

nlohmann::json Graph::dump() const {
    auto nodes = nlohmann::json::array();
    for (const auto& d : docs_) {
        nodes.push_back({{"id", "doc:" + d.doc_id},
                         {"kind", "document"},
                         {"doc_id", d.doc_id},
                         {"title", d.title},
                         {"region", d.region},
                         {"area_ids", d.area_ids}});
    }
    for (const auto& a : areas_) {
        nodes.push_back({{"id", "area:" + a.area_id},
                         {"kind", "area"},
                         {"area_id", a.area_id},
                         {"category", a.category},
                         {"properties", a.properties},
                         {"geometry", to_geojson(a.geometry)}});
    }
    for (std::size_t t = 0; t <= kTopicCount; ++t) {
        const auto name = topic_name(t);
        nodes.push_back({{"id", "topic:" + name},
                         {"kind", t == kGenericTopic ? "generic_topic" : "topic"},
                         {"label", name}});
    }
    auto edges = nlohmann::json::array();
    for (const auto& e : area_docs_) {
        edges.push_back({{"kind", "area_doc"},
                         {"from", "doc:" + docs_[e.doc].doc_id},
                         {"to", "area:" + areas_[e.area].area_id}});
    }
    for (const auto& e : edges_) {
        edges.push_back({{"kind", "restriction"},
                         {"from", "topic:" + topic_name(e.topic)},
                         {"to", "doc:" + docs_[e.doc].doc_id},
                         {"sentence_id", e.sentence_id},
                         {"sentence_text", e.sentence_text},
                         {"restriction_type", to_string(e.restriction_type)},
                         {"confidence", e.confidence}});
    }
    return {{"nodes", nodes}, {"edges", edges}, {"version", version_}};
}

Graph Graph::load(const nlohmann::json& j) {
    Graph g;
    for (const auto& n : j.at("nodes")) {
        const auto kind = n.at("kind").get<std::string>();
        if (kind == "document") {
            ocr::DocumentMeta d;
            d.doc_id = n.at("doc_id").get<std::string>();
            d.title = n.value("title", std::string{});
            d.region = n.value("region", std::string{});
            d.area_ids = n.value("area_ids", std::vector<std::string>{});
            g.doc_index_.emplace(d.doc_id, g.docs_.size());
            g.docs_.push_back(std::move(d));
        } else if (kind == "area") {
            GeoFeature a;
            a.area_id = n.at("area_id").get<std::string>();
            a.category = n.value("category", std::string{});
            a.properties = n.value("properties", nlohmann::json::object());
            a.geometry = geometry_from_geojson(n.at("geometry"));
            g.area_index_.emplace(a.area_id, g.areas_.size());
            g.areas_.push_back(std::move(a));
        }
    }
    auto strip = [](const std::string& id, std::string_view prefix) {
        if (id.rfind(prefix, 0) != 0) throw Error("graph dump: bad node reference " + id);
        return id.substr(prefix.size());
    };
    for (const auto& e : j.at("edges")) {
        const auto kind = e.at("kind").get<std::string>();
        if (kind == "area_doc") {
            const auto doc = g.find_document(strip(e.at("from").get<std::string>(), "doc:"));
            const auto area = g.find_area(strip(e.at("to").get<std::string>(), "area:"));
            if (!doc || !area) throw Error("graph dump: dangling area_doc edge");
            g.area_docs_.push_back({*doc, *area});
        } else if (kind == "restriction") {
            const auto doc = g.find_document(strip(e.at("to").get<std::string>(), "doc:"));
            if (!doc) throw Error("graph dump: dangling restriction edge");
            g.edges_.push_back({parse_topic(strip(e.at("from").get<std::string>(), "topic:")), *doc,
                                e.at("sentence_id").get<std::string>(), e.value("sentence_text", std::string{}),
                                parse_restriction_type(e.at("restriction_type").get<std::string>()),
                                e.at("confidence").get<double>()});
        }
    }
    g.index();
    return g;
}

GroupedRestrictions restrictions_by_area(const Graph& graph, std::string_view area_id) {
    const auto area = graph.find_area(area_id);
    if (!area) throw NotFound("unknown area '" + std::string(area_id) + "'");
    std::vector<std::size_t> edge_ids;
    for (auto doc : graph.documents_of_area(*area)) {
        const auto& e = graph.edges_of_document(doc);
        edge_ids.insert(edge_ids.end(), e.begin(), e.end());
    }
    std::sort(edge_ids.begin(), edge_ids.end());
    const auto& edges = graph.restriction_edges();
    std::stable_sort(edge_ids.begin(), edge_ids.end(),
                     [&](std::size_t a, std::size_t b) { return edges[a].confidence > edges[b].confidence; });

    GroupedRestrictions out;
    for (auto i : edge_ids) {
        const auto& e = edges[i];
        const auto& doc = graph.documents()[e.doc];
        RestrictionEntry entry{doc.doc_id, doc.title, e.sentence_id, e.sentence_text, topic_name(e.topic), e.confidence};
        (e.restriction_type == RestrictionType::prohibition ? out.prohibitions : out.requirements)
            .push_back(std::move(entry));
    }
    return out;
}

std::vector<std::string> similar_areas(const Graph& graph, std::string_view topic) {
    const std::size_t t = parse_topic(topic);
    std::set<std::string> out;
    for (auto i : graph.edges_of_topic(t)) {
        for (auto a : graph.areas_of_document(graph.restriction_edges()[i].doc)) out.insert(graph.areas()[a].area_id);
    }
    return {out.begin(), out.end()};
}

std::vector<double> weather_overlay(const Graph& graph, std::string_view area_id, std::span<const Isoband> isobands) {
    const auto& area = graph.area(area_id);
    std::vector<double> out;
    for (const auto& band : isobands) {
        if (overlaps(area.geometry, band.geometry)) out.push_back(band.band_value);
    }
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

}  // namespace landreuse::geo
