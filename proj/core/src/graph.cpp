#include "simgraph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

#include "simgraph/error.hpp"

namespace simgraph::graph {

using nlohmann::json;

bool operator<(const RelationTriplet& a, const RelationTriplet& b) {
    return std::tie(a.subject, a.relation, a.object) < std::tie(b.subject, b.relation, b.object);
}

void validate_box(const EntityBox& box) {
    if (!std::isfinite(box.x) || !std::isfinite(box.y) || !std::isfinite(box.w) ||
        !std::isfinite(box.h)) {
        throw ValidationError("entity box has a non-finite coordinate");
    }
    if (box.w < 0.0 || box.h < 0.0) {
        throw ValidationError("entity box has negative width or height");
    }
}

namespace {

void validate_labels(const RelationTriplet& t) {
    if (t.subject.empty() || t.relation.empty() || t.object.empty()) {
        throw ValidationError("relation triplet has an empty field");
    }
}

}  // namespace

const Entity* SceneGraph::find_entity(std::string_view id) const noexcept {
    auto it = std::find_if(entities_.begin(), entities_.end(),
                           [&](const Entity& e) { return e.id == id; });
    return it == entities_.end() ? nullptr : &*it;
}

Entity* SceneGraph::find_entity(std::string_view id) noexcept {
    auto it = std::find_if(entities_.begin(), entities_.end(),
                           [&](const Entity& e) { return e.id == id; });
    return it == entities_.end() ? nullptr : &*it;
}

void SceneGraph::add_entity(Entity entity) {
    if (entity.id.empty()) throw ValidationError("entity id is empty");
    if (entity.box) validate_box(*entity.box);
    if (has_entity(entity.id)) throw CollisionError("duplicate entity id '" + entity.id + "'");
    entities_.push_back(std::move(entity));
}

void SceneGraph::add_relation(RelationTriplet t) {
    validate_labels(t);
    if (!has_entity(t.subject)) throw ReferentialIntegrityError(t.subject);
    if (!has_entity(t.object)) throw ReferentialIntegrityError(t.object);
    relations_.push_back(std::move(t));
}

void SceneGraph::set_relations(std::vector<RelationTriplet> relations) {
    for (const auto& t : relations) {
        validate_labels(t);
        if (!has_entity(t.subject)) throw ReferentialIntegrityError(t.subject);
        if (!has_entity(t.object)) throw ReferentialIntegrityError(t.object);
    }
    relations_ = std::move(relations);
}

void SceneGraph::validate() const {
    std::set<std::string_view> ids;
    for (const auto& e : entities_) {
        if (e.id.empty()) throw ValidationError("entity id is empty");
        if (e.box) validate_box(*e.box);
        if (!ids.insert(e.id).second) throw CollisionError("duplicate entity id '" + e.id + "'");
    }
    for (const auto& t : relations_) {
        validate_labels(t);
        if (!ids.count(t.subject)) throw ReferentialIntegrityError(t.subject);
        if (!ids.count(t.object)) throw ReferentialIntegrityError(t.object);
    }
}

namespace {

const json& require(const json& obj, const char* key, const char* where) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw ValidationError(std::string(where) + " is missing field '" + key + "'");
    }
    return *it;
}

std::string require_string(const json& obj, const char* key, const char* where) {
    const json& v = require(obj, key, where);
    if (!v.is_string()) {
        throw ValidationError(std::string(where) + " field '" + key + "' must be a string");
    }
    return v.get<std::string>();
}

}  // namespace

SceneGraph parse_scene_graph(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError("malformed scene-graph JSON", e.byte);
    }
    if (!doc.is_object()) throw ValidationError("scene graph must be a JSON object");

    const json& entities = require(doc, "entities", "scene graph");
    const json& relations = require(doc, "relations", "scene graph");
    if (!entities.is_array() || !relations.is_array()) {
        throw ValidationError("'entities' and 'relations' must be arrays");
    }

    SceneGraph g;
    for (const json& e : entities) {
        if (!e.is_object()) throw ValidationError("entity must be an object");
        Entity entity{require_string(e, "id", "entity"), std::nullopt};
        if (auto it = e.find("box"); it != e.end() && !it->is_null()) {
            if (!it->is_array() || it->size() != 4 ||
                !std::all_of(it->begin(), it->end(), [](const json& v) { return v.is_number(); })) {
                throw ValidationError("box of entity '" + entity.id + "' must be [x, y, w, h]");
            }
            entity.box = EntityBox{(*it)[0].get<double>(), (*it)[1].get<double>(),
                                   (*it)[2].get<double>(), (*it)[3].get<double>()};
        }
        g.add_entity(std::move(entity));
    }
    for (const json& r : relations) {
        if (!r.is_object()) throw ValidationError("relation must be an object");
        g.add_relation({require_string(r, "s", "relation"), require_string(r, "r", "relation"),
                        require_string(r, "o", "relation")});
    }
    return g;
}

std::string serialize_scene_graph(const SceneGraph& g) {
    json entities = json::array();
    for (const auto& e : g.entities()) {
        json item = {{"id", e.id}};
        if (e.box) item["box"] = {e.box->x, e.box->y, e.box->w, e.box->h};
        entities.push_back(std::move(item));
    }
    json relations = json::array();
    for (const auto& t : g.relations()) {
        relations.push_back({{"s", t.subject}, {"r", t.relation}, {"o", t.object}});
    }
    json doc = {{"entities", std::move(entities)}, {"relations", std::move(relations)}};
    return doc.dump(2) + "\n";
}

double salience(const RelationTriplet& t, const SceneGraph& g) {
    const Entity* s = g.find_entity(t.subject);
    if (!s) throw ReferentialIntegrityError(t.subject);
    const Entity* o = g.find_entity(t.object);
    if (!o) throw ReferentialIntegrityError(t.object);
    const double subject_area = s->box ? s->box->area() : 0.0;
    const double object_area = o->box ? o->box->area() : 0.0;
    return subject_area + object_area;
}

std::vector<RelationTriplet> order_by_salience(const SceneGraph& g) {
    std::vector<RelationTriplet> out = g.relations();
    for (auto& t : out) t.salience = salience(t, g);
    std::stable_sort(out.begin(), out.end(), [](const RelationTriplet& a, const RelationTriplet& b) {
        return *a.salience > *b.salience;
    });
    return out;
}

SceneGraph prune_relations(const SceneGraph& g, std::size_t cap) {
    if (cap == 0) throw ValidationError("relation cap must be positive");

    std::set<RelationTriplet> seen;
    std::vector<RelationTriplet> kept;
    for (const auto& t : g.relations()) {
        // A reversed twin that already survived also blocks this one.
        if (seen.count(t) || seen.count(t.reversed())) continue;
        seen.insert(t);
        kept.push_back(t);
    }

    SceneGraph pruned;
    for (const auto& e : g.entities()) pruned.add_entity(e);
    pruned.set_relations(std::move(kept));

    auto ordered = order_by_salience(pruned);
    if (ordered.size() > cap) ordered.resize(cap);
    pruned.set_relations(std::move(ordered));
    return pruned;
}

GraphDelta graph_diff(const SceneGraph& g, const SceneGraph& g_edited) {
    const std::set<RelationTriplet> original(g.relations().begin(), g.relations().end());
    const std::set<RelationTriplet> edited(g_edited.relations().begin(),
                                           g_edited.relations().end());

    GraphDelta delta;
    std::set<RelationTriplet> emitted;
    for (const auto& t : g.relations()) {
        if (!emitted.insert(t).second) continue;
        (edited.count(t) ? delta.background : delta.removed).push_back(t);
    }
    emitted.clear();
    for (const auto& t : g_edited.relations()) {
        if (!emitted.insert(t).second) continue;
        if (!original.count(t)) delta.novel.push_back(t);
    }
    return delta;
}

}  // namespace simgraph::graph
