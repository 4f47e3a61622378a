#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace simgraph::graph {

/// Default relation cap used for captions and prompts.
inline constexpr std::size_t kDefaultRelationCap = 15;

/// Axis-aligned entity box in absolute pixels.
struct EntityBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double area() const noexcept { return w * h; }

    friend bool operator==(const EntityBox&, const EntityBox&) = default;
};

struct Entity {
    std::string id;
    std::optional<EntityBox> box;

    friend bool operator==(const Entity&, const Entity&) = default;
};

/// A directed (subject, relation, object) edge. Equality and ordering look at
/// the three labels only; `salience` is a cached score and never compared.
struct RelationTriplet {
    std::string subject;
    std::string relation;
    std::string object;
    std::optional<double> salience;

    RelationTriplet() = default;
    RelationTriplet(std::string s, std::string r, std::string o)
        : subject(std::move(s)), relation(std::move(r)), object(std::move(o)) {}

    RelationTriplet reversed() const { return {object, relation, subject}; }

    friend bool operator==(const RelationTriplet& a, const RelationTriplet& b) {
        return a.subject == b.subject && a.relation == b.relation && a.object == b.object;
    }
    friend bool operator<(const RelationTriplet& a, const RelationTriplet& b);
};

/// Entities in declaration order plus relations in insertion order.
class SceneGraph {
public:
    SceneGraph() = default;

    const std::vector<Entity>& entities() const noexcept { return entities_; }
    const std::vector<RelationTriplet>& relations() const noexcept { return relations_; }

    bool has_entity(std::string_view id) const noexcept { return find_entity(id) != nullptr; }
    const Entity* find_entity(std::string_view id) const noexcept;
    Entity* find_entity(std::string_view id) noexcept;

    /// Throws CollisionError on a duplicate id, ValidationError on an empty id
    /// or a negative/non-finite box.
    void add_entity(Entity entity);

    /// Appends a relation. Throws ReferentialIntegrityError when an endpoint
    /// is not declared and ValidationError on an empty label.
    void add_relation(RelationTriplet t);

    /// Replaces the relation list wholesale (same checks as add_relation).
    void set_relations(std::vector<RelationTriplet> relations);

    std::vector<RelationTriplet>& mutable_relations() noexcept { return relations_; }
    std::vector<Entity>& mutable_entities() noexcept { return entities_; }

    /// Re-checks every invariant; used after bulk mutation.
    void validate() const;

    /// Field-for-field equality, relation saliences excluded.
    friend bool operator==(const SceneGraph& a, const SceneGraph& b) {
        return a.entities_ == b.entities_ && a.relations_ == b.relations_;
    }

private:
    std::vector<Entity> entities_;
    std::vector<RelationTriplet> relations_;
};

/// Relation-set difference between an original and an edited graph.
/// Each list holds distinct triplets: `background` and `removed` follow the
/// original graph's order, `novel` follows the edited graph's order.
struct GraphDelta {
    std::vector<RelationTriplet> background;
    std::vector<RelationTriplet> novel;
    std::vector<RelationTriplet> removed;
};

void validate_box(const EntityBox& box);

SceneGraph parse_scene_graph(std::string_view text);
std::string serialize_scene_graph(const SceneGraph& g);

/// Subject box area plus object box area; boxless entities contribute 0.
double salience(const RelationTriplet& t, const SceneGraph& g);

/// Stable descending sort by salience. Each returned triplet carries its score.
std::vector<RelationTriplet> order_by_salience(const SceneGraph& g);

/// Collapses duplicates, keeps the first of each (a,r,b)/(b,r,a) pair, then
/// keeps the `cap` most salient relations in salience order.
SceneGraph prune_relations(const SceneGraph& g, std::size_t cap);

GraphDelta graph_diff(const SceneGraph& g, const SceneGraph& g_edited);

}  // namespace simgraph::graph
