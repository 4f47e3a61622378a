#include <string>

#include "doctest.h"
#include "simgraph/error.hpp"
#include "simgraph/graph.hpp"
#include "test_support.hpp"

using namespace simgraph;
using graph::RelationTriplet;
using graph::SceneGraph;

namespace {

SceneGraph graph_of(const std::vector<std::pair<std::string, std::optional<graph::EntityBox>>>& ents,
                    const std::vector<RelationTriplet>& rels) {
    SceneGraph g;
    for (const auto& [id, box] : ents) g.add_entity({id, box});
    for (const auto& t : rels) g.add_relation(t);
    return g;
}

graph::EntityBox box(double w, double h) { return {0, 0, w, h}; }

}  // namespace

TEST_CASE("parse_scene_graph: empty document") {
    const auto g = graph::parse_scene_graph(R"({"entities":[],"relations":[]})");
    CHECK(g.entities().empty());
    CHECK(g.relations().empty());
}

TEST_CASE("parse_scene_graph: four entities, two relations in document order") {
    const auto g = testing::forest_graph();
    REQUIRE(g.entities().size() == 4);
    REQUIRE(g.relations().size() == 2);
    CHECK(g.relations()[0] == RelationTriplet{"bear", "be in", "forest"});
    CHECK(g.relations()[1] == RelationTriplet{"trees", "be behind", "train"});
    CHECK(g.entities()[0].box == graph::EntityBox{40, 60, 120, 90});
}

TEST_CASE("parse_scene_graph: errors") {
    SUBCASE("undeclared entity") {
        const std::string doc =
            R"({"entities":[{"id":"forest"}],"relations":[{"s":"ghost","r":"on","o":"forest"}]})";
        try {
            graph::parse_scene_graph(doc);
            FAIL("expected a referential-integrity error");
        } catch (const ReferentialIntegrityError& e) {
            CHECK(e.id() == "ghost");
            CHECK(std::string(e.what()).find("ghost") != std::string::npos);
        }
    }
    SUBCASE("malformed JSON reports a byte offset") {
        try {
            graph::parse_scene_graph(R"({"entities": [}")");
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.byte_offset() > 0);
        }
    }
    SUBCASE("negative box size") {
        CHECK_THROWS_AS(
            graph::parse_scene_graph(R"({"entities":[{"id":"a","box":[0,0,-1,2]}],"relations":[]})"),
            ValidationError);
    }
    SUBCASE("duplicate entity id") {
        CHECK_THROWS_AS(graph::parse_scene_graph(R"({"entities":[{"id":"a"},{"id":"a"}],"relations":[]})"),
                        CollisionError);
    }
    SUBCASE("empty relation label") {
        CHECK_THROWS_AS(graph::parse_scene_graph(
                            R"({"entities":[{"id":"a"}],"relations":[{"s":"a","r":"","o":"a"}]})"),
                        ValidationError);
    }
}

TEST_CASE("parse_scene_graph: missing box gives a boxless entity") {
    const auto g = graph::parse_scene_graph(R"({"entities":[{"id":"a"}],"relations":[]})");
    CHECK_FALSE(g.entities()[0].box.has_value());
}

TEST_CASE("serialize/parse round trip on random graphs") {
    SplitMix64 rng(11);
    for (int i = 0; i < 200; ++i) {
        const SceneGraph g = testing::random_graph(rng);
        CHECK(graph::parse_scene_graph(graph::serialize_scene_graph(g)) == g);
    }
}

TEST_CASE("salience") {
    const auto g = graph_of({{"s", box(10, 20)}, {"o", box(5, 4)}, {"n", std::nullopt}, {"m", std::nullopt},
                             {"t", box(3, 3)}},
                            {});
    CHECK(graph::salience({"s", "r", "o"}, g) == 220.0);
    CHECK(graph::salience({"n", "r", "m"}, g) == 0.0);
    CHECK(graph::salience({"t", "r", "n"}, g) == 9.0);
    CHECK_THROWS_AS(graph::salience({"s", "r", "ghost"}, g), ReferentialIntegrityError);
}

TEST_CASE("order_by_salience: stable descending") {
    // A = 220, B = 9, C = 9
    const auto g = graph_of({{"s", box(10, 20)}, {"o", box(5, 4)}, {"t", box(3, 3)}, {"n", std::nullopt}},
                            {{"s", "A", "o"}, {"t", "B", "n"}, {"n", "C", "t"}});
    auto out = graph::order_by_salience(g);
    CHECK(out[0].relation == "A");
    CHECK(out[1].relation == "B");
    CHECK(out[2].relation == "C");
    CHECK(*out[0].salience == 220.0);

    const auto g2 = graph_of({{"s", box(10, 20)}, {"o", box(5, 4)}, {"t", box(3, 3)}, {"n", std::nullopt}},
                             {{"t", "B", "n"}, {"s", "A", "o"}});
    out = graph::order_by_salience(g2);
    CHECK(out[0].relation == "A");
    CHECK(out[1].relation == "B");
}

TEST_CASE("order_by_salience matches an independent stable selection sort") {
    SplitMix64 rng(3);
    for (int round = 0; round < 100; ++round) {
        const SceneGraph g = testing::random_graph(rng, {.integer_areas = (round % 2 == 0)});

        // Oracle: areas from raw boxes; repeatedly pick the first maximum.
        std::vector<std::pair<double, RelationTriplet>> pool;
        for (const auto& t : g.relations()) {
            double a = 0.0;
            for (const auto& e : g.entities()) {
                if (e.box && (e.id == t.subject)) a += e.box->w * e.box->h;
                if (e.box && (e.id == t.object)) a += e.box->w * e.box->h;
            }
            pool.emplace_back(a, t);
        }
        std::vector<std::pair<double, RelationTriplet>> expected;
        while (!pool.empty()) {
            std::size_t best = 0;
            for (std::size_t i = 1; i < pool.size(); ++i) {
                if (pool[i].first > pool[best].first) best = i;
            }
            expected.push_back(pool[best]);
            pool.erase(pool.begin() + static_cast<long>(best));
        }

        const auto out = graph::order_by_salience(g);
        REQUIRE(out.size() == expected.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            CHECK(out[i] == expected[i].second);
            CHECK(*out[i].salience == doctest::Approx(expected[i].first).epsilon(1e-12));
            if (i) CHECK(*out[i].salience <= *out[i - 1].salience);
        }
    }
}

TEST_CASE("prune_relations") {
    SUBCASE("bidirectional pair keeps the first") {
        const auto g = graph_of({{"a", std::nullopt}, {"b", std::nullopt}},
                                {{"a", "next to", "b"}, {"b", "next to", "a"}});
        const auto p = graph::prune_relations(g, 15);
        REQUIRE(p.relations().size() == 1);
        CHECK(p.relations()[0] == RelationTriplet{"a", "next to", "b"});
    }
    SUBCASE("reversal with a different label is not a pair") {
        const auto g = graph_of({{"a", std::nullopt}, {"b", std::nullopt}},
                                {{"a", "left of", "b"}, {"b", "right of", "a"}});
        CHECK(graph::prune_relations(g, 15).relations().size() == 2);
    }
    SUBCASE("duplicates collapse") {
        const auto g = graph_of({{"a", std::nullopt}, {"b", std::nullopt}}, {{"a", "r", "b"}, {"a", "r", "b"}});
        const auto p = graph::prune_relations(g, 15);
        REQUIRE(p.relations().size() == 1);
        CHECK(p.relations()[0] == RelationTriplet{"a", "r", "b"});
    }
    SUBCASE("cap keeps the first 15 boxless relations") {
        SceneGraph g;
        for (int i = 0; i < 21; ++i) g.add_entity({"n" + std::to_string(i), std::nullopt});
        for (int i = 0; i < 20; ++i) {
            g.add_relation({"n" + std::to_string(i), "r", "n" + std::to_string(i + 1)});
        }
        const auto p = graph::prune_relations(g, 15);
        REQUIRE(p.relations().size() == 15);
        for (int i = 0; i < 15; ++i) CHECK(p.relations()[i] == g.relations()[i]);
    }
    SUBCASE("cap keeps the most salient, not the earliest") {
        const auto g = graph_of({{"a", std::nullopt}, {"b", std::nullopt}, {"c", box(10, 10)}},
                                {{"a", "r", "b"}, {"a", "r", "c"}});
        const auto p = graph::prune_relations(g, 1);
        REQUIRE(p.relations().size() == 1);
        CHECK(p.relations()[0] == RelationTriplet{"a", "r", "c"});
    }
    SUBCASE("cap zero") {
        CHECK_THROWS_AS(graph::prune_relations(SceneGraph{}, 0), ValidationError);
    }
}

TEST_CASE("prune_relations is idempotent") {
    SplitMix64 rng(5);
    for (int i = 0; i < 300; ++i) {
        const SceneGraph g = testing::random_graph(rng, {.integer_areas = (i % 3 == 0)});
        const std::size_t cap = 1 + rng.next() % 15;
        const SceneGraph once = graph::prune_relations(g, cap);
        CHECK(graph::prune_relations(once, cap) == once);
        CHECK(once.relations().size() <= cap);
    }
}

TEST_CASE("graph_diff: edited forest graph") {
    const auto d = graph::graph_diff(testing::forest_graph(), testing::forest_edited());
    CHECK(testing::same_set(d.background, {{"trees", "be behind", "train"}}));
    CHECK(testing::same_set(d.novel, {{"wolf", "be in", "forest"}, {"tiger", "be in", "field"}}));
    CHECK(testing::same_set(d.removed, {{"bear", "be in", "forest"}}));
}

TEST_CASE("graph_diff: identity edit") {
    const auto g = testing::forest_graph();
    const auto d = graph::graph_diff(g, g);
    CHECK(d.novel.empty());
    CHECK(d.removed.empty());
    CHECK(d.background == g.relations());
}

TEST_CASE("graph_diff agrees with brute-force membership") {
    SplitMix64 rng(17);
    for (int i = 0; i < 1000; ++i) {
        const SceneGraph g = testing::random_graph(rng);
        const SceneGraph h = testing::random_edit_of(g, rng);
        const auto d = graph::graph_diff(g, h);
        const auto oracle = testing::brute_force_diff(g, h);
        REQUIRE(testing::same_set(d.background, oracle.background));
        REQUIRE(testing::same_set(d.novel, oracle.novel));
        REQUIRE(testing::same_set(d.removed, oracle.removed));

        // background + novel reconstruct the edited relation set
        std::vector<RelationTriplet> unioned = d.background;
        unioned.insert(unioned.end(), d.novel.begin(), d.novel.end());
        std::vector<RelationTriplet> edited_set;
        for (const auto& t : h.relations()) {
            if (!testing::contains(edited_set, t)) edited_set.push_back(t);
        }
        CHECK(testing::same_set(unioned, edited_set));
    }
}
