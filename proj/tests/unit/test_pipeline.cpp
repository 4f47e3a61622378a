#include "doctest.h"
#include "simgraph/error.hpp"
#include "simgraph/pipeline.hpp"
#include "test_support.hpp"

using namespace simgraph;
using namespace simgraph::pipeline;
using graph::SceneGraph;

namespace {

EditScript forest_script() { return parse_edit_script(testing::read_data("forest/script.json")); }

diffedit::LatentTensor uniform_latent(SplitMix64& rng, std::size_t n) {
    diffedit::LatentTensor x{Eigen::VectorXd(static_cast<Eigen::Index>(n))};
    for (Eigen::Index i = 0; i < x.values.size(); ++i) x.values[i] = rng.uniform(-1.0, 1.0);
    return x;
}

}  // namespace

TEST_CASE("parse_edit_script") {
    const auto s = forest_script();
    REQUIRE(s.ops.size() == 3);
    CHECK(std::holds_alternative<ReplaceEntity>(s.ops[0]));
    CHECK(std::holds_alternative<AddEntity>(s.ops[1]));
    CHECK(std::holds_alternative<AddRelation>(s.ops[2]));
    CHECK_THROWS_AS(parse_edit_script(R"({"ops":[{"op":"explode"}]})"), ValidationError);
    CHECK_THROWS_AS(parse_edit_script(R"({"ops":[{"op":"add_relation","s":"a"}]})"), ValidationError);
    CHECK_THROWS_AS(parse_edit_script("{\"ops\": ["), ParseError);
}

TEST_CASE("apply_instruction") {
    const SceneGraph g = testing::forest_graph();
    SUBCASE("forest edit") {
        CHECK(apply_instruction(g, forest_script()) == testing::forest_edited());
    }
    SUBCASE("add then remove restores the graph") {
        const auto s = parse_edit_script(testing::read_data("forest/identity_script.json"));
        CHECK(apply_instruction(g, s) == g);
        // Also when the relation already existed.
        EditScript again{{AddRelation{{"bear", "be in", "forest"}}, RemoveRelation{{"bear", "be in", "forest"}}}};
        CHECK(apply_instruction(g, again) == g);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(apply_instruction(g, {{RemoveRelation{{"cat", "on", "mat"}}}}), NotFoundError);
        CHECK_THROWS_AS(apply_instruction(g, {{ReplaceEntity{"cat", "dog"}}}), NotFoundError);
        CHECK_THROWS_AS(apply_instruction(g, {{ReplaceEntity{"bear", "forest"}}}), CollisionError);
        CHECK_THROWS_AS(apply_instruction(g, {{AddEntity{"bear", std::nullopt}}}), CollisionError);
        CHECK_THROWS_AS(apply_instruction(g, {{AddRelation{{"bear", "", "forest"}}}}), ValidationError);
    }
    SUBCASE("rename touches every relation endpoint") {
        SceneGraph h = g;
        h.add_relation({"forest", "around", "bear"});
        const auto out = apply_instruction(h, {{ReplaceEntity{"bear", "wolf"}}});
        CHECK(out.relations()[2] == graph::RelationTriplet{"forest", "around", "wolf"});
        CHECK_FALSE(out.has_entity("bear"));
    }
}

TEST_CASE("apply_instruction never returns an invalid graph") {
    SplitMix64 rng(89);
    for (int i = 0; i < 300; ++i) {
        const SceneGraph g = testing::random_graph(rng);
        EditScript script;
        for (int k = 0; k < 4; ++k) {
            const std::string a = "e" + std::to_string(rng.next() % 10);
            const std::string b = "e" + std::to_string(rng.next() % 10);
            switch (rng.next() % 4) {
                case 0: script.ops.emplace_back(ReplaceEntity{a, b}); break;
                case 1: script.ops.emplace_back(AddRelation{{a, "near", b}}); break;
                case 2: script.ops.emplace_back(RemoveRelation{{a, "near", b}}); break;
                default: script.ops.emplace_back(AddEntity{a, std::nullopt}); break;
            }
        }
        try {
            const SceneGraph out = apply_instruction(g, script);
            CHECK_NOTHROW(out.validate());
        } catch (const ValidationError&) {
            // rejected scripts are fine
        }
    }
}

TEST_CASE("load_extraction") {
    const auto path = testing::data_dir() / "forest/graph.json";
    const auto g = load_extraction(path);
    CHECK(g.entities().size() == 4);
    CHECK(g.relations().size() == 2);
    CHECK(load_extraction(path) == g);
    try {
        load_extraction(testing::data_dir() / "does-not-exist.json");
        FAIL("expected an I/O error");
    } catch (const IoError& e) {
        CHECK(e.path().find("does-not-exist.json") != std::string::npos);
    }
}

TEST_CASE("unified_dispatch: generation") {
    const SceneGraph g = testing::forest_graph();
    const std::string caption = transduce::s2cap(g).text;

    GenerationModel model{vargen::ARModelParams::init(32, 16, 32, 3), vargen::Codebook::make_default()};
    SplitMix64 rng(97);
    vargen::TokenSequence target{{}, {4, 4}};
    for (int i = 0; i < 16; ++i) target.tokens.push_back(static_cast<vargen::Token>(rng.next() % 32));
    const std::vector<vargen::TrainExample> batch = {{caption, target}};
    for (int i = 0; i < 100; ++i) model.params = vargen::train_step(batch, model.params, 0.05).params;

    Models models;
    models.generation = model;
    DispatchConfig config;
    config.generate.temperature = 0.0;

    const auto result = unified_dispatch(GenerateRequest{g}, models, config);
    REQUIRE(std::holds_alternative<vargen::ImageGrid>(result.output));
    CHECK(result.caption->text == caption);
    const auto& img = std::get<vargen::ImageGrid>(result.output);
    const auto greedy = vargen::sample_tokens(conditioning::encode_text(caption, 16), model.params, {4, 4}, 0.0, 0);
    CHECK(vargen::encode_image(img, model.codebook) == greedy);
    CHECK_FALSE(result.prompts.has_value());

    CHECK_THROWS_AS(unified_dispatch(GenerateRequest{g}, Models{}, config), ConfigurationError);
}

TEST_CASE("unified_dispatch: editing") {
    const SceneGraph g = testing::forest_graph();
    SplitMix64 rng(101);
    const auto x0 = uniform_latent(rng, 64);

    SUBCASE("identity script is a null edit") {
        Models models;
        models.denoiser = std::make_shared<diffedit::GaussianAnalyticDenoiser>(1.0);
        DispatchConfig config;
        config.edit.guidance_scale = 1.0;
        const auto script = parse_edit_script(testing::read_data("forest/identity_script.json"));
        const auto result = unified_dispatch(EditRequest{x0, g, script}, models, config);
        REQUIRE(std::holds_alternative<diffedit::LatentTensor>(result.output));
        const auto& out = std::get<diffedit::LatentTensor>(result.output);
        CHECK((out.values - x0.values).cwiseAbs().maxCoeff() < 1e-4);
        CHECK(result.warnings.size() == 2);  // scale not above 1, unchanged relations
        CHECK_FALSE(result.tokens.has_value());
    }
    SUBCASE("forest edit lands on the target mean under a point-mass denoiser") {
        Models models;
        models.denoiser = std::make_shared<diffedit::GaussianAnalyticDenoiser>(0.0);
        DispatchConfig config;
        config.edit.guidance_scale = 1.0;
        config.edit.w_src = 0.0;
        config.edit.w_tgt = 1.0;
        config.edit.skip = 0;
        const auto result = unified_dispatch(EditRequest{x0, g, forest_script()}, models, config);
        const auto& out = std::get<diffedit::LatentTensor>(result.output);
        CHECK(result.prompts->target == "wolf be in forest, tiger be in field, trees be behind train");
        const Eigen::VectorXd mu = diffedit::tile_embedding(conditioning::encode_text(result.prompts->target, 16), 64);
        CHECK((out.values - mu).cwiseAbs().maxCoeff() < 1e-3);
    }
    SUBCASE("errors") {
        DispatchConfig config;
        CHECK_THROWS_AS(unified_dispatch(EditRequest{x0, g, forest_script()}, Models{}, config), ConfigurationError);
        Models models;
        models.denoiser = std::make_shared<diffedit::GaussianAnalyticDenoiser>(1.0);
        CHECK_THROWS_AS(unified_dispatch(EditRequest{x0, g, EditScript{}}, models, config), ValidationError);
    }
}
