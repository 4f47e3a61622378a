#include <nlohmann/json.hpp>

#include "doctest.h"
#include "simgraph/conditioning.hpp"
#include "test_support.hpp"

using namespace simgraph;
using conditioning::encode_text;

TEST_CASE("fnv1a64 reference values") {
    CHECK(conditioning::fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(conditioning::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("encode_text: empty text is the null embedding") {
    const auto e = encode_text("", 16);
    CHECK(e.dim() == 16);
    CHECK(e.is_null());
    CHECK(encode_text(" ,;", 16).is_null());
    CHECK_FALSE(encode_text("null", 16).is_null());
}

TEST_CASE("encode_text: deterministic and unit norm") {
    const auto a = encode_text("bear be in forest", 16);
    const auto b = encode_text("bear be in forest", 16);
    CHECK(a.values == b.values);
    CHECK(std::abs(a.values.norm() - 1.0) < 1e-9);
}

TEST_CASE("encode_text matches golden vectors from the reference hasher") {
    const auto golden = nlohmann::json::parse(testing::read_data("oracles/golden_embeddings.json"));
    for (const auto& [text, values] : golden.items()) {
        const auto e = encode_text(text, 16);
        REQUIRE(e.dim() == values.size());
        for (std::size_t i = 0; i < values.size(); ++i) {
            CHECK(e.values[static_cast<Eigen::Index>(i)] == doctest::Approx(values[i].get<double>()).epsilon(1e-15));
        }
    }
}

TEST_CASE("encode_text is a bag of words") {
    const auto a = encode_text("wolf be in forest, tiger be in field", 16);
    const auto b = encode_text("field in be tiger forest in be wolf", 16);
    CHECK((a.values - b.values).cwiseAbs().maxCoeff() == 0.0);
    CHECK(encode_text("Bear BE in Forest", 16).values == encode_text("bear be in forest", 16).values);
}

TEST_CASE("encode_text norm property over random strings") {
    SplitMix64 rng(31);
    const std::string alphabet = "abcdefXYZ019 ,.-";
    for (int i = 0; i < 500; ++i) {
        std::string s;
        const std::size_t len = rng.next() % 30;
        for (std::size_t k = 0; k < len; ++k) s.push_back(alphabet[rng.next() % alphabet.size()]);
        const std::size_t d = 1 + rng.next() % 32;
        const auto e = encode_text(s, d);
        CHECK(e.values.allFinite());
        const double n = e.values.norm();
        CHECK((n == 0.0 || std::abs(n - 1.0) < 1e-9));
    }
}
