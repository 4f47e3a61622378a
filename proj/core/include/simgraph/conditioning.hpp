#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include <Eigen/Core>

namespace simgraph::conditioning {

inline constexpr std::size_t kDefaultEmbeddingDim = 16;

/// Conditioning vector. Either exactly zero (the null conditioning) or of
/// unit Euclidean norm.
struct TextEmbedding {
    Eigen::VectorXd values;

    std::size_t dim() const noexcept { return static_cast<std::size_t>(values.size()); }
    bool is_null() const { return (values.array() == 0.0).all(); }

    static TextEmbedding null(std::size_t d) { return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d))}; }
};

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// Signed feature hashing over lowercase alphanumeric tokens, L2-normalised.
/// The empty string (or any text with no tokens) maps to the zero vector.
TextEmbedding encode_text(std::string_view text, std::size_t d = kDefaultEmbeddingDim);

}  // namespace simgraph::conditioning
