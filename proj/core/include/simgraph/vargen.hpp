#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "simgraph/conditioning.hpp"

namespace simgraph::vargen {

using Token = std::int32_t;

inline constexpr std::size_t kDefaultCodebookSize = 32;
inline constexpr std::size_t kDefaultModelWidth = 32;
inline constexpr std::size_t kDefaultGridRows = 4;
inline constexpr std::size_t kDefaultGridCols = 4;

struct Rgb {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Fixed palette codec: token k paints palette[k] over a p x p patch.
struct Codebook {
    std::vector<Rgb> palette;
    std::size_t patch_size = 1;

    std::size_t size() const noexcept { return palette.size(); }

    /// Requires K >= 2, distinct colours in [0,1]^3 and p >= 1.
    void validate() const;

    /// K evenly spaced hues on the fully saturated colour ring, p = 1.
    static Codebook make_default(std::size_t k = kDefaultCodebookSize);
};

struct GridShape {
    std::size_t rows = kDefaultGridRows;
    std::size_t cols = kDefaultGridCols;

    std::size_t length() const noexcept { return rows * cols; }
    friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// Row-major token grid.
struct TokenSequence {
    std::vector<Token> tokens;
    GridShape grid;

    std::size_t size() const noexcept { return tokens.size(); }
    void validate(std::size_t codebook_size) const;

    friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

struct ImageGrid {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<Rgb> pixels;  // row-major

    const Rgb& at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }
    Rgb& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }

    friend bool operator==(const ImageGrid&, const ImageGrid&) = default;
};

ImageGrid decode_tokens(const TokenSequence& z, const Codebook& cb);

/// Nearest palette entry to each patch's mean colour; ties go to the lower index.
TokenSequence encode_image(const ImageGrid& img, const Codebook& cb);

/// Parameters of the next-token model
///   h = start_embed + cond_proj^T e + mean_{j<l} token_embed[z_j]
///   logits = out_proj^T tanh(h)
struct ARModelParams {
    Eigen::MatrixXd token_embed;  // K x d_m
    Eigen::MatrixXd cond_proj;    // d x d_m
    Eigen::MatrixXd out_proj;     // d_m x K
    Eigen::VectorXd start_embed;  // d_m

    std::size_t codebook_size() const noexcept { return static_cast<std::size_t>(token_embed.rows()); }
    std::size_t embedding_dim() const noexcept { return static_cast<std::size_t>(cond_proj.rows()); }
    std::size_t width() const noexcept { return static_cast<std::size_t>(start_embed.size()); }

    void validate() const;

    static ARModelParams zeros(std::size_t k, std::size_t d, std::size_t d_m);
    /// Entries drawn i.i.d. Normal(0, scale^2) from a SplitMix64 stream.
    static ARModelParams random(std::size_t k, std::size_t d, std::size_t d_m, std::uint64_t seed,
                                double scale = 0.1);
    /// Training initialisation: token_embed ~ N(0, 4), cond_proj ~ N(0, 1), out_proj and
    /// start_embed zero, so the untrained model is exactly uniform.
    static ARModelParams init(std::size_t k, std::size_t d, std::size_t d_m, std::uint64_t seed);

    ARModelParams& operator+=(const ARModelParams& other);
    ARModelParams& operator*=(double s);
};

Eigen::VectorXd ar_next_logits(std::span<const Token> prefix, const conditioning::TextEmbedding& e_t,
                               const ARModelParams& params);

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);
Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits);

/// Left-to-right sampling from softmax(logits / temperature) by inverse CDF
/// over a SplitMix64 stream. Temperature 0 is greedy argmax.
TokenSequence sample_tokens(const conditioning::TextEmbedding& e_t, const ARModelParams& params,
                            GridShape grid, double temperature, std::uint64_t seed);

/// Negative log-likelihood of the whole sequence, in nats.
double token_nll(const TokenSequence& z, const conditioning::TextEmbedding& e_t,
                 const ARModelParams& params);

struct NllAndGradient {
    double nll = 0.0;
    ARModelParams gradient;
};

NllAndGradient token_nll_gradient(const TokenSequence& z, const conditioning::TextEmbedding& e_t,
                                  const ARModelParams& params);

struct TrainExample {
    std::string caption;
    TokenSequence tokens;
};

struct TrainStepResult {
    ARModelParams params;
    double mean_nll = 0.0;  // before the update
};

/// One plain gradient-descent step on the mean sequence NLL of the batch.
TrainStepResult train_step(std::span<const TrainExample> batch, const ARModelParams& params,
                           double lr);

// Text formats.
std::string write_ppm(const ImageGrid& img);
std::string tokens_to_json(const TokenSequence& z);
TokenSequence tokens_from_json(std::string_view text);
std::string params_to_json(const ARModelParams& params);
ARModelParams params_from_json(std::string_view text);
std::vector<TrainExample> dataset_from_json(std::string_view text);

}  // namespace simgraph::vargen
