#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "simgraph/conditioning.hpp"

namespace simgraph::diffedit {

using conditioning::TextEmbedding;

inline constexpr int kDefaultTrainSteps = 1000;
inline constexpr int kDefaultSamplingSteps = 50;
inline constexpr int kDefaultSkip = 25;
inline constexpr int kDefaultFixedPointIters = 5;
inline constexpr double kBetaStart = 1e-4;
inline constexpr double kBetaEnd = 0.02;

/// Schedule index meaning "clean" (alpha_bar = 1).
inline constexpr int kZeroIndex = 0;

struct LatentTensor {
    Eigen::VectorXd values;

    std::size_t size() const noexcept { return static_cast<std::size_t>(values.size()); }
    bool all_finite() const { return values.allFinite(); }

    friend bool operator==(const LatentTensor& a, const LatentTensor& b) {
        return a.values.size() == b.values.size() && a.values == b.values;
    }
};

/// Linear-beta schedule with cumulative products and a strided subset of
/// timesteps used for sampling. Indices are 1-based; index 0 is the clean end.
class DiffusionSchedule {
public:
    DiffusionSchedule(int train_steps, int sampling_steps, double beta_start = kBetaStart,
                      double beta_end = kBetaEnd);

    int train_steps() const noexcept { return static_cast<int>(betas_.size()); }
    int steps() const noexcept { return static_cast<int>(sample_indices_.size()); }

    const std::vector<double>& betas() const noexcept { return betas_; }
    const std::vector<double>& alpha_bars() const noexcept { return alpha_bars_; }
    const std::vector<int>& sample_indices() const noexcept { return sample_indices_; }

    double beta(int t) const;
    /// alpha_bar_t for t in [0, train_steps]; alpha_bar_0 = 1.
    double alpha_bar(int t) const;
    /// Timestep of the k-th sampling step, k in [0, steps]; k = 0 maps to index 0.
    int sample_index(int k) const;

private:
    std::vector<double> betas_;
    std::vector<double> alpha_bars_;
    std::vector<int> sample_indices_;
};

DiffusionSchedule build_schedule(int train_steps = kDefaultTrainSteps,
                                 int sampling_steps = kDefaultSamplingSteps);

struct EditConfig {
    double guidance_scale = 2.0;
    double w_src = 0.5;
    double w_tgt = 0.5;
    int steps = kDefaultSamplingSteps;
    int skip = kDefaultSkip;
    int fixed_point_iters = kDefaultFixedPointIters;
    /// Guidance applied during inversion; 1 conditions on the source prompt alone.
    double inversion_scale = 1.0;

    void validate() const;
    /// Non-fatal departures from the recommended ranges (e.g. scale below 1).
    std::vector<std::string> warnings() const;
};

/// Noise predictor f(x_t, t, c). Implementations see the noise level through
/// alpha_bar_t only.
class NoisePredictor {
public:
    virtual ~NoisePredictor() = default;
    virtual LatentTensor predict(const LatentTensor& x_t, double alpha_bar,
                                 const TextEmbedding& c) const = 0;
};

/// Embedding tiled cyclically to length `dim`; the null embedding gives zero.
Eigen::VectorXd tile_embedding(const TextEmbedding& c, std::size_t dim);

/// Posterior-mean noise predictor for data x0 ~ Normal(mu_c, sigma^2 I), with
/// mu_c the tiled conditioning embedding.
class GaussianAnalyticDenoiser final : public NoisePredictor {
public:
    explicit GaussianAnalyticDenoiser(double sigma);

    double sigma() const noexcept { return sigma_; }

    LatentTensor predict(const LatentTensor& x_t, double alpha_bar,
                         const TextEmbedding& c) const override;

private:
    double sigma_;
};

/// eps_hat = A x_t + B c + b [sqrt(alpha_bar), sqrt(1 - alpha_bar)]
struct LinearDenoiserParams {
    Eigen::MatrixXd A;  // D x D
    Eigen::MatrixXd B;  // D x d
    Eigen::MatrixXd b;  // D x 2

    std::size_t latent_dim() const noexcept { return static_cast<std::size_t>(A.rows()); }
    std::size_t embedding_dim() const noexcept { return static_cast<std::size_t>(B.cols()); }

    void validate() const;
    static LinearDenoiserParams zeros(std::size_t latent_dim, std::size_t embedding_dim);
};

class LinearDenoiser final : public NoisePredictor {
public:
    explicit LinearDenoiser(LinearDenoiserParams params);

    const LinearDenoiserParams& params() const noexcept { return params_; }

    LatentTensor predict(const LatentTensor& x_t, double alpha_bar,
                         const TextEmbedding& c) const override;

private:
    LinearDenoiserParams params_;
};

LatentTensor add_noise(const LatentTensor& x0, const LatentTensor& eps, double alpha_bar);
LatentTensor add_noise(const LatentTensor& x0, const LatentTensor& eps,
                       const DiffusionSchedule& sched, int t);

LatentTensor analytic_eps(const LatentTensor& x_t, int t, const GaussianAnalyticDenoiser& den,
                          const TextEmbedding& c, const DiffusionSchedule& sched);

/// eps_null + s * (w_src eps_src + w_tgt eps_tgt - eps_null)
LatentTensor cfg_blend(const LatentTensor& eps_null, const LatentTensor& eps_src,
                       const LatentTensor& eps_tgt, const EditConfig& cfg);

/// Deterministic DDIM update from noise level alpha_from to the cleaner level
/// alpha_to (alpha_to = 1 returns the clean estimate).
LatentTensor ddim_step(const LatentTensor& x_t, const LatentTensor& eps, double alpha_from,
                       double alpha_to);
/// Index form; `to_t` must be strictly earlier than `from_t` (kZeroIndex for clean).
LatentTensor ddim_step(const LatentTensor& x_t, const LatentTensor& eps,
                       const DiffusionSchedule& sched, int from_t, int to_t);

/// Inverts the first `upto` sampling steps. Each reversed step solves
/// eps = f(x_t, t, c) by `fp_iters` fixed-point iterations. The trajectory
/// starts with x0 and has upto + 1 entries.
std::vector<LatentTensor> ddim_invert(const LatentTensor& x0, const TextEmbedding& c,
                                      const DiffusionSchedule& sched, const NoisePredictor& den,
                                      int upto, int fp_iters, double guidance_scale = 1.0);

/// Plain conditional DDIM sampling from sampling step `from_step` down to the
/// clean end with a single conditioning.
LatentTensor ddim_sample(const LatentTensor& x_t, const TextEmbedding& c,
                         const DiffusionSchedule& sched, const NoisePredictor& den, int from_step);

/// Invert under the source prompt up to step `steps - skip`, then denoise with
/// the three-branch guided blend down to the clean end.
LatentTensor edit(const LatentTensor& x0, const TextEmbedding& c_src, const TextEmbedding& c_tgt,
                  const TextEmbedding& c_null, const EditConfig& cfg,
                  const DiffusionSchedule& sched, const NoisePredictor& den);

struct NoisePredSample {
    LatentTensor x0;
    TextEmbedding c;
    int t = 1;
    LatentTensor eps;
};

struct NoisePredLoss {
    double loss = 0.0;
    LinearDenoiserParams gradient;
};

/// Mean over the batch of ||eps_hat - eps||^2 and its gradient.
NoisePredLoss noise_pred_loss(const LinearDenoiserParams& params,
                              std::span<const NoisePredSample> batch,
                              const DiffusionSchedule& sched);

// Text formats.
struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    LatentTensor latent;  // row-major, values in [-1, 1]
};

GrayImage read_pgm(std::string_view text);
std::string write_pgm(const LatentTensor& latent, std::size_t width, std::size_t height);
std::string latent_to_json(const LatentTensor& latent);
LatentTensor latent_from_json(std::string_view text);

}  // namespace simgraph::diffedit
