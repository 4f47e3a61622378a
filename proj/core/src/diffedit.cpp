#include "simgraph/diffedit.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "simgraph/error.hpp"

namespace simgraph::diffedit {

namespace {

void require_same_size(const LatentTensor& a, const LatentTensor& b, const char* what) {
    if (a.size() != b.size()) {
        throw ValidationError(std::string(what) + ": dimension mismatch (" +
                              std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    }
}

// DDIM transfer between two noise levels with a shared noise estimate; no
// ordering check so inversion can run it towards the noisy end.
Eigen::VectorXd transfer(const Eigen::VectorXd& x, const Eigen::VectorXd& eps, double alpha_from,
                         double alpha_to) {
    const Eigen::VectorXd x0_hat = (x - std::sqrt(1.0 - alpha_from) * eps) / std::sqrt(alpha_from);
    return std::sqrt(alpha_to) * x0_hat + std::sqrt(1.0 - alpha_to) * eps;
}

}  // namespace

// ----------------------------------------------------------------- schedule

DiffusionSchedule::DiffusionSchedule(int train_steps, int sampling_steps, double beta_start,
                                     double beta_end) {
    if (train_steps < 1) throw ValidationError("train_steps must be at least 1");
    if (sampling_steps < 1) throw ValidationError("sampling steps must be at least 1");
    if (sampling_steps > train_steps) {
        throw ValidationError("sampling steps (" + std::to_string(sampling_steps) +
                              ") exceed train_steps (" + std::to_string(train_steps) + ")");
    }
    if (!(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end)) {
        throw ValidationError("betas must satisfy 0 < beta_start <= beta_end < 1");
    }

    betas_.resize(static_cast<std::size_t>(train_steps));
    alpha_bars_.resize(betas_.size());
    double running = 1.0;
    for (int i = 0; i < train_steps; ++i) {
        const double frac = train_steps == 1 ? 0.0 : static_cast<double>(i) / (train_steps - 1);
        betas_[i] = beta_start + (beta_end - beta_start) * frac;
        running *= 1.0 - betas_[i];
        alpha_bars_[i] = running;
    }

    sample_indices_.resize(static_cast<std::size_t>(sampling_steps));
    for (int k = 1; k <= sampling_steps; ++k) {
        sample_indices_[k - 1] = static_cast<int>(
            (static_cast<long long>(k) * train_steps) / sampling_steps);
    }
}

double DiffusionSchedule::beta(int t) const {
    if (t < 1 || t > train_steps()) throw ValidationError("schedule index out of range");
    return betas_[static_cast<std::size_t>(t - 1)];
}

double DiffusionSchedule::alpha_bar(int t) const {
    if (t == kZeroIndex) return 1.0;
    if (t < 0 || t > train_steps()) {
        throw ValidationError("schedule index " + std::to_string(t) + " out of range");
    }
    return alpha_bars_[static_cast<std::size_t>(t - 1)];
}

int DiffusionSchedule::sample_index(int k) const {
    if (k == 0) return kZeroIndex;
    if (k < 0 || k > steps()) throw ValidationError("sampling step out of range");
    return sample_indices_[static_cast<std::size_t>(k - 1)];
}

DiffusionSchedule build_schedule(int train_steps, int sampling_steps) {
    return DiffusionSchedule(train_steps, sampling_steps);
}

// ------------------------------------------------------------------- config

void EditConfig::validate() const {
    auto in_unit = [](double w) { return w >= 0.0 && w <= 1.0; };
    if (!in_unit(w_src) || !in_unit(w_tgt)) throw ValidationError("weights must lie in [0, 1]");
    if (std::abs(w_src + w_tgt - 1.0) > 1e-12) {
        throw ValidationError("w_src + w_tgt must equal 1");
    }
    if (!(guidance_scale >= 0.0) || !std::isfinite(guidance_scale)) {
        throw ValidationError("guidance scale must be a finite non-negative number");
    }
    if (!(inversion_scale >= 0.0) || !std::isfinite(inversion_scale)) {
        throw ValidationError("inversion scale must be a finite non-negative number");
    }
    if (steps < 1) throw ValidationError("steps must be at least 1");
    if (skip < 0 || skip >= steps) throw ValidationError("skip must satisfy 0 <= skip < steps");
    if (fixed_point_iters < 0) throw ValidationError("fixed_point_iters must be non-negative");
}

std::vector<std::string> EditConfig::warnings() const {
    std::vector<std::string> out;
    if (guidance_scale <= 1.0) {
        out.push_back("guidance scale " + std::to_string(guidance_scale) +
                      " is not above 1; guidance is not amplified");
    }
    return out;
}

// ---------------------------------------------------------------- denoisers

Eigen::VectorXd tile_embedding(const TextEmbedding& c, std::size_t dim) {
    if (c.dim() == 0) throw ValidationError("conditioning embedding is empty");
    Eigen::VectorXd mu(static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < dim; ++i) {
        mu[static_cast<Eigen::Index>(i)] = c.values[static_cast<Eigen::Index>(i % c.dim())];
    }
    return mu;
}

GaussianAnalyticDenoiser::GaussianAnalyticDenoiser(double sigma) : sigma_(sigma) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
        throw ValidationError("sigma must be finite and non-negative");
    }
}

LatentTensor GaussianAnalyticDenoiser::predict(const LatentTensor& x_t, double alpha_bar,
                                               const TextEmbedding& c) const {
    const double denom = alpha_bar * sigma_ * sigma_ + 1.0 - alpha_bar;
    if (denom <= 0.0) {
        throw SingularityError("analytic noise prediction is singular at alpha_bar = 1 with sigma = 0");
    }
    const Eigen::VectorXd mu = tile_embedding(c, x_t.size());
    return {std::sqrt(1.0 - alpha_bar) * (x_t.values - std::sqrt(alpha_bar) * mu) / denom};
}

void LinearDenoiserParams::validate() const {
    if (A.rows() != A.cols() || B.rows() != A.rows() || b.rows() != A.rows() || b.cols() != 2) {
        throw ValidationError("linear denoiser parameter shapes are inconsistent");
    }
    if (!A.allFinite() || !B.allFinite() || !b.allFinite()) {
        throw ValidationError("linear denoiser parameters contain non-finite values");
    }
}

LinearDenoiserParams LinearDenoiserParams::zeros(std::size_t latent_dim, std::size_t embedding_dim) {
    const auto D = static_cast<Eigen::Index>(latent_dim);
    const auto d = static_cast<Eigen::Index>(embedding_dim);
    return {Eigen::MatrixXd::Zero(D, D), Eigen::MatrixXd::Zero(D, d), Eigen::MatrixXd::Zero(D, 2)};
}

LinearDenoiser::LinearDenoiser(LinearDenoiserParams params) : params_(std::move(params)) {
    params_.validate();
}

namespace {

Eigen::Vector2d time_features(double alpha_bar) {
    return {std::sqrt(alpha_bar), std::sqrt(1.0 - alpha_bar)};
}

Eigen::VectorXd linear_predict(const LinearDenoiserParams& p, const Eigen::VectorXd& x_t,
                               double alpha_bar, const TextEmbedding& c) {
    if (static_cast<std::size_t>(x_t.size()) != p.latent_dim() || c.dim() != p.embedding_dim()) {
        throw ValidationError("linear denoiser input has the wrong dimension");
    }
    return p.A * x_t + p.B * c.values + p.b * time_features(alpha_bar);
}

}  // namespace

LatentTensor LinearDenoiser::predict(const LatentTensor& x_t, double alpha_bar,
                                     const TextEmbedding& c) const {
    return {linear_predict(params_, x_t.values, alpha_bar, c)};
}

// --------------------------------------------------------------- operators

LatentTensor add_noise(const LatentTensor& x0, const LatentTensor& eps, double alpha_bar) {
    require_same_size(x0, eps, "add_noise");
    if (!(alpha_bar >= 0.0 && alpha_bar <= 1.0)) throw ValidationError("alpha_bar outside [0, 1]");
    return {std::sqrt(alpha_bar) * x0.values + std::sqrt(1.0 - alpha_bar) * eps.values};
}

LatentTensor add_noise(const LatentTensor& x0, const LatentTensor& eps,
                       const DiffusionSchedule& sched, int t) {
    return add_noise(x0, eps, sched.alpha_bar(t));
}

LatentTensor analytic_eps(const LatentTensor& x_t, int t, const GaussianAnalyticDenoiser& den,
                          const TextEmbedding& c, const DiffusionSchedule& sched) {
    return den.predict(x_t, sched.alpha_bar(t), c);
}

LatentTensor cfg_blend(const LatentTensor& eps_null, const LatentTensor& eps_src,
                       const LatentTensor& eps_tgt, const EditConfig& cfg) {
    require_same_size(eps_null, eps_src, "cfg_blend");
    require_same_size(eps_null, eps_tgt, "cfg_blend");
    const Eigen::VectorXd text = cfg.w_src * eps_src.values + cfg.w_tgt * eps_tgt.values;
    return {eps_null.values + cfg.guidance_scale * (text - eps_null.values)};
}

LatentTensor ddim_step(const LatentTensor& x_t, const LatentTensor& eps, double alpha_from,
                       double alpha_to) {
    require_same_size(x_t, eps, "ddim_step");
    if (!(alpha_from > 0.0 && alpha_to <= 1.0)) {
        throw ValidationError("ddim_step needs 0 < alpha_bar <= 1");
    }
    if (alpha_from > alpha_to) {
        throw ValidationError("ddim_step must move towards the clean end");
    }
    return {transfer(x_t.values, eps.values, alpha_from, alpha_to)};
}

LatentTensor ddim_step(const LatentTensor& x_t, const LatentTensor& eps,
                       const DiffusionSchedule& sched, int from_t, int to_t) {
    if (to_t >= from_t) {
        throw ValidationError("ddim_step from index " + std::to_string(from_t) +
                              " to index " + std::to_string(to_t) + " is not a denoising step");
    }
    return ddim_step(x_t, eps, sched.alpha_bar(from_t), sched.alpha_bar(to_t));
}

namespace {

Eigen::VectorXd guided_eps(const NoisePredictor& den, const Eigen::VectorXd& x, double alpha_bar,
                           const TextEmbedding& c, double scale) {
    const LatentTensor xt{x};
    Eigen::VectorXd eps = den.predict(xt, alpha_bar, c).values;
    if (scale != 1.0) {
        const Eigen::VectorXd eps_null =
            den.predict(xt, alpha_bar, TextEmbedding::null(c.dim())).values;
        eps = eps_null + scale * (eps - eps_null);
    }
    return eps;
}

}  // namespace

std::vector<LatentTensor> ddim_invert(const LatentTensor& x0, const TextEmbedding& c,
                                      const DiffusionSchedule& sched, const NoisePredictor& den,
                                      int upto, int fp_iters, double guidance_scale) {
    if (upto < 0 || upto > sched.steps()) {
        throw ValidationError("inversion depth must lie in [0, steps]");
    }
    if (fp_iters < 0) throw ValidationError("fixed-point iterations must be non-negative");

    std::vector<LatentTensor> trajectory;
    trajectory.reserve(static_cast<std::size_t>(upto) + 1);
    trajectory.push_back(x0);
    for (int k = 1; k <= upto; ++k) {
        const Eigen::VectorXd& prev = trajectory.back().values;
        const double alpha_prev = sched.alpha_bar(sched.sample_index(k - 1));
        const double alpha_next = sched.alpha_bar(sched.sample_index(k));

        Eigen::VectorXd eps = guided_eps(den, prev, alpha_next, c, guidance_scale);
        for (int it = 0; it < fp_iters; ++it) {
            eps = guided_eps(den, transfer(prev, eps, alpha_prev, alpha_next), alpha_next, c,
                             guidance_scale);
        }
        LatentTensor next{transfer(prev, eps, alpha_prev, alpha_next)};
        if (!next.all_finite()) throw NumericDivergenceError("inversion", k);
        trajectory.push_back(std::move(next));
    }
    return trajectory;
}

LatentTensor ddim_sample(const LatentTensor& x_t, const TextEmbedding& c,
                         const DiffusionSchedule& sched, const NoisePredictor& den, int from_step) {
    if (from_step < 0 || from_step > sched.steps()) {
        throw ValidationError("sampling start must lie in [0, steps]");
    }
    Eigen::VectorXd x = x_t.values;
    for (int k = from_step; k >= 1; --k) {
        const double alpha_from = sched.alpha_bar(sched.sample_index(k));
        const double alpha_to = sched.alpha_bar(sched.sample_index(k - 1));
        const Eigen::VectorXd eps = den.predict(LatentTensor{x}, alpha_from, c).values;
        x = transfer(x, eps, alpha_from, alpha_to);
        if (!x.allFinite()) throw NumericDivergenceError("sampling", k);
    }
    return {std::move(x)};
}

LatentTensor edit(const LatentTensor& x0, const TextEmbedding& c_src, const TextEmbedding& c_tgt,
                  const TextEmbedding& c_null, const EditConfig& cfg,
                  const DiffusionSchedule& sched, const NoisePredictor& den) {
    cfg.validate();
    if (cfg.steps != sched.steps()) {
        throw ValidationError("edit config has " + std::to_string(cfg.steps) +
                              " steps but the schedule has " + std::to_string(sched.steps()));
    }
    if (c_src.dim() != c_tgt.dim() || c_src.dim() != c_null.dim()) {
        throw ValidationError("conditioning embeddings differ in dimension");
    }

    const int start = cfg.steps - cfg.skip;
    auto trajectory = ddim_invert(x0, c_src, sched, den, start, cfg.fixed_point_iters,
                                  cfg.inversion_scale);
    LatentTensor x = std::move(trajectory.back());

    for (int k = start; k >= 1; --k) {
        const double alpha_from = sched.alpha_bar(sched.sample_index(k));
        const double alpha_to = sched.alpha_bar(sched.sample_index(k - 1));
        const LatentTensor eps_null = den.predict(x, alpha_from, c_null);
        const LatentTensor eps_src = den.predict(x, alpha_from, c_src);
        const LatentTensor eps_tgt = den.predict(x, alpha_from, c_tgt);
        const LatentTensor eps = cfg_blend(eps_null, eps_src, eps_tgt, cfg);
        x.values = transfer(x.values, eps.values, alpha_from, alpha_to);
        if (!x.all_finite()) throw NumericDivergenceError("editing", k);
    }
    return x;
}

NoisePredLoss noise_pred_loss(const LinearDenoiserParams& params,
                              std::span<const NoisePredSample> batch,
                              const DiffusionSchedule& sched) {
    if (batch.empty()) throw ValidationError("noise-prediction batch is empty");
    params.validate();

    NoisePredLoss out{0.0, LinearDenoiserParams::zeros(params.latent_dim(), params.embedding_dim())};
    const double scale = 2.0 / static_cast<double>(batch.size());
    for (const auto& sample : batch) {
        const double alpha_bar = sched.alpha_bar(sample.t);
        const LatentTensor x_t = add_noise(sample.x0, sample.eps, alpha_bar);
        const Eigen::VectorXd residual =
            linear_predict(params, x_t.values, alpha_bar, sample.c) - sample.eps.values;
        out.loss += residual.squaredNorm();
        out.gradient.A.noalias() += scale * residual * x_t.values.transpose();
        out.gradient.B.noalias() += scale * residual * sample.c.values.transpose();
        out.gradient.b.noalias() += scale * residual * time_features(alpha_bar).transpose();
    }
    out.loss /= static_cast<double>(batch.size());
    return out;
}

// ------------------------------------------------------------------ formats

namespace {

// Next whitespace-separated PGM token, skipping '#' comments.
std::string next_pnm_token(std::string_view text, std::size_t& pos) {
    while (pos < text.size()) {
        const auto c = static_cast<unsigned char>(text[pos]);
        if (c == '#') {
            while (pos < text.size() && text[pos] != '\n') ++pos;
        } else if (std::isspace(c)) {
            ++pos;
        } else {
            break;
        }
    }
    const std::size_t start = pos;
    while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    if (start == pos) throw ParseError("truncated PGM data", start);
    return std::string(text.substr(start, pos - start));
}

std::size_t pnm_number(std::string_view text, std::size_t& pos) {
    const std::size_t start = pos;
    const std::string tok = next_pnm_token(text, pos);
    if (!std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c); })) {
        throw ParseError("expected a non-negative integer in PGM data", start);
    }
    return static_cast<std::size_t>(std::stoull(tok));
}

}  // namespace

GrayImage read_pgm(std::string_view text) {
    std::size_t pos = 0;
    if (next_pnm_token(text, pos) != "P2") throw ParseError("expected a plain PGM (P2) header", 0);
    GrayImage img;
    img.width = pnm_number(text, pos);
    img.height = pnm_number(text, pos);
    const std::size_t maxval = pnm_number(text, pos);
    if (maxval == 0 || maxval > 255) throw ValidationError("PGM maxval must be in [1, 255]");
    img.latent.values.resize(static_cast<Eigen::Index>(img.width * img.height));
    for (std::size_t i = 0; i < img.width * img.height; ++i) {
        const std::size_t v = pnm_number(text, pos);
        if (v > maxval) throw ValidationError("PGM sample exceeds maxval");
        img.latent.values[static_cast<Eigen::Index>(i)] =
            2.0 * static_cast<double>(v) / static_cast<double>(maxval) - 1.0;
    }
    return img;
}

std::string write_pgm(const LatentTensor& latent, std::size_t width, std::size_t height) {
    if (width * height != latent.size()) {
        throw ValidationError("PGM shape does not match latent dimension");
    }
    std::ostringstream out;
    out << "P2\n" << width << ' ' << height << "\n255\n";
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            const double v = latent.values[static_cast<Eigen::Index>(y * width + x)];
            const long level = std::lround((std::clamp(v, -1.0, 1.0) + 1.0) * 127.5);
            if (x) out << ' ';
            out << level;
        }
        out << '\n';
    }
    return out.str();
}

std::string latent_to_json(const LatentTensor& latent) {
    const std::vector<double> values(latent.values.data(),
                                     latent.values.data() + latent.values.size());
    return nlohmann::json(values).dump() + "\n";
}

LatentTensor latent_from_json(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("malformed latent JSON", e.byte);
    }
    if (!doc.is_array() ||
        !std::all_of(doc.begin(), doc.end(), [](const auto& v) { return v.is_number(); })) {
        throw ValidationError("latent JSON must be an array of numbers");
    }
    const auto values = doc.get<std::vector<double>>();
    return {Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()))};
}

}  // namespace simgraph::diffedit
