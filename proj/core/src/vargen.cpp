#include "simgraph/vargen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "simgraph/error.hpp"
#include "simgraph/rng.hpp"

namespace simgraph::vargen {

using conditioning::TextEmbedding;
using nlohmann::json;

// ---------------------------------------------------------------- codebook

void Codebook::validate() const {
    if (palette.size() < 2) throw ValidationError("codebook needs at least two colours");
    if (patch_size == 0) throw ValidationError("patch size must be positive");
    std::set<std::tuple<double, double, double>> seen;
    for (const auto& c : palette) {
        for (double v : {c.r, c.g, c.b}) {
            if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("palette colour outside [0,1]");
        }
        if (!seen.emplace(c.r, c.g, c.b).second) throw ValidationError("duplicate palette colour");
    }
}

Codebook Codebook::make_default(std::size_t k) {
    Codebook cb;
    cb.palette.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        // HSV with s = v = 1; the hue sextant picks which channel ramps.
        const double hue = 6.0 * static_cast<double>(i) / static_cast<double>(k);
        const int sextant = static_cast<int>(hue);
        const double f = hue - sextant;
        switch (sextant) {
            case 0: cb.palette.push_back({1.0, f, 0.0}); break;
            case 1: cb.palette.push_back({1.0 - f, 1.0, 0.0}); break;
            case 2: cb.palette.push_back({0.0, 1.0, f}); break;
            case 3: cb.palette.push_back({0.0, 1.0 - f, 1.0}); break;
            case 4: cb.palette.push_back({f, 0.0, 1.0}); break;
            default: cb.palette.push_back({1.0, 0.0, 1.0 - f}); break;
        }
    }
    cb.patch_size = 1;
    return cb;
}

void TokenSequence::validate(std::size_t codebook_size) const {
    if (tokens.size() != grid.length()) {
        throw ValidationError("token count does not match grid shape");
    }
    for (Token t : tokens) {
        if (t < 0 || static_cast<std::size_t>(t) >= codebook_size) {
            throw ValidationError("token " + std::to_string(t) + " outside codebook of size " +
                                  std::to_string(codebook_size));
        }
    }
}

ImageGrid decode_tokens(const TokenSequence& z, const Codebook& cb) {
    z.validate(cb.size());
    const std::size_t p = cb.patch_size;
    ImageGrid img;
    img.height = z.grid.rows * p;
    img.width = z.grid.cols * p;
    img.pixels.resize(img.height * img.width);
    for (std::size_t i = 0; i < z.grid.rows; ++i) {
        for (std::size_t j = 0; j < z.grid.cols; ++j) {
            const Rgb& colour = cb.palette[static_cast<std::size_t>(z.tokens[i * z.grid.cols + j])];
            for (std::size_t dy = 0; dy < p; ++dy) {
                for (std::size_t dx = 0; dx < p; ++dx) img.at(i * p + dy, j * p + dx) = colour;
            }
        }
    }
    return img;
}

TokenSequence encode_image(const ImageGrid& img, const Codebook& cb) {
    const std::size_t p = cb.patch_size;
    if (p == 0 || img.height % p != 0 || img.width % p != 0) {
        throw ValidationError("image dimensions are not divisible by the patch size");
    }
    TokenSequence z;
    z.grid = {img.height / p, img.width / p};
    z.tokens.reserve(z.grid.length());
    const double inv_area = 1.0 / static_cast<double>(p * p);
    for (std::size_t i = 0; i < z.grid.rows; ++i) {
        for (std::size_t j = 0; j < z.grid.cols; ++j) {
            Rgb mean;
            for (std::size_t dy = 0; dy < p; ++dy) {
                for (std::size_t dx = 0; dx < p; ++dx) {
                    const Rgb& px = img.at(i * p + dy, j * p + dx);
                    mean.r += px.r;
                    mean.g += px.g;
                    mean.b += px.b;
                }
            }
            mean.r *= inv_area;
            mean.g *= inv_area;
            mean.b *= inv_area;

            Token best = 0;
            double best_dist = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < cb.size(); ++k) {
                const Rgb& c = cb.palette[k];
                const double dr = mean.r - c.r, dg = mean.g - c.g, db = mean.b - c.b;
                const double dist = dr * dr + dg * dg + db * db;
                if (dist < best_dist) {
                    best_dist = dist;
                    best = static_cast<Token>(k);
                }
            }
            z.tokens.push_back(best);
        }
    }
    return z;
}

// ------------------------------------------------------------------ params

void ARModelParams::validate() const {
    const auto k = token_embed.rows();
    const auto d_m = token_embed.cols();
    if (k < 1 || d_m < 1) throw ValidationError("model has an empty dimension");
    if (cond_proj.cols() != d_m || out_proj.rows() != d_m || out_proj.cols() != k ||
        start_embed.size() != d_m) {
        throw ValidationError("model parameter shapes are inconsistent");
    }
    if (!token_embed.allFinite() || !cond_proj.allFinite() || !out_proj.allFinite() ||
        !start_embed.allFinite()) {
        throw ValidationError("model parameters contain non-finite values");
    }
}

ARModelParams ARModelParams::zeros(std::size_t k, std::size_t d, std::size_t d_m) {
    const auto K = static_cast<Eigen::Index>(k);
    const auto D = static_cast<Eigen::Index>(d);
    const auto M = static_cast<Eigen::Index>(d_m);
    return {Eigen::MatrixXd::Zero(K, M), Eigen::MatrixXd::Zero(D, M), Eigen::MatrixXd::Zero(M, K),
            Eigen::VectorXd::Zero(M)};
}

ARModelParams ARModelParams::random(std::size_t k, std::size_t d, std::size_t d_m,
                                    std::uint64_t seed, double scale) {
    ARModelParams p = zeros(k, d, d_m);
    SplitMix64 rng(seed);
    auto fill = [&](auto& m) {
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
    };
    fill(p.token_embed);
    fill(p.cond_proj);
    fill(p.out_proj);
    fill(p.start_embed);
    return p;
}

ARModelParams ARModelParams::init(std::size_t k, std::size_t d, std::size_t d_m,
                                  std::uint64_t seed) {
    ARModelParams p = zeros(k, d, d_m);
    SplitMix64 rng(seed);
    for (Eigen::Index i = 0; i < p.token_embed.size(); ++i) p.token_embed.data()[i] = 2.0 * rng.normal();
    for (Eigen::Index i = 0; i < p.cond_proj.size(); ++i) p.cond_proj.data()[i] = rng.normal();
    return p;
}

ARModelParams& ARModelParams::operator+=(const ARModelParams& other) {
    token_embed += other.token_embed;
    cond_proj += other.cond_proj;
    out_proj += other.out_proj;
    start_embed += other.start_embed;
    return *this;
}

ARModelParams& ARModelParams::operator*=(double s) {
    token_embed *= s;
    cond_proj *= s;
    out_proj *= s;
    start_embed *= s;
    return *this;
}

// ------------------------------------------------------------------- model

namespace {

void check_embedding(const TextEmbedding& e_t, const ARModelParams& params) {
    if (e_t.dim() != params.embedding_dim()) {
        throw ValidationError("text embedding has dimension " + std::to_string(e_t.dim()) +
                              ", model expects " + std::to_string(params.embedding_dim()));
    }
}

Eigen::VectorXd hidden_state(std::span<const Token> prefix, const TextEmbedding& e_t,
                             const ARModelParams& params) {
    Eigen::VectorXd h = params.start_embed + params.cond_proj.transpose() * e_t.values;
    if (!prefix.empty()) {
        Eigen::VectorXd pool = Eigen::VectorXd::Zero(h.size());
        for (Token t : prefix) pool += params.token_embed.row(t).transpose();
        h += pool / static_cast<double>(prefix.size());
    }
    return h;
}

}  // namespace

Eigen::VectorXd ar_next_logits(std::span<const Token> prefix, const TextEmbedding& e_t,
                               const ARModelParams& params) {
    check_embedding(e_t, params);
    const auto k = static_cast<Token>(params.codebook_size());
    for (Token t : prefix) {
        if (t < 0 || t >= k) throw ValidationError("prefix token outside codebook");
    }
    const Eigen::VectorXd a = hidden_state(prefix, e_t, params).array().tanh().matrix();
    return params.out_proj.transpose() * a;
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
    const double m = logits.maxCoeff();
    const double lse = m + std::log((logits.array() - m).exp().sum());
    return (logits.array() - lse).matrix();
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    const Eigen::VectorXd shifted = (logits.array() - logits.maxCoeff()).exp().matrix();
    return shifted / shifted.sum();
}

TokenSequence sample_tokens(const TextEmbedding& e_t, const ARModelParams& params, GridShape grid,
                            double temperature, std::uint64_t seed) {
    if (!(temperature >= 0.0)) throw ValidationError("temperature must be non-negative");
    TokenSequence z;
    z.grid = grid;
    z.tokens.reserve(grid.length());
    SplitMix64 rng(seed);
    for (std::size_t l = 0; l < grid.length(); ++l) {
        const Eigen::VectorXd logits = ar_next_logits(z.tokens, e_t, params);
        Eigen::Index choice = 0;
        if (temperature == 0.0) {
            // maxCoeff returns the first maximal index.
            logits.maxCoeff(&choice);
        } else {
            const Eigen::VectorXd probs = softmax(logits / temperature);
            const double u = rng.uniform();
            double cumulative = 0.0;
            choice = probs.size() - 1;
            for (Eigen::Index k = 0; k < probs.size(); ++k) {
                cumulative += probs[k];
                if (u < cumulative) {
                    choice = k;
                    break;
                }
            }
        }
        z.tokens.push_back(static_cast<Token>(choice));
    }
    return z;
}

double token_nll(const TokenSequence& z, const TextEmbedding& e_t, const ARModelParams& params) {
    z.validate(params.codebook_size());
    check_embedding(e_t, params);
    double nll = 0.0;
    const std::span<const Token> tokens(z.tokens);
    for (std::size_t l = 0; l < tokens.size(); ++l) {
        const Eigen::VectorXd a =
            hidden_state(tokens.first(l), e_t, params).array().tanh().matrix();
        const Eigen::VectorXd logits = params.out_proj.transpose() * a;
        nll -= log_softmax(logits)[tokens[l]];
    }
    return nll;
}

NllAndGradient token_nll_gradient(const TokenSequence& z, const TextEmbedding& e_t,
                                  const ARModelParams& params) {
    z.validate(params.codebook_size());
    check_embedding(e_t, params);

    const std::size_t len = z.size();
    const auto d_m = static_cast<Eigen::Index>(params.width());
    NllAndGradient out{0.0, ARModelParams::zeros(params.codebook_size(), params.embedding_dim(),
                                                 params.width())};
    ARModelParams& grad = out.gradient;

    const Eigen::VectorXd base = params.start_embed + params.cond_proj.transpose() * e_t.values;
    Eigen::VectorXd prefix_sum = Eigen::VectorXd::Zero(d_m);
    // dL/d(pool) at each step; token rows receive it scaled by 1/l.
    std::vector<Eigen::VectorXd> pool_grad(len);

    for (std::size_t l = 0; l < len; ++l) {
        Eigen::VectorXd h = base;
        if (l > 0) h += prefix_sum / static_cast<double>(l);
        const Eigen::VectorXd a = h.array().tanh().matrix();
        const Eigen::VectorXd logits = params.out_proj.transpose() * a;
        const Eigen::VectorXd logp = log_softmax(logits);
        const Token target = z.tokens[l];
        out.nll -= logp[target];

        Eigen::VectorXd g = logp.array().exp().matrix();
        g[target] -= 1.0;
        grad.out_proj.noalias() += a * g.transpose();
        const Eigen::VectorXd dh =
            ((params.out_proj * g).array() * (1.0 - a.array().square())).matrix();
        grad.start_embed += dh;
        grad.cond_proj.noalias() += e_t.values * dh.transpose();
        if (l > 0) pool_grad[l] = dh / static_cast<double>(l);

        prefix_sum += params.token_embed.row(target).transpose();
    }

    // Token j sits in every prefix of length > j.
    Eigen::VectorXd suffix = Eigen::VectorXd::Zero(d_m);
    for (std::size_t j = len; j-- > 0;) {
        if (j + 1 < len) suffix += pool_grad[j + 1];
        grad.token_embed.row(z.tokens[j]) += suffix.transpose();
    }
    return out;
}

TrainStepResult train_step(std::span<const TrainExample> batch, const ARModelParams& params,
                           double lr) {
    if (batch.empty()) throw ValidationError("training batch is empty");
    if (!(lr >= 0.0)) throw ValidationError("learning rate must be non-negative");
    params.validate();

    ARModelParams total =
        ARModelParams::zeros(params.codebook_size(), params.embedding_dim(), params.width());
    double loss = 0.0;
    for (const auto& ex : batch) {
        const auto e_t = conditioning::encode_text(ex.caption, params.embedding_dim());
        auto [nll, grad] = token_nll_gradient(ex.tokens, e_t, params);
        loss += nll;
        total += grad;
    }
    const double inv_n = 1.0 / static_cast<double>(batch.size());

    TrainStepResult result{params, loss * inv_n};
    if (lr > 0.0) {
        total *= -lr * inv_n;
        result.params += total;
    }
    return result;
}

// ------------------------------------------------------------------ formats

std::string write_ppm(const ImageGrid& img) {
    auto level = [](double c) {
        return static_cast<int>(std::lround(255.0 * std::clamp(c, 0.0, 1.0)));
    };
    std::ostringstream out;
    out << "P3\n" << img.width << ' ' << img.height << "\n255\n";
    for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x) {
            const Rgb& px = img.at(y, x);
            if (x) out << ' ';
            out << level(px.r) << ' ' << level(px.g) << ' ' << level(px.b);
        }
        out << '\n';
    }
    return out.str();
}

namespace {

json parse_json(std::string_view text, const char* what) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed ") + what + " JSON", e.byte);
    }
}

TokenSequence tokens_from(const json& doc) {
    try {
        TokenSequence z;
        z.grid = {doc.at("rows").get<std::size_t>(), doc.at("cols").get<std::size_t>()};
        z.tokens = doc.at("tokens").get<std::vector<Token>>();
        if (z.tokens.size() != z.grid.length()) {
            throw ValidationError("token count does not match grid shape");
        }
        return z;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid token sequence: ") + e.what());
    }
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols,
                                 const char* name) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
        throw ValidationError(std::string("parameter '") + name + "' has the wrong row count");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw ValidationError(std::string("parameter '") + name + "' has the wrong column count");
        }
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

}  // namespace

std::string tokens_to_json(const TokenSequence& z) {
    const json doc = {{"rows", z.grid.rows}, {"cols", z.grid.cols}, {"tokens", z.tokens}};
    return doc.dump() + "\n";
}

TokenSequence tokens_from_json(std::string_view text) {
    return tokens_from(parse_json(text, "token sequence"));
}

std::string params_to_json(const ARModelParams& params) {
    json doc;
    doc["codebook_size"] = params.codebook_size();
    doc["embedding_dim"] = params.embedding_dim();
    doc["width"] = params.width();
    doc["token_embed"] = matrix_to_json(params.token_embed);
    doc["cond_proj"] = matrix_to_json(params.cond_proj);
    doc["out_proj"] = matrix_to_json(params.out_proj);
    doc["start_embed"] = std::vector<double>(params.start_embed.data(),
                                             params.start_embed.data() + params.start_embed.size());
    return doc.dump() + "\n";
}

ARModelParams params_from_json(std::string_view text) {
    const json doc = parse_json(text, "model parameter");
    try {
        const auto k = doc.at("codebook_size").get<Eigen::Index>();
        const auto d = doc.at("embedding_dim").get<Eigen::Index>();
        const auto d_m = doc.at("width").get<Eigen::Index>();
        ARModelParams p;
        p.token_embed = matrix_from_json(doc.at("token_embed"), k, d_m, "token_embed");
        p.cond_proj = matrix_from_json(doc.at("cond_proj"), d, d_m, "cond_proj");
        p.out_proj = matrix_from_json(doc.at("out_proj"), d_m, k, "out_proj");
        const auto start = doc.at("start_embed").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(start.size()) != d_m) {
            throw ValidationError("parameter 'start_embed' has the wrong length");
        }
        p.start_embed = Eigen::Map<const Eigen::VectorXd>(start.data(), d_m);
        p.validate();
        return p;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid model parameters: ") + e.what());
    }
}

std::vector<TrainExample> dataset_from_json(std::string_view text) {
    const json doc = parse_json(text, "dataset");
    std::vector<TrainExample> out;
    try {
        for (const json& ex : doc.at("examples")) {
            out.push_back({ex.at("caption").get<std::string>(), tokens_from(ex)});
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid dataset: ") + e.what());
    }
    return out;
}

}  // namespace simgraph::vargen
