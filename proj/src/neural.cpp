#include "battkit/neural.hpp"

#include "battkit/error.hpp"
#include "battkit/kernels.hpp"
#include "battkit/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace battkit {

namespace {

using json = nlohmann::json;
using kernels::Op;

constexpr std::size_t kHidden[3] = {32, 64, 32};

} // namespace

MLPModel::MLPModel(std::size_t input_dim, std::size_t output_dim, std::uint64_t seed)
    : seed_(seed) {
    if (input_dim < 1 || output_dim < 1)
        raise(ErrorCode::InvalidConfig, "model dimensions must be >= 1");
    layer_sizes_ = {input_dim, kHidden[0], kHidden[1], kHidden[2], output_dim};
    Rng rng(seed, 0xB17C4E7ULL);
    for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
        const std::size_t fan_in = layer_sizes_[l];
        const std::size_t fan_out = layer_sizes_[l + 1];
        const double bound = std::sqrt(6.0 / double(fan_in + fan_out));
        Matrix w(fan_out, fan_in);
        for (auto& x : w.v) x = rng.uniform(-bound, bound);
        weights_.push_back(std::move(w));
        biases_.emplace_back(fan_out, 0.0);
    }
}

Matrix MLPModel::forward(const Matrix& x) const {
    Matrix a = x;
    Matrix z;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        kernels::gemm(a, Op::None, weights_[l], Op::Transpose, z);
        kernels::add_row_bias(z, biases_[l]);
        if (l + 1 < weights_.size()) kernels::leaky_relu(z, activation_slope_);
        std::swap(a, z);
    }
    return a;
}

std::vector<double> MLPModel::forward_row(const std::vector<double>& x) const {
    Matrix m(1, x.size());
    m.v = x;
    Matrix out = forward(m);
    return out.v;
}

std::size_t MLPModel::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l)
        n += weights_[l].size() + biases_[l].size();
    return n;
}

double MLPModel::get_parameter(std::size_t flat_index) const {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        if (flat_index < weights_[l].size()) return weights_[l].v[flat_index];
        flat_index -= weights_[l].size();
        if (flat_index < biases_[l].size()) return biases_[l][flat_index];
        flat_index -= biases_[l].size();
    }
    raise(ErrorCode::InvalidConfig, "parameter index out of range");
}

void MLPModel::set_parameter(std::size_t flat_index, double value) {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        if (flat_index < weights_[l].size()) {
            weights_[l].v[flat_index] = value;
            return;
        }
        flat_index -= weights_[l].size();
        if (flat_index < biases_[l].size()) {
            biases_[l][flat_index] = value;
            return;
        }
        flat_index -= biases_[l].size();
    }
    raise(ErrorCode::InvalidConfig, "parameter index out of range");
}

std::string MLPModel::to_checkpoint_json(const std::string& norm_stats_ref) const {
    json doc;
    doc["layer_sizes"] = layer_sizes_;
    doc["activation"] = "leaky_relu";
    doc["activation_slope"] = activation_slope_;
    doc["seed"] = seed_;
    doc["adam"] = {{"beta1", 0.9}, {"beta2", 0.999}, {"epsilon", 1e-8}};
    doc["norm_stats_ref"] = norm_stats_ref;
    json weights = json::array();
    json biases = json::array();
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        weights.push_back(weights_[l].v); // row-major (out x in)
        biases.push_back(biases_[l]);
    }
    doc["weights"] = weights;
    doc["biases"] = biases;
    return doc.dump(2);
}

MLPModel MLPModel::from_checkpoint_json(const std::string& text) {
    json doc = json::parse(text);
    MLPModel m;
    m.layer_sizes_ = doc.at("layer_sizes").get<std::vector<std::size_t>>();
    m.activation_slope_ = doc.at("activation_slope").get<double>();
    m.seed_ = doc.at("seed").get<std::uint64_t>();
    const auto& weights = doc.at("weights");
    const auto& biases = doc.at("biases");
    for (std::size_t l = 0; l + 1 < m.layer_sizes_.size(); ++l) {
        Matrix w(m.layer_sizes_[l + 1], m.layer_sizes_[l]);
        w.v = weights.at(l).get<std::vector<double>>();
        if (w.v.size() != w.rows * w.cols)
            raise(ErrorCode::MalformedRow, "checkpoint weight size mismatch");
        m.weights_.push_back(std::move(w));
        m.biases_.push_back(biases.at(l).get<std::vector<double>>());
    }
    return m;
}

void TrainConfig::validate() const {
    if (epochs == 0) raise(ErrorCode::InvalidConfig, "epochs must be > 0");
    if (learning_rate <= 0.0) raise(ErrorCode::InvalidConfig, "learning rate must be > 0");
    if (lambda < 0.0) raise(ErrorCode::InvalidConfig, "lambda must be >= 0");
}

TrainConfig chemical_process_train_config() {
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.learning_rate = 1e-4;
    cfg.lambda = 1e-5;
    return cfg;
}

TrainConfig trajectory_train_config() {
    TrainConfig cfg;
    cfg.epochs = 100;
    cfg.learning_rate = 1e-3;
    cfg.lambda = 1e-5;
    return cfg;
}

double mlp_loss(const MLPModel& model, const Matrix& x, const Matrix& y, double lambda) {
    const Matrix pred = model.forward(x);
    double sq = 0.0, l1 = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        const double r = pred.v[k] - y.v[k];
        sq += r * r;
        l1 += std::abs(r);
    }
    return sq / double(x.rows) + lambda * l1;
}

namespace {

struct ForwardCache {
    std::vector<Matrix> a; // activations, a[0] = input
    std::vector<Matrix> z; // preactivations per layer
};

void forward_cached(const MLPModel& model, const Matrix& x, ForwardCache& cache) {
    const auto& weights = model.weights();
    const auto& biases = model.biases();
    cache.a.assign(weights.size() + 1, Matrix{});
    cache.z.assign(weights.size(), Matrix{});
    cache.a[0] = x;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        kernels::gemm(cache.a[l], Op::None, weights[l], Op::Transpose, cache.z[l]);
        kernels::add_row_bias(cache.z[l], biases[l]);
        cache.a[l + 1] = cache.z[l];
        if (l + 1 < weights.size())
            kernels::leaky_relu(cache.a[l + 1], model.activation_slope());
    }
}

struct Gradients {
    std::vector<Matrix> dw;
    std::vector<std::vector<double>> db;
};

// Backprop of the full loss over the given batch. The subgradient of |r| at
// r = 0 is taken as 0.
void backward(const MLPModel& model, const ForwardCache& cache, const Matrix& y, double lambda,
              Gradients& grads) {
    const auto& weights = model.weights();
    const std::size_t n_layers = weights.size();
    const std::size_t rows = y.rows;

    Matrix delta = cache.a[n_layers]; // prediction
    for (std::size_t k = 0; k < delta.size(); ++k) {
        const double r = delta.v[k] - y.v[k];
        const double sgn = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
        delta.v[k] = 2.0 * r / double(rows) + lambda * sgn;
    }

    grads.dw.assign(n_layers, Matrix{});
    grads.db.assign(n_layers, {});
    Matrix next_delta;
    for (std::size_t l = n_layers; l-- > 0;) {
        kernels::gemm(delta, Op::Transpose, cache.a[l], Op::None, grads.dw[l]);
        grads.db[l].assign(weights[l].rows, 0.0);
        for (std::size_t r = 0; r < delta.rows; ++r)
            for (std::size_t c = 0; c < delta.cols; ++c) grads.db[l][c] += delta(r, c);
        if (l == 0) break;
        kernels::gemm(delta, Op::None, weights[l], Op::None, next_delta);
        const double slope = model.activation_slope();
        for (std::size_t k = 0; k < next_delta.size(); ++k)
            if (cache.z[l - 1].v[k] < 0.0) next_delta.v[k] *= slope;
        std::swap(delta, next_delta);
    }
}

struct AdamState {
    std::vector<Matrix> mw, vw;
    std::vector<std::vector<double>> mb, vb;
    std::size_t t = 0;

    void init(const MLPModel& model) {
        const auto& weights = model.weights();
        const auto& biases = model.biases();
        for (std::size_t l = 0; l < weights.size(); ++l) {
            mw.emplace_back(weights[l].rows, weights[l].cols);
            vw.emplace_back(weights[l].rows, weights[l].cols);
            mb.emplace_back(biases[l].size(), 0.0);
            vb.emplace_back(biases[l].size(), 0.0);
        }
    }
};

} // namespace

struct TrainAccess {
    static std::vector<Matrix>& weights(MLPModel& m) { return m.weights_; }
    static std::vector<std::vector<double>>& biases(MLPModel& m) { return m.biases_; }
};

TrainResult mlp_train(MLPModel& model, const Matrix& x, const Matrix& y, const TrainConfig& cfg) {
    cfg.validate();
    if (x.rows != y.rows)
        raise(ErrorCode::LengthMismatch, "X and Y row counts differ");
    if (x.cols != model.input_dim() || y.cols != model.output_dim())
        raise(ErrorCode::LengthMismatch, "X/Y column counts do not match the model");

    auto& weights = TrainAccess::weights(model);
    auto& biases = TrainAccess::biases(model);

    AdamState adam;
    adam.init(model);
    Rng rng(cfg.seed, 0xADA3ULL);

    const std::size_t batch = cfg.batch_size == 0 ? x.rows : std::min(cfg.batch_size, x.rows);
    std::vector<std::size_t> order(x.rows);
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;

    TrainResult result;
    ForwardCache cache;
    Gradients grads;
    Matrix bx, by;

    const auto adam_step = [&](double lr) {
        ++adam.t;
        const double bc1 = 1.0 - std::pow(cfg.beta1, double(adam.t));
        const double bc2 = 1.0 - std::pow(cfg.beta2, double(adam.t));
        for (std::size_t l = 0; l < weights.size(); ++l) {
            for (std::size_t k = 0; k < weights[l].size(); ++k) {
                double& m = adam.mw[l].v[k];
                double& v = adam.vw[l].v[k];
                const double g = grads.dw[l].v[k];
                m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
                v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
                weights[l].v[k] -= lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.epsilon);
            }
            for (std::size_t k = 0; k < biases[l].size(); ++k) {
                double& m = adam.mb[l][k];
                double& v = adam.vb[l][k];
                const double g = grads.db[l][k];
                m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
                v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
                biases[l][k] -= lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.epsilon);
            }
        }
    };

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (batch == x.rows) {
            forward_cached(model, x, cache);
            backward(model, cache, y, cfg.lambda, grads);
            adam_step(cfg.learning_rate);
        } else {
            rng.shuffle(order);
            for (std::size_t start = 0; start < x.rows; start += batch) {
                const std::size_t stop = std::min(start + batch, x.rows);
                bx = Matrix(stop - start, x.cols);
                by = Matrix(stop - start, y.cols);
                for (std::size_t r = start; r < stop; ++r) {
                    const std::size_t src = order[r];
                    for (std::size_t c = 0; c < x.cols; ++c) bx(r - start, c) = x(src, c);
                    for (std::size_t c = 0; c < y.cols; ++c) by(r - start, c) = y(src, c);
                }
                forward_cached(model, bx, cache);
                backward(model, cache, by, cfg.lambda, grads);
                adam_step(cfg.learning_rate);
            }
        }
        const double loss = mlp_loss(model, x, y, cfg.lambda);
        if (!std::isfinite(loss))
            raise(ErrorCode::NonFiniteLoss,
                  "loss became non-finite at epoch " + std::to_string(epoch));
        result.loss_history.push_back(loss);
    }
    return result;
}

GradCheckResult grad_check(const MLPModel& model, const Matrix& x, const Matrix& y,
                           double lambda) {
    // Residual entries sitting at the |r| kink are excluded from the L1 term
    // in both the analytic and the numeric evaluation.
    constexpr double kKinkTol = 1e-4;
    constexpr double kStep = 1e-5;

    Matrix base_pred = model.forward(x);
    std::vector<char> l1_mask(base_pred.size(), 1);
    GradCheckResult result;
    for (std::size_t k = 0; k < base_pred.size(); ++k) {
        if (std::abs(base_pred.v[k] - y.v[k]) < kKinkTol) {
            l1_mask[k] = 0;
            ++result.skipped_zero_residual;
        }
    }

    const auto masked_loss = [&](const MLPModel& m) {
        const Matrix pred = m.forward(x);
        double sq = 0.0, l1 = 0.0;
        for (std::size_t k = 0; k < pred.size(); ++k) {
            const double r = pred.v[k] - y.v[k];
            sq += r * r;
            if (l1_mask[k]) l1 += std::abs(r);
        }
        return sq / double(x.rows) + lambda * l1;
    };

    // analytic gradient with the same mask
    ForwardCache cache;
    forward_cached(model, x, cache);
    Gradients grads;
    {
        const auto& weights = model.weights();
        const std::size_t n_layers = weights.size();
        Matrix delta = cache.a[n_layers];
        for (std::size_t k = 0; k < delta.size(); ++k) {
            const double r = delta.v[k] - y.v[k];
            const double sgn = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
            delta.v[k] = 2.0 * r / double(x.rows) + (l1_mask[k] ? lambda * sgn : 0.0);
        }
        grads.dw.assign(n_layers, Matrix{});
        grads.db.assign(n_layers, {});
        Matrix next_delta;
        for (std::size_t l = n_layers; l-- > 0;) {
            kernels::gemm(delta, Op::Transpose, cache.a[l], Op::None, grads.dw[l]);
            grads.db[l].assign(weights[l].rows, 0.0);
            for (std::size_t r = 0; r < delta.rows; ++r)
                for (std::size_t c = 0; c < delta.cols; ++c) grads.db[l][c] += delta(r, c);
            if (l == 0) break;
            kernels::gemm(delta, Op::None, weights[l], Op::None, next_delta);
            for (std::size_t k = 0; k < next_delta.size(); ++k)
                if (cache.z[l - 1].v[k] < 0.0) next_delta.v[k] *= model.activation_slope();
            std::swap(delta, next_delta);
        }
    }

    // flatten analytic gradient in the same order as get/set_parameter
    std::vector<double> analytic;
    analytic.reserve(model.parameter_count());
    for (std::size_t l = 0; l < grads.dw.size(); ++l) {
        analytic.insert(analytic.end(), grads.dw[l].v.begin(), grads.dw[l].v.end());
        analytic.insert(analytic.end(), grads.db[l].begin(), grads.db[l].end());
    }

    MLPModel probe = model;
    const std::size_t n_params = model.parameter_count();
    for (std::size_t p = 0; p < n_params; ++p) {
        const double saved = probe.get_parameter(p);
        probe.set_parameter(p, saved + kStep);
        const double up = masked_loss(probe);
        probe.set_parameter(p, saved - kStep);
        const double down = masked_loss(probe);
        probe.set_parameter(p, saved);
        const double numeric = (up - down) / (2.0 * kStep);
        const double denom = std::max({std::abs(analytic[p]), std::abs(numeric), 1e-8});
        const double rel = std::abs(analytic[p] - numeric) / denom;
        result.max_relative_error = std::max(result.max_relative_error, rel);
        ++result.checked;
    }
    return result;
}

} // namespace battkit
