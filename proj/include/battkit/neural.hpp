#pragma once

#include "battkit/matrix.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace battkit {

// Fully connected perceptron with the fixed hidden stack (32, 64, 32),
// leaky-ReLU activations on hidden layers and a linear output layer.
class MLPModel {
public:
    MLPModel() = default;
    // Glorot-uniform initialization, deterministic given the seed.
    MLPModel(std::size_t input_dim, std::size_t output_dim, std::uint64_t seed);

    const std::vector<std::size_t>& layer_sizes() const { return layer_sizes_; }
    std::size_t input_dim() const { return layer_sizes_.front(); }
    std::size_t output_dim() const { return layer_sizes_.back(); }
    double activation_slope() const { return activation_slope_; }
    std::uint64_t seed() const { return seed_; }

    // Forward pass over a batch (rows = samples).
    Matrix forward(const Matrix& x) const;
    std::vector<double> forward_row(const std::vector<double>& x) const;

    // Flat read/write access for optimizers and finite differencing.
    std::size_t parameter_count() const;
    double get_parameter(std::size_t flat_index) const;
    void set_parameter(std::size_t flat_index, double value);

    const std::vector<Matrix>& weights() const { return weights_; }
    const std::vector<std::vector<double>>& biases() const { return biases_; }

    std::string to_checkpoint_json(const std::string& norm_stats_ref = "") const;
    static MLPModel from_checkpoint_json(const std::string& text);

private:
    friend struct TrainAccess;

    std::vector<std::size_t> layer_sizes_;
    std::vector<Matrix> weights_;              // layer l: (out x in)
    std::vector<std::vector<double>> biases_;  // layer l: out
    double activation_slope_ = 0.01;
    std::uint64_t seed_ = 0;
};

struct TrainConfig {
    std::size_t epochs = 30;
    double learning_rate = 1e-4;
    double lambda = 1e-5;      // L1 residual weight
    std::size_t batch_size = 0; // 0 = full batch
    std::uint64_t seed = 0;
    // Adam moments; standard defaults recorded in every checkpoint.
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
};

// Defaults from the two pipeline models.
TrainConfig chemical_process_train_config();
TrainConfig trajectory_train_config();

// loss = mean over rows of the squared residual norm + lambda * sum |residual|
double mlp_loss(const MLPModel& model, const Matrix& x, const Matrix& y, double lambda);

struct TrainResult {
    std::vector<double> loss_history; // full-data loss after each epoch
};

// Adam training; deterministic given (seed, data order, config). Raises
// NonFiniteLoss (with the epoch index) if the loss leaves the reals.
TrainResult mlp_train(MLPModel& model, const Matrix& x, const Matrix& y, const TrainConfig& cfg);

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped_zero_residual = 0; // |r| at the L1 kink, excluded
};

// Central-difference verification (h = 1e-5) of the analytic gradient of the
// full training loss.
GradCheckResult grad_check(const MLPModel& model, const Matrix& x, const Matrix& y,
                           double lambda);

} // namespace battkit
