#pragma once

#include "battkit/matrix.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace battkit {

// Windowed aging rate of one feature series (units per cycle).
struct RateWindow {
    std::size_t start = 100;
    std::size_t end = 200;
    std::size_t n = 50;
};

struct AgingRates {
    std::vector<double> rates; // one per feature column
    double domain_temperature_k = 0.0;
    RateWindow window;
};

struct TransferSource {
    double temperature_k = 0.0;
    AgingRates rates;
    double at_score = 1.0;
    double weight = 0.0;
    // per-cycle per-feature rates for the chain of degradation
    Matrix per_cycle_rates; // rows = cycles, cols = features
};

struct TransferPlan {
    std::vector<TransferSource> sources;
    double target_temperature_k = 0.0;
    std::optional<double> alpha; // E_a / k_B in kelvin, when known

    std::string to_json() const;
    void validate() const;
};

// r = sum_{i=0}^{n-1} (F[end+i] - F[start+i]) / (n * (end - start)).
// `series` holds per-cycle values with series[0] = cycle `first_cycle`.
double aging_rate(const std::vector<double>& series, std::size_t first_cycle,
                  const RateWindow& window);

// Arrhenius transferability metric from measured rates.
double at_score(double r_source, double r_target);

// AT score when the activation energy is known: exp((-1/Ts + 1/Tt) * alpha),
// implemented exactly as printed.
double at_score_known_alpha(double t_source_k, double t_target_k, double alpha_k);

// Ensemble weights W_i = (|AT_i - 1| * sum_j 1/|AT_j - 1|)^-1 with an
// epsilon guard: near-perfect sources split the full weight uniformly.
std::vector<double> source_weights(const std::vector<double>& at_scores);

// Centered first differences of a moving-mean smoothed series; the rate
// feed for the chain of degradation.
std::vector<double> per_cycle_rates(const std::vector<double>& series,
                                    std::size_t smooth_window = 5);

struct ChainResult {
    Matrix rows; // horizon+1 rows, starting with the seed
    bool horizon_exhausted = false; // some source ran out; last rate held
};

// Chain of degradation: F^i = F^{i-1} + sum_j W_j * AT_j * r_j^{i-1}, applied
// per feature column. `cycle_offset` selects where in the per-cycle rate
// series the extrapolation starts.
ChainResult chain_extrapolate(const std::vector<double>& seed_row,
                              const TransferPlan& plan, std::size_t cycle_offset,
                              std::size_t horizon);

} // namespace battkit
