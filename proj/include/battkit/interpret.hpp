#pragma once

#include "battkit/matrix.hpp"
#include "battkit/neural.hpp"

#include <cstdint>
#include <cstddef>
#include <map>
#include <vector>

namespace battkit {

struct SageValues {
    std::vector<double> values;          // per feature
    std::vector<double> standard_errors; // 0 for exact enumeration
    bool exact = false;
    std::size_t permutations = 0;
};

struct SageConfig {
    std::size_t permutations = 512;
    std::uint64_t seed = 0;
    std::size_t exact_max_features = 10; // exact enumeration when d <= this
};

// Shapley additive global importance of the model's MSE loss over one
// window. Marginalized features are imputed by the window mean. Either
// exact subset enumeration (d <= exact_max_features) or permutation
// sampling with standard errors.
SageValues sage_window(const MLPModel& model, const Matrix& x_win,
                       const std::vector<double>& y_win, const SageConfig& cfg);

struct SageReport {
    std::vector<SageValues> windows;
    std::vector<double> lifetime_average;
    std::size_t window_length = 20;
    std::size_t permutations = 0;
    std::uint64_t seed = 0;
};

// Tiles (X, y) into ceil(C / window) windows and runs sage_window on each.
SageReport sage_over_lifetime(const MLPModel& model, const Matrix& x,
                              const std::vector<double>& y, std::size_t window_length,
                              const SageConfig& cfg);

std::vector<double> sage_average(const std::vector<SageValues>& windows);

struct DominanceReport {
    double thermodynamic_share = 0.0;  // |Q1| + |Q9| within the Q pairing
    double kinetic_share = 0.0;        // |Q2..Q8|
    double concentration_share = 0.0;  // VD9 + ReVD within the polarization pairing
    double other_polarization_share = 0.0; // VC89 + ReVC
};

// `sage_by_feature_id` maps taxonomy feature id -> averaged SAGE value.
DominanceReport dominance(const std::map<int, double>& sage_by_feature_id);

// Exact 1-D 2-Wasserstein distance between two sample sets via the L2 norm
// of the difference of step-function empirical quantiles.
double wasserstein2_1d(const std::vector<double>& a, const std::vector<double>& b);

struct CorrelationTrace {
    std::vector<double> values;      // per window dissimilarity
    std::vector<std::size_t> window_start_cycle;
    std::size_t dip_index = 0;        // activation dip (early minimum)
    std::size_t divergence_index = 0; // first late window clearly above the mid plateau
    bool has_divergence = false;
};

// Windowed Wasserstein dissimilarity between the normalized increments of
// two aligned per-cycle series.
CorrelationTrace degradation_correlation(const std::vector<double>& thermo_series,
                                         const std::vector<double>& conc_series,
                                         std::size_t window = 20);

struct ArrheniusFit {
    double slope = 0.0;     // d ln(rate) / d (1/T); equals -alpha for pure Arrhenius
    double intercept = 0.0; // ln(prefactor)
    double r_squared = 0.0;
};

// Least squares of ln(rate) against 1/T; needs >= 3 temperatures.
ArrheniusFit arrhenius_diagnostic(const std::map<double, double>& rate_by_temperature_k);

} // namespace battkit
