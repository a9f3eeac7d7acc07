#pragma once

#include "battkit/dataset.hpp"
#include "battkit/matrix.hpp"

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace battkit {

// Feature taxonomy IDs (1-based, 52 total):
//   1      T     operation temperature
//   2-10   U1-U9 prior-cycle step cut-off voltages
//   11-16  VC89, VD9, tVD9, ReVC, ReVD, tReVD   inter-step transients
//   17-25  Vg1-Vg9   mean voltage gradient per step (V/s)
//   26     RVg   Vg2 / Vg1
//   27-35  Q1-Q9 cumulative charge at each step boundary (Ah)
//   36-44  RL1-RL9   lumped resistance per step (ohm)
//   45-52  RO1-RO8   ohmic resistance at step switches (ohm)
inline constexpr int kFeatureCount = 52;
inline constexpr int kFeatT = 1;
inline constexpr int kFeatU1 = 2;
inline constexpr int kFeatVC89 = 11;
inline constexpr int kFeatVD9 = 12;
inline constexpr int kFeatTVD9 = 13;
inline constexpr int kFeatReVC = 14;
inline constexpr int kFeatReVD = 15;
inline constexpr int kFeatTReVD = 16;
inline constexpr int kFeatVg1 = 17;
inline constexpr int kFeatRVg = 26;
inline constexpr int kFeatQ1 = 27;
inline constexpr int kFeatRL1 = 36;
inline constexpr int kFeatRO1 = 45;
// in-cycle block (everything the chemical-process model predicts)
inline constexpr int kInCycleFirst = 11;
inline constexpr int kInCycleCount = 42;

struct IntraStepFeatures {
    std::array<double, 9> vg{};
    std::array<double, 9> q{};
    std::array<double, 9> rl{};
};

struct InterStepFeatures {
    double vc89 = 0.0;
    double vd9 = 0.0;
    double tvd9 = 0.0;
    double revc = 0.0;
    double revd = 0.0;
    double trevd = 0.0;
    double rvg = 0.0;
    std::array<double, 8> ro{};
};

struct FeatureVector {
    std::string battery_id;
    int cycle_index = 0;
    std::array<double, kFeatureCount> values{};

    double at(int feature_id) const { return values[std::size_t(feature_id - 1)]; }
    double& at(int feature_id) { return values[std::size_t(feature_id - 1)]; }
};

struct NormStats {
    struct Column {
        double min = 0.0;
        double max = 0.0;
        bool constant = false;
    };
    std::vector<Column> cols;

    double scale(std::size_t col, double x) const {
        const auto& c = cols[col];
        return c.constant ? x : (x - c.min) / (c.max - c.min);
    }
    double unscale(std::size_t col, double x) const {
        const auto& c = cols[col];
        return c.constant ? x : c.min + x * (c.max - c.min);
    }
};

struct FeatureMatrix {
    std::vector<std::string> battery_ids; // per row
    std::vector<int> cycles;              // per row
    Matrix values;                        // rows x 52, column j = feature id j+1
    NormStats norm_stats;                 // empty until normalize() ran

    std::size_t row_count() const { return values.rows; }
    double at(std::size_t row, int feature_id) const {
        return values(row, std::size_t(feature_id - 1));
    }
};

// Per-step features from 9 constant-current charge segments.
IntraStepFeatures intra_step_features(const StepSegments& segments);

// Step-switch and relaxation features (requires the rest segment).
InterStepFeatures inter_step_features(const StepSegments& segments);

// All 42 in-cycle features (IDs 11-52) of one cycle; IDs 1-10 are filled in
// by the dataset-level extractor.
FeatureVector extract_cycle_features(const CycleRecord& cycle, const ChargingProtocol& protocol);

struct ExtractOptions {
    bool skip_probe_cycles = true; // drop the 3 formation cycles
    std::size_t probe_cycle_count = 3;
};

FeatureMatrix extract_features(const BatteryDataset& dataset, const ChargingProtocol& protocol,
                               const ExtractOptions& opts = {});
FeatureMatrix extract_features(const std::vector<BatteryDataset>& fleet,
                               const ChargingProtocol& protocol, const ExtractOptions& opts = {});

// Min-max scaling fitted on the selected rows; columns with max-min < 1e-12
// are flagged constant and pass through unscaled.
NormStats fit_norm_stats(const Matrix& values, const std::vector<std::size_t>& fit_rows);
void apply_norm_stats(Matrix& values, const NormStats& stats);
void invert_norm_stats(Matrix& values, const NormStats& stats);
FeatureMatrix normalize(const FeatureMatrix& matrix, const std::vector<std::size_t>& fit_rows);

// Incremental-capacity curve of a discharge segment: boxcar smoothing of
// (V, Q) followed by centered-difference dQ/dV.
struct IcaPoint {
    double v = 0.0;
    double dq_dv = 0.0;
};
std::vector<IcaPoint> ica_curve(const CycleRecord& cycle, const Segment& discharge,
                                std::size_t window = 20);

// Serialization: `battery_id,cycle,f1..f52` plus a JSON sidecar for stats.
void write_features_csv(const std::string& path, const FeatureMatrix& matrix);
FeatureMatrix read_features_csv(const std::string& path);
void write_norm_stats_json(const std::string& path, const NormStats& stats);
NormStats read_norm_stats_json(const std::string& path);

} // namespace battkit
