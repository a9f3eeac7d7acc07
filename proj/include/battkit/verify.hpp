#pragma once

#include "battkit/dataset.hpp"
#include "battkit/featurize.hpp"
#include "battkit/neural.hpp"
#include "battkit/transfer.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace battkit {

struct VerificationConfig {
    std::vector<double> source_temperatures_k;
    std::vector<double> target_temperatures_k;
    double early_fraction = 0.2;   // of cycles-to-EOL (or recorded, see flag)
    std::size_t early_cycles = 0;  // overrides early_fraction when > 0
    double eol_fraction = 0.75;
    bool early_budget_from_recorded = false; // count the budget against the
                                             // recorded length instead of EOL
    bool no_imv = false;       // ablation: drop U1..U9 everywhere
    bool no_transfer = false;  // ablation: nearest source, AT forced to 1
    std::uint64_t seed = 0;
    TrainConfig chem_train = chemical_process_train_config();
    TrainConfig traj_train = trajectory_train_config();
    RateWindow rate_window;             // post-probe cycle ordinals, 1-based
    std::size_t chain_smooth_window = 5;
    double train_split = 0.75;          // chemical model per-temperature split

    void validate() const;
};

struct TrajectoryPrediction {
    std::string battery_id;
    double temperature_k = 0.0;
    std::vector<int> cycles; // post-probe ordinals over the scored range
    std::vector<double> y_true;
    std::vector<double> y_pred;
    double mape_overall_pct = 0.0;
    double mape_early_pct = 0.0;
    double mape_mid_pct = 0.0;
    double mape_late_pct = 0.0;
    int predicted_eol_cycle = 0; // 0 when not reached inside the horizon
    int true_eol_cycle = 0;
    std::size_t lifetime_cycles = 0;
    std::size_t early_budget_cycles = 0;
};

struct ChemicalModel {
    MLPModel model;
    NormStats input_stats;  // U1..U9 + cycle (or cycle only under no_imv)
    NormStats output_stats; // the 42 in-cycle features
    std::vector<double> heldout_rmse; // per feature, normalized units
    bool no_imv = false;
    std::size_t first_cycle = 4; // post-probe cycles start here
};

// Rows of one battery's feature matrix plus its capacity labels.
struct BatterySeries {
    std::string battery_id;
    double temperature_k = 0.0;
    FeatureMatrix features;            // raw (unnormalized) rows, all cycles
    std::vector<double> capacity_ah;   // aligned with feature rows
    std::vector<double> imv;           // U1..U9
};

// Featurizes and probes a fleet into per-battery series.
std::vector<BatterySeries> prepare_fleet(const std::vector<BatteryDataset>& fleet,
                                         const ChargingProtocol& protocol);

// sum |y - yhat| / sum y * 100, aggregate-normalized.
double mape(const std::vector<double>& y, const std::vector<double>& yhat);

// Stage index ranges over a lifetime: first / middle / last 10% of cycles.
struct StageRanges {
    std::size_t early_begin = 0, early_end = 0;
    std::size_t mid_begin = 0, mid_end = 0;
    std::size_t late_begin = 0, late_end = 0;
};
StageRanges stage_ranges(std::size_t lifetime_cycles);

// Trains the chemical-process MLP: inputs [U1..U9, cycle], outputs the 42
// in-cycle features, 75/25 split per source temperature.
ChemicalModel train_chemical_process(const std::vector<BatterySeries>& sources,
                                     const VerificationConfig& cfg);

// Predicted (smoothed) feature curve for one battery over post-probe cycle
// ordinals [1, horizon], in normalized feature space.
Matrix predict_feature_curve(const ChemicalModel& chem, const std::vector<double>& imv,
                             std::size_t horizon);

struct VerifyRunResult {
    std::vector<TrajectoryPrediction> targets;
    std::map<std::string, TransferPlan> plans; // per target battery
    std::vector<double> chem_heldout_rmse;
    double mean_mape_overall_pct = 0.0;
    bool horizon_exhausted = false;
};

VerifyRunResult verify_prototype(const VerificationConfig& cfg,
                                 const std::vector<BatteryDataset>& fleet,
                                 const ChargingProtocol& protocol);

// Model 4 benchmark: polynomial capacity fit on the source curve with an
// intercept shift calibrated on the target's early-cycle mean difference.
TrajectoryPrediction benchmark_empirical(const std::vector<double>& source_capacity,
                                         const std::vector<double>& target_capacity,
                                         std::size_t early_budget, int degree);

} // namespace battkit
