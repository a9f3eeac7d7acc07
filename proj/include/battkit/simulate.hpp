#pragma once

#include "battkit/dataset.hpp"
#include "battkit/protocol.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace battkit {

// Monotone SOC -> OCV table with linear interpolation; uniform SOC grid.
struct OcvCurve {
    std::vector<double> volts; // at soc = k / (size - 1)

    double operator()(double soc) const;
    void validate() const;
};

OcvCurve default_ocv_curve();

struct SeiParams {
    double k_sei_0 = 1.1e3;       // growth prefactor (delta units per cycle)
    double alpha_k = 4000.0;      // E_a / k_B, kelvin
    double gamma_lli = 0.5;       // lithium-loss stoichiometric share
    double lli_ah_per_delta = 0.40; // Ah of inventory lost per unit SEI thickness
    double beta_r_ohm_per_delta = 0.012; // ohmic growth per unit SEI thickness
    double beta_con_ohm_per_delta = 0.010; // concentration-resistance growth
    double delta_min = 1e-6;      // guards the 1/delta singularity
    double delta_birth = 0.05;    // formation-layer thickness at cycle 1
};

struct ActivationParams {
    std::size_t cycles = 0;  // 0 disables the early-life transient
    double amp_volts = 0.0;  // initial extra thermodynamic shift
    double tau_cycles = 20.0;
};

struct CellParams {
    double nominal_capacity_ah = 1.1;
    OcvCurve ocv = default_ocv_curve();
    double r_ohmic_0 = 0.030;  // ohm
    double r_ct_0 = 0.010;     // ohm, charge transfer
    double r_con_0 = 0.020;    // ohm, concentration steady-state scale
    double tau_diff_s = 180.0; // diffusion relaxation time constant
    SeiParams sei;
    double de_volts_per_lli = 0.25; // thermodynamic shift per unit q_loss/nominal
    double resistance_alpha_k = 1500.0; // Arrhenius scaling of resistances; 0 = flat
    double t_ref_k = 298.15;
    double conc_capacity_exponent = 2.0; // r_con *= (nominal/effective)^p
    ActivationParams activation;
    double imv_perturbation = 0.0; // per-cell multiplicative noise scale
    std::uint64_t seed = 0;

    void validate() const;
};

struct SimState {
    double soc = 0.0;
    double q_loss_thermo_ah = 0.0; // LLI
    double delta_sei = 0.0;
    double r_ohmic = 0.0;
    double r_ct = 0.0;
    double r_con = 0.0;
    double eta_con = 0.0; // first-order relaxation state, volts
    double delta_e = 0.0; // thermodynamic voltage shift, volts
    double ocv_scale = 1.0;
    double k_sei_scale = 1.0;
    double temperature_k = 298.15;
    double activation_de = 0.0;
    // decomposition of the last computed voltage, for diagnostics
    double eta_act_last = 0.0;
    double eta_ohm_last = 0.0;

    double effective_capacity_ah(const CellParams& p) const {
        return p.nominal_capacity_ah - q_loss_thermo_ah;
    }
};

// Per-cell manufacturing perturbation draws (IMV injection).
struct CellPerturbation {
    double eps_v = 0.0; // multiplies OCV by (1 + eps_v)
    double eps_r = 0.0; // multiplies resistances by (1 + eps_r)
    double eps_k = 0.0; // multiplies the SEI rate by (1 + eps_k)
};

SimState init_cell_state(const CellParams& params, double temperature_k,
                         const CellPerturbation& perturbation = {});

// Advances the lumped cell by dt at the given signed current and returns the
// terminal voltage. eta_con relaxes toward I * r_con with time constant
// tau_diff; eta_act = a * asinh(I / (2 i0)) with i0 derived from r_ct.
double step_voltage(SimState& state, const CellParams& params, double current_a, double dt_s);

// End-of-cycle aging update: diffusion-limited SEI growth (d(delta^2)/dc
// constant at fixed temperature) driving LLI, impedance rise, and the
// thermodynamic voltage shift.
void age_one_cycle(SimState& state, const CellParams& params, double temperature_k);

struct CellGroundTruth {
    std::string battery_id;
    double temperature_k = 0.0;
    CellPerturbation perturbation;
    std::vector<double> q_loss_thermo_ah; // per recorded cycle
    std::vector<double> r_ohmic;
    std::vector<double> delta_sei;
    std::vector<double> discharge_capacity_ah;
};

struct FleetConfig {
    std::vector<double> temperatures_k = {298.15, 308.15, 318.15, 328.15};
    std::size_t cells_per_temperature = 2;
    std::size_t n_cycles = 400;   // aging cycles after the 3 probe cycles
    double stop_soh = 0.55;       // stop a cell once SOH falls below this
    CellParams params;
    ChargingProtocol protocol = default_protocol();
    std::uint64_t seed = 0;
    // sample decimation (record every k-th integration step)
    std::size_t record_every_charge = 2;
    std::size_t record_every_rest = 3;
    std::size_t record_every_discharge = 2;
};

struct FleetResult {
    std::vector<BatteryDataset> batteries;
    std::vector<CellGroundTruth> ground_truth;
};

// Simulates one cell: 3 probe cycles terminated on SOC targets, then aging
// cycles terminated on the probed cut-off voltages.
void simulate_cell(const FleetConfig& config, double temperature_k, std::size_t cell_index,
                   std::uint64_t global_cell_id, BatteryDataset& dataset,
                   CellGroundTruth& truth);

FleetResult simulate_fleet(const FleetConfig& config);

void write_ground_truth_json(const std::string& path, const std::vector<CellGroundTruth>& truth);

} // namespace battkit
