#include "battkit/simulate.hpp"

#include "battkit/error.hpp"
#include "battkit/parallel.hpp"
#include "battkit/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <string>

namespace battkit {

namespace {

constexpr double kDischargeCutoffV = 2.5;
constexpr double kChargeDtS = 1.0;
constexpr double kRestDtS = 10.0;
constexpr double kDischargeDtS = 10.0;
constexpr double kRestDurationS = 120.0 * 60.0;
constexpr double kInterCycleRestS = 3600.0;

double arrhenius_factor(double alpha_k, double t_k, double t_ref_k) {
    return std::exp(alpha_k * (1.0 / t_k - 1.0 / t_ref_k));
}

} // namespace

double OcvCurve::operator()(double soc) const {
    const std::size_t n = volts.size();
    if (soc <= 0.0) return volts.front();
    if (soc >= 1.0) return volts.back();
    const double pos = soc * double(n - 1);
    const std::size_t k = std::min(n - 2, std::size_t(pos));
    const double w = pos - double(k);
    return volts[k] + w * (volts[k + 1] - volts[k]);
}

void OcvCurve::validate() const {
    if (volts.size() < 2) raise(ErrorCode::InvalidConfig, "OCV curve needs >= 2 points");
    for (std::size_t k = 1; k < volts.size(); ++k)
        if (volts[k] <= volts[k - 1])
            raise(ErrorCode::InvalidConfig, "OCV curve must be strictly increasing");
}

OcvCurve default_ocv_curve() {
    // 21-point curve with steep ends, reproducing the dV/dQ steepening at
    // the start and end of charge
    return OcvCurve{{2.500, 3.060, 3.220, 3.320, 3.400, 3.460, 3.510, 3.560, 3.600,
                     3.645, 3.690, 3.735, 3.780, 3.825, 3.875, 3.930, 3.990, 4.055,
                     4.130, 4.210, 4.300}};
}

void CellParams::validate() const {
    ocv.validate();
    if (nominal_capacity_ah <= 0.0)
        raise(ErrorCode::NonPositiveNominal, "nominal capacity must be positive");
    if (r_ohmic_0 <= 0.0 || r_ct_0 <= 0.0 || r_con_0 <= 0.0)
        raise(ErrorCode::InvalidConfig, "resistances must be positive");
    if (sei.alpha_k <= 0.0 && std::isfinite(sei.alpha_k))
        raise(ErrorCode::InvalidConfig, "sei.alpha_k must be positive");
    if (sei.gamma_lli <= 0.0 || sei.gamma_lli > 1.0)
        raise(ErrorCode::InvalidConfig, "gamma_lli must be in (0, 1]");
    if (tau_diff_s <= 0.0) raise(ErrorCode::InvalidConfig, "tau_diff must be positive");
}

SimState init_cell_state(const CellParams& params, double temperature_k,
                         const CellPerturbation& perturbation) {
    params.validate();
    SimState s;
    s.temperature_k = temperature_k;
    const double r_scale = params.resistance_alpha_k == 0.0
                               ? 1.0
                               : arrhenius_factor(params.resistance_alpha_k, temperature_k,
                                                  params.t_ref_k);
    s.r_ohmic = params.r_ohmic_0 * r_scale * (1.0 + perturbation.eps_r);
    s.r_ct = params.r_ct_0 * r_scale * (1.0 + perturbation.eps_r);
    s.r_con = params.r_con_0 * r_scale * (1.0 + perturbation.eps_r);
    s.ocv_scale = 1.0 + perturbation.eps_v;
    s.k_sei_scale = 1.0 + perturbation.eps_k;
    s.delta_sei = params.sei.delta_birth;
    s.soc = 0.02;
    s.activation_de = params.activation.cycles > 0 ? params.activation.amp_volts : 0.0;
    return s;
}

double step_voltage(SimState& state, const CellParams& params, double current_a, double dt_s) {
    if (dt_s <= 0.0) raise(ErrorCode::InvalidConfig, "dt must be positive");
    const double max_current = 5.0 * params.nominal_capacity_ah;
    if (std::abs(current_a) > max_current)
        raise(ErrorCode::InvalidConfig, "current exceeds the 5C bound");

    const double eff_cap = state.effective_capacity_ah(params);
    state.soc += current_a * dt_s / 3600.0 / eff_cap;
    if (state.soc < -0.02 || state.soc > 1.02)
        raise(ErrorCode::SocOutOfRange, "soc left [-0.02, 1.02]: " + std::to_string(state.soc));

    // activation polarization: a * asinh(I / (2 i0)), small-signal slope r_ct
    const double v_act = 0.0514 * state.temperature_k / 298.15;
    const double i0 = v_act / (2.0 * state.r_ct);
    state.eta_act_last = v_act * std::asinh(current_a / (2.0 * i0));
    state.eta_ohm_last = current_a * state.r_ohmic;

    // concentration polarization: first-order relaxation toward I * r_con,
    // with r_con inflated as the usable capacity shrinks
    const double depletion = params.nominal_capacity_ah / eff_cap;
    const double r_con_eff = state.r_con * std::pow(depletion, params.conc_capacity_exponent);
    const double target = current_a * r_con_eff;
    const double blend = 1.0 - std::exp(-dt_s / params.tau_diff_s);
    state.eta_con += blend * (target - state.eta_con);

    const double ocv = params.ocv(state.soc) * state.ocv_scale;
    return ocv + state.delta_e + state.activation_de + state.eta_ohm_last + state.eta_act_last +
           state.eta_con;
}

void age_one_cycle(SimState& state, const CellParams& params, double temperature_k) {
    const SeiParams& sei = params.sei;
    const double k = sei.k_sei_0 * std::exp(-sei.alpha_k / temperature_k) * state.k_sei_scale;
    // diffusion-limited growth: d(delta^2)/dcycle constant at fixed T
    const double d_delta = k / std::max(state.delta_sei, sei.delta_min);
    state.delta_sei += d_delta;
    state.q_loss_thermo_ah += sei.gamma_lli * sei.lli_ah_per_delta * d_delta;
    state.r_ohmic += sei.beta_r_ohm_per_delta * d_delta;
    state.r_con += sei.beta_con_ohm_per_delta * d_delta;
    state.delta_e = params.de_volts_per_lli * state.q_loss_thermo_ah / params.nominal_capacity_ah;
}

namespace {

// Integrates one full cycle and appends the recorded samples.
struct CycleRunner {
    const CellParams& params;
    SimState& state;

    CycleRecord record;
    double t = 0.0;
    double q = 0.0;
    std::size_t sample_counter = 0;

    void sample(double current, double v, bool force) {
        ++sample_counter;
        if (!force && sample_counter % current_decimation_ != 0) return;
        record.samples.push_back({t, current, v, q});
    }

    std::size_t current_decimation_ = 1;

    void run_phase(double current, double dt, std::size_t decimation, double max_duration_s,
                   const std::function<bool(double v, double q_phase, std::size_t steps)>& stop) {
        current_decimation_ = decimation;
        sample_counter = 0;
        double q_phase = 0.0;
        std::size_t steps = 0;
        const std::size_t max_steps = std::size_t(max_duration_s / dt) + 1;
        while (steps < max_steps) {
            const double v = step_voltage(state, params, current, dt);
            t += dt;
            q += std::abs(current) * dt / 3600.0;
            q_phase += std::abs(current) * dt / 3600.0;
            ++steps;
            const bool done = stop(v, q_phase, steps) || steps == max_steps;
            sample(current, v, steps == 1 || done);
            if (done) break;
        }
    }

    // unrecorded rest between cycles so each cycle starts near equilibrium
    void relax(double duration_s) {
        double elapsed = 0.0;
        while (elapsed < duration_s) {
            step_voltage(state, params, 0.0, kRestDtS);
            elapsed += kRestDtS;
        }
    }
};

} // namespace

void simulate_cell(const FleetConfig& config, double temperature_k, std::size_t cell_index,
                   std::uint64_t global_cell_id, BatteryDataset& dataset,
                   CellGroundTruth& truth) {
    const CellParams& params = config.params;
    const ChargingProtocol& protocol = config.protocol;
    protocol.validate();

    CellPerturbation perturbation;
    if (params.imv_perturbation > 0.0) {
        Rng rng(config.seed, 0xCE11ULL * (global_cell_id + 1));
        perturbation.eps_v = rng.normal(0.0, params.imv_perturbation);
        perturbation.eps_r = rng.normal(0.0, params.imv_perturbation);
        perturbation.eps_k = rng.normal(0.0, params.imv_perturbation);
    }

    const int t_c = int(std::lround(temperature_k - 273.15));
    dataset = BatteryDataset{};
    dataset.battery_id = "T" + std::to_string(t_c) + "_c" + std::to_string(cell_index);
    dataset.temperature_k = temperature_k;
    dataset.nominal_capacity_ah = params.nominal_capacity_ah;

    truth = CellGroundTruth{};
    truth.battery_id = dataset.battery_id;
    truth.temperature_k = temperature_k;
    truth.perturbation = perturbation;

    SimState state = init_cell_state(params, temperature_k, perturbation);
    const double i_discharge = -1.0 * params.nominal_capacity_ah;

    std::vector<double> cutoffs; // probed U1..U9, filled after 3 probe cycles
    std::vector<std::vector<double>> probe_voltages(protocol.step_count());

    const std::size_t total_cycles = 3 + config.n_cycles;
    for (std::size_t cycle_idx = 1; cycle_idx <= total_cycles; ++cycle_idx) {
        const bool probing = cycle_idx <= 3;
        CycleRunner runner{params, state, {}, 0.0, 0.0, 0};
        runner.record.cycle_index = int(cycle_idx);
        runner.record.temperature_k = temperature_k;

        // 9 charge steps
        for (std::size_t s = 0; s < protocol.step_count(); ++s) {
            const double current = protocol.step_current_a(s);
            const double q_target = protocol.soc_targets[s] * params.nominal_capacity_ah;
            const double u_cut = probing ? 0.0 : cutoffs[s];
            runner.run_phase(current, kChargeDtS, config.record_every_charge, 3.0 * 3600.0,
                             [&](double v, double, std::size_t steps) {
                                 if (state.soc >= 1.01) return true;
                                 if (probing) return runner.q >= q_target;
                                 return steps >= 3 && v >= u_cut;
                             });
            if (probing) probe_voltages[s].push_back(runner.record.samples.back().v);
        }
        // rest
        runner.run_phase(0.0, kRestDtS, config.record_every_rest, kRestDurationS,
                         [&](double, double, std::size_t steps) {
                             return steps >= std::size_t(kRestDurationS / kRestDtS);
                         });
        // 1C discharge to the lower cut-off (plus a BMS-style SOC floor)
        runner.run_phase(i_discharge, kDischargeDtS, config.record_every_discharge, 3.0 * 3600.0,
                         [&](double v, double, std::size_t) {
                             return v <= kDischargeCutoffV || state.soc <= 0.005;
                         });

        double q_dis_start = -1.0, q_dis_end = 0.0;
        for (const auto& smp : runner.record.samples) {
            if (smp.i < -1e-6) {
                if (q_dis_start < 0.0) q_dis_start = smp.q;
                q_dis_end = smp.q;
            }
        }
        runner.record.discharge_capacity_ah = q_dis_end - q_dis_start;
        dataset.cycles.push_back(std::move(runner.record));

        truth.q_loss_thermo_ah.push_back(state.q_loss_thermo_ah);
        truth.r_ohmic.push_back(state.r_ohmic);
        truth.delta_sei.push_back(state.delta_sei);
        truth.discharge_capacity_ah.push_back(dataset.cycles.back().discharge_capacity_ah);

        if (cycle_idx == 3) {
            cutoffs.resize(protocol.step_count());
            for (std::size_t s = 0; s < protocol.step_count(); ++s) {
                double sum = 0.0;
                for (const double v : probe_voltages[s]) sum += v;
                cutoffs[s] = sum / double(probe_voltages[s].size());
            }
        }

        age_one_cycle(state, params, temperature_k);
        if (params.activation.cycles > 0) {
            state.activation_de =
                cycle_idx >= params.activation.cycles
                    ? 0.0
                    : params.activation.amp_volts *
                          std::exp(-double(cycle_idx) / params.activation.tau_cycles);
        }

        // stop once the cell is clearly past end of life
        if (!probing &&
            dataset.cycles.back().discharge_capacity_ah <
                config.stop_soh * params.nominal_capacity_ah)
            break;

        CycleRunner relaxer{params, state, {}, 0.0, 0.0, 0};
        relaxer.relax(kInterCycleRestS);
    }
}

FleetResult simulate_fleet(const FleetConfig& config) {
    struct CellJob {
        double temperature_k;
        std::size_t cell_index;
        std::uint64_t global_id;
    };
    std::vector<CellJob> jobs;
    std::uint64_t gid = 0;
    for (const double t : config.temperatures_k)
        for (std::size_t c = 0; c < config.cells_per_temperature; ++c)
            jobs.push_back({t, c, gid++});

    FleetResult result;
    result.batteries.resize(jobs.size());
    result.ground_truth.resize(jobs.size());

    const int nt = par::effective_threads();
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) num_threads(nt) if (par::parallel_enabled())
    for (long long j = 0; j < (long long)jobs.size(); ++j) {
        try {
            const CellJob& job = jobs[std::size_t(j)];
            simulate_cell(config, job.temperature_k, job.cell_index, job.global_id,
                          result.batteries[std::size_t(j)], result.ground_truth[std::size_t(j)]);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return result;
}

void write_ground_truth_json(const std::string& path, const std::vector<CellGroundTruth>& truth) {
    nlohmann::json doc;
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& t : truth) {
        cells.push_back({{"battery_id", t.battery_id},
                         {"temperature_k", t.temperature_k},
                         {"eps_v", t.perturbation.eps_v},
                         {"eps_r", t.perturbation.eps_r},
                         {"eps_k", t.perturbation.eps_k},
                         {"q_loss_thermo_ah", t.q_loss_thermo_ah},
                         {"r_ohmic", t.r_ohmic},
                         {"delta_sei", t.delta_sei},
                         {"discharge_capacity_ah", t.discharge_capacity_ah}});
    }
    doc["cells"] = cells;
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorCode::IoError, "cannot open '" + path + "' for writing");
    out << doc.dump(2) << '\n';
}

} // namespace battkit
