#include "battkit/verify.hpp"

#include "battkit/error.hpp"
#include "battkit/parallel.hpp"
#include "battkit/rng.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>
#include <set>
#include <string>

namespace battkit {

namespace {

constexpr std::size_t kFirstAgingCycle = 4; // cycles 1-3 are the probe cycles

std::vector<int> chem_input_ids(bool no_imv) {
    std::vector<int> ids;
    if (!no_imv)
        for (int i = 0; i < 9; ++i) ids.push_back(kFeatU1 + i);
    return ids; // the cycle column is appended separately
}

std::vector<int> in_cycle_ids() {
    std::vector<int> ids;
    for (int id = kInCycleFirst; id < kInCycleFirst + kInCycleCount; ++id) ids.push_back(id);
    return ids;
}

// Builds the chemical-model input matrix for one battery: U columns
// broadcast across cycles plus the cycle ordinal.
Matrix chem_input_rows(const std::vector<double>& imv, const std::vector<double>& ordinals,
                       bool no_imv) {
    const std::size_t u_cols = no_imv ? 0 : 9;
    Matrix x(ordinals.size(), u_cols + 1);
    for (std::size_t r = 0; r < ordinals.size(); ++r) {
        for (std::size_t c = 0; c < u_cols; ++c) x(r, c) = imv[c];
        x(r, u_cols) = ordinals[r];
    }
    return x;
}

double column_rmse(const Matrix& a, const Matrix& b, std::size_t col) {
    double acc = 0.0;
    for (std::size_t r = 0; r < a.rows; ++r) {
        const double d = a(r, col) - b(r, col);
        acc += d * d;
    }
    return std::sqrt(acc / double(a.rows));
}

} // namespace

void VerificationConfig::validate() const {
    if (source_temperatures_k.empty())
        raise(ErrorCode::InvalidConfig, "need at least one source temperature");
    if (eol_fraction <= 0.5 || eol_fraction >= 1.0)
        raise(ErrorCode::InvalidConfig, "eol_fraction must lie in (0.5, 1)");
    if (early_cycles == 0 && (early_fraction <= 0.0 || early_fraction > 1.0))
        raise(ErrorCode::InvalidConfig, "early_fraction must lie in (0, 1]");
    chem_train.validate();
    traj_train.validate();
}

std::vector<BatterySeries> prepare_fleet(const std::vector<BatteryDataset>& fleet,
                                         const ChargingProtocol& protocol) {
    std::vector<BatterySeries> series(fleet.size());
    const int nt = par::effective_threads();
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) num_threads(nt) if (par::parallel_enabled())
    for (long long k = 0; k < (long long)fleet.size(); ++k) {
        try {
            BatteryDataset ds = fleet[std::size_t(k)];
            if (ds.cycles.size() < kFirstAgingCycle)
                raise(ErrorCode::InsufficientSourceData,
                      "battery '" + ds.battery_id + "' has no post-probe cycles");
            std::vector<CycleRecord> probes(ds.cycles.begin(), ds.cycles.begin() + 3);
            ds.imv = probe_imv(probes, protocol);
            BatterySeries& s = series[std::size_t(k)];
            s.battery_id = ds.battery_id;
            s.temperature_k = ds.temperature_k;
            s.imv = ds.imv.u;
            s.features = extract_features(ds, protocol);
            s.capacity_ah.reserve(s.features.row_count());
            for (std::size_t r = 0; r < s.features.row_count(); ++r) {
                const int cycle = s.features.cycles[r];
                s.capacity_ah.push_back(ds.cycles[std::size_t(cycle - 1)].discharge_capacity_ah);
            }
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return series;
}

double mape(const std::vector<double>& y, const std::vector<double>& yhat) {
    if (y.size() != yhat.size())
        raise(ErrorCode::LengthMismatch, "mape inputs have different lengths");
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
        num += std::abs(y[k] - yhat[k]);
        den += y[k];
    }
    if (den <= 0.0) raise(ErrorCode::ZeroDenominator, "sum of ground-truth values is not positive");
    return num / den * 100.0;
}

StageRanges stage_ranges(std::size_t lifetime_cycles) {
    StageRanges r;
    const std::size_t n10 = std::max<std::size_t>(1, lifetime_cycles / 10);
    r.early_begin = 0;
    r.early_end = n10;
    r.late_begin = lifetime_cycles - n10;
    r.late_end = lifetime_cycles;
    r.mid_begin = (lifetime_cycles - n10) / 2;
    r.mid_end = r.mid_begin + n10;
    return r;
}

ChemicalModel train_chemical_process(const std::vector<BatterySeries>& sources,
                                     const VerificationConfig& cfg) {
    if (sources.empty()) raise(ErrorCode::InsufficientSourceData, "no source batteries");

    const std::vector<int> out_ids = in_cycle_ids();
    const std::size_t u_cols = cfg.no_imv ? 0 : 9;
    const std::size_t in_cols = u_cols + 1;

    // assemble rows: per battery, U broadcast + post-probe ordinal
    std::vector<double> temps;
    Matrix x(0, in_cols), y(0, out_ids.size());
    for (const auto& s : sources) {
        for (std::size_t r = 0; r < s.features.row_count(); ++r) {
            const double ordinal = double(s.features.cycles[r]) - double(kFirstAgingCycle) + 1.0;
            for (std::size_t c = 0; c < u_cols; ++c) x.v.push_back(s.imv[c]);
            x.v.push_back(ordinal);
            for (const int id : out_ids) y.v.push_back(s.features.at(r, id));
            temps.push_back(s.temperature_k);
        }
    }
    x.rows = temps.size();
    y.rows = temps.size();
    if (x.rows < 8) raise(ErrorCode::InsufficientSourceData, "too few source rows");

    // 75/25 split inside each source temperature, seeded
    std::set<double> unique_temps(temps.begin(), temps.end());
    std::vector<std::size_t> train_rows, test_rows;
    Rng rng(cfg.seed, 0x59113ULL);
    for (const double t : unique_temps) {
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < temps.size(); ++r)
            if (temps[r] == t) rows.push_back(r);
        rng.shuffle(rows);
        const std::size_t n_train =
            std::max<std::size_t>(1, std::size_t(std::floor(cfg.train_split * double(rows.size()))));
        for (std::size_t k = 0; k < rows.size(); ++k)
            (k < n_train ? train_rows : test_rows).push_back(rows[k]);
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());

    ChemicalModel chem;
    chem.no_imv = cfg.no_imv;
    chem.input_stats = fit_norm_stats(x, train_rows);
    chem.output_stats = fit_norm_stats(y, train_rows);
    Matrix xn = x, yn = y;
    apply_norm_stats(xn, chem.input_stats);
    apply_norm_stats(yn, chem.output_stats);

    const auto pick = [](const Matrix& m, const std::vector<std::size_t>& rows) {
        Matrix out(rows.size(), m.cols);
        for (std::size_t k = 0; k < rows.size(); ++k)
            for (std::size_t c = 0; c < m.cols; ++c) out(k, c) = m(rows[k], c);
        return out;
    };
    const Matrix x_train = pick(xn, train_rows), y_train = pick(yn, train_rows);

    chem.model = MLPModel(in_cols, out_ids.size(), cfg.seed);
    mlp_train(chem.model, x_train, y_train, cfg.chem_train);

    chem.heldout_rmse.assign(out_ids.size(), 0.0);
    if (!test_rows.empty()) {
        const Matrix x_test = pick(xn, test_rows), y_test = pick(yn, test_rows);
        const Matrix pred = chem.model.forward(x_test);
        for (std::size_t c = 0; c < out_ids.size(); ++c)
            chem.heldout_rmse[c] = column_rmse(pred, y_test, c);
    }
    return chem;
}

Matrix predict_feature_curve(const ChemicalModel& chem, const std::vector<double>& imv,
                             std::size_t horizon) {
    std::vector<double> ordinals(horizon);
    for (std::size_t k = 0; k < horizon; ++k) ordinals[k] = double(k + 1);
    Matrix x = chem_input_rows(imv, ordinals, chem.no_imv);
    apply_norm_stats(x, chem.input_stats);
    return chem.model.forward(x); // normalized feature space
}

namespace {

// Normalized in-cycle feature rows of one battery, aligned to post-probe
// ordinals 1..N.
Matrix measured_feature_rows(const BatterySeries& s, const NormStats& output_stats) {
    const std::vector<int> ids = in_cycle_ids();
    Matrix m(s.features.row_count(), ids.size());
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < ids.size(); ++c) m(r, c) = s.features.at(r, ids[c]);
    apply_norm_stats(m, output_stats);
    return m;
}

std::vector<double> column_of(const Matrix& m, std::size_t col) {
    std::vector<double> out(m.rows);
    for (std::size_t r = 0; r < m.rows; ++r) out[r] = m(r, col);
    return out;
}

struct DomainCurves {
    double temperature_k = 0.0;
    Matrix mean_curve; // normalized feature space, rows = post-probe ordinals
};

// Average of the chem-model predictions over a domain's batteries.
DomainCurves domain_curve(const ChemicalModel& chem, const std::vector<const BatterySeries*>& group,
                          double temperature_k) {
    std::size_t horizon = 0;
    for (const auto* s : group) horizon = std::max(horizon, s->features.row_count());
    DomainCurves out;
    out.temperature_k = temperature_k;
    out.mean_curve = Matrix(horizon, kInCycleCount);
    for (const auto* s : group) {
        const Matrix curve = predict_feature_curve(chem, s->imv, horizon);
        for (std::size_t k = 0; k < curve.v.size(); ++k) out.mean_curve.v[k] += curve.v[k];
    }
    for (auto& v : out.mean_curve.v) v /= double(group.size());
    return out;
}

Matrix per_cycle_rate_matrix(const Matrix& curve, std::size_t smooth_window) {
    Matrix rates(curve.rows, curve.cols);
    for (std::size_t c = 0; c < curve.cols; ++c) {
        const std::vector<double> series = column_of(curve, c);
        const std::vector<double> r = per_cycle_rates(series, smooth_window);
        for (std::size_t k = 0; k < r.size(); ++k) rates(k, c) = r[k];
    }
    return rates;
}

// Least-squares aggregate of the per-feature rate ratios into the scalar
// AT score the plan carries.
double aggregate_at_score(const std::vector<double>& r_source,
                          const std::vector<double>& r_target) {
    double num = 0.0, den = 0.0;
    for (std::size_t c = 0; c < r_source.size(); ++c) {
        num += r_target[c] * r_source[c];
        den += r_source[c] * r_source[c];
    }
    if (den == 0.0) raise(ErrorCode::ZeroSourceRate, "source rates are all zero");
    return num / den;
}

std::vector<double> feature_rates(const Matrix& curve, const RateWindow& window) {
    std::vector<double> rates(curve.cols);
    for (std::size_t c = 0; c < curve.cols; ++c)
        rates[c] = aging_rate(column_of(curve, c), 1, window);
    return rates;
}

} // namespace

VerifyRunResult verify_prototype(const VerificationConfig& cfg,
                                 const std::vector<BatteryDataset>& fleet,
                                 const ChargingProtocol& protocol) {
    cfg.validate();
    const std::vector<BatterySeries> series = prepare_fleet(fleet, protocol);

    const auto is_one_of = [](double t, const std::vector<double>& temps) {
        for (const double x : temps)
            if (std::abs(x - t) < 1e-6) return true;
        return false;
    };

    std::vector<const BatterySeries*> source_ptrs;
    std::vector<const BatterySeries*> target_ptrs;
    for (const auto& s : series) {
        if (is_one_of(s.temperature_k, cfg.source_temperatures_k)) source_ptrs.push_back(&s);
        if (is_one_of(s.temperature_k, cfg.target_temperatures_k)) target_ptrs.push_back(&s);
    }
    if (source_ptrs.empty())
        raise(ErrorCode::InsufficientSourceData, "no batteries at the source temperatures");
    if (target_ptrs.empty())
        raise(ErrorCode::InsufficientSourceData, "no batteries at the target temperatures");

    std::vector<BatterySeries> sources;
    sources.reserve(source_ptrs.size());
    for (const auto* p : source_ptrs) sources.push_back(*p);

    const ChemicalModel chem = train_chemical_process(sources, cfg);

    // per-domain mean predicted curves, window rates and per-cycle rates
    std::vector<DomainCurves> domains;
    std::vector<std::vector<double>> domain_window_rates;
    std::vector<Matrix> domain_cycle_rates;
    for (const double t : cfg.source_temperatures_k) {
        std::vector<const BatterySeries*> group;
        for (const auto& s : sources)
            if (std::abs(s.temperature_k - t) < 1e-6) group.push_back(&s);
        if (group.empty())
            raise(ErrorCode::InsufficientSourceData,
                  "no batteries at source temperature " + std::to_string(t));
        domains.push_back(domain_curve(chem, group, t));
        domain_window_rates.push_back(feature_rates(domains.back().mean_curve, cfg.rate_window));
        domain_cycle_rates.push_back(
            per_cycle_rate_matrix(domains.back().mean_curve, cfg.chain_smooth_window));
    }

    VerifyRunResult result;
    result.chem_heldout_rmse = chem.heldout_rmse;
    result.targets.resize(target_ptrs.size());
    std::vector<TransferPlan> plans(target_ptrs.size());
    std::vector<bool> exhausted(target_ptrs.size(), false);

    const double nominal = protocol.nominal_capacity_ah;
    const int nt = par::effective_threads();
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) num_threads(nt) if (par::parallel_enabled())
    for (long long ti = 0; ti < (long long)target_ptrs.size(); ++ti) {
        try {
            const BatterySeries& target = *target_ptrs[std::size_t(ti)];
            TrajectoryPrediction& pred = result.targets[std::size_t(ti)];
            pred.battery_id = target.battery_id;
            pred.temperature_k = target.temperature_k;

            const std::size_t recorded = target.features.row_count();
            // lifetime = cycles until the EOL fraction on ground truth
            std::size_t lifetime = recorded;
            bool eol_reached = false;
            for (std::size_t r = 0; r < recorded; ++r) {
                if (target.capacity_ah[r] < cfg.eol_fraction * nominal) {
                    lifetime = r + 1;
                    eol_reached = true;
                    break;
                }
            }
            pred.lifetime_cycles = lifetime;
            pred.true_eol_cycle = eol_reached ? int(lifetime) : 0;

            std::size_t budget = cfg.early_cycles > 0
                                     ? cfg.early_cycles
                                     : std::size_t(std::lround(
                                           cfg.early_fraction *
                                           double(cfg.early_budget_from_recorded ? recorded
                                                                                 : lifetime)));
            budget = std::clamp<std::size_t>(budget, 2, recorded);
            pred.early_budget_cycles = budget;

            // transfer plan
            TransferPlan plan;
            plan.target_temperature_k = target.temperature_k;
            if (cfg.no_transfer) {
                // nearest source only, Arrhenius correction disabled
                std::size_t best = 0;
                for (std::size_t d = 1; d < domains.size(); ++d)
                    if (std::abs(domains[d].temperature_k - target.temperature_k) <
                        std::abs(domains[best].temperature_k - target.temperature_k))
                        best = d;
                TransferSource src;
                src.temperature_k = domains[best].temperature_k;
                src.rates = {domain_window_rates[best], domains[best].temperature_k,
                             cfg.rate_window};
                src.at_score = 1.0;
                src.weight = 1.0;
                src.per_cycle_rates = domain_cycle_rates[best];
                plan.sources.push_back(std::move(src));
            } else {
                // target window rates from the model-smoothed early curve
                const Matrix target_curve = predict_feature_curve(chem, target.imv, budget);
                const std::vector<double> r_target = feature_rates(target_curve, cfg.rate_window);
                std::vector<double> at_scores(domains.size());
                for (std::size_t d = 0; d < domains.size(); ++d)
                    at_scores[d] = aggregate_at_score(domain_window_rates[d], r_target);
                const std::vector<double> weights = source_weights(at_scores);
                for (std::size_t d = 0; d < domains.size(); ++d) {
                    TransferSource src;
                    src.temperature_k = domains[d].temperature_k;
                    src.rates = {domain_window_rates[d], domains[d].temperature_k,
                                 cfg.rate_window};
                    src.at_score = at_scores[d];
                    src.weight = weights[d];
                    src.per_cycle_rates = domain_cycle_rates[d];
                    plan.sources.push_back(std::move(src));
                }
            }
            plans[std::size_t(ti)] = plan;

            // predicted target features: measured early rows pass through,
            // the rest is chain-extrapolated from the last measured row
            const Matrix measured = measured_feature_rows(target, chem.output_stats);
            Matrix traj_features(recorded, kInCycleCount);
            for (std::size_t r = 0; r < budget; ++r)
                for (std::size_t c = 0; c < kInCycleCount; ++c)
                    traj_features(r, c) = measured(r, c);
            if (recorded > budget) {
                std::vector<double> seed_row(kInCycleCount);
                for (std::size_t c = 0; c < kInCycleCount; ++c)
                    seed_row[c] = measured(budget - 1, c);
                const ChainResult chain =
                    chain_extrapolate(seed_row, plan, budget - 1, recorded - budget);
                exhausted[std::size_t(ti)] = chain.horizon_exhausted;
                for (std::size_t r = budget; r < recorded; ++r)
                    for (std::size_t c = 0; c < kInCycleCount; ++c)
                        traj_features(r, c) = chain.rows(r - budget + 1, c);
            }

            // trajectory model: all source rows + the target's early rows
            const std::size_t u_cols = cfg.no_imv ? 0 : 9;
            const std::size_t in_cols = kInCycleCount + u_cols;
            Matrix x_train(0, in_cols);
            std::vector<double> y_rows;
            const auto append_rows = [&](const BatterySeries& s, std::size_t limit) {
                const Matrix rows = measured_feature_rows(s, chem.output_stats);
                std::vector<double> u_norm(u_cols);
                for (std::size_t c = 0; c < u_cols; ++c)
                    u_norm[c] = chem.input_stats.scale(c, s.imv[c]);
                const std::size_t n = std::min(limit, rows.rows);
                for (std::size_t r = 0; r < n; ++r) {
                    for (std::size_t c = 0; c < kInCycleCount; ++c)
                        x_train.v.push_back(rows(r, c));
                    for (std::size_t c = 0; c < u_cols; ++c) x_train.v.push_back(u_norm[c]);
                    y_rows.push_back(s.capacity_ah[r]);
                }
            };
            for (const auto& s : sources) append_rows(s, s.features.row_count());
            append_rows(target, budget);
            x_train.rows = y_rows.size();

            // capacity labels normalized over the training rows
            Matrix y_train(y_rows.size(), 1);
            y_train.v = y_rows;
            std::vector<std::size_t> all_rows(y_rows.size());
            std::iota(all_rows.begin(), all_rows.end(), std::size_t(0));
            const NormStats y_stats = fit_norm_stats(y_train, all_rows);
            apply_norm_stats(y_train, y_stats);

            MLPModel traj(in_cols, 1, cfg.seed + 1);
            mlp_train(traj, x_train, y_train, cfg.traj_train);

            // predict the full target trajectory
            Matrix x_target(recorded, in_cols);
            std::vector<double> u_norm(u_cols);
            for (std::size_t c = 0; c < u_cols; ++c)
                u_norm[c] = chem.input_stats.scale(c, target.imv[c]);
            for (std::size_t r = 0; r < recorded; ++r) {
                for (std::size_t c = 0; c < kInCycleCount; ++c)
                    x_target(r, c) = traj_features(r, c);
                for (std::size_t c = 0; c < u_cols; ++c)
                    x_target(r, kInCycleCount + c) = u_norm[c];
            }
            Matrix y_hat = traj.forward(x_target);
            invert_norm_stats(y_hat, y_stats);

            // score over the lifetime range
            const std::size_t scored = std::min(lifetime, recorded);
            pred.cycles.resize(scored);
            pred.y_true.resize(scored);
            pred.y_pred.resize(scored);
            for (std::size_t r = 0; r < scored; ++r) {
                pred.cycles[r] = int(r + 1);
                pred.y_true[r] = target.capacity_ah[r];
                pred.y_pred[r] = y_hat(r, 0);
            }
            pred.mape_overall_pct = mape(pred.y_true, pred.y_pred);
            const StageRanges stages = stage_ranges(scored);
            const auto stage_mape = [&](std::size_t begin, std::size_t end) {
                const std::vector<double> yt(pred.y_true.begin() + long(begin),
                                             pred.y_true.begin() + long(end));
                const std::vector<double> yp(pred.y_pred.begin() + long(begin),
                                             pred.y_pred.begin() + long(end));
                return mape(yt, yp);
            };
            pred.mape_early_pct = stage_mape(stages.early_begin, stages.early_end);
            pred.mape_mid_pct = stage_mape(stages.mid_begin, stages.mid_end);
            pred.mape_late_pct = stage_mape(stages.late_begin, stages.late_end);

            pred.predicted_eol_cycle = 0;
            for (std::size_t r = 0; r < recorded; ++r) {
                if (y_hat(r, 0) < cfg.eol_fraction * nominal) {
                    pred.predicted_eol_cycle = int(r + 1);
                    break;
                }
            }
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    for (std::size_t ti = 0; ti < target_ptrs.size(); ++ti) {
        result.plans[result.targets[ti].battery_id] = plans[ti];
        result.mean_mape_overall_pct += result.targets[ti].mape_overall_pct;
        result.horizon_exhausted = result.horizon_exhausted || exhausted[ti];
    }
    result.mean_mape_overall_pct /= double(result.targets.size());
    return result;
}

TrajectoryPrediction benchmark_empirical(const std::vector<double>& source_capacity,
                                         const std::vector<double>& target_capacity,
                                         std::size_t early_budget, int degree) {
    if (degree < 0) raise(ErrorCode::InvalidConfig, "degree must be >= 0");
    if (target_capacity.empty() || early_budget == 0)
        raise(ErrorCode::InvalidConfig, "target early data must be non-empty");
    if (source_capacity.size() < std::size_t(degree) + 1)
        raise(ErrorCode::InsufficientSourceData, "source curve shorter than the fit order");

    // polynomial least squares on the source curve, cycle axis scaled to [0,1]
    const double x_scale = double(std::max(source_capacity.size(), target_capacity.size()) - 1);
    const std::size_t terms = std::size_t(degree) + 1;
    std::vector<std::vector<double>> normal(terms, std::vector<double>(terms, 0.0));
    std::vector<double> rhs(terms, 0.0);
    for (std::size_t k = 0; k < source_capacity.size(); ++k) {
        const double x = x_scale > 0.0 ? double(k) / x_scale : 0.0;
        std::vector<double> basis(terms, 1.0);
        for (std::size_t p = 1; p < terms; ++p) basis[p] = basis[p - 1] * x;
        for (std::size_t i = 0; i < terms; ++i) {
            rhs[i] += basis[i] * source_capacity[k];
            for (std::size_t j = 0; j < terms; ++j) normal[i][j] += basis[i] * basis[j];
        }
    }
    // Gaussian elimination with partial pivoting; the pivot ratio doubles as
    // a condition estimate
    std::vector<double> coeff(rhs);
    double max_pivot = 0.0, min_pivot = 0.0;
    {
        auto a = normal;
        for (std::size_t col = 0; col < terms; ++col) {
            std::size_t pivot = col;
            for (std::size_t r = col + 1; r < terms; ++r)
                if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
            std::swap(a[col], a[pivot]);
            std::swap(coeff[col], coeff[pivot]);
            const double p = std::abs(a[col][col]);
            max_pivot = std::max(max_pivot, p);
            min_pivot = col == 0 ? p : std::min(min_pivot, p);
            if (p == 0.0 || (max_pivot > 0.0 && p / max_pivot < 1e-12))
                raise(ErrorCode::IllConditionedFit,
                      "polynomial fit is ill-conditioned at degree " + std::to_string(degree));
            for (std::size_t r = col + 1; r < terms; ++r) {
                const double f = a[r][col] / a[col][col];
                for (std::size_t c = col; c < terms; ++c) a[r][c] -= f * a[col][c];
                coeff[r] -= f * coeff[col];
            }
        }
        for (std::size_t col = terms; col-- > 0;) {
            for (std::size_t c = col + 1; c < terms; ++c) coeff[col] -= a[col][c] * coeff[c];
            coeff[col] /= a[col][col];
        }
    }

    const auto poly = [&](std::size_t cycle) {
        const double x = x_scale > 0.0 ? double(cycle) / x_scale : 0.0;
        double acc = 0.0, basis = 1.0;
        for (std::size_t p = 0; p < terms; ++p) {
            acc += coeff[p] * basis;
            basis *= x;
        }
        return acc;
    };

    // intercept shift from the early-cycle mean difference
    const std::size_t n_early = std::min(early_budget, target_capacity.size());
    double shift = 0.0;
    for (std::size_t k = 0; k < n_early; ++k) shift += target_capacity[k] - poly(k);
    shift /= double(n_early);

    TrajectoryPrediction pred;
    pred.battery_id = "empirical";
    pred.early_budget_cycles = n_early;
    pred.lifetime_cycles = target_capacity.size();
    pred.cycles.resize(target_capacity.size());
    pred.y_true = target_capacity;
    pred.y_pred.resize(target_capacity.size());
    for (std::size_t k = 0; k < target_capacity.size(); ++k) {
        pred.cycles[k] = int(k + 1);
        pred.y_pred[k] = poly(k) + shift;
    }
    pred.mape_overall_pct = mape(pred.y_true, pred.y_pred);
    const StageRanges stages = stage_ranges(target_capacity.size());
    const auto stage_mape = [&](std::size_t begin, std::size_t end) {
        const std::vector<double> yt(pred.y_true.begin() + long(begin),
                                     pred.y_true.begin() + long(end));
        const std::vector<double> yp(pred.y_pred.begin() + long(begin),
                                     pred.y_pred.begin() + long(end));
        return mape(yt, yp);
    };
    pred.mape_early_pct = stage_mape(stages.early_begin, stages.early_end);
    pred.mape_mid_pct = stage_mape(stages.mid_begin, stages.mid_end);
    pred.mape_late_pct = stage_mape(stages.late_begin, stages.late_end);
    return pred;
}

} // namespace battkit
