#include "battkit/interpret.hpp"

#include "battkit/error.hpp"
#include "battkit/featurize.hpp"
#include "battkit/parallel.hpp"
#include "battkit/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>

namespace battkit {

namespace {

// Window-level loss with the features outside S imputed by the window mean.
class SubsetLoss {
public:
    SubsetLoss(const MLPModel& model, const Matrix& x, const std::vector<double>& y)
        : model_(model), x_(x), y_(y), mean_(x.cols, 0.0) {
        for (std::size_t r = 0; r < x.rows; ++r)
            for (std::size_t c = 0; c < x.cols; ++c) mean_[c] += x(r, c);
        for (auto& m : mean_) m /= double(x.rows);
    }

    // mask[c] != 0 -> feature c uses its real values
    double loss(const std::vector<char>& mask) const {
        Matrix imputed(x_.rows, x_.cols);
        for (std::size_t r = 0; r < x_.rows; ++r)
            for (std::size_t c = 0; c < x_.cols; ++c)
                imputed(r, c) = mask[c] ? x_(r, c) : mean_[c];
        const Matrix pred = model_.forward(imputed);
        double sq = 0.0;
        for (std::size_t r = 0; r < x_.rows; ++r) {
            const double res = pred(r, 0) - y_[r];
            sq += res * res;
        }
        return sq / double(x_.rows);
    }

    std::size_t feature_count() const { return x_.cols; }

private:
    const MLPModel& model_;
    const Matrix& x_;
    const std::vector<double>& y_;
    std::vector<double> mean_;
};

SageValues sage_exact(const SubsetLoss& game, std::size_t d) {
    // cache v(S) for every subset bitmask
    const std::size_t n_subsets = std::size_t(1) << d;
    std::vector<double> loss_by_mask(n_subsets);
    std::vector<char> mask(d, 0);
    for (std::size_t bits = 0; bits < n_subsets; ++bits) {
        for (std::size_t c = 0; c < d; ++c) mask[c] = char((bits >> c) & 1);
        loss_by_mask[bits] = game.loss(mask);
    }
    const double base = loss_by_mask[0];

    // Shapley weights s!(d-1-s)!/d!
    std::vector<double> weight(d);
    std::vector<double> log_fact(d + 1, 0.0);
    for (std::size_t k = 1; k <= d; ++k) log_fact[k] = log_fact[k - 1] + std::log(double(k));
    for (std::size_t s = 0; s < d; ++s)
        weight[s] = std::exp(log_fact[s] + log_fact[d - 1 - s] - log_fact[d]);

    SageValues out;
    out.exact = true;
    out.values.assign(d, 0.0);
    out.standard_errors.assign(d, 0.0);
    for (std::size_t bits = 0; bits < n_subsets; ++bits) {
        const std::size_t s = std::size_t(std::popcount(bits));
        const double v_s = base - loss_by_mask[bits];
        for (std::size_t i = 0; i < d; ++i) {
            if (bits & (std::size_t(1) << i)) continue;
            const std::size_t with_i = bits | (std::size_t(1) << i);
            const double v_si = base - loss_by_mask[with_i];
            out.values[i] += weight[s] * (v_si - v_s);
        }
    }
    return out;
}

SageValues sage_sampled(const SubsetLoss& game, std::size_t d, const SageConfig& cfg) {
    constexpr std::size_t kBlock = 32;
    const std::size_t n_perms = std::max<std::size_t>(1, cfg.permutations);
    const std::size_t n_blocks = (n_perms + kBlock - 1) / kBlock;

    struct BlockAcc {
        std::vector<double> sum, sumsq;
    };
    std::vector<BlockAcc> blocks(n_blocks);

    const int nt = par::effective_threads();
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) num_threads(nt) if (par::parallel_enabled())
    for (long long bi = 0; bi < (long long)n_blocks; ++bi) {
        try {
            BlockAcc& acc = blocks[std::size_t(bi)];
            acc.sum.assign(d, 0.0);
            acc.sumsq.assign(d, 0.0);
            Rng rng(cfg.seed, 0x5A6EULL + std::uint64_t(bi));
            std::vector<std::size_t> perm(d);
            std::vector<char> mask(d, 0);
            const std::size_t lo = std::size_t(bi) * kBlock;
            const std::size_t hi = std::min(lo + kBlock, n_perms);
            for (std::size_t p = lo; p < hi; ++p) {
                std::iota(perm.begin(), perm.end(), std::size_t(0));
                rng.shuffle(perm);
                std::fill(mask.begin(), mask.end(), 0);
                double prev_loss = game.loss(mask);
                for (const std::size_t feat : perm) {
                    mask[feat] = 1;
                    const double cur_loss = game.loss(mask);
                    const double contribution = prev_loss - cur_loss;
                    acc.sum[feat] += contribution;
                    acc.sumsq[feat] += contribution * contribution;
                    prev_loss = cur_loss;
                }
            }
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    SageValues out;
    out.exact = false;
    out.permutations = n_perms;
    out.values.assign(d, 0.0);
    out.standard_errors.assign(d, 0.0);
    std::vector<double> sumsq(d, 0.0);
    for (const auto& acc : blocks) {
        for (std::size_t c = 0; c < d; ++c) {
            out.values[c] += acc.sum[c];
            sumsq[c] += acc.sumsq[c];
        }
    }
    for (std::size_t c = 0; c < d; ++c) {
        const double mean = out.values[c] / double(n_perms);
        out.values[c] = mean;
        if (n_perms > 1) {
            const double var =
                std::max(0.0, (sumsq[c] - double(n_perms) * mean * mean) / double(n_perms - 1));
            out.standard_errors[c] = std::sqrt(var / double(n_perms));
        }
    }
    return out;
}

} // namespace

SageValues sage_window(const MLPModel& model, const Matrix& x_win,
                       const std::vector<double>& y_win, const SageConfig& cfg) {
    if (x_win.rows < 2) raise(ErrorCode::EmptyWindow, "SAGE window needs at least 2 rows");
    if (x_win.rows != y_win.size())
        raise(ErrorCode::LengthMismatch, "window X/Y row mismatch");
    if (model.output_dim() != 1)
        raise(ErrorCode::InvalidConfig, "SAGE expects a scalar-output model");
    const SubsetLoss game(model, x_win, y_win);
    const std::size_t d = x_win.cols;
    if (d <= cfg.exact_max_features) return sage_exact(game, d);
    return sage_sampled(game, d, cfg);
}

SageReport sage_over_lifetime(const MLPModel& model, const Matrix& x,
                              const std::vector<double>& y, std::size_t window_length,
                              const SageConfig& cfg) {
    if (window_length < 2) raise(ErrorCode::InvalidConfig, "window length must be >= 2");
    if (x.rows != y.size()) raise(ErrorCode::LengthMismatch, "X/Y row mismatch");
    if (x.rows < 2) raise(ErrorCode::EmptyWindow, "need at least 2 rows");

    SageReport report;
    report.window_length = window_length;
    report.permutations = cfg.permutations;
    report.seed = cfg.seed;
    for (std::size_t start = 0; start < x.rows; start += window_length) {
        const std::size_t stop = std::min(start + window_length, x.rows);
        if (stop - start < 2) break; // a trailing one-row tile carries no loss signal
        Matrix xw(stop - start, x.cols);
        std::vector<double> yw(stop - start);
        for (std::size_t r = start; r < stop; ++r) {
            for (std::size_t c = 0; c < x.cols; ++c) xw(r - start, c) = x(r, c);
            yw[r - start] = y[r];
        }
        report.windows.push_back(sage_window(model, xw, yw, cfg));
    }
    report.lifetime_average = sage_average(report.windows);
    return report;
}

std::vector<double> sage_average(const std::vector<SageValues>& windows) {
    if (windows.empty()) raise(ErrorCode::EmptyWindow, "no SAGE windows to average");
    std::vector<double> avg(windows.front().values.size(), 0.0);
    for (const auto& w : windows)
        for (std::size_t c = 0; c < avg.size(); ++c) avg[c] += w.values[c];
    for (auto& v : avg) v /= double(windows.size());
    return avg;
}

DominanceReport dominance(const std::map<int, double>& sage_by_feature_id) {
    const auto magnitude = [&](int id) {
        const auto it = sage_by_feature_id.find(id);
        if (it == sage_by_feature_id.end())
            raise(ErrorCode::InvalidConfig,
                  "dominance needs SAGE value for feature id " + std::to_string(id));
        return std::abs(it->second);
    };

    const double thermo = magnitude(kFeatQ1) + magnitude(kFeatQ1 + 8);
    double kinetic = 0.0;
    for (int i = 1; i <= 7; ++i) kinetic += magnitude(kFeatQ1 + i);
    const double conc = magnitude(kFeatVD9) + magnitude(kFeatReVD);
    const double other = magnitude(kFeatVC89) + magnitude(kFeatReVC);

    if (thermo + kinetic <= 0.0)
        raise(ErrorCode::AllZeroImportance, "loss-type pairing has zero importance mass");
    if (conc + other <= 0.0)
        raise(ErrorCode::AllZeroImportance, "polarization pairing has zero importance mass");

    DominanceReport report;
    report.thermodynamic_share = thermo / (thermo + kinetic);
    report.kinetic_share = kinetic / (thermo + kinetic);
    report.concentration_share = conc / (conc + other);
    report.other_polarization_share = other / (conc + other);
    return report;
}

double wasserstein2_1d(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) raise(ErrorCode::EmptySample, "empty sample set");
    std::vector<double> sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const std::size_t n = sa.size(), m = sb.size();

    // L2 distance between the step-function empirical quantiles, exact over
    // the union grid of breakpoints
    double total = 0.0;
    std::size_t i = 0, j = 0;
    double u_prev = 0.0;
    while (i < n && j < m) {
        const double ua = double(i + 1) / double(n);
        const double ub = double(j + 1) / double(m);
        const double u_next = std::min(ua, ub);
        const double diff = sa[i] - sb[j];
        total += diff * diff * (u_next - u_prev);
        if (ua <= u_next) ++i;
        if (ub <= u_next) ++j;
        u_prev = u_next;
    }
    return std::sqrt(std::max(0.0, total));
}

CorrelationTrace degradation_correlation(const std::vector<double>& thermo_series,
                                         const std::vector<double>& conc_series,
                                         std::size_t window) {
    if (thermo_series.size() != conc_series.size())
        raise(ErrorCode::LengthMismatch, "series must be aligned");
    if (window < 2) raise(ErrorCode::InvalidConfig, "window must be >= 2");
    if (thermo_series.size() < window + 1)
        raise(ErrorCode::TooFewCycles, "series shorter than one window of increments");

    const auto normalized = [](const std::vector<double>& s) {
        double lo = s[0], hi = s[0];
        for (const double x : s) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        std::vector<double> out(s.size(), 0.0);
        if (hi - lo > 1e-12)
            for (std::size_t k = 0; k < s.size(); ++k) out[k] = (s[k] - lo) / (hi - lo);
        return out;
    };
    const std::vector<double> ta = normalized(thermo_series);
    const std::vector<double> cb = normalized(conc_series);

    std::vector<double> da(ta.size() - 1), db(cb.size() - 1);
    for (std::size_t k = 0; k + 1 < ta.size(); ++k) {
        da[k] = ta[k + 1] - ta[k];
        db[k] = cb[k + 1] - cb[k];
    }

    CorrelationTrace trace;
    for (std::size_t start = 0; start < da.size(); start += window) {
        const std::size_t stop = std::min(start + window, da.size());
        if (stop - start < 2) break;
        const std::vector<double> wa(da.begin() + long(start), da.begin() + long(stop));
        const std::vector<double> wb(db.begin() + long(start), db.begin() + long(stop));
        trace.values.push_back(wasserstein2_1d(wa, wb));
        trace.window_start_cycle.push_back(start);
    }
    if (trace.values.empty()) raise(ErrorCode::TooFewCycles, "no complete windows");

    // activation dip: minimum over the first half
    const std::size_t half = std::max<std::size_t>(1, trace.values.size() / 2);
    trace.dip_index = 0;
    for (std::size_t k = 1; k < half; ++k)
        if (trace.values[k] < trace.values[trace.dip_index]) trace.dip_index = k;

    // late-life divergence: first window in the back half clearly above the
    // mid-life plateau
    if (trace.values.size() >= 6) {
        std::vector<double> mid(trace.values.begin() + long(trace.values.size() / 3),
                                trace.values.begin() + long(2 * trace.values.size() / 3));
        std::sort(mid.begin(), mid.end());
        const double plateau = mid[mid.size() / 2];
        const double threshold = plateau * 1.5 + 1e-12;
        for (std::size_t k = trace.values.size() / 2; k < trace.values.size(); ++k) {
            if (trace.values[k] > threshold) {
                trace.divergence_index = k;
                trace.has_divergence = true;
                break;
            }
        }
    }
    return trace;
}

ArrheniusFit arrhenius_diagnostic(const std::map<double, double>& rate_by_temperature_k) {
    if (rate_by_temperature_k.size() < 3)
        raise(ErrorCode::InvalidConfig, "Arrhenius fit needs at least 3 temperatures");
    std::vector<double> xs, ys;
    for (const auto& [t, rate] : rate_by_temperature_k) {
        if (t <= 0.0) raise(ErrorCode::InvalidConfig, "temperatures must be positive kelvin");
        if (rate <= 0.0)
            raise(ErrorCode::NonPositiveRate,
                  "rate at " + std::to_string(t) + " K must be positive");
        xs.push_back(1.0 / t);
        ys.push_back(std::log(rate));
    }
    const std::size_t n = xs.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        mx += xs[k];
        my += ys[k];
    }
    mx /= double(n);
    my /= double(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        sxx += (xs[k] - mx) * (xs[k] - mx);
        sxy += (xs[k] - mx) * (ys[k] - my);
        syy += (ys[k] - my) * (ys[k] - my);
    }
    ArrheniusFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (syy <= 0.0) {
        fit.r_squared = 1.0;
    } else {
        double ss_res = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double resid = ys[k] - (fit.intercept + fit.slope * xs[k]);
            ss_res += resid * resid;
        }
        fit.r_squared = 1.0 - ss_res / syy;
    }
    return fit;
}

} // namespace battkit
