#include "battkit/transfer.hpp"

#include "battkit/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace battkit {

namespace {
constexpr double kAtUnityEps = 1e-9;
}

double aging_rate(const std::vector<double>& series, std::size_t first_cycle,
                  const RateWindow& window) {
    if (window.end <= window.start || window.n < 1)
        raise(ErrorCode::InvalidConfig, "rate window must satisfy end > start and n >= 1");
    if (window.start < first_cycle)
        raise(ErrorCode::WindowOutOfRange, "window starts before the series");
    const std::size_t last_needed = window.end + window.n - 1;
    const std::size_t last_available = first_cycle + series.size() - 1;
    if (last_needed > last_available)
        raise(ErrorCode::WindowOutOfRange,
              "window needs cycle " + std::to_string(last_needed) + " but series ends at " +
                  std::to_string(last_available));
    double sum = 0.0;
    for (std::size_t i = 0; i < window.n; ++i) {
        const double f_end = series[window.end + i - first_cycle];
        const double f_start = series[window.start + i - first_cycle];
        sum += f_end - f_start;
    }
    return sum / (double(window.n) * double(window.end - window.start));
}

double at_score(double r_source, double r_target) {
    if (r_source == 0.0)
        raise(ErrorCode::ZeroSourceRate, "source aging rate is zero");
    return r_target / r_source;
}

double at_score_known_alpha(double t_source_k, double t_target_k, double alpha_k) {
    if (t_source_k <= 0.0 || t_target_k <= 0.0)
        raise(ErrorCode::InvalidConfig, "temperatures must be positive kelvin");
    return std::exp((-1.0 / t_source_k + 1.0 / t_target_k) * alpha_k);
}

std::vector<double> source_weights(const std::vector<double>& at_scores) {
    if (at_scores.empty())
        raise(ErrorCode::InvalidConfig, "need at least one source");
    const std::size_t k = at_scores.size();

    // epsilon guard: sources with AT == 1 dominate outright
    std::vector<std::size_t> perfect;
    for (std::size_t i = 0; i < k; ++i)
        if (std::abs(at_scores[i] - 1.0) < kAtUnityEps) perfect.push_back(i);
    std::vector<double> weights(k, 0.0);
    if (!perfect.empty()) {
        for (const std::size_t i : perfect) weights[i] = 1.0 / double(perfect.size());
        return weights;
    }

    double inv_sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) inv_sum += 1.0 / std::abs(at_scores[i] - 1.0);
    for (std::size_t i = 0; i < k; ++i)
        weights[i] = 1.0 / (std::abs(at_scores[i] - 1.0) * inv_sum);
    return weights;
}

std::vector<double> per_cycle_rates(const std::vector<double>& series, std::size_t smooth_window) {
    if (series.size() < 2)
        raise(ErrorCode::WindowOutOfRange, "need at least 2 cycles for per-cycle rates");
    const std::size_t w = std::max<std::size_t>(1, smooth_window);

    std::vector<double> smooth(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        const std::size_t lo = i >= w / 2 ? i - w / 2 : 0;
        const std::size_t hi = std::min(series.size(), i + w / 2 + 1);
        double acc = 0.0;
        for (std::size_t j = lo; j < hi; ++j) acc += series[j];
        smooth[i] = acc / double(hi - lo);
    }

    std::vector<double> rates(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (i == 0)
            rates[i] = smooth[1] - smooth[0];
        else if (i + 1 == series.size())
            rates[i] = smooth[i] - smooth[i - 1];
        else
            rates[i] = 0.5 * (smooth[i + 1] - smooth[i - 1]);
    }
    return rates;
}

void TransferPlan::validate() const {
    if (sources.empty()) raise(ErrorCode::InvalidConfig, "transfer plan has no sources");
    double sum = 0.0;
    for (const auto& s : sources) {
        if (s.weight < 0.0) raise(ErrorCode::InvalidConfig, "negative source weight");
        sum += s.weight;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        raise(ErrorCode::InvalidConfig, "source weights must sum to 1");
}

ChainResult chain_extrapolate(const std::vector<double>& seed_row, const TransferPlan& plan,
                              std::size_t cycle_offset, std::size_t horizon) {
    plan.validate();
    const std::size_t n_features = seed_row.size();
    for (const auto& s : plan.sources) {
        if (s.per_cycle_rates.cols != n_features)
            raise(ErrorCode::InvalidConfig, "source rate matrix width mismatch");
        if (s.per_cycle_rates.rows == 0)
            raise(ErrorCode::SourceHorizonExhausted,
                  "source at " + std::to_string(s.temperature_k) + " K has no per-cycle rates");
    }

    ChainResult out;
    out.rows = Matrix(horizon + 1, n_features);
    for (std::size_t c = 0; c < n_features; ++c) out.rows(0, c) = seed_row[c];

    for (std::size_t i = 1; i <= horizon; ++i) {
        const std::size_t rate_cycle = cycle_offset + i - 1;
        for (std::size_t c = 0; c < n_features; ++c) {
            double increment = 0.0;
            for (const auto& s : plan.sources) {
                std::size_t row = rate_cycle;
                if (row >= s.per_cycle_rates.rows) {
                    // hold the last available rate when a source's data ends
                    row = s.per_cycle_rates.rows - 1;
                    out.horizon_exhausted = true;
                }
                increment += s.weight * s.at_score * s.per_cycle_rates(row, c);
            }
            out.rows(i, c) = out.rows(i - 1, c) + increment;
        }
    }
    return out;
}

std::string TransferPlan::to_json() const {
    nlohmann::json doc;
    doc["target_temperature_k"] = target_temperature_k;
    if (alpha)
        doc["alpha_k"] = *alpha;
    else
        doc["alpha_k"] = nullptr;
    nlohmann::json sources_json = nlohmann::json::array();
    for (const auto& s : sources) {
        sources_json.push_back({{"temperature_k", s.temperature_k},
                                {"at_score", s.at_score},
                                {"weight", s.weight},
                                {"rates", s.rates.rates},
                                {"window",
                                 {{"start", s.rates.window.start},
                                  {"end", s.rates.window.end},
                                  {"n", s.rates.window.n}}}});
    }
    doc["sources"] = sources_json;
    return doc.dump(2);
}

} // namespace battkit
