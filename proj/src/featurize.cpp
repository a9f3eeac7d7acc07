#include "battkit/featurize.hpp"

#include "battkit/error.hpp"
#include "battkit/parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>

namespace battkit {

namespace {

using json = nlohmann::json;

double median_interval(const CycleRecord& cycle, const Segment& seg) {
    std::vector<double> dt;
    dt.reserve(seg.size());
    for (std::size_t k = seg.begin + 1; k < seg.end; ++k)
        dt.push_back(cycle.samples[k].t - cycle.samples[k - 1].t);
    std::sort(dt.begin(), dt.end());
    return dt[dt.size() / 2];
}

// Mean voltage gradient of a segment in V/s: uniform-time resampling at the
// segment's median cadence, then centered finite differences.
double mean_voltage_gradient(const CycleRecord& cycle, const Segment& seg) {
    if (seg.size() < 2)
        raise(ErrorCode::DegenerateSegment, "segment needs at least 2 samples");
    const double t0 = cycle.samples[seg.begin].t;
    const double t1 = cycle.samples[seg.end - 1].t;
    const double cadence = median_interval(cycle, seg);
    const std::size_t n_pts = std::max<std::size_t>(2, std::size_t((t1 - t0) / cadence) + 1);
    const double h = (t1 - t0) / double(n_pts - 1);

    std::vector<double> v(n_pts);
    std::size_t cursor = seg.begin;
    for (std::size_t k = 0; k < n_pts; ++k) {
        const double t = t0 + h * double(k);
        while (cursor + 1 < seg.end - 1 && cycle.samples[cursor + 1].t <= t) ++cursor;
        const auto& a = cycle.samples[cursor];
        const auto& b = cycle.samples[cursor + 1];
        const double w = (t - a.t) / (b.t - a.t);
        v[k] = a.v + w * (b.v - a.v);
    }

    double sum = (v[1] - v[0]) / h + (v[n_pts - 1] - v[n_pts - 2]) / h;
    for (std::size_t k = 1; k + 1 < n_pts; ++k) sum += (v[k + 1] - v[k - 1]) / (2.0 * h);
    return sum / double(n_pts);
}

std::vector<double> boxcar(const std::vector<double>& x, std::size_t window) {
    std::vector<double> out(x.size() - window + 1);
    double acc = 0.0;
    for (std::size_t k = 0; k < window; ++k) acc += x[k];
    out[0] = acc / double(window);
    for (std::size_t k = window; k < x.size(); ++k) {
        acc += x[k] - x[k - window];
        out[k - window + 1] = acc / double(window);
    }
    return out;
}

} // namespace

IntraStepFeatures intra_step_features(const StepSegments& segments) {
    const CycleRecord& cycle = *segments.cycle;
    IntraStepFeatures f;
    const std::size_t charge_begin = segments.charge_steps.front().begin;
    const double q_base = charge_begin == 0 ? 0.0 : cycle.samples[charge_begin - 1].q;
    for (std::size_t i = 0; i < 9; ++i) {
        const Segment& seg = segments.charge_steps[i];
        if (seg.size() < 2)
            raise(ErrorCode::DegenerateSegment,
                  "charge step " + std::to_string(i + 1) + " has fewer than 2 samples");
        if (seg.current_a <= 0.0)
            raise(ErrorCode::DegenerateSegment,
                  "charge step " + std::to_string(i + 1) + " has non-positive current");
        f.vg[i] = mean_voltage_gradient(cycle, seg);
        f.q[i] = cycle.samples[seg.end - 1].q - q_base;
        f.rl[i] = (cycle.samples[seg.end - 1].v - cycle.samples[seg.begin].v) / seg.current_a;
    }
    return f;
}

InterStepFeatures inter_step_features(const StepSegments& segments) {
    const CycleRecord& cycle = *segments.cycle;
    InterStepFeatures f;
    const auto& steps = segments.charge_steps;

    const auto v_start = [&](const Segment& s) { return cycle.samples[s.begin].v; };
    const auto v_end = [&](const Segment& s) { return cycle.samples[s.end - 1].v; };

    f.vc89 = v_start(steps[8]) - v_end(steps[7]);

    // pseudo relaxation inside step 9
    {
        const Segment& s9 = steps[8];
        double vmin = v_start(s9);
        std::size_t kmin = s9.begin;
        for (std::size_t k = s9.begin; k < s9.end; ++k) {
            if (cycle.samples[k].v < vmin) {
                vmin = cycle.samples[k].v;
                kmin = k;
            }
        }
        f.vd9 = v_start(s9) - vmin;
        f.tvd9 = cycle.samples[kmin].t - cycle.samples[s9.begin].t;
    }

    // relaxation in the rest phase; the recovery time is taken at 80% of the
    // maximum drop for better time sensitivity
    {
        const Segment& rest = segments.rest;
        if (rest.size() == 0)
            raise(ErrorCode::DegenerateSegment, "rest segment is empty");
        const double v0 = v_start(rest);
        f.revc = v_end(steps[8]) - v0;
        double vmin = v0;
        for (std::size_t k = rest.begin; k < rest.end; ++k)
            vmin = std::min(vmin, cycle.samples[k].v);
        f.revd = v0 - vmin;
        f.trevd = 0.0;
        if (f.revd > 0.0) {
            const double target_drop = 0.8 * f.revd;
            for (std::size_t k = rest.begin; k < rest.end; ++k) {
                if (v0 - cycle.samples[k].v >= target_drop) {
                    f.trevd = cycle.samples[k].t - cycle.samples[rest.begin].t;
                    break;
                }
            }
        }
    }

    const double vg1 = mean_voltage_gradient(cycle, steps[0]);
    const double vg2 = mean_voltage_gradient(cycle, steps[1]);
    f.rvg = vg2 / vg1;

    for (std::size_t i = 0; i < 8; ++i) {
        const double di = steps[i + 1].current_a - steps[i].current_a;
        if (std::abs(di) < 1e-12)
            raise(ErrorCode::ZeroCurrentDelta,
                  "steps " + std::to_string(i + 1) + " and " + std::to_string(i + 2) +
                      " have equal currents");
        f.ro[i] = (v_start(steps[i + 1]) - v_end(steps[i])) / di;
    }
    return f;
}

FeatureVector extract_cycle_features(const CycleRecord& cycle, const ChargingProtocol& protocol) {
    const StepSegments segments = segment_cycle(cycle, protocol);
    const IntraStepFeatures intra = intra_step_features(segments);
    const InterStepFeatures inter = inter_step_features(segments);

    FeatureVector fv;
    fv.cycle_index = cycle.cycle_index;
    fv.at(kFeatT) = cycle.temperature_k;
    fv.at(kFeatVC89) = inter.vc89;
    fv.at(kFeatVD9) = inter.vd9;
    fv.at(kFeatTVD9) = inter.tvd9;
    fv.at(kFeatReVC) = inter.revc;
    fv.at(kFeatReVD) = inter.revd;
    fv.at(kFeatTReVD) = inter.trevd;
    fv.at(kFeatRVg) = inter.rvg;
    for (int i = 0; i < 9; ++i) {
        fv.at(kFeatVg1 + i) = intra.vg[std::size_t(i)];
        fv.at(kFeatQ1 + i) = intra.q[std::size_t(i)];
        fv.at(kFeatRL1 + i) = intra.rl[std::size_t(i)];
    }
    for (int i = 0; i < 8; ++i) fv.at(kFeatRO1 + i) = inter.ro[std::size_t(i)];
    return fv;
}

FeatureMatrix extract_features(const BatteryDataset& dataset, const ChargingProtocol& protocol,
                               const ExtractOptions& opts) {
    std::vector<const CycleRecord*> cycles;
    for (const auto& c : dataset.cycles) {
        if (opts.skip_probe_cycles && std::size_t(c.cycle_index) <= opts.probe_cycle_count)
            continue;
        cycles.push_back(&c);
    }
    FeatureMatrix m;
    m.values = Matrix(cycles.size(), kFeatureCount);
    m.battery_ids.resize(cycles.size());
    m.cycles.resize(cycles.size());

    std::vector<FeatureVector> rows(cycles.size());
    const int nt = par::effective_threads();
    std::exception_ptr failure;
#pragma omp parallel for schedule(static) num_threads(nt) if (par::parallel_enabled())
    for (long long k = 0; k < (long long)cycles.size(); ++k) {
        try {
            rows[std::size_t(k)] = extract_cycle_features(*cycles[std::size_t(k)], protocol);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    for (std::size_t k = 0; k < cycles.size(); ++k) {
        FeatureVector& fv = rows[k];
        fv.battery_id = dataset.battery_id;
        if (dataset.has_imv())
            for (int i = 0; i < 9; ++i) fv.at(kFeatU1 + i) = dataset.imv.u[std::size_t(i)];
        m.battery_ids[k] = dataset.battery_id;
        m.cycles[k] = fv.cycle_index;
        for (int id = 1; id <= kFeatureCount; ++id) m.values(k, std::size_t(id - 1)) = fv.at(id);
    }
    return m;
}

FeatureMatrix extract_features(const std::vector<BatteryDataset>& fleet,
                               const ChargingProtocol& protocol, const ExtractOptions& opts) {
    FeatureMatrix all;
    all.values = Matrix(0, kFeatureCount);
    for (const auto& ds : fleet) {
        FeatureMatrix one = extract_features(ds, protocol, opts);
        all.battery_ids.insert(all.battery_ids.end(), one.battery_ids.begin(),
                               one.battery_ids.end());
        all.cycles.insert(all.cycles.end(), one.cycles.begin(), one.cycles.end());
        all.values.v.insert(all.values.v.end(), one.values.v.begin(), one.values.v.end());
        all.values.rows += one.values.rows;
    }
    return all;
}

NormStats fit_norm_stats(const Matrix& values, const std::vector<std::size_t>& fit_rows) {
    if (fit_rows.empty()) raise(ErrorCode::EmptyFitSet, "normalization fit set is empty");
    NormStats stats;
    stats.cols.resize(values.cols);
    for (std::size_t c = 0; c < values.cols; ++c) {
        double lo = values(fit_rows[0], c), hi = lo;
        for (const std::size_t r : fit_rows) {
            lo = std::min(lo, values(r, c));
            hi = std::max(hi, values(r, c));
        }
        stats.cols[c] = {lo, hi, hi - lo < 1e-12};
    }
    return stats;
}

void apply_norm_stats(Matrix& values, const NormStats& stats) {
    for (std::size_t r = 0; r < values.rows; ++r)
        for (std::size_t c = 0; c < values.cols; ++c)
            values(r, c) = stats.scale(c, values(r, c));
}

void invert_norm_stats(Matrix& values, const NormStats& stats) {
    for (std::size_t r = 0; r < values.rows; ++r)
        for (std::size_t c = 0; c < values.cols; ++c)
            values(r, c) = stats.unscale(c, values(r, c));
}

FeatureMatrix normalize(const FeatureMatrix& matrix, const std::vector<std::size_t>& fit_rows) {
    FeatureMatrix out = matrix;
    out.norm_stats = fit_norm_stats(matrix.values, fit_rows);
    apply_norm_stats(out.values, out.norm_stats);
    return out;
}

std::vector<IcaPoint> ica_curve(const CycleRecord& cycle, const Segment& discharge,
                                std::size_t window) {
    if (window < 1) raise(ErrorCode::InvalidConfig, "ica window must be >= 1");
    if (discharge.size() < 2 * window)
        raise(ErrorCode::TooFewSamples,
              "discharge segment has " + std::to_string(discharge.size()) +
                  " samples; need at least " + std::to_string(2 * window));
    std::vector<double> v, q;
    v.reserve(discharge.size());
    q.reserve(discharge.size());
    const double q0 = cycle.samples[discharge.begin].q;
    for (std::size_t k = discharge.begin; k < discharge.end; ++k) {
        v.push_back(cycle.samples[k].v);
        q.push_back(cycle.samples[k].q - q0);
    }
    const std::vector<double> vs = boxcar(v, window);
    const std::vector<double> qs = boxcar(q, window);
    std::vector<IcaPoint> out;
    out.reserve(vs.size());
    for (std::size_t k = 1; k + 1 < vs.size(); ++k) {
        const double dv = vs[k + 1] - vs[k - 1];
        if (std::abs(dv) < 1e-12) continue;
        out.push_back({vs[k], (qs[k + 1] - qs[k - 1]) / dv});
    }
    return out;
}

void write_features_csv(const std::string& path, const FeatureMatrix& matrix) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorCode::IoError, "cannot open '" + path + "' for writing");
    out << "battery_id,cycle";
    for (int id = 1; id <= kFeatureCount; ++id) out << ",f" << id;
    out << '\n';
    char buf[32];
    for (std::size_t r = 0; r < matrix.row_count(); ++r) {
        out << matrix.battery_ids[r] << ',' << matrix.cycles[r];
        for (std::size_t c = 0; c < kFeatureCount; ++c) {
            std::snprintf(buf, sizeof buf, ",%.17g", matrix.values(r, c));
            out << buf;
        }
        out << '\n';
    }
}

FeatureMatrix read_features_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::IoError, "cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) raise(ErrorCode::EmptyDataset, "feature CSV is empty");
    std::string expected = "battery_id,cycle";
    for (int id = 1; id <= kFeatureCount; ++id) expected += ",f" + std::to_string(id);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != expected)
        raise(ErrorCode::MalformedRow, "feature CSV header mismatch in '" + path + "'");

    FeatureMatrix m;
    m.values = Matrix(0, kFeatureCount);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        if (!std::getline(row, field, ','))
            raise(ErrorCode::MalformedRow, "line " + std::to_string(line_no));
        m.battery_ids.push_back(field);
        if (!std::getline(row, field, ','))
            raise(ErrorCode::MalformedRow, "line " + std::to_string(line_no));
        m.cycles.push_back(std::stoi(field));
        for (int id = 1; id <= kFeatureCount; ++id) {
            if (!std::getline(row, field, ','))
                raise(ErrorCode::MalformedRow,
                      "line " + std::to_string(line_no) + ": missing f" + std::to_string(id));
            m.values.v.push_back(std::stod(field));
        }
        ++m.values.rows;
    }
    if (m.values.rows == 0) raise(ErrorCode::EmptyDataset, "feature CSV has no rows");
    return m;
}

void write_norm_stats_json(const std::string& path, const NormStats& stats) {
    json doc;
    doc["vg_units"] = "V/s";
    json cols = json::array();
    for (std::size_t c = 0; c < stats.cols.size(); ++c) {
        cols.push_back({{"column", c},
                        {"min", stats.cols[c].min},
                        {"max", stats.cols[c].max},
                        {"constant", stats.cols[c].constant}});
    }
    doc["columns"] = cols;
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorCode::IoError, "cannot open '" + path + "' for writing");
    out << doc.dump(2) << '\n';
}

NormStats read_norm_stats_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::IoError, "cannot open '" + path + "'");
    json doc = json::parse(in);
    NormStats stats;
    stats.cols.resize(doc.at("columns").size());
    for (const auto& col : doc.at("columns")) {
        const std::size_t c = col.at("column").get<std::size_t>();
        stats.cols.at(c) = {col.at("min").get<double>(), col.at("max").get<double>(),
                            col.at("constant").get<bool>()};
    }
    return stats;
}

} // namespace battkit
