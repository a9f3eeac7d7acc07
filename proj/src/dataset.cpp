#include "battkit/dataset.hpp"

#include "battkit/error.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace battkit {

namespace {

constexpr const char* kHeader = "battery_id,cycle,t,i,v,q,temp_k";
constexpr double kRestCurrentA = 5e-3; // |i| below this is treated as rest

double parse_double(const std::string& field, std::size_t line_no) {
    double value = 0.0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        raise(ErrorCode::MalformedRow,
              "line " + std::to_string(line_no) + ": bad numeric field '" + field + "'");
    if (!std::isfinite(value))
        raise(ErrorCode::MalformedRow,
              "line " + std::to_string(line_no) + ": non-finite value '" + field + "'");
    return value;
}

struct RawRow {
    std::string battery_id;
    int cycle;
    Sample sample;
    double temp_k;
};

std::vector<RawRow> parse_rows(std::istream& source) {
    std::string line;
    if (!std::getline(source, line))
        raise(ErrorCode::EmptyDataset, "input stream is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kHeader)
        raise(ErrorCode::MalformedRow, "line 1: header must be exactly '" +
                                           std::string(kHeader) + "', got '" + line + "'");

    std::vector<RawRow> rows;
    std::size_t line_no = 1;
    while (std::getline(source, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::array<std::string, 7> fields;
        std::size_t field_idx = 0, start = 0;
        for (std::size_t pos = 0; pos <= line.size(); ++pos) {
            if (pos == line.size() || line[pos] == ',') {
                if (field_idx >= fields.size())
                    raise(ErrorCode::MalformedRow,
                          "line " + std::to_string(line_no) + ": too many fields");
                fields[field_idx++] = line.substr(start, pos - start);
                start = pos + 1;
            }
        }
        if (field_idx != 7)
            raise(ErrorCode::MalformedRow,
                  "line " + std::to_string(line_no) + ": expected 7 fields, got " +
                      std::to_string(field_idx));
        RawRow row;
        row.battery_id = fields[0];
        row.cycle = (int)parse_double(fields[1], line_no);
        row.sample.t = parse_double(fields[2], line_no);
        row.sample.i = parse_double(fields[3], line_no);
        row.sample.v = parse_double(fields[4], line_no);
        row.sample.q = parse_double(fields[5], line_no);
        row.temp_k = parse_double(fields[6], line_no);
        if (row.cycle <= 0)
            raise(ErrorCode::MalformedRow,
                  "line " + std::to_string(line_no) + ": cycle index must be positive");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) raise(ErrorCode::EmptyDataset, "no data rows");
    return rows;
}

BatteryDataset assemble(const std::string& battery_id, const std::vector<const RawRow*>& rows,
                        const ChargingProtocol& protocol) {
    BatteryDataset ds;
    ds.battery_id = battery_id;
    ds.nominal_capacity_ah = protocol.nominal_capacity_ah;
    ds.temperature_k = rows.front()->temp_k;

    CycleRecord current;
    current.cycle_index = rows.front()->cycle;
    current.temperature_k = rows.front()->temp_k;
    for (const RawRow* row : rows) {
        if (row->cycle != current.cycle_index) {
            ds.cycles.push_back(std::move(current));
            current = CycleRecord{};
            current.cycle_index = row->cycle;
            current.temperature_k = row->temp_k;
        }
        current.samples.push_back(row->sample);
    }
    ds.cycles.push_back(std::move(current));

    // discharge capacity = |I| throughput accumulated while discharging
    for (auto& cycle : ds.cycles) {
        double q_start = -1.0, q_end = 0.0;
        for (const auto& s : cycle.samples) {
            if (s.i < -kRestCurrentA) {
                if (q_start < 0.0) q_start = s.q;
                q_end = s.q;
            }
        }
        cycle.discharge_capacity_ah = q_start < 0.0 ? 0.0 : q_end - q_start;
    }

    ds.validate(protocol);
    return ds;
}

bool looks_gzip(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    unsigned char magic[2] = {0, 0};
    in.read(reinterpret_cast<char*>(magic), 2);
    return in.gcount() == 2 && magic[0] == 0x1f && magic[1] == 0x8b;
}

std::string read_maybe_gzip(const std::string& path) {
    if (!looks_gzip(path)) {
        std::ifstream in(path, std::ios::binary);
        if (!in) raise(ErrorCode::IoError, "cannot open '" + path + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }
    gzFile gz = gzopen(path.c_str(), "rb");
    if (!gz) raise(ErrorCode::IoError, "cannot open gzip '" + path + "'");
    std::string out;
    char buf[1 << 16];
    int n;
    while ((n = gzread(gz, buf, sizeof buf)) > 0) out.append(buf, (std::size_t)n);
    gzclose(gz);
    return out;
}

} // namespace

void BatteryDataset::validate(const ChargingProtocol& protocol) const {
    if (cycles.empty()) raise(ErrorCode::EmptyDataset, "battery '" + battery_id + "' has no cycles");
    int expected = 1;
    for (const auto& cycle : cycles) {
        if (cycle.cycle_index != expected)
            raise(ErrorCode::MalformedRow,
                  "battery '" + battery_id + "': cycle indexes must be contiguous from 1, got " +
                      std::to_string(cycle.cycle_index) + " where " + std::to_string(expected) +
                      " was expected");
        ++expected;
        if (cycle.samples.empty())
            raise(ErrorCode::EmptyDataset, "cycle " + std::to_string(cycle.cycle_index) +
                                               " of '" + battery_id + "' has no samples");
        if (std::abs(cycle.temperature_k - temperature_k) > 1e-9)
            raise(ErrorCode::MalformedRow,
                  "battery '" + battery_id + "': all cycles must share the battery temperature");
        double prev_t = -1.0;
        double prev_q_charge = -1.0;
        for (const auto& s : cycle.samples) {
            if (s.t <= prev_t)
                raise(ErrorCode::NonMonotonicTime,
                      "cycle " + std::to_string(cycle.cycle_index) + ": time not strictly increasing");
            prev_t = s.t;
            if (s.i > kRestCurrentA) {
                if (s.q < prev_q_charge - 1e-12)
                    raise(ErrorCode::MalformedRow,
                          "cycle " + std::to_string(cycle.cycle_index) +
                              ": charge q must be non-decreasing");
                prev_q_charge = s.q;
            }
        }
        if (cycle.discharge_capacity_ah > 0.0 &&
            cycle.discharge_capacity_ah > 1.2 * protocol.nominal_capacity_ah)
            raise(ErrorCode::MalformedRow,
                  "cycle " + std::to_string(cycle.cycle_index) +
                      ": discharge capacity exceeds 1.2x nominal");
    }
}

BatteryDataset parse_cycling_csv(std::istream& source, const ChargingProtocol& protocol) {
    const auto rows = parse_rows(source);
    std::vector<const RawRow*> ptrs;
    ptrs.reserve(rows.size());
    for (const auto& r : rows) {
        if (r.battery_id != rows.front().battery_id)
            raise(ErrorCode::MalformedRow,
                  "stream contains multiple battery ids; use the fleet parser");
        ptrs.push_back(&r);
    }
    return assemble(rows.front().battery_id, ptrs, protocol);
}

BatteryDataset parse_cycling_csv_file(const std::string& path, const ChargingProtocol& protocol) {
    std::istringstream in(read_maybe_gzip(path));
    return parse_cycling_csv(in, protocol);
}

std::vector<BatteryDataset> parse_fleet_csv_file(const std::string& path,
                                                 const ChargingProtocol& protocol) {
    std::istringstream in(read_maybe_gzip(path));
    const auto rows = parse_rows(in);
    // group by battery id, preserving first-seen order
    std::vector<std::string> order;
    std::map<std::string, std::vector<const RawRow*>> groups;
    for (const auto& r : rows) {
        auto [it, inserted] = groups.try_emplace(r.battery_id);
        if (inserted) order.push_back(r.battery_id);
        it->second.push_back(&r);
    }
    std::vector<BatteryDataset> fleet;
    fleet.reserve(order.size());
    for (const auto& id : order) fleet.push_back(assemble(id, groups[id], protocol));
    return fleet;
}

void write_cycling_csv(std::ostream& out, const BatteryDataset& dataset) {
    out << kHeader << '\n';
    char buf[256];
    for (const auto& cycle : dataset.cycles) {
        for (const auto& s : cycle.samples) {
            std::snprintf(buf, sizeof buf, "%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                          dataset.battery_id.c_str(), cycle.cycle_index, s.t, s.i, s.v, s.q,
                          cycle.temperature_k);
            out << buf;
        }
    }
}

void write_fleet_csv_file(const std::string& path, const std::vector<BatteryDataset>& fleet,
                          bool gzip) {
    std::ostringstream ss;
    bool first = true;
    for (const auto& ds : fleet) {
        if (first) {
            write_cycling_csv(ss, ds);
            first = false;
        } else {
            std::ostringstream one;
            write_cycling_csv(one, ds);
            const std::string s = one.str();
            ss << s.substr(s.find('\n') + 1); // drop repeated header
        }
    }
    const std::string body = ss.str();
    if (gzip) {
        gzFile gz = gzopen(path.c_str(), "wb");
        if (!gz) raise(ErrorCode::IoError, "cannot open '" + path + "' for writing");
        gzwrite(gz, body.data(), (unsigned)body.size());
        gzclose(gz);
    } else {
        std::ofstream out(path, std::ios::binary);
        if (!out) raise(ErrorCode::IoError, "cannot open '" + path + "' for writing");
        out << body;
    }
}

double soh(double discharge_capacity_ah, double nominal_ah) {
    if (nominal_ah <= 0.0)
        raise(ErrorCode::NonPositiveNominal, "nominal capacity must be positive");
    return discharge_capacity_ah / nominal_ah;
}

double voltage_at_soc(const CycleRecord& cycle, const StepSegments& segments, double soc) {
    const std::size_t begin = segments.charge_steps.front().begin;
    const std::size_t end = segments.charge_steps.back().end;
    const double q0 = cycle.samples[begin].q;
    const double q_end = cycle.samples[end - 1].q - q0;
    if (q_end <= 0.0)
        raise(ErrorCode::DegenerateSegment, "charge phase has no charge throughput");
    const double q_at = soc / 0.97 * q_end;
    // charge q is non-decreasing: binary search for the bracketing samples
    double prev_q = 0.0, prev_v = cycle.samples[begin].v;
    for (std::size_t idx = begin; idx < end; ++idx) {
        const double q = cycle.samples[idx].q - q0;
        const double v = cycle.samples[idx].v;
        if (q >= q_at) {
            if (q == prev_q) return v;
            const double w = (q_at - prev_q) / (q - prev_q);
            return prev_v + w * (v - prev_v);
        }
        prev_q = q;
        prev_v = v;
    }
    return cycle.samples[end - 1].v;
}

IMVVector probe_imv(const std::vector<CycleRecord>& initial_cycles,
                    const ChargingProtocol& protocol) {
    if (initial_cycles.size() != 3)
        raise(ErrorCode::InvalidConfig, "probe requires exactly 3 formation cycles");
    IMVVector imv;
    imv.temperature_k = initial_cycles.front().temperature_k;
    imv.u.assign(protocol.step_count(), 0.0);
    for (const auto& cycle : initial_cycles) {
        const StepSegments segments = segment_cycle(cycle, protocol);
        for (std::size_t i = 0; i < protocol.step_count(); ++i)
            imv.u[i] += voltage_at_soc(cycle, segments, protocol.soc_targets[i]);
    }
    for (auto& u : imv.u) u /= double(initial_cycles.size());
    return imv;
}

} // namespace battkit
