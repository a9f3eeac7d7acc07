#pragma once

#include "battkit/protocol.hpp"

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace battkit {

struct Sample {
    double t = 0.0; // seconds within cycle, strictly increasing
    double i = 0.0; // amperes, signed (+ = charge)
    double v = 0.0; // volts
    double q = 0.0; // ampere-hours, cumulative |I| throughput within cycle
};

struct CycleRecord {
    int cycle_index = 0; // 1-based, contiguous
    std::vector<Sample> samples;
    double temperature_k = 0.0;
    double discharge_capacity_ah = 0.0;
};

// Step cut-off voltages U1..U9 probed from the formation cycles.
struct IMVVector {
    std::vector<double> u; // 9 values, volts
    double temperature_k = 0.0;
};

struct BatteryDataset {
    std::string battery_id;
    double temperature_k = 0.0;
    std::vector<CycleRecord> cycles;
    IMVVector imv; // empty until probed
    double nominal_capacity_ah = 0.0;

    bool has_imv() const { return !imv.u.empty(); }
    void validate(const ChargingProtocol& protocol) const;
};

// One segment = a contiguous run of samples at a constant current level.
struct Segment {
    std::size_t begin = 0; // sample index, inclusive
    std::size_t end = 0;   // sample index, exclusive
    double current_a = 0.0;

    std::size_t size() const { return end - begin; }
};

struct StepSegments {
    const CycleRecord* cycle = nullptr;
    std::vector<Segment> charge_steps; // exactly 9
    Segment rest;
    Segment discharge;
};

// Ingestion. Header must be exactly `battery_id,cycle,t,i,v,q,temp_k`;
// rows sorted by (cycle, t); gzip input detected by magic bytes.
BatteryDataset parse_cycling_csv(std::istream& source, const ChargingProtocol& protocol);
BatteryDataset parse_cycling_csv_file(const std::string& path, const ChargingProtocol& protocol);
std::vector<BatteryDataset> parse_fleet_csv_file(const std::string& path,
                                                 const ChargingProtocol& protocol);

void write_cycling_csv(std::ostream& out, const BatteryDataset& dataset);
void write_fleet_csv_file(const std::string& path, const std::vector<BatteryDataset>& fleet,
                          bool gzip = false);

// Splits a cycle into 9 constant-current charge steps, one rest and one
// discharge segment. A new plateau starts when the current leaves the
// max(1% of plateau mean, 5 mA) band for >= 2 consecutive samples.
StepSegments segment_cycle(const CycleRecord& cycle, const ChargingProtocol& protocol);

// Mean cut-off voltages over exactly 3 probe cycles: u_i is the voltage at
// which the cycle's renormalized SOC (q / q_end_of_charge * 0.97) reaches
// soc_targets[i], linearly interpolated.
IMVVector probe_imv(const std::vector<CycleRecord>& initial_cycles,
                    const ChargingProtocol& protocol);

// State of health as a capacity ratio in (0, 1.2].
double soh(double discharge_capacity_ah, double nominal_ah);

// Voltage at a renormalized-SOC point of a cycle's charge phase (used by
// probing and by feature extraction).
double voltage_at_soc(const CycleRecord& cycle, const StepSegments& segments, double soc);

} // namespace battkit
