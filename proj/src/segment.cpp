#include "battkit/dataset.hpp"
#include "battkit/error.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace battkit {

namespace {

constexpr double kRestCurrentA = 5e-3;

enum class Phase { Charge, Rest, Discharge };

Phase classify(double current) {
    if (current > kRestCurrentA) return Phase::Charge;
    if (current < -kRestCurrentA) return Phase::Discharge;
    return Phase::Rest;
}

double plateau_band(double mean) { return std::max(0.01 * std::abs(mean), 0.005); }

} // namespace

StepSegments segment_cycle(const CycleRecord& cycle, const ChargingProtocol& protocol) {
    protocol.validate();
    const auto& samples = cycle.samples;
    if (samples.empty())
        raise(ErrorCode::SegmentationFailure,
              "cycle " + std::to_string(cycle.cycle_index) + ": no samples");

    // phase boundaries: charge run, then rest run, then discharge run
    std::size_t idx = 0;
    const std::size_t n = samples.size();
    const std::size_t charge_begin = idx;
    while (idx < n && classify(samples[idx].i) == Phase::Charge) ++idx;
    const std::size_t charge_end = idx;
    const std::size_t rest_begin = idx;
    while (idx < n && classify(samples[idx].i) == Phase::Rest) ++idx;
    const std::size_t rest_end = idx;
    const std::size_t discharge_begin = idx;
    while (idx < n && classify(samples[idx].i) == Phase::Discharge) ++idx;
    const std::size_t discharge_end = idx;

    if (charge_end == charge_begin || rest_end == rest_begin || discharge_end == discharge_begin ||
        discharge_end != n)
        raise(ErrorCode::SegmentationFailure,
              "cycle " + std::to_string(cycle.cycle_index) +
                  ": expected charge, rest, discharge phases in order");

    // plateau walk within the charge phase; a new step begins when the
    // current leaves the max(1% of plateau mean, 5 mA) band for >= 2
    // consecutive samples
    std::vector<Segment> plateaus;
    std::size_t seg_begin = charge_begin;
    double seg_sum = samples[charge_begin].i;
    std::size_t seg_count = 1;
    std::size_t breach_start = 0;
    std::size_t breach_len = 0;
    for (std::size_t k = charge_begin + 1; k < charge_end; ++k) {
        const double mean = seg_sum / double(seg_count);
        if (std::abs(samples[k].i - mean) > plateau_band(mean)) {
            if (breach_len == 0) breach_start = k;
            ++breach_len;
            if (breach_len >= 2) {
                plateaus.push_back({seg_begin, breach_start, 0.0});
                seg_begin = breach_start;
                seg_sum = samples[breach_start].i + samples[k].i;
                seg_count = 2;
                breach_len = 0;
            }
        } else {
            // a single outlier stays inside the plateau
            if (breach_len == 1) {
                seg_sum += samples[breach_start].i;
                ++seg_count;
            }
            breach_len = 0;
            seg_sum += samples[k].i;
            ++seg_count;
        }
    }
    plateaus.push_back({seg_begin, charge_end, 0.0});

    if (plateaus.size() != protocol.step_count())
        raise(ErrorCode::SegmentationFailure,
              "cycle " + std::to_string(cycle.cycle_index) + ": detected " +
                  std::to_string(plateaus.size()) + " charge plateaus, expected " +
                  std::to_string(protocol.step_count()));

    for (auto& seg : plateaus) {
        double sum = 0.0;
        for (std::size_t k = seg.begin; k < seg.end; ++k) sum += samples[k].i;
        seg.current_a = sum / double(seg.size());
    }

    StepSegments out;
    out.cycle = &cycle;
    out.charge_steps = std::move(plateaus);
    out.rest = {rest_begin, rest_end, 0.0};
    double dsum = 0.0;
    for (std::size_t k = discharge_begin; k < discharge_end; ++k) dsum += samples[k].i;
    out.discharge = {discharge_begin, discharge_end, dsum / double(discharge_end - discharge_begin)};
    return out;
}

} // namespace battkit
