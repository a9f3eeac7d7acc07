#pragma once

#include <cstddef>
#include <vector>

namespace battkit {

// Nine-step constant-current charging scheme. Step currents are C-rates
// (multiples of nominal capacity per hour); increments are SOC fractions
// that accumulate to 0.97.
struct ChargingStep {
    double c_rate = 0.0;
    double soc_increment = 0.0;
};

struct ChargingProtocol {
    std::vector<ChargingStep> steps;
    std::vector<double> soc_targets; // cumulative, strictly increasing
    double nominal_capacity_ah = 1.1;

    std::size_t step_count() const { return steps.size(); }
    double step_current_a(std::size_t i) const {
        return steps[i].c_rate * nominal_capacity_ah;
    }

    void validate() const;
};

// The default scheme: C-rates {0.33, 3.00, 2.90, 2.80, 2.40, 2.00, 1.80,
// 1.40, 0.33}, SOC increments {8, 12, 10, 10, 10, 11.1, 10, 10, 15.9}%.
ChargingProtocol default_protocol(double nominal_capacity_ah = 1.1);

} // namespace battkit
