#include "battkit/protocol.hpp"

#include "battkit/error.hpp"

#include <cmath>

namespace battkit {

void ChargingProtocol::validate() const {
    if (steps.size() != 9)
        raise(ErrorCode::InvalidConfig, "charging protocol must have exactly 9 steps");
    if (soc_targets.size() != steps.size())
        raise(ErrorCode::InvalidConfig, "soc_targets size must match step count");
    if (nominal_capacity_ah <= 0.0)
        raise(ErrorCode::NonPositiveNominal, "nominal capacity must be positive");
    double cumulative = 0.0;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        cumulative += steps[i].soc_increment;
        if (std::abs(soc_targets[i] - cumulative) > 1e-9)
            raise(ErrorCode::InvalidConfig, "soc_targets must accumulate the step increments");
        if (i > 0 && soc_targets[i] <= soc_targets[i - 1])
            raise(ErrorCode::InvalidConfig, "soc_targets must be strictly increasing");
    }
    if (std::abs(soc_targets.back() - 0.97) > 1e-9)
        raise(ErrorCode::InvalidConfig, "final cumulative SOC must be 0.97");
}

ChargingProtocol default_protocol(double nominal_capacity_ah) {
    ChargingProtocol p;
    p.nominal_capacity_ah = nominal_capacity_ah;
    const double rates[9] = {0.33, 3.00, 2.90, 2.80, 2.40, 2.00, 1.80, 1.40, 0.33};
    const double inc[9] = {0.08, 0.12, 0.10, 0.10, 0.10, 0.111, 0.10, 0.10, 0.159};
    double cumulative = 0.0;
    for (int i = 0; i < 9; ++i) {
        p.steps.push_back({rates[i], inc[i]});
        cumulative += inc[i];
        p.soc_targets.push_back(cumulative);
    }
    // kill the accumulation round-off so targets are exactly
    // {8, 20, 30, 40, 50, 61.1, 71.1, 81.1, 97}%
    const double exact[9] = {0.08, 0.20, 0.30, 0.40, 0.50, 0.611, 0.711, 0.811, 0.97};
    for (int i = 0; i < 9; ++i) p.soc_targets[i] = exact[i];
    p.validate();
    return p;
}

} // namespace battkit
