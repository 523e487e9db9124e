#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dissent/errors.hpp"

namespace dissent {

// Uniform time grid t0, t0+dt, ..., t1 (ms). t1 == t0 gives a single point.
struct TimeGrid {
    double t0 = 0.0;
    double t1 = 0.0;
    double dt = 1.0;

    std::vector<double> points() const {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw UsageError("grid step must be > 0");
        if (!(t1 >= t0)) throw UsageError("grid end must not precede its start");
        const double span = (t1 - t0) / dt;
        long n = std::lround(span);
        if (std::abs(span - static_cast<double>(n)) > 1e-9 * std::max(1.0, span)) {
            n = static_cast<long>(std::ceil(span));
        }
        std::vector<double> t;
        t.reserve(static_cast<std::size_t>(n) + 1);
        for (long k = 0; k < n; ++k) t.push_back(t0 + static_cast<double>(k) * dt);
        t.push_back(t1);
        return t;
    }
};

}  // namespace dissent
