#pragma once

// Orientation of the F = 4 sublevel distribution and the quantum-beat signal
// used to measure it.

#include <array>
#include <complex>
#include <vector>

namespace dissent {

// p[m + 4] is the population of sublevel m = -4..4.
using Sublevels = std::array<double, 9>;

// o = (1/4) sum m p_m
double orientation(const Sublevels& p);
void validate_sublevels(const Sublevels& p, double tol = 1e-9);

struct BeatModel {
    Sublevels p{};
    double zeeman_split = 20.0;  // second-order splitting, Hz
    double duration = 200.0;     // ms
};

struct BeatSignal {
    std::vector<double> times;   // ms
    std::vector<double> X;       // Re S(t), transverse displacement along J_y
    std::vector<double> P;       // Im S(t), along J_z
};

// S(t) = sum_{m=-3..4} (20 - m(m-1)) (p_m - p_{m-1}) exp(-i 2 pi (4-m) nu_z t).
BeatSignal simulate_beat(const BeatModel& model, double dt);

// Least-squares fit of the eight coherence amplitudes at the template's
// splitting, then the distribution with p_-4 = 0, normalized to 1.
Sublevels estimate_sublevels(const BeatSignal& signal, const BeatModel& shape);
double estimate_orientation(const BeatSignal& signal, const BeatModel& shape);

}  // namespace dissent
