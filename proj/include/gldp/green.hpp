#pragma once

#include "gldp/model.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace gldp {

/// Scaled target: the lattice set { y : |y - scale*center| < scale*radius }.
struct TargetSet {
    Vec center;         // q', scaled units
    double radius = 0;  // delta, scaled units
    int64_t scale = 1;  // n
};

struct GreenQuery {
    LatticePoint z;                // source, lattice units
    TargetSet target;
    double truncation_radius = 0;  // absorb when |y| >= R, lattice units
    int64_t horizon = 0;           // 0 = auto (50 * R hard cap)
    int64_t min_horizon = 0;       // keep iterating at least this far
    bool want_profile = false;
};

struct GreenResult {
    double value = 0.0;
    /// Heuristic bound on mass ignored by the finite horizon (empirical
    /// per-step contraction, not a certified constant).
    double horizon_tail_bound = 0.0;
    bool truncation_flag = true; // true when the value is G_R rather than G
    std::vector<double> visits_profile; // per-step target mass, index = t
    int64_t steps = 0;
    double radius = 0.0;         // truncation radius of the final run
    double error_estimate = 0.0; // inter-R difference for green_full
    double live_mass = 0.0;      // mass still in the ball at the last step
    double absorbed_mass = 0.0;  // mass absorbed outside, tracked directly
    /// Worst per-step defect of live + absorbed = 1, from independent
    /// outflow bookkeeping.
    double max_conservation_error = 0.0;
};

struct GreenOptions {
    int threads = 1;
    int64_t max_cells = 4'000'000; // cap on the padded box volume
};

/// Truncated Green's function by forward occupancy iteration on the ball
/// {|y| < R} with absorption outside. Stops when the live mass times a
/// geometric tail factor drops below 1e-12 of the accumulated value, or
/// at the horizon.
GreenResult green_truncated(const WalkModel& model, const GreenQuery& query,
                            const GreenOptions& options = {});

/// Full Green's function: green_truncated with doubling R until two
/// successive values agree to relative `tol`.
GreenResult green_full(const WalkModel& model, const LatticePoint& z, const TargetSet& target,
                       double tol, const GreenOptions& options = {}, bool want_profile = false,
                       int64_t min_horizon = 0);

/// Scaled Green's measure mu_n(B(q',delta)) = G(round(n q0), nB).
double scaled_measure(const WalkModel& model, int64_t n, const Vec& q0,
                      const TargetSet& target, const GreenOptions& options = {});

/// G(z_n, nV) - G_{nR}(z_n, nV), computed in one pass with a two-layer
/// occupancy (mass is tagged once it leaves the inner ball), so the tiny
/// difference is never formed by cancellation.
double localization_gap(const WalkModel& model, int64_t n, const Vec& q0,
                        const TargetSet& target, double R,
                        const GreenOptions& options = {});

/// Round n*q0 to the nearest lattice point.
LatticePoint nearest_lattice_point(const Vec& q, int64_t n);

/// Binary dump of a visits profile: 16-byte header (magic "GLDP",
/// version u32, length u64) followed by f64 samples.
void dump_profile(const std::filesystem::path& path, const std::vector<double>& profile);
std::vector<double> read_profile(const std::filesystem::path& path);

} // namespace gldp
