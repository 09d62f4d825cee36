#pragma once

#include "gldp/green.hpp"
#include "gldp/model.hpp"

#include <cstdint>

namespace gldp {

struct SamplerConfig {
    uint64_t seed = 0;
    int64_t paths = 0;
    int64_t horizon = 0; // 0 = auto: 20x the source-target distance
    Vec tilt;            // importance-sampling tilt a; empty = zero tilt
};

struct MCEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    int64_t paths_used = 0;
    double ess = 0.0;
    bool low_ess_warning = false; // ess < 1% of paths
};

/// Exponentially tilted step law: p_i exp(a.v_i) / phi(a).
JumpDistribution tilted_kernel(const WalkModel& model, const Vec& a);

/// Importance-sampling estimator of the horizon-truncated Green measure
/// sum_{t<=horizon} P_z(Z(t) in nB). Requires phi(a) = 1 within 1e-9 so
/// likelihood weights depend on position only. Deterministic for a fixed
/// seed under any thread count (per-path substreams, ordered reduction).
MCEstimate mc_green(const WalkModel& model, const LatticePoint& z, const TargetSet& target,
                    const SamplerConfig& cfg, int threads = 1);

struct HittingEstimate {
    MCEstimate estimate;
    double log_estimate = 0.0;
    double certificate_log_bound = 0.0; // -theta |z' - z|
    double ratio = 0.0;                 // log_estimate / certificate_log_bound
};

/// Probability of ever hitting B(z', 1) (the point z' on the lattice)
/// within the horizon, compared against the communication certificate.
HittingEstimate mc_hitting(const WalkModel& model, const LatticePoint& z,
                           const LatticePoint& z_prime, const SamplerConfig& cfg,
                           double theta, int threads = 1);

} // namespace gldp
