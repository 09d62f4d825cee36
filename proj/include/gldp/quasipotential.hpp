#pragma once

#include "gldp/cgf.hpp"
#include "gldp/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gldp {

/// Finite-horizon rate I_T(q,q') = T * LegendreTransform((q'-q)/T).
struct RateFiniteT {
    double T = 0.0;
    Vec q, q_prime;
    double value = 0.0;
};

RateFiniteT rate_finite_t(const WalkModel& model, double T, const Vec& q, const Vec& q_prime);

enum class QpMethod { SupportFunction, InfOverT };

struct QuasipotentialResult {
    Vec q, q_prime;
    double value = 0.0;
    double t_star = 0.0; // optimal horizon; 0 for the q == q' shortcut
    Vec a_star;          // optimal tilt, on the level set {phi = 1} when value > 0
    QpMethod method = QpMethod::InfOverT;
    bool converged = false;
};

/// Quasipotential as inf over horizons of the finite-T rate. Convex
/// bracketing from the ballistic guess, golden-section to width 1e-10,
/// one Newton polish.
QuasipotentialResult quasipotential_inf_t(const WalkModel& model, const Vec& q,
                                          const Vec& q_prime);

/// Quasipotential from the origin as the support function of the level
/// set {phi <= 1}: bisection over the objective level with an
/// equality-constrained Newton inner solve.
QuasipotentialResult quasipotential_support(const WalkModel& model, const Vec& q);

struct IdentityCheck {
    std::string name;
    double max_violation = 0.0;
    int samples = 0;
};

struct IdentityReport {
    std::vector<IdentityCheck> checks;
    double worst() const;
    std::string to_text() const;
};

/// Randomized verification of the rate-function identities: horizon
/// scaling, subadditivity, the two quasipotential routes agreeing,
/// positive homogeneity, the triangle inequality, and zero diagonal.
/// Samples split deterministically by index; thread count never changes
/// the report.
IdentityReport identity_suite(const WalkModel& model, int samples, uint64_t seed,
                              int threads = 1);

} // namespace gldp
