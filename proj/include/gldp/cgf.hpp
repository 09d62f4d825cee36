#pragma once

#include "gldp/model.hpp"

namespace gldp {

/// Jump generating function and cumulant derivatives at a tilt a.
struct CGFEval {
    Vec a;
    double phi = 0.0;    // sum of p_i exp(a.v_i)
    double lambda = 0.0; // log phi
    Vec grad;            // gradient of lambda (tilted mean step)
    Mat hess;            // Hessian of lambda (tilted step covariance)
};

/// Exact finite sum over the interior support. Throws ComputeError when
/// some a.v_i exceeds 700 (caller must rescale).
CGFEval phi(const WalkModel& model, const Vec& a);

struct SphereMax {
    double value = 0.0;
    bool exact = false; // true in d = 1 (two-endpoint evaluation)
};

/// Maximum of phi over the sphere |a| = c. Exact for d = 1; for d >= 2 a
/// multi-start geodesic ascent (2d + 8 starts), reported as a certified
/// lower bound of the supremum.
SphereMax sphere_max_phi(const WalkModel& model, double c);

/// The asymptotically-finite-range bound: max(1, sphere max of phi).
double m_c(const WalkModel& model, double c);

struct LegendreResult {
    Vec v;
    double value = 0.0; // Legendre transform of lambda at v
    Vec argmax;         // optimal tilt a*
    bool converged = false;
    int iterations = 0;
};

/// Legendre transform sup_a (a.v - lambda(a)). Damped Newton in the
/// interior of the convex hull of the support; +inf outside the closed
/// hull; on the hull boundary, a capped-norm tilt sequence approaches the
/// supremum and the result is flagged non-converged.
LegendreResult legendre(const WalkModel& model, const Vec& v);

} // namespace gldp
