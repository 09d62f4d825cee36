#include "gldp/cgf.hpp"

#include "gldp/errors.hpp"
#include "gldp/lp.hpp"
#include "gldp/rng.hpp"
#include "newton.hpp"

#include <cmath>
#include <limits>

namespace gldp {

namespace {

constexpr double kOverflowExponent = 700.0;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Core evaluation; returns false instead of throwing on overflow so inner
// solvers can treat out-of-range tilts as +inf.
bool eval_phi(const JumpDistribution& kernel, const Vec& a, CGFEval& out) {
    const int d = static_cast<int>(a.size());
    out.a = a;
    out.grad = Vec::Zero(d);
    out.hess = Mat::Zero(d, d);
    double s = 0;
    Vec sv = Vec::Zero(d);
    Mat svv = Mat::Zero(d, d);
    for (size_t i = 0; i < kernel.support.size(); ++i) {
        const Vec v = kernel.support[i].cast<double>();
        const double e = a.dot(v);
        if (e > kOverflowExponent) return false;
        const double w = kernel.probs[i] * std::exp(e);
        s += w;
        sv += w * v;
        svv += w * v * v.transpose();
    }
    out.phi = s;
    out.lambda = std::log(s);
    out.grad = sv / s;
    out.hess = svv / s - out.grad * out.grad.transpose();
    return true;
}

} // namespace

CGFEval phi(const WalkModel& model, const Vec& a) {
    if (static_cast<int>(a.size()) != model.dim)
        throw ValidationError("phi: tilt dimension mismatch");
    for (int j = 0; j < a.size(); ++j)
        if (!std::isfinite(a[j])) throw ValidationError("phi: tilt must be finite");
    CGFEval out;
    if (!eval_phi(model.interior, a, out))
        throw ComputeError("phi: exponent a.v exceeds 700; rescale the tilt");
    return out;
}

SphereMax sphere_max_phi(const WalkModel& model, double c) {
    if (!(c > 0)) throw ValidationError("m_c: c must be positive");
    const int d = model.dim;
    CGFEval ev;
    if (d == 1) {
        Vec a(1);
        double best = -kInf;
        for (double s : {c, -c}) {
            a[0] = s;
            if (!eval_phi(model.interior, a, ev))
                throw ComputeError("m_c: phi overflows at |a| = c; reduce c");
            best = std::max(best, ev.phi);
        }
        return {best, true};
    }

    // Multi-start geodesic ascent on the sphere: 2d axis starts plus 8
    // fixed pseudo-random directions.
    std::vector<Vec> starts;
    for (int j = 0; j < d; ++j) {
        Vec e = Vec::Zero(d);
        e[j] = 1.0;
        starts.push_back(e);
        starts.push_back(-e);
    }
    Rng rng(0x5ee0u);
    for (int r = 0; r < 8; ++r) {
        Vec u(d);
        double n2 = 0;
        do {
            for (int j = 0; j < d; ++j) u[j] = rng.uniform(-1.0, 1.0);
            n2 = u.squaredNorm();
        } while (n2 < 1e-4);
        starts.push_back(u / std::sqrt(n2));
    }

    auto value_at = [&](const Vec& u) {
        CGFEval e;
        if (!eval_phi(model.interior, c * u, e))
            throw ComputeError("m_c: phi overflows at |a| = c; reduce c");
        return e;
    };

    double best = -kInf;
    for (const auto& start : starts) {
        Vec u = start;
        CGFEval e = value_at(u);
        for (int it = 0; it < 100; ++it) {
            // gradient of phi(c u) tangential to the sphere
            Vec g = c * e.phi * e.grad; // d/da of phi = phi * grad(lambda)
            Vec gt = g - g.dot(u) * u;
            const double gn = gt.norm();
            if (gn <= 1e-13 * std::max(1.0, e.phi)) break;
            Vec dir = gt / gn;
            double step = 0.7;
            bool moved = false;
            while (step > 1e-12) {
                Vec cand = std::cos(step) * u + std::sin(step) * dir;
                CGFEval ec = value_at(cand);
                if (ec.phi > e.phi) {
                    u = cand;
                    e = ec;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if (!moved) break;
        }
        best = std::max(best, e.phi);
    }
    return {best, false};
}

double m_c(const WalkModel& model, double c) {
    return std::max(1.0, sphere_max_phi(model, c).value);
}

namespace {

// Hull classification for the Legendre transform.
enum class HullPosition { Interior, Boundary, Outside };

HullPosition classify(const WalkModel& model, const Vec& v) {
    const double scale = 1.0 + v.norm();
    if (!in_convex_hull(model.interior.support, v, 1e-11 * scale)) return HullPosition::Outside;
    if (in_hull_interior(model.interior.support, v, 1e-7 * scale)) return HullPosition::Interior;
    return HullPosition::Boundary;
}

} // namespace

LegendreResult legendre(const WalkModel& model, const Vec& v) {
    if (static_cast<int>(v.size()) != model.dim)
        throw ValidationError("legendre: velocity dimension mismatch");
    const int d = model.dim;
    LegendreResult res;
    res.v = v;
    res.argmax = Vec::Zero(d);

    // Objective: minimize lambda(a) - a.v  (negated Legendre value).
    auto eval = [&](const Vec& a, double& f, Vec& g, Mat& H) {
        CGFEval e;
        if (!eval_phi(model.interior, a, e)) {
            f = kInf;
            g = Vec::Zero(d);
            H = Mat::Identity(d, d);
            return;
        }
        f = e.lambda - a.dot(v);
        g = e.grad - v;
        H = e.hess;
    };

    // Fast path: for v in the hull interior damped Newton converges and
    // no hull test is needed.
    detail::NewtonOptions opt;
    opt.grad_tol = 1e-11 * std::max(1.0, v.norm());
    auto out = detail::newton_minimize(Vec::Zero(d), eval, opt);
    if (out.converged) {
        res.argmax = out.x;
        res.value = -out.fval;
        res.iterations = out.iterations;
        res.converged = true;
        return res;
    }

    const HullPosition pos = classify(model, v);
    if (pos == HullPosition::Outside) {
        res.value = kInf;
        res.converged = true;
        res.iterations = out.iterations;
        return res;
    }
    if (pos == HullPosition::Interior) {
        // Iteration exhaustion on a genuinely interior point: report the
        // best value found.
        res.argmax = out.x;
        res.value = -out.fval;
        res.iterations = out.iterations;
        res.converged = false;
        return res;
    }

    // Hull boundary: the supremum may only be approached. Maximize over
    // |a| <= cap with doubling caps until the value stalls.
    double cap = 8.0;
    const double cap_limit = 0.9 * kOverflowExponent / std::max(1.0, model.interior.max_step_norm());
    Vec a = Vec::Zero(d);
    double fval = 0.0; // value of a.v - lambda at a = 0
    int total_iter = 0;
    double prev_value = -kInf;
    for (;;) {
        for (int it = 0; it < 80; ++it) {
            ++total_iter;
            CGFEval e;
            if (!eval_phi(model.interior, a, e)) break;
            Vec g = v - e.grad;
            Eigen::LDLT<Mat> ldlt(e.hess);
            Vec p;
            if (ldlt.info() == Eigen::Success && ldlt.isPositive())
                p = ldlt.solve(g);
            else
                p = (e.hess + 1e-12 * Mat::Identity(d, d)).ldlt().solve(g);
            double t = 1.0;
            bool moved = false;
            const double f_cur = a.dot(v) - e.lambda;
            while (t > 1e-14) {
                Vec cand = a + t * p;
                if (cand.norm() > cap) cand *= cap / cand.norm();
                CGFEval ec;
                if (eval_phi(model.interior, cand, ec)) {
                    const double f_cand = cand.dot(v) - ec.lambda;
                    if (f_cand > f_cur + 1e-16) {
                        a = cand;
                        fval = f_cand;
                        moved = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if (!moved) break;
        }
        if (std::abs(fval - prev_value) < 1e-8 || cap >= cap_limit) break;
        prev_value = fval;
        cap = std::min(2 * cap, cap_limit);
    }
    res.argmax = a;
    res.value = std::max(0.0, fval);
    res.iterations = total_iter;
    res.converged = false;
    return res;
}

} // namespace gldp
