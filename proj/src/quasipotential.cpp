#include "gldp/quasipotential.hpp"

#include "gldp/errors.hpp"
#include "gldp/parallel.hpp"
#include "gldp/rng.hpp"
#include "newton.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace gldp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_homogeneous(const WalkModel& model, const char* op) {
    if (!model.homogeneous())
        throw ValidationError(std::string(op) + ": requires a homogeneous (full-lattice) model");
}

} // namespace

RateFiniteT rate_finite_t(const WalkModel& model, double T, const Vec& q, const Vec& q_prime) {
    require_homogeneous(model, "rate_finite_t");
    if (!(T > 0)) throw ValidationError("rate_finite_t: T must be positive");
    RateFiniteT r;
    r.T = T;
    r.q = q;
    r.q_prime = q_prime;
    const Vec v = (q_prime - q) / T;
    const LegendreResult leg = legendre(model, v);
    r.value = std::isinf(leg.value) ? kInf : T * leg.value;
    return r;
}

QuasipotentialResult quasipotential_inf_t(const WalkModel& model, const Vec& q,
                                          const Vec& q_prime) {
    require_homogeneous(model, "quasipotential_inf_t");
    QuasipotentialResult res;
    res.q = q;
    res.q_prime = q_prime;
    res.method = QpMethod::InfOverT;
    res.a_star = Vec::Zero(model.dim);

    const Vec v = q_prime - q;
    const double vnorm = v.norm();
    if (vnorm == 0.0) {
        res.value = 0.0;
        res.t_star = 0.0;
        res.converged = true;
        return res;
    }

    auto g = [&](double T) { return rate_finite_t(model, T, q, q_prime).value; };

    const Vec m = drift(model);
    const double mnorm = m.norm();
    double T0 = mnorm > 0 ? vnorm / mnorm : vnorm;

    // Bracket the convex minimum by doubling/halving around the ballistic
    // guess.
    double b = T0, a = T0 / 2, c = T0 * 2;
    double gb = g(b), ga = g(a), gc = g(c);
    int guard = 0;
    while (ga < gb && guard++ < 200) {
        c = b; gc = gb;
        b = a; gb = ga;
        a /= 2; ga = g(a);
    }
    while (gc < gb && guard++ < 200) {
        a = b; ga = gb;
        b = c; gb = gc;
        c *= 2; gc = g(c);
    }
    if (guard >= 200) {
        res.value = gb;
        res.t_star = b;
        res.converged = false;
        return res;
    }

    // Golden section on [a, c].
    const double phi_ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = c - phi_ratio * (c - a);
    double x2 = a + phi_ratio * (c - a);
    double f1 = g(x1), f2 = g(x2);
    int iters = 0;
    while (c - a > 1e-10 && iters++ < 300) {
        if (f1 <= f2) {
            c = x2;
            x2 = x1; f2 = f1;
            x1 = c - phi_ratio * (c - a);
            f1 = g(x1);
        } else {
            a = x1;
            x1 = x2; f1 = f2;
            x2 = a + phi_ratio * (c - a);
            f2 = g(x2);
        }
    }
    double t_star = (f1 <= f2) ? x1 : x2;

    // One Newton polish: d/dT [T L*(v/T)] = -lambda(a*(v/T)), and the
    // second derivative is u' H^{-1} u / T at u = v/T.
    {
        const Vec u = v / t_star;
        const LegendreResult leg = legendre(model, u);
        if (leg.converged) {
            const CGFEval e = phi(model, leg.argmax);
            const double g1 = -e.lambda;
            Eigen::LDLT<Mat> ldlt(e.hess);
            if (ldlt.info() == Eigen::Success) {
                const double g2 = u.dot(ldlt.solve(u)) / t_star;
                if (g2 > 0) {
                    const double t_new = t_star - g1 / g2;
                    if (t_new > 0 && std::isfinite(t_new)) {
                        const double g_new = g(t_new);
                        if (g_new <= g(t_star)) t_star = t_new;
                    }
                }
            }
        }
    }

    const LegendreResult leg = legendre(model, v / t_star);
    res.value = t_star * leg.value;
    res.t_star = t_star;
    res.a_star = leg.argmax;
    res.converged = leg.converged || leg.value == 0.0;
    return res;
}

namespace {

// min lambda(a) over the hyperplane {a.q = t}, parametrized as
// a = t*q/|q|^2 + B y with B an orthonormal basis of the complement.
struct SliceMinimizer {
    const WalkModel* model;
    Vec u;   // q/|q|^2
    Mat B;   // d x (d-1)

    SliceMinimizer(const WalkModel& m, const Vec& q) : model(&m) {
        const int d = m.dim;
        u = q / q.squaredNorm();
        // Orthonormal complement of q via Householder QR of [q].
        Eigen::HouseholderQR<Mat> qr(q);
        Mat Q = qr.householderQ();
        B = Q.rightCols(d - 1);
    }

    // Returns the minimizer a and min value; warm starts from y.
    double minimize(double t, Vec& y, Vec& a_out) const {
        const int d = model->dim;
        const Vec base = t * u;
        if (d == 1) {
            a_out = base;
            try {
                return phi(*model, a_out).lambda;
            } catch (const ComputeError&) {
                return kInf; // treated as a positive level by the bisection
            }
        }
        auto eval = [&](const Vec& yy, double& f, Vec& g, Mat& H) {
            const Vec a = base + B * yy;
            CGFEval e;
            bool ok = true;
            try {
                e = phi(*model, a);
            } catch (const ComputeError&) {
                ok = false;
            }
            if (!ok) {
                f = kInf;
                g = Vec::Zero(d - 1);
                H = Mat::Identity(d - 1, d - 1);
                return;
            }
            f = e.lambda;
            g = B.transpose() * e.grad;
            H = B.transpose() * e.hess * B;
        };
        detail::NewtonOptions opt;
        opt.grad_tol = 1e-12;
        opt.max_iter = 80;
        auto out = detail::newton_minimize(y, eval, opt);
        y = out.x;
        a_out = base + B * y;
        return out.fval;
    }
};

} // namespace

QuasipotentialResult quasipotential_support(const WalkModel& model, const Vec& q) {
    require_homogeneous(model, "quasipotential_support");
    QuasipotentialResult res;
    res.q = Vec::Zero(model.dim);
    res.q_prime = q;
    res.method = QpMethod::SupportFunction;
    res.a_star = Vec::Zero(model.dim);

    const Vec m = drift(model);
    if (!(m.norm() > 1e-12))
        throw ValidationError("quasipotential_support: requires nonzero drift");

    if (q.norm() == 0.0) {
        res.value = 0.0;
        res.t_star = 0.0;
        res.converged = true;
        return res;
    }

    SliceMinimizer slice(model, q);
    Vec y = Vec::Zero(std::max(0, model.dim - 1));
    Vec a_cur = Vec::Zero(model.dim);

    auto h = [&](double t) { return slice.minimize(t, y, a_cur); };

    // h is convex with h(0) <= 0; find the upper end of {h <= 0}.
    double lo = 0.0;
    double hi = std::max(1.0, q.norm());
    int guard = 0;
    while (h(hi) <= 0 && guard++ < 200) {
        lo = hi;
        hi *= 2;
    }
    if (guard >= 200)
        throw ComputeError(
            "quasipotential_support: objective appears unbounded on {phi <= 1}; "
            "model assumptions violated");

    const double width_tol = 1e-10 * std::max(1.0, q.norm());
    while (hi - lo > width_tol) {
        const double mid = 0.5 * (lo + hi);
        if (h(mid) <= 0)
            lo = mid;
        else
            hi = mid;
    }

    // Secant polish of h(t) = 0 to land the tilt on the level set.
    double t_val = lo;
    if (t_val > 0) {
        double t_hi = hi;
        double h_lo = h(t_val), h_hi = h(t_hi);
        for (int it = 0; it < 5 && std::abs(h_lo) > 1e-14; ++it) {
            if (h_hi == h_lo) break;
            const double t_next = t_val - h_lo * (t_hi - t_val) / (h_hi - h_lo);
            if (!(t_next > 0) || !std::isfinite(t_next)) break;
            const double h_next = h(t_next);
            t_hi = t_val;
            h_hi = h_lo;
            t_val = t_next;
            h_lo = h_next;
        }
        h(t_val); // leave a_cur at the final tilt
    } else {
        h(0.0);
    }

    res.value = std::max(0.0, t_val);
    res.a_star = a_cur;
    const Vec grad_at = phi(model, a_cur).grad;
    res.t_star = grad_at.norm() > 0 ? q.norm() / grad_at.norm() : kInf;
    res.converged = true;
    return res;
}

double IdentityReport::worst() const {
    double w = 0;
    for (const auto& c : checks) w = std::max(w, c.max_violation);
    return w;
}

std::string IdentityReport::to_text() const {
    std::ostringstream os;
    for (const auto& c : checks) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6e", c.max_violation);
        os << c.name << ": max violation " << buf << " over " << c.samples << " samples\n";
    }
    return os.str();
}

namespace {

// Velocity drawn from the interior of the support hull: a random convex
// combination pulled slightly toward the drift.
Vec random_hull_velocity(const WalkModel& model, Rng& rng) {
    const auto& sup = model.interior.support;
    const int k = static_cast<int>(sup.size());
    Vec w(k);
    double s = 0;
    for (int i = 0; i < k; ++i) {
        w[i] = rng.uniform(0.05, 1.0);
        s += w[i];
    }
    Vec v = Vec::Zero(model.dim);
    for (int i = 0; i < k; ++i) v += (w[i] / s) * sup[static_cast<size_t>(i)].cast<double>();
    const double shrink = rng.uniform(0.2, 0.95);
    return shrink * v + (1 - shrink) * drift(model);
}

Vec random_point(int dim, Rng& rng, double box) {
    Vec q(dim);
    for (int j = 0; j < dim; ++j) q[j] = rng.uniform(-box, box);
    return q;
}

} // namespace

IdentityReport identity_suite(const WalkModel& model, int samples, uint64_t seed,
                              int threads) {
    require_homogeneous(model, "identity_suite");
    if (samples < 1) throw ValidationError("identity_suite: samples must be >= 1");

    enum { Scaling, Subadd, Representation, Homogeneity, Triangle, Diagonal, kChecks };
    const char* names[kChecks] = {"scaling",     "subadditivity", "representation",
                                  "homogeneity", "triangle",      "diagonal"};

    const int64_t n_chunks = chunk_count(samples, 64);
    std::vector<std::array<double, kChecks>> partial(
        static_cast<size_t>(n_chunks), std::array<double, kChecks>{});

    parallel_chunks(samples, 64, threads, [&](int64_t chunk, int64_t beg, int64_t end) {
        auto& worst = partial[static_cast<size_t>(chunk)];
        for (int64_t i = beg; i < end; ++i) {
            Rng rng = substream(seed, static_cast<uint64_t>(i));

            // (2.3) horizon scaling of the finite-T rate.
            {
                const double T = rng.uniform(0.3, 3.0);
                const double theta = rng.uniform(0.25, 4.0);
                const Vec q = random_point(model.dim, rng, 2.0);
                const Vec qp = q + T * random_hull_velocity(model, rng);
                const double lhs = rate_finite_t(model, theta * T, theta * q, theta * qp).value;
                const double rhs = theta * rate_finite_t(model, T, q, qp).value;
                worst[Scaling] = std::max(worst[Scaling], std::abs(lhs - rhs));
            }

            // (2.4) subadditivity over a random intermediate point.
            {
                const double T1 = rng.uniform(0.3, 3.0);
                const double T2 = rng.uniform(0.3, 3.0);
                const Vec q = random_point(model.dim, rng, 2.0);
                const Vec q1 = q + T1 * random_hull_velocity(model, rng);
                const Vec q2 = q1 + T2 * random_hull_velocity(model, rng);
                const double whole = rate_finite_t(model, T1 + T2, q, q2).value;
                const double split = rate_finite_t(model, T1, q, q1).value +
                                     rate_finite_t(model, T2, q1, q2).value;
                worst[Subadd] = std::max(worst[Subadd], whole - split);
            }

            // (2.7) the two quasipotential routes agree.
            {
                const Vec q = random_point(model.dim, rng, 2.0);
                const Vec qp = random_point(model.dim, rng, 2.0);
                if ((qp - q).norm() > 1e-6) {
                    const double v1 = quasipotential_inf_t(model, q, qp).value;
                    const double v2 = quasipotential_support(model, qp - q).value;
                    worst[Representation] =
                        std::max(worst[Representation], std::abs(v1 - v2) / std::max(1.0, v1));
                }
            }

            // (2.8) positive homogeneity.
            {
                const double theta = rng.uniform(0.3, 5.0);
                const Vec q = random_point(model.dim, rng, 2.0);
                const Vec qp = random_point(model.dim, rng, 2.0);
                const double base = quasipotential_inf_t(model, q, qp).value;
                const double scaled = quasipotential_inf_t(model, theta * q, theta * qp).value;
                worst[Homogeneity] = std::max(
                    worst[Homogeneity], std::abs(scaled - theta * base) / std::max(1.0, theta * base));
            }

            // (2.9) triangle inequality.
            {
                const Vec q = random_point(model.dim, rng, 2.0);
                const Vec q1 = random_point(model.dim, rng, 2.0);
                const Vec q2 = random_point(model.dim, rng, 2.0);
                const double direct = quasipotential_inf_t(model, q, q2).value;
                const double via = quasipotential_inf_t(model, q, q1).value +
                                   quasipotential_inf_t(model, q1, q2).value;
                worst[Triangle] = std::max(worst[Triangle], direct - via);
            }

            // Zero diagonal.
            {
                const Vec q = random_point(model.dim, rng, 2.0);
                worst[Diagonal] =
                    std::max(worst[Diagonal], quasipotential_inf_t(model, q, q).value);
            }
        }
    });

    IdentityReport report;
    for (int c = 0; c < kChecks; ++c) {
        IdentityCheck chk;
        chk.name = names[c];
        chk.samples = samples;
        for (const auto& p : partial) chk.max_violation = std::max(chk.max_violation, p[static_cast<size_t>(c)]);
        report.checks.push_back(std::move(chk));
    }
    return report;
}

} // namespace gldp
