#include "gldp/cgf.hpp"

#include "gldp/errors.hpp"
#include "gldp/rng.hpp"
#include "gldp/verify.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace gldp;
using namespace gldp::test;

namespace {

// Closed-form Legendre transform of the two-point 1-D walk with
// support {+1,-1} and probabilities (p, q): the binomial rate function.
double two_point_rate(double p, double q, double v) {
    return ((1 + v) / 2) * std::log((1 + v) / (2 * p)) +
           ((1 - v) / 2) * std::log((1 - v) / (2 * q));
}

} // namespace

TEST_CASE("phi at zero tilt is 1 with gradient = drift") {
    for (const WalkModel& m : {walk1d(), walk2d_drifted(), walk2d_symmetric()}) {
        const CGFEval e = phi(m, Vec::Zero(m.dim));
        CHECK(e.phi == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(e.lambda == doctest::Approx(0.0).epsilon(1e-15));
        CHECK((e.grad - drift(m)).norm() < 1e-15);
    }
}

TEST_CASE("phi = 1 at the root of the tilt quadratic") {
    // 0.7 x^2 - x + 0.3 = 0 has roots x = 1 and x = 3/7; the tilt is log x.
    const double root = (1.0 - std::sqrt(1.0 - 4 * 0.7 * 0.3)) / (2 * 0.7);
    CHECK(root == doctest::Approx(3.0 / 7.0).epsilon(1e-12));
    const CGFEval e = phi(walk1d(), vec1(std::log(root)));
    CHECK(e.phi == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("phi at a = 1 on the 1-D walk") {
    const double expect = 0.7 * std::exp(1.0) + 0.3 * std::exp(-1.0);
    const CGFEval e = phi(walk1d(), vec1(1.0));
    CHECK(e.phi == doctest::Approx(expect).epsilon(1e-15));
    CHECK(e.lambda == doctest::Approx(std::log(expect)).epsilon(1e-15));
}

TEST_CASE("phi reports overflow instead of returning junk") {
    CHECK_THROWS_AS(phi(walk1d(), vec1(800.0)), ComputeError);
}

TEST_CASE("phi satisfies the Jensen floor phi >= exp(a.m)") {
    Rng rng(11);
    const WalkModel m = walk2d_drifted();
    const Vec mu = drift(m);
    for (int i = 0; i < 200; ++i) {
        const Vec a = vec2(rng.uniform(-3, 3), rng.uniform(-3, 3));
        CHECK(phi(m, a).phi >= std::exp(a.dot(mu)) - 1e-12);
    }
}

TEST_CASE("gradient of lambda matches central finite differences") {
    Rng rng(17);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int dim = 1 + static_cast<int>(rng.below(2));
        const WalkModel m = random_drifted_model(300 + static_cast<uint64_t>(trial), dim);
        Vec a(dim);
        for (int j = 0; j < dim; ++j) a[j] = rng.uniform(-2.0, 2.0);
        const CGFEval e = phi(m, a);
        const double h = 1e-6;
        for (int j = 0; j < dim; ++j) {
            Vec ap = a, am = a;
            ap[j] += h;
            am[j] -= h;
            const double fd = (phi(m, ap).lambda - phi(m, am).lambda) / (2 * h);
            CHECK(std::abs(e.grad[j] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
        }
        ++checked;
    }
    CHECK(checked == 100);
}

TEST_CASE("lambda is convex along random chords") {
    Rng rng(23);
    const WalkModel m = walk2d_drifted();
    for (int i = 0; i < 300; ++i) {
        const Vec a1 = vec2(rng.uniform(-3, 3), rng.uniform(-3, 3));
        const Vec a2 = vec2(rng.uniform(-3, 3), rng.uniform(-3, 3));
        const double t = rng.uniform(0.0, 1.0);
        const double lhs = phi(m, t * a1 + (1 - t) * a2).lambda;
        const double rhs = t * phi(m, a1).lambda + (1 - t) * phi(m, a2).lambda;
        CHECK(lhs <= rhs + 1e-12);
    }
}

TEST_CASE("hessian of lambda is positive semidefinite") {
    Rng rng(29);
    const WalkModel m = walk2d_drifted();
    for (int i = 0; i < 100; ++i) {
        const Vec a = vec2(rng.uniform(-2, 2), rng.uniform(-2, 2));
        Eigen::SelfAdjointEigenSolver<Mat> es(phi(m, a).hess);
        CHECK(es.eigenvalues().minCoeff() >= -1e-10);
    }
}

TEST_CASE("m_c on the 1-D walk is the larger endpoint value") {
    const double expect = 0.7 * std::exp(1.0) + 0.3 * std::exp(-1.0);
    CHECK(m_c(walk1d(), 1.0) == doctest::Approx(expect).epsilon(1e-15));
    CHECK(sphere_max_phi(walk1d(), 1.0).exact);
}

TEST_CASE("m_c >= 1 and >= every sampled sphere value") {
    const WalkModel m = walk2d_drifted();
    for (double c : {0.25, 1.0, 2.0}) {
        const double val = m_c(m, c);
        CHECK(val >= 1.0);
        // dense sphere sampling: the reported max dominates it
        for (int i = 0; i < 5000; ++i) {
            const double th = 2 * M_PI * i / 5000;
            const Vec a = vec2(c * std::cos(th), c * std::sin(th));
            CHECK(phi(m, a).phi <= val + 1e-9);
        }
    }
    // axis endpoints are sampled starts, so these are exact floors
    CHECK(m_c(m, 1.0) >= phi(m, vec2(1, 0)).phi);
    CHECK(m_c(m, 1.0) >= phi(m, vec2(-1, 0)).phi);
}

TEST_CASE("m_c of the symmetric 2-D walk at c = 1 is cosh(1)") {
    // 0.5 cosh(a1) + 0.5 cosh(a2) on |a| = 1 peaks on an axis.
    const double got = m_c(walk2d_symmetric(), 1.0);
    CHECK(got == doctest::Approx(std::cosh(1.0)).epsilon(1e-9));
    double dense = 0;
    for (int i = 0; i < 20000; ++i) {
        const double th = 2 * M_PI * i / 20000;
        dense = std::max(dense, phi(walk2d_symmetric(), vec2(std::cos(th), std::sin(th))).phi);
    }
    CHECK(got >= dense - 1e-9);
}

TEST_CASE("legendre at the drift is zero with zero tilt") {
    for (const WalkModel& m : {walk1d(), walk2d_drifted()}) {
        const LegendreResult r = legendre(m, drift(m));
        CHECK(r.converged);
        CHECK(r.value == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(r.argmax.norm() < 1e-8);
    }
}

TEST_CASE("legendre matches the two-point closed form across the open hull") {
    const WalkModel m = walk1d();
    for (int i = 1; i < 40; ++i) {
        const double v = -1.0 + 2.0 * i / 40.0;
        const LegendreResult r = legendre(m, vec1(v));
        REQUIRE(r.converged);
        CHECK(std::abs(r.value - two_point_rate(0.7, 0.3, v)) <= 1e-9);
        // first-order condition and duality gap
        const CGFEval e = phi(m, r.argmax);
        CHECK(std::abs(e.grad[0] - v) <= 1e-8);
        CHECK(std::abs(e.lambda + r.value - r.argmax[0] * v) <= 1e-9);
    }
}

TEST_CASE("legendre at v = 0 equals log(1/(2 sqrt(pq)))") {
    const double expect = -std::log(2 * std::sqrt(0.7 * 0.3));
    const LegendreResult r = legendre(walk1d(), vec1(0.0));
    CHECK(r.value == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("legendre on the hull boundary approaches -log p and flags non-convergence") {
    const WalkModel m = walk1d();
    const LegendreResult left = legendre(m, vec1(-1.0));
    CHECK_FALSE(left.converged);
    CHECK(left.value == doctest::Approx(-std::log(0.3)).epsilon(1e-7));
    const LegendreResult right = legendre(m, vec1(1.0));
    CHECK_FALSE(right.converged);
    CHECK(right.value == doctest::Approx(-std::log(0.7)).epsilon(1e-7));
}

TEST_CASE("legendre outside the closed hull returns the +inf sentinel") {
    const LegendreResult r = legendre(walk1d(), vec1(1.5));
    CHECK(std::isinf(r.value));
    const LegendreResult r2 = legendre(walk2d_drifted(), vec2(2.0, 2.0));
    CHECK(std::isinf(r2.value));
}

TEST_CASE("legendre value is nonnegative and zero only at the drift") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const int dim = 1 + static_cast<int>(rng.below(2));
        const WalkModel m = random_drifted_model(900 + static_cast<uint64_t>(trial), dim);
        const Vec mu = drift(m);
        Vec v(dim);
        for (int j = 0; j < dim; ++j) v[j] = mu[j] + rng.uniform(-0.2, 0.2);
        const LegendreResult r = legendre(m, v);
        if (!r.converged) continue;
        CHECK(r.value >= -1e-12);
        if ((v - mu).norm() > 1e-3) CHECK(r.value > 0);
    }
}

TEST_CASE("legendre transform is convex in v on a grid inside the hull") {
    const WalkModel m = walk2d_drifted();
    Rng rng(37);
    for (int i = 0; i < 100; ++i) {
        const Vec v1 = vec2(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6));
        const Vec v2 = vec2(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6));
        const double f1 = legendre(m, v1).value;
        const double f2 = legendre(m, v2).value;
        const double fm = legendre(m, 0.5 * (v1 + v2)).value;
        CHECK(fm <= 0.5 * f1 + 0.5 * f2 + 1e-10);
    }
}
