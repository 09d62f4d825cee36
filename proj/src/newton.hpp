#pragma once

#include <Eigen/Dense>
#include <functional>

namespace gldp::detail {

struct NewtonOptions {
    int max_iter = 60;
    double grad_tol = 1e-11;
    double armijo = 1e-4;
};

struct NewtonOutcome {
    Eigen::VectorXd x;
    double fval = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Damped Newton minimization of a smooth convex function. `eval` fills
/// value/gradient/Hessian at x. Backtracking halves the step until the
/// Armijo decrease condition holds; a small ridge is added if the Hessian
/// factorization is not usable.
inline NewtonOutcome newton_minimize(
    const Eigen::VectorXd& x0,
    const std::function<void(const Eigen::VectorXd&, double&, Eigen::VectorXd&, Eigen::MatrixXd&)>& eval,
    const NewtonOptions& opt = {}) {
    NewtonOutcome out;
    out.x = x0;
    const auto d = x0.size();
    double f;
    Eigen::VectorXd g(d);
    Eigen::MatrixXd H(d, d);
    eval(out.x, f, g, H);
    for (out.iterations = 0; out.iterations < opt.max_iter; ++out.iterations) {
        if (g.lpNorm<Eigen::Infinity>() <= opt.grad_tol) {
            out.converged = true;
            break;
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
        Eigen::VectorXd p;
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
            p = ldlt.solve(-g);
        } else {
            Eigen::MatrixXd Hr = H + (1e-12 + 1e-10 * H.trace()) * Eigen::MatrixXd::Identity(d, d);
            p = Hr.ldlt().solve(-g);
        }
        double t = 1.0;
        const double slope = g.dot(p);
        double f_new;
        Eigen::VectorXd g_new(d);
        Eigen::MatrixXd H_new(d, d);
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            Eigen::VectorXd x_new = out.x + t * p;
            eval(x_new, f_new, g_new, H_new);
            if (std::isfinite(f_new) && f_new <= f + opt.armijo * t * slope) {
                out.x = std::move(x_new);
                f = f_new;
                g = g_new;
                H = H_new;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break; // no usable step at machine scale
    }
    if (!out.converged && g.lpNorm<Eigen::Infinity>() <= opt.grad_tol) out.converged = true;
    out.fval = f;
    return out;
}

} // namespace gldp::detail
