#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

namespace gldp {

struct LpSolution {
    double cost = 0.0;
    Eigen::VectorXd x; // full-length, zeros off the active set
};

/// Exact solver for  min c'x  s.t.  Vx = b, x >= 0  at toy sizes
/// (columns <= ~20). Enumerates column subsets: a bounded feasible LP
/// attains its optimum at a basic solution, and every basic solution is
/// supported on some subset. Returns nullopt when infeasible.
std::optional<LpSolution> lp_min_eq_nonneg(const Eigen::MatrixXd& V,
                                           const Eigen::VectorXd& b,
                                           const Eigen::VectorXd& c,
                                           double tol = 1e-9);

/// Membership of v in the convex hull of integer points `pts`.
bool in_convex_hull(const std::vector<Eigen::VectorXi>& pts,
                    const Eigen::VectorXd& v, double tol = 1e-9);

/// Strict-interior test: membership of v +- h e_j for every axis j.
bool in_hull_interior(const std::vector<Eigen::VectorXi>& pts,
                      const Eigen::VectorXd& v, double h);

} // namespace gldp
