#include "gldp/lp.hpp"

#include "gldp/errors.hpp"

#include <bit>
#include <cmath>
#include <limits>

namespace gldp {

namespace {

// Solve the restricted system on column subset `cols` by least squares and
// accept only near-exact, nonnegative solutions.
std::optional<Eigen::VectorXd> try_subset(const Eigen::MatrixXd& V,
                                          const Eigen::VectorXd& b,
                                          const std::vector<int>& cols,
                                          double tol, double scale) {
    const auto m = V.rows();
    Eigen::MatrixXd sub(m, static_cast<Eigen::Index>(cols.size()));
    for (size_t j = 0; j < cols.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = V.col(cols[j]);
    Eigen::VectorXd xs = sub.colPivHouseholderQr().solve(b);
    if ((sub * xs - b).lpNorm<Eigen::Infinity>() > tol * scale) return std::nullopt;
    for (Eigen::Index j = 0; j < xs.size(); ++j) {
        if (xs[j] < -tol) return std::nullopt;
        if (xs[j] < 0) xs[j] = 0;
    }
    return xs;
}

} // namespace

std::optional<LpSolution> lp_min_eq_nonneg(const Eigen::MatrixXd& V,
                                           const Eigen::VectorXd& b,
                                           const Eigen::VectorXd& c,
                                           double tol) {
    const int k = static_cast<int>(V.cols());
    if (k > 20) throw ValidationError("lp_min_eq_nonneg: too many columns (" +
                                      std::to_string(k) + " > 20)");
    const double scale = 1.0 + b.lpNorm<Eigen::Infinity>();

    std::optional<LpSolution> best;
    // Empty subset covers b = 0.
    if (b.lpNorm<Eigen::Infinity>() <= tol * scale) {
        best = LpSolution{0.0, Eigen::VectorXd::Zero(k)};
    }

    std::vector<int> cols;
    const int max_size = std::min<int>(k, static_cast<int>(V.rows()) + 1);
    for (uint32_t mask = 1; mask < (1u << k); ++mask) {
        if (std::popcount(mask) > max_size) continue;
        cols.clear();
        for (int j = 0; j < k; ++j)
            if (mask & (1u << j)) cols.push_back(j);
        auto xs = try_subset(V, b, cols, tol, scale);
        if (!xs) continue;
        double cost = 0;
        for (size_t j = 0; j < cols.size(); ++j) cost += c[cols[j]] * (*xs)[static_cast<Eigen::Index>(j)];
        if (!best || cost < best->cost) {
            Eigen::VectorXd full = Eigen::VectorXd::Zero(k);
            for (size_t j = 0; j < cols.size(); ++j) full[cols[j]] = (*xs)[static_cast<Eigen::Index>(j)];
            best = LpSolution{cost, std::move(full)};
        }
    }
    return best;
}

bool in_convex_hull(const std::vector<Eigen::VectorXi>& pts,
                    const Eigen::VectorXd& v, double tol) {
    const int d = static_cast<int>(v.size());
    const int k = static_cast<int>(pts.size());
    Eigen::MatrixXd V(d + 1, k);
    for (int j = 0; j < k; ++j) {
        V.col(j).head(d) = pts[static_cast<size_t>(j)].cast<double>();
        V(d, j) = 1.0;
    }
    Eigen::VectorXd b(d + 1);
    b.head(d) = v;
    b[d] = 1.0;
    return lp_min_eq_nonneg(V, b, Eigen::VectorXd::Zero(k), tol).has_value();
}

bool in_hull_interior(const std::vector<Eigen::VectorXi>& pts,
                      const Eigen::VectorXd& v, double h) {
    const int d = static_cast<int>(v.size());
    if (!in_convex_hull(pts, v)) return false;
    for (int j = 0; j < d; ++j) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
        e[j] = h;
        if (!in_convex_hull(pts, v + e) || !in_convex_hull(pts, v - e)) return false;
    }
    return true;
}

} // namespace gldp
