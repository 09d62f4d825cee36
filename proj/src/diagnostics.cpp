#include "gldp/diagnostics.hpp"

#include "gldp/cgf.hpp"
#include "gldp/errors.hpp"
#include "gldp/montecarlo.hpp"
#include "gldp/parallel.hpp"
#include "gldp/quasipotential.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace gldp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

/// Grid infimum of I(q0, .) over the ball B(q', delta). Returns the
/// closed-ball and open-ball infima (they coincide for continuous rates
/// up to grid resolution; both are reported).
struct GridInfimum {
    double closed = kInf;
    double open = kInf;
};

GridInfimum grid_infimum(const WalkModel& model, const Vec& q0, const Vec& q_prime,
                         double delta, int grid_points, int threads) {
    const int d = model.dim;

    auto scan_box = [&](const Vec& lo, const Vec& hi, int pts) {
        int64_t total = 1;
        for (int j = 0; j < d; ++j) total *= pts;
        struct Best {
            double closed = kInf, open = kInf;
            Vec arg;
        };
        const int64_t chunk = 256;
        const int64_t n_chunks = chunk_count(total, chunk);
        std::vector<Best> partial(static_cast<size_t>(n_chunks));
        parallel_chunks(total, chunk, threads, [&](int64_t ci, int64_t beg, int64_t end) {
            Best b;
            b.arg = Vec::Zero(d);
            Vec x(d);
            for (int64_t idx = beg; idx < end; ++idx) {
                int64_t rem = idx;
                for (int j = d - 1; j >= 0; --j) {
                    const int64_t g = rem % pts;
                    rem /= pts;
                    x[j] = lo[j] + (hi[j] - lo[j]) * static_cast<double>(g) / (pts - 1);
                }
                const double dist = (x - q_prime).norm();
                if (dist > delta * (1 + 1e-12)) continue;
                if (!model.in_reachable_cone(x)) continue;
                const double val = quasipotential_support(model, x - q0).value;
                if (val < b.closed) {
                    b.closed = val;
                    b.arg = x;
                }
                if (dist < delta && val < b.open) b.open = val;
            }
            partial[static_cast<size_t>(ci)] = b;
        });
        Best out;
        out.arg = Vec::Zero(d);
        for (const auto& p : partial) {
            if (p.closed < out.closed) {
                out.closed = p.closed;
                out.arg = p.arg;
            }
            out.open = std::min(out.open, p.open);
        }
        return out;
    };

    Vec lo = q_prime.array() - delta;
    Vec hi = q_prime.array() + delta;
    auto first = scan_box(lo, hi, grid_points);

    // One refinement pass around the coarse minimizer.
    const double cell = 2 * delta / (grid_points - 1);
    Vec rlo = first.arg.array() - 2 * cell;
    Vec rhi = first.arg.array() + 2 * cell;
    auto second = scan_box(rlo, rhi, std::min(grid_points, 129));

    GridInfimum out;
    out.closed = std::min(first.closed, second.closed);
    out.open = std::min(first.open, second.open);
    return out;
}

} // namespace

DiagnosticSeries ldp_scan(const WalkModel& model, const Vec& q0, const Vec& q_prime,
                          double delta, const std::vector<int64_t>& n_grid, double tol,
                          const ScanOptions& options) {
    if (!model.homogeneous())
        throw ValidationError("ldp_scan: requires a homogeneous model");
    if (!(drift(model).norm() > 0)) throw ValidationError("ldp_scan: requires nonzero drift");
    if (!(delta > 0)) throw ValidationError("ldp_scan: delta must be positive");
    if (n_grid.empty()) throw ValidationError("ldp_scan: empty n grid");
    for (size_t i = 1; i < n_grid.size(); ++i)
        if (n_grid[i] <= n_grid[i - 1])
            throw ValidationError("ldp_scan: n grid must be strictly increasing");
    if (!model.in_reachable_cone(q0) || !model.in_reachable_cone(q_prime))
        throw ValidationError("ldp_scan: endpoints must lie in the reachable cone");

    DiagnosticSeries series;
    const GridInfimum pred =
        grid_infimum(model, q0, q_prime, delta, options.grid_points, options.threads);
    series.predicted = pred.closed;
    series.predicted_open = pred.open;

    // The importance tilt for the MC fallback aims at the ball center.
    Vec tilt = Vec::Zero(model.dim);
    if ((q_prime - q0).norm() > 0)
        tilt = quasipotential_support(model, q_prime - q0).a_star;

    const int64_t entries = static_cast<int64_t>(n_grid.size());
    std::vector<ScanRow> rows(static_cast<size_t>(entries));
    const int outer_threads = entries > 1 ? options.threads : 1;
    const int inner_threads = entries > 1 ? 1 : options.threads;

    parallel_chunks(entries, 1, outer_threads, [&](int64_t, int64_t beg, int64_t end) {
        for (int64_t i = beg; i < end; ++i) {
            const int64_t n = n_grid[static_cast<size_t>(i)];
            ScanRow row;
            row.n = n;
            row.delta = delta;
            row.predicted = series.predicted;
            row.std_error = kNaN;
            TargetSet target{q_prime, delta, n};
            const LatticePoint z = nearest_lattice_point(q0, n);
            GreenOptions gopt;
            gopt.threads = inner_threads;
            gopt.max_cells = options.max_cells;
            try {
                GreenResult res = green_full(model, z, target, tol, gopt);
                row.R = res.radius;
                if (res.value > 0) {
                    row.backend = "exact";
                    row.log_measure = -std::log(res.value) / static_cast<double>(n);
                } else {
                    row.backend = "excluded";
                    row.excluded = true;
                    row.note = "measure zero (target unreachable)";
                }
            } catch (const ComputeError&) {
                // Exact solve over the cap: importance-sampled fallback.
                SamplerConfig cfg;
                cfg.seed = options.seed + static_cast<uint64_t>(n);
                cfg.paths = options.mc_paths;
                cfg.tilt = tilt;
                MCEstimate est = mc_green(model, z, target, cfg, inner_threads);
                row.R = kNaN;
                if (est.mean > 0) {
                    row.backend = "mc";
                    row.log_measure = -std::log(est.mean) / static_cast<double>(n);
                    row.std_error = est.std_error;
                } else {
                    row.backend = "excluded";
                    row.excluded = true;
                    row.note = "mc estimate zero";
                }
            } catch (const ValidationError& e) {
                row.backend = "excluded";
                row.excluded = true;
                row.note = e.what();
            }
            rows[static_cast<size_t>(i)] = std::move(row);
        }
    });

    for (auto& row : rows) {
        if (!row.excluded) {
            series.n_values.push_back(row.n);
            series.log_measures.push_back(row.log_measure);
        }
        series.rows.push_back(row);
    }

    // Least-squares fit of alpha + beta/n; alpha is the extrapolated
    // decay exponent.
    const size_t k = series.n_values.size();
    if (k == 0) {
        series.slope_fit = kNaN;
        series.fit_stderr = kInf;
    } else if (k == 1) {
        series.slope_fit = series.log_measures[0];
        series.fit_stderr = kInf;
    } else {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (size_t i = 0; i < k; ++i) {
            const double x = 1.0 / static_cast<double>(series.n_values[i]);
            const double y = series.log_measures[i];
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        const double nk = static_cast<double>(k);
        const double det = nk * sxx - sx * sx;
        const double alpha = (sxx * sy - sx * sxy) / det;
        const double beta = (nk * sxy - sx * sy) / det;
        series.slope_fit = alpha;
        if (k == 2) {
            series.fit_stderr = 0.0;
        } else {
            double rss = 0;
            for (size_t i = 0; i < k; ++i) {
                const double x = 1.0 / static_cast<double>(series.n_values[i]);
                const double r = series.log_measures[i] - alpha - beta * x;
                rss += r * r;
            }
            const double sigma2 = rss / (nk - 2.0);
            series.fit_stderr = std::sqrt(sigma2 * sxx / det);
        }
    }
    return series;
}

CutoffReport cutoff_kappa(const WalkModel& model, double A, const Vec& q, const Vec& q_prime,
                          double delta, const std::vector<int64_t>& n_grid,
                          const ScanOptions& options) {
    if (!(A > 0)) throw ValidationError("cutoff_kappa: A must be positive");
    if ((q_prime - q).norm() == 0) throw ValidationError("cutoff_kappa: requires q != q'");
    if (model.interior.support.size() == 1)
        throw ValidationError("cutoff_kappa: degenerate one-point support (M_c = 1)");

    CutoffReport rep;
    rep.A = A;
    rep.c = 2 * A / (q_prime - q).norm();
    rep.M_c = m_c(model, rep.c);
    rep.kappa = A / (2 * std::log(rep.M_c));
    rep.delta0 = kNaN;
    rep.K = kNaN;
    rep.lambda_star0 = kNaN;
    rep.empirical_long = kNaN;

    rep.empirical_short = -kInf;
    for (int64_t n : n_grid) {
        const LatticePoint z = nearest_lattice_point(q, n);
        const int64_t t_max = static_cast<int64_t>(std::floor(rep.kappa * static_cast<double>(n)));
        GreenQuery query;
        query.z = z;
        query.target = TargetSet{q_prime, delta, n};
        // Radius large enough that nothing reachable within t_max steps is
        // absorbed: the short-time partial sums are exact.
        query.truncation_radius = z.cast<double>().norm() +
                                  static_cast<double>(t_max + 1) * model.interior.max_step_norm() +
                                  static_cast<double>(n) * (q_prime.norm() + delta) + 2.0;
        query.horizon = std::max<int64_t>(t_max, 1);
        query.want_profile = true;
        GreenOptions gopt;
        gopt.threads = options.threads;
        gopt.max_cells = options.max_cells;
        GreenResult res = green_truncated(model, query, gopt);
        double partial = 0;
        for (int64_t t = 0; t <= t_max && t < static_cast<int64_t>(res.visits_profile.size()); ++t)
            partial += res.visits_profile[static_cast<size_t>(t)];
        const double val = partial > 0 ? std::log(partial) / static_cast<double>(n) : -kInf;
        rep.empirical_short = std::max(rep.empirical_short, val);
    }
    rep.ok_short = rep.empirical_short <= -0.9 * A;
    return rep;
}

CutoffReport cutoff_k(const WalkModel& model, double A, double T, const Vec& q,
                      double V_radius, const std::vector<int64_t>& n_grid,
                      const ScanOptions& options) {
    if (!(A > 0)) throw ValidationError("cutoff_k: A must be positive");
    if (!(T > 0)) throw ValidationError("cutoff_k: T must be positive");
    if (!(V_radius > 0)) throw ValidationError("cutoff_k: V_radius must be positive");
    if (!(drift(model).norm() > 0))
        throw ValidationError("cutoff_k: hypothesis I_T(0,0) > 0 fails (zero drift gives I_T(0,0) = 0)");

    CutoffReport rep;
    rep.A = A;
    rep.c = kNaN;
    rep.M_c = kNaN;
    rep.kappa = kNaN;
    rep.empirical_short = kNaN;

    const double lstar0 = legendre(model, Vec::Zero(model.dim)).value;
    rep.lambda_star0 = lstar0;

    // Rate infimum over the sphere |v| = r; the rate is convex and its
    // minimum lies outside the ball, so the sphere carries the ball inf.
    auto sphere_inf = [&](double r) {
        const int d = model.dim;
        double best = kInf;
        if (d == 1) {
            Vec v(1);
            for (double s : {r, -r}) {
                v[0] = s;
                best = std::min(best, legendre(model, v).value);
            }
            return best;
        }
        if (d == 2) {
            const int m = 256;
            Vec v(2);
            for (int i = 0; i < m; ++i) {
                const double th = 2 * M_PI * i / m;
                v[0] = r * std::cos(th);
                v[1] = r * std::sin(th);
                best = std::min(best, legendre(model, v).value);
            }
            return best;
        }
        const int mp = 24, mt = 48;
        Vec v(d); // d == 3 product grid; higher d out of desk scope
        for (int i = 0; i <= mp; ++i) {
            const double ph = M_PI * i / mp;
            for (int j = 0; j < mt; ++j) {
                const double th = 2 * M_PI * j / mt;
                v[0] = r * std::cos(ph);
                v[1] = r * std::sin(ph) * std::cos(th);
                v[2] = r * std::sin(ph) * std::sin(th);
                best = std::min(best, legendre(model, v).value);
            }
        }
        return best;
    };

    const double mnorm = drift(model).norm();
    double delta0 = kNaN;
    for (int k = 0; k <= 60; ++k) {
        const double d0 = std::pow(2.0, -k);
        if (d0 / T >= mnorm) continue; // drift inside the ball: inf is 0
        if (sphere_inf(d0 / T) >= lstar0 / 2) {
            delta0 = d0;
            break;
        }
    }
    if (!std::isfinite(delta0))
        throw ComputeError("cutoff_k: no dyadic delta0 found down to 2^-60");
    rep.delta0 = delta0;
    rep.K = std::max((q.norm() + V_radius + 1.0) / delta0, 2 * A * T / (T * lstar0));

    rep.empirical_long = -kInf;
    for (int64_t n : n_grid) {
        const LatticePoint z = nearest_lattice_point(q, n);
        const TargetSet target{Vec::Zero(model.dim), V_radius, n};
        const int64_t Kn = static_cast<int64_t>(std::ceil(rep.K * static_cast<double>(n)));
        GreenOptions gopt;
        gopt.threads = options.threads;
        gopt.max_cells = options.max_cells;
        GreenResult res = green_full(model, z, target, 1e-9, gopt, /*want_profile=*/true,
                                     /*min_horizon=*/Kn + Kn / 4);
        double tail = 0;
        for (size_t t = static_cast<size_t>(Kn + 1); t < res.visits_profile.size(); ++t)
            tail += res.visits_profile[t];
        const double val = tail > 0 ? std::log(tail) / static_cast<double>(n) : -kInf;
        rep.empirical_long = std::max(rep.empirical_long, val);
    }
    rep.ok_long = rep.empirical_long <= -0.9 * A;
    return rep;
}

LocalizationReport localization_scan(const WalkModel& model, const Vec& q0,
                                     const TargetSet& target, double A,
                                     const std::vector<double>& R_grid, int64_t n,
                                     const ScanOptions& options) {
    if (!(A > 0)) throw ValidationError("localization_scan: A must be positive");
    if (R_grid.empty()) throw ValidationError("localization_scan: empty R grid");
    const double r_min = std::max(q0.norm(), target.center.norm() + target.radius);
    for (double R : R_grid)
        if (!(R > r_min))
            throw ValidationError("localization_scan: R must exceed max(|q0|, |q'| + delta)");

    LocalizationReport rep;
    rep.n = n;
    rep.A = A;
    rep.delta = target.radius;
    const int64_t entries = static_cast<int64_t>(R_grid.size());
    rep.rows.resize(static_cast<size_t>(entries));
    const int outer_threads = entries > 1 ? options.threads : 1;
    const int inner_threads = entries > 1 ? 1 : options.threads;

    parallel_chunks(entries, 1, outer_threads, [&](int64_t, int64_t beg, int64_t end) {
        for (int64_t i = beg; i < end; ++i) {
            LocalizationRow row;
            row.R = R_grid[static_cast<size_t>(i)];
            GreenOptions gopt;
            gopt.threads = inner_threads;
            gopt.max_cells = options.max_cells;
            row.gap = localization_gap(model, n, q0, target, row.R, gopt);
            row.log_gap_rate =
                row.gap > 0 ? std::log(row.gap) / static_cast<double>(n) : -kInf;
            rep.rows[static_cast<size_t>(i)] = row;
        }
    });

    for (const auto& row : rep.rows) {
        if (row.log_gap_rate <= -A) {
            if (!rep.found || row.R < rep.smallest_R) {
                rep.found = true;
                rep.smallest_R = row.R;
            }
        }
    }
    return rep;
}

std::string to_csv(const DiagnosticSeries& series) {
    std::ostringstream os;
    os << "n,R,delta,log_measure,predicted,backend,std_error\n";
    for (const auto& row : series.rows) {
        os << row.n << ',';
        if (std::isfinite(row.R)) os << fmt(row.R);
        os << ',' << fmt(row.delta) << ',';
        if (!row.excluded) os << fmt(row.log_measure);
        os << ',' << fmt(row.predicted) << ',' << row.backend << ',';
        if (row.backend == "mc") os << fmt(row.std_error);
        os << '\n';
    }
    return os.str();
}

std::string to_csv(const LocalizationReport& report) {
    std::ostringstream os;
    os << "n,R,delta,log_measure,predicted,backend,std_error\n";
    for (const auto& row : report.rows) {
        os << report.n << ',' << fmt(row.R) << ',' << fmt(report.delta) << ','
           << fmt(row.log_gap_rate) << ',' << fmt(-report.A) << ",exact,\n";
    }
    return os.str();
}

} // namespace gldp
