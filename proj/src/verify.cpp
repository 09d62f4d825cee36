#include "gldp/verify.hpp"

#include "gldp/cgf.hpp"
#include "gldp/diagnostics.hpp"
#include "gldp/errors.hpp"
#include "gldp/green.hpp"
#include "gldp/lp.hpp"
#include "gldp/montecarlo.hpp"
#include "gldp/parallel.hpp"
#include "gldp/quasipotential.hpp"
#include "gldp/rng.hpp"

#include <Eigen/Sparse>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace gldp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", x);
    return buf;
}

WalkModel make_model(int dim, const std::vector<std::vector<int>>& support,
                     const std::vector<double>& probs) {
    WalkModel m;
    m.dim = dim;
    for (const auto& s : support) {
        LatticePoint v(dim);
        for (int j = 0; j < dim; ++j) v[j] = s[static_cast<size_t>(j)];
        m.interior.support.push_back(v);
    }
    m.interior.probs = probs;
    m.transience_mode =
        m.interior.mean().norm() > 0 ? TransienceMode::Drift : TransienceMode::Dimension;
    return m;
}

} // namespace

WalkModel reference_walk_1d() {
    return make_model(1, {{1}, {-1}}, {0.7, 0.3});
}

WalkModel reference_walk_2d() {
    return make_model(2, {{1, 0}, {0, 1}, {-1, 0}, {0, -1}}, {0.4, 0.3, 0.2, 0.1});
}

WalkModel random_drifted_model(uint64_t seed, int dim) {
    Rng rng(seed);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const int k = dim + 1 + static_cast<int>(rng.below(static_cast<uint64_t>(6 - dim)));
        std::vector<LatticePoint> support;
        std::set<std::vector<int>> seen;
        int guard = 0;
        while (static_cast<int>(support.size()) < k && guard++ < 200) {
            LatticePoint v(dim);
            bool zero = true;
            std::vector<int> key;
            for (int j = 0; j < dim; ++j) {
                v[j] = static_cast<int>(rng.below(5)) - 2;
                if (v[j] != 0) zero = false;
                key.push_back(v[j]);
            }
            if (zero || !seen.insert(key).second) continue;
            support.push_back(v);
        }
        if (static_cast<int>(support.size()) < k) continue;
        if (!in_hull_interior(support, Vec::Zero(dim), 0.2)) continue;

        std::vector<double> probs(static_cast<size_t>(k));
        double s = 0;
        for (auto& p : probs) {
            p = rng.uniform(0.1, 1.0);
            s += p;
        }
        double partial = 0;
        for (size_t i = 0; i + 1 < probs.size(); ++i) {
            probs[i] /= s;
            partial += probs[i];
        }
        probs.back() = 1.0 - partial;

        WalkModel m;
        m.dim = dim;
        m.interior.support = support;
        m.interior.probs = probs;
        m.transience_mode = TransienceMode::Drift;
        if (m.interior.mean().norm() < 0.05) continue;
        m.validate();
        return m;
    }
    throw ComputeError("random_drifted_model: generation failed");
}

namespace {

// ---------------------------------------------------------------------
// Sparse linear-system oracle for truncated Green values: solve
// (I - P_R)' u = delta_z over the ball cells and sum u over the target.
// Independent of the occupancy-iteration path.
double green_oracle_sparse(const WalkModel& model, const LatticePoint& z,
                           const TargetSet& target, double R) {
    const int d = model.dim;
    const int bound = static_cast<int>(std::ceil(R));
    const int64_t side = 2 * bound + 1;
    int64_t volume = 1;
    for (int j = 0; j < d; ++j) volume *= side;

    std::vector<int32_t> cell_id(static_cast<size_t>(volume), -1);
    std::vector<LatticePoint> cells;
    std::vector<int> y(static_cast<size_t>(d), -bound);
    auto flat_of = [&](const std::vector<int>& p) {
        int64_t f = 0;
        for (int j = 0; j < d; ++j) f = f * side + (p[static_cast<size_t>(j)] + bound);
        return f;
    };
    for (;;) {
        double n2 = 0;
        for (int j = 0; j < d; ++j) n2 += double(y[static_cast<size_t>(j)]) * y[static_cast<size_t>(j)];
        const bool in_space = model.state_space == StateSpace::FullLattice || y[0] >= 0;
        if (n2 < R * R && in_space) {
            cell_id[static_cast<size_t>(flat_of(y))] = static_cast<int32_t>(cells.size());
            LatticePoint p(d);
            for (int j = 0; j < d; ++j) p[j] = y[static_cast<size_t>(j)];
            cells.push_back(p);
        }
        int j = d - 1;
        while (j >= 0 && y[static_cast<size_t>(j)] == bound) {
            y[static_cast<size_t>(j)] = -bound;
            --j;
        }
        if (j < 0) break;
        ++y[static_cast<size_t>(j)];
    }

    const int n_cells = static_cast<int>(cells.size());
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < n_cells; ++i) {
        trips.emplace_back(i, i, 1.0);
        const auto& kernel = step_kernel(model, cells[static_cast<size_t>(i)]);
        for (size_t jmp = 0; jmp < kernel.support.size(); ++jmp) {
            std::vector<int> dest(static_cast<size_t>(d));
            bool inside_box = true;
            for (int j = 0; j < d; ++j) {
                dest[static_cast<size_t>(j)] = cells[static_cast<size_t>(i)][j] + kernel.support[jmp][j];
                if (std::abs(dest[static_cast<size_t>(j)]) > bound) inside_box = false;
            }
            if (!inside_box) continue;
            const int32_t dst = cell_id[static_cast<size_t>(flat_of(dest))];
            if (dst < 0) continue;
            // transpose: row = destination, col = source
            trips.emplace_back(dst, i, -kernel.probs[jmp]);
        }
    }
    Eigen::SparseMatrix<double> A(n_cells, n_cells);
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
    solver.analyzePattern(A);
    solver.factorize(A);
    if (solver.info() != Eigen::Success)
        throw ComputeError("green_oracle_sparse: factorization failed");

    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_cells);
    std::vector<int> zv(static_cast<size_t>(d));
    for (int j = 0; j < d; ++j) zv[static_cast<size_t>(j)] = z[j];
    const int32_t z_id = cell_id[static_cast<size_t>(flat_of(zv))];
    if (z_id < 0) throw ValidationError("green_oracle_sparse: source outside ball");
    rhs[z_id] = 1.0;
    const Eigen::VectorXd u = solver.solve(rhs);

    const double n = static_cast<double>(target.scale);
    const double r2 = (n * target.radius) * (n * target.radius);
    double value = 0;
    for (int i = 0; i < n_cells; ++i) {
        double d2 = 0;
        for (int j = 0; j < d; ++j) {
            const double dj = cells[static_cast<size_t>(i)][j] - n * target.center[j];
            d2 += dj * dj;
        }
        if (d2 < r2) value += u[i];
    }
    return value;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------

CriterionResult criterion_cross_method(int threads) {
    CriterionResult r{1, "quasipotential cross-method agreement", false, "", 0};
    const auto t0 = Clock::now();
    double worst = 0;
    int count = 0;
    std::ostringstream detail;
    for (int i = 0; i < 200; ++i) {
        const int dim = 1 + (i % 2);
        const WalkModel model = random_drifted_model(1000 + static_cast<uint64_t>(i), dim);
        Rng rng(5000 + static_cast<uint64_t>(i));
        Vec q(dim), qp(dim);
        do {
            for (int j = 0; j < dim; ++j) {
                q[j] = rng.uniform(-2.0, 2.0);
                qp[j] = rng.uniform(-2.0, 2.0);
            }
        } while ((qp - q).norm() < 0.1);
        const double v1 = quasipotential_inf_t(model, q, qp).value;
        const double v2 = quasipotential_support(model, qp - q).value;
        const double dev = std::abs(v1 - v2) / std::max(1.0, v1);
        worst = std::max(worst, dev);
        ++count;
    }
    r.seconds = seconds_since(t0);
    r.pass = worst <= 1e-7 && r.seconds < 30.0;
    detail << count << " instances, max rel deviation " << num(worst) << ", " << num(r.seconds)
           << " s";
    r.detail = detail.str();
    (void)threads;
    return r;
}

CriterionResult criterion_closed_form() {
    CriterionResult r{2, "1-D closed-form quasipotential", false, "", 0};
    const auto t0 = Clock::now();
    const WalkModel m = reference_walk_1d();
    const double expect = std::log(7.0 / 3.0);
    Vec minus1(1), plus1(1);
    minus1[0] = -1;
    plus1[0] = 1;
    const double s_m = quasipotential_support(m, minus1).value;
    const double i_m = quasipotential_inf_t(m, Vec::Zero(1), minus1).value;
    const double s_p = quasipotential_support(m, plus1).value;
    const double i_p = quasipotential_inf_t(m, Vec::Zero(1), plus1).value;
    const double worst = std::max(std::max(std::abs(s_m - expect), std::abs(i_m - expect)),
                                  std::max(std::abs(s_p), std::abs(i_p)));
    r.seconds = seconds_since(t0);
    r.pass = worst <= 1e-9;
    r.detail = "I(0,-1) support " + num(s_m) + " infT " + num(i_m) + " vs log(7/3) " +
               num(expect) + "; I(0,+1) " + num(std::max(s_p, i_p)) + "; max err " + num(worst);
    return r;
}

CriterionResult criterion_green_oracle(int threads) {
    CriterionResult r{3, "Green-function oracles", false, "", 0};
    const auto t0 = Clock::now();
    const WalkModel m1 = reference_walk_1d();
    GreenOptions opt;
    opt.threads = threads;

    double worst_rel = 0;
    for (int yy = 0; yy <= 15; ++yy) {
        Vec center(1);
        center[0] = -yy;
        TargetSet target{center, 0.5, 1};
        const double expect = 2.5 * std::pow(3.0 / 7.0, yy);
        LatticePoint z0(1);
        z0[0] = 0;
        const double got = green_full(m1, z0, target, 1e-9, opt).value;
        worst_rel = std::max(worst_rel, std::abs(got - expect) / expect);
    }

    // 2-D: matched truncation against the sparse solve on the 61 x 61 box.
    const WalkModel m2 = reference_walk_2d();
    LatticePoint z2(2);
    z2[0] = 0;
    z2[1] = 0;
    TargetSet t2{Vec::Zero(2), 0.5, 1};
    GreenQuery q2;
    q2.z = z2;
    q2.target = t2;
    q2.truncation_radius = 30.0;
    const double engine2 = green_truncated(m2, q2, opt).value;
    const double oracle2 = green_oracle_sparse(m2, z2, t2, 30.0);
    const double dev2 = std::abs(engine2 - oracle2) / std::max(1.0, std::abs(oracle2));

    r.seconds = seconds_since(t0);
    r.pass = worst_rel <= 1e-6 && dev2 <= 1e-9 && r.seconds < 60.0;
    r.detail = "1-D geometric max rel err " + num(worst_rel) + "; 2-D vs sparse solve dev " +
               num(dev2) + "; " + num(r.seconds) + " s";
    return r;
}

CriterionResult criterion_ldp_scans(int threads) {
    CriterionResult r{4, "weak-LDP decay scans", false, "", 0};
    const auto t0 = Clock::now();
    ScanOptions opt;
    opt.threads = threads;

    const WalkModel m1 = reference_walk_1d();
    Vec q0 = Vec::Zero(1);
    Vec qp(1);
    qp[0] = -1;
    DiagnosticSeries s1 = ldp_scan(m1, q0, qp, 0.25, {10, 20, 40, 60, 80}, 1e-9, opt);
    const double predicted_1d = 0.75 * std::log(7.0 / 3.0);
    const double rel1 = std::abs(s1.slope_fit - predicted_1d) / predicted_1d;

    const WalkModel m2 = reference_walk_2d();
    Vec q0_2 = Vec::Zero(2);
    Vec qp_2(2);
    qp_2[0] = -0.5;
    qp_2[1] = -0.5;
    ScanOptions opt2 = opt;
    opt2.grid_points = 513;
    DiagnosticSeries s2 = ldp_scan(m2, q0_2, qp_2, 0.25, {10, 20, 30, 40}, 1e-9, opt2);
    const double rel2 = std::abs(s2.slope_fit - s2.predicted) / s2.predicted;

    r.seconds = seconds_since(t0);
    r.pass = rel1 <= 0.05 && rel2 <= 0.10 && r.seconds < 600.0;
    r.detail = "1-D slope " + num(s1.slope_fit) + " vs " + num(predicted_1d) + " (" + num(100 * rel1) +
               "%); 2-D slope " + num(s2.slope_fit) + " vs " + num(s2.predicted) + " (" +
               num(100 * rel2) + "%); " + num(r.seconds) + " s";
    return r;
}

CriterionResult criterion_localization(int threads) {
    CriterionResult r{5, "localization of the Green mass", false, "", 0};
    const auto t0 = Clock::now();
    const WalkModel m = reference_walk_1d();
    Vec q0 = Vec::Zero(1);
    Vec qp(1);
    qp[0] = -1;
    ScanOptions opt;
    opt.threads = threads;

    bool ok = true;
    std::ostringstream detail;
    for (double A : {0.5, 1.0}) {
        TargetSet target{qp, 0.25, 20};
        LocalizationReport rep = localization_scan(m, q0, target, A, {2.0, 3.0, 4.0}, 20, opt);
        bool found_09 = false;
        double prev = kInf;
        bool monotone = true;
        for (const auto& row : rep.rows) {
            if (row.log_gap_rate <= -0.9 * A) found_09 = true;
            if (row.gap > prev * (1 + 1e-12)) monotone = false;
            prev = row.gap;
        }
        ok = ok && found_09 && monotone;
        detail << "A=" << num(A) << (found_09 ? " ok" : " FAIL") << (monotone ? "" : " non-monotone")
               << " (smallest R " << (rep.found ? num(rep.smallest_R) : std::string("none")) << "); ";
    }
    r.seconds = seconds_since(t0);
    r.pass = ok;
    r.detail = detail.str() + num(r.seconds) + " s";
    return r;
}

CriterionResult criterion_cutoffs(int threads) {
    CriterionResult r{6, "short/long-time cutoff constants", false, "", 0};
    const auto t0 = Clock::now();
    const WalkModel m = reference_walk_1d();
    ScanOptions opt;
    opt.threads = threads;
    const double A = 1.0;
    Vec q = Vec::Zero(1);
    Vec qp(1);
    qp[0] = -1;

    CutoffReport ks = cutoff_kappa(m, A, q, qp, 0.25, {20, 40}, opt);
    // Double-entry: identical arithmetic on independently fetched inputs.
    const double c_ref = 2 * A / (qp - q).norm();
    const double mc_ref = m_c(m, c_ref);
    const double kappa_ref = A / (2 * std::log(mc_ref));
    const bool short_exact = ks.c == c_ref && ks.M_c == mc_ref && ks.kappa == kappa_ref;

    const double T = 1.0;
    const double V_radius = 1.25;
    CutoffReport kl = cutoff_k(m, A, T, q, V_radius, {20, 40}, opt);
    const double lstar0_ref = legendre(m, Vec::Zero(1)).value;
    const double K_ref = std::max((q.norm() + V_radius + 1.0) / kl.delta0,
                                  2 * A * T / (T * lstar0_ref));
    const bool long_exact = kl.K == K_ref && kl.lambda_star0 == lstar0_ref;

    r.seconds = seconds_since(t0);
    r.pass = short_exact && long_exact && ks.ok_short && kl.ok_long;
    r.detail = std::string("kappa ") + num(ks.kappa) + (short_exact ? " exact" : " MISMATCH") +
               ", short " + num(ks.empirical_short) + (ks.ok_short ? " ok" : " FAIL") + "; K " +
               num(kl.K) + (long_exact ? " exact" : " MISMATCH") + ", long " +
               num(kl.empirical_long) + (kl.ok_long ? " ok" : " FAIL") + "; delta0 " +
               num(kl.delta0) + "; " + num(r.seconds) + " s";
    return r;
}

CriterionResult criterion_identities(const WalkModel& model, int samples, uint64_t seed,
                                     int threads) {
    CriterionResult r{7, "rate-function identities", false, "", 0};
    const auto t0 = Clock::now();
    IdentityReport rep1 = identity_suite(model, samples, seed, threads);
    IdentityReport rep2 = identity_suite(reference_walk_2d(), samples, seed + 1, threads);
    const double worst = std::max(rep1.worst(), rep2.worst());
    r.seconds = seconds_since(t0);
    r.pass = worst < 1e-7;
    r.detail = "max violation " + num(worst) + " over " + std::to_string(samples) +
               " samples x 6 identities x 2 models; " + num(r.seconds) + " s";
    return r;
}

CriterionResult criterion_montecarlo(int threads) {
    CriterionResult r{8, "importance-sampled Green estimates", false, "", 0};
    const auto t0 = Clock::now();
    GreenOptions gopt;
    gopt.threads = threads;

    int within = 0;
    const int instances = 30;
    for (int i = 0; i < instances; ++i) {
        const int dim = 1 + (i % 2);
        const WalkModel model = random_drifted_model(40'000 + static_cast<uint64_t>(i), dim);
        Rng rng(50'000 + static_cast<uint64_t>(i));
        const Vec m = drift(model);
        // Target a short way along the drift: reachable, value O(1).
        Vec center = m / m.norm() * rng.uniform(0.8, 2.0);
        TargetSet target{center, 0.4, 2};
        LatticePoint z = LatticePoint::Zero(dim);
        double exact;
        try {
            exact = green_full(model, z, target, 1e-9, gopt).value;
        } catch (const ValidationError&) {
            ++within; // empty target at this scale: skip as satisfied
            continue;
        }
        SamplerConfig cfg;
        cfg.seed = 60'000 + static_cast<uint64_t>(i);
        cfg.paths = 20'000;
        cfg.horizon = 600;
        MCEstimate est = mc_green(model, z, target, cfg, threads);
        if (std::abs(est.mean - exact) <= 4.0 * std::max(est.std_error, 1e-12)) ++within;
    }

    // Rare target: 30 lattice units against the drift.
    const WalkModel m1 = reference_walk_1d();
    Vec tilt(1);
    tilt[0] = std::log(3.0 / 7.0);
    Vec center(1);
    center[0] = -30;
    TargetSet target{center, 0.5, 1};
    SamplerConfig cfg;
    cfg.seed = 99;
    cfg.paths = 100'000;
    cfg.tilt = tilt;
    LatticePoint z0 = LatticePoint::Zero(1);
    MCEstimate rare = mc_green(m1, z0, target, cfg, threads);
    const double truth = 2.5 * std::pow(3.0 / 7.0, 30);
    const double rel_se = rare.std_error / rare.mean;
    const bool rare_ok =
        rel_se < 0.20 && std::abs(rare.mean - truth) <= 4.0 * rare.std_error;

    r.seconds = seconds_since(t0);
    r.pass = within >= 28 && rare_ok;
    r.detail = std::to_string(within) + "/30 within 4 SE; rare target mean " + num(rare.mean) +
               " (truth " + num(truth) + ", rel SE " + num(rel_se) + "); " + num(r.seconds) + " s";
    return r;
}

CriterionResult criterion_hitting(int threads) {
    CriterionResult r{9, "communication-condition hitting bounds", false, "", 0};
    const auto t0 = Clock::now();
    const WalkModel m = reference_walk_1d();
    Vec dir(1);
    dir[0] = -1;
    const double theta = communication_theta(m, {dir}).theta;

    Vec tilt(1);
    tilt[0] = std::log(3.0 / 7.0);
    bool ok = true;
    std::ostringstream detail;
    for (int k = 1; k <= 10; ++k) {
        LatticePoint z = LatticePoint::Zero(1);
        LatticePoint zp(1);
        zp[0] = -k;
        SamplerConfig cfg;
        cfg.seed = 7000 + static_cast<uint64_t>(k);
        cfg.paths = 30'000;
        cfg.tilt = tilt;
        HittingEstimate est = mc_hitting(m, z, zp, cfg, theta, threads);
        const double se_log = est.estimate.std_error / est.estimate.mean;
        if (!(est.log_estimate >= est.certificate_log_bound - 3.0 * se_log)) {
            ok = false;
            detail << "k=" << k << " FAIL ";
        }
    }
    r.seconds = seconds_since(t0);
    r.pass = ok;
    r.detail = detail.str() + "theta " + num(theta) + ", 10 instances; " + num(r.seconds) + " s";
    return r;
}

CriterionResult criterion_determinism(uint64_t seed) {
    CriterionResult r{10, "seeded determinism across thread counts", false, "", 0};
    const auto t0 = Clock::now();
    const WalkModel m = reference_walk_1d();
    Vec q0 = Vec::Zero(1);
    Vec qp(1);
    qp[0] = -1;

    std::vector<std::string> csvs;
    for (int threads : {1, 2, 4}) {
        ScanOptions opt;
        opt.threads = threads;
        opt.seed = seed;
        opt.grid_points = 129;
        DiagnosticSeries s = ldp_scan(m, q0, qp, 0.25, {5, 10, 20}, 1e-9, opt);
        csvs.push_back(to_csv(s));
    }
    const bool csv_ok = csvs[0] == csvs[1] && csvs[1] == csvs[2];

    std::vector<double> suites;
    for (int threads : {1, 2, 4})
        suites.push_back(identity_suite(m, 128, seed, threads).worst());
    const bool suite_ok = suites[0] == suites[1] && suites[1] == suites[2];

    std::vector<double> mcs;
    for (int threads : {1, 2, 4}) {
        SamplerConfig cfg;
        cfg.seed = seed;
        cfg.paths = 50'000;
        Vec center(1);
        center[0] = -2;
        LatticePoint z0 = LatticePoint::Zero(1);
        mcs.push_back(mc_green(m, z0, TargetSet{center, 0.5, 1}, cfg, threads).mean);
    }
    const bool mc_ok = mcs[0] == mcs[1] && mcs[1] == mcs[2];

    r.seconds = seconds_since(t0);
    r.pass = csv_ok && suite_ok && mc_ok;
    r.detail = std::string("csv ") + (csv_ok ? "identical" : "DIFFERS") + ", identity " +
               (suite_ok ? "identical" : "DIFFERS") + ", mc " + (mc_ok ? "identical" : "DIFFERS") +
               "; threads {1,2,4}; " + num(r.seconds) + " s";
    return r;
}

} // namespace

bool all_passed(const std::vector<CriterionResult>& results) {
    for (const auto& r : results)
        if (!r.pass) return false;
    return true;
}

std::vector<CriterionResult> run_verification(const VerifyOptions& options, std::ostream& out) {
    const int threads = resolve_threads(options.threads);
    WalkModel identity_model =
        options.model_path.empty() ? reference_walk_1d() : load_model_file(options.model_path);

    std::vector<CriterionResult> results;
    auto emit = [&](CriterionResult r) {
        out << (r.pass ? "[PASS] " : "[FAIL] ") << "C" << r.id << " " << r.name << ": " << r.detail
            << "\n";
        out.flush();
        results.push_back(std::move(r));
    };

    emit(criterion_cross_method(threads));
    emit(criterion_closed_form());
    emit(criterion_green_oracle(threads));
    emit(criterion_ldp_scans(threads));
    emit(criterion_localization(threads));
    emit(criterion_cutoffs(threads));
    emit(criterion_identities(identity_model, options.identity_samples, options.seed, threads));
    emit(criterion_montecarlo(threads));
    emit(criterion_hitting(threads));
    emit(criterion_determinism(options.seed));
    return results;
}

} // namespace gldp
