#include "gldp/cli.hpp"

#include "gldp/cgf.hpp"
#include "gldp/diagnostics.hpp"
#include "gldp/errors.hpp"
#include "gldp/green.hpp"
#include "gldp/montecarlo.hpp"
#include "gldp/parallel.hpp"
#include "gldp/quasipotential.hpp"
#include "gldp/verify.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace gldp {

namespace {

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::string fmt_vec(const Vec& v) {
    std::string s;
    for (int j = 0; j < v.size(); ++j) {
        if (j) s += ',';
        s += fmt(v[j]);
    }
    return s;
}

Vec parse_vec(const std::string& text, const std::string& flag) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            size_t used = 0;
            vals.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ValidationError(flag + ": cannot parse decimal '" + item + "'");
        }
    }
    if (vals.empty()) throw ValidationError(flag + ": empty vector");
    Vec v(static_cast<Eigen::Index>(vals.size()));
    for (size_t j = 0; j < vals.size(); ++j) v[static_cast<Eigen::Index>(j)] = vals[j];
    return v;
}

LatticePoint parse_lattice(const std::string& text, const std::string& flag) {
    const Vec v = parse_vec(text, flag);
    LatticePoint z(v.size());
    for (int j = 0; j < v.size(); ++j) {
        z[j] = static_cast<int>(std::llround(v[j]));
        if (std::abs(v[j] - z[j]) > 1e-9)
            throw ValidationError(flag + ": expected integer components");
    }
    return z;
}

std::vector<int64_t> parse_n_grid(const std::string& text, const std::string& flag) {
    const Vec v = parse_vec(text, flag);
    std::vector<int64_t> out;
    for (int j = 0; j < v.size(); ++j) out.push_back(static_cast<int64_t>(std::llround(v[j])));
    return out;
}

std::vector<double> parse_grid(const std::string& text, const std::string& flag) {
    const Vec v = parse_vec(text, flag);
    return {v.data(), v.data() + v.size()};
}

/// Writes data to --output or the default stream.
struct DataSink {
    std::ostream* stream;
    std::ofstream file;

    DataSink(const std::string& path, std::ostream& fallback) {
        if (path.empty()) {
            stream = &fallback;
        } else {
            file.open(path, std::ios::binary); // fixed LF line ends
            if (!file) throw ValidationError("cannot open output path: " + path);
            stream = &file;
        }
    }
    std::ostream& out() { return *stream; }
};

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"quasipotentials, Green's functions and decay-rate scans "
                 "for transient lattice random walks"};
    app.require_subcommand(1);

    std::string model_path, output_path;
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (0 = available parallelism)")
        ->capture_default_str();

    // phi
    auto* cmd_phi = app.add_subcommand("phi", "jump generating function at a tilt");
    std::string phi_a;
    cmd_phi->add_option("--model", model_path, "model config file")->required();
    cmd_phi->add_option("--a", phi_a, "tilt vector, comma-separated")->required();
    cmd_phi->add_option("--output", output_path, "output path (default stdout)");

    // rate
    auto* cmd_rate = app.add_subcommand("rate", "finite-horizon rate T*L*((q'-q)/T)");
    std::string rate_q, rate_qp;
    double rate_T = 1.0;
    cmd_rate->add_option("--model", model_path)->required();
    cmd_rate->add_option("--T", rate_T, "horizon")->required();
    cmd_rate->add_option("--q", rate_q)->required();
    cmd_rate->add_option("--q-prime", rate_qp)->required();
    cmd_rate->add_option("--output", output_path);

    // qpot
    auto* cmd_qpot = app.add_subcommand("qpot", "quasipotential by both routes");
    std::string qpot_q, qpot_qp, qpot_method = "both";
    cmd_qpot->add_option("--model", model_path)->required();
    cmd_qpot->add_option("--q", qpot_q)->required();
    cmd_qpot->add_option("--q-prime", qpot_qp)->required();
    cmd_qpot->add_option("--method", qpot_method, "both | support | inft")
        ->check(CLI::IsMember({"both", "support", "inft"}));
    cmd_qpot->add_option("--output", output_path);

    // green
    auto* cmd_green = app.add_subcommand("green", "Green's function of a scaled target");
    std::string green_z, green_qp, green_profile_out;
    double green_delta = 0.5, green_R = 0, green_tol = 1e-9;
    int64_t green_n = 1, green_horizon = 0;
    cmd_green->add_option("--model", model_path)->required();
    cmd_green->add_option("--z", green_z, "source lattice point")->required();
    cmd_green->add_option("--q-prime", green_qp, "target center (scaled)")->required();
    cmd_green->add_option("--delta", green_delta, "target radius (scaled)");
    cmd_green->add_option("--n", green_n, "target scale");
    cmd_green->add_option("--R", green_R, "truncation radius; 0 = full Green's function");
    cmd_green->add_option("--tol", green_tol, "relative tolerance for the full value");
    cmd_green->add_option("--horizon", green_horizon, "horizon cap (0 = auto)");
    cmd_green->add_option("--profile-out", green_profile_out, "binary visits-profile dump path");
    cmd_green->add_option("--output", output_path);

    // scan
    auto* cmd_scan = app.add_subcommand("scan", "decay-rate scan (CSV)");
    std::string scan_q0, scan_qp, scan_n_grid, scan_R_grid;
    double scan_delta = 0.25, scan_tol = 1e-9, scan_A = 1.0;
    int64_t scan_mc_paths = 200'000, scan_n = 20;
    uint64_t scan_seed = 1;
    int scan_grid_points = 513;
    bool scan_localization = false;
    cmd_scan->add_option("--model", model_path)->required();
    cmd_scan->add_option("--q0", scan_q0, "source scaled point")->required();
    cmd_scan->add_option("--q-prime", scan_qp, "target center (scaled)")->required();
    cmd_scan->add_option("--delta", scan_delta, "target radius (scaled)");
    cmd_scan->add_option("--n-grid", scan_n_grid, "n values, comma-separated");
    cmd_scan->add_option("--tol", scan_tol);
    cmd_scan->add_option("--mc-paths", scan_mc_paths, "fallback sampler paths");
    cmd_scan->add_option("--seed", scan_seed);
    cmd_scan->add_option("--grid-points", scan_grid_points, "prediction grid per axis");
    cmd_scan->add_flag("--localization", scan_localization, "truncation-gap scan over --R-grid");
    cmd_scan->add_option("--R-grid", scan_R_grid, "R values for --localization");
    cmd_scan->add_option("--A", scan_A, "target decay rate for --localization");
    cmd_scan->add_option("--n", scan_n, "fixed n for --localization");
    cmd_scan->add_option("--output", output_path);

    // mc
    auto* cmd_mc = app.add_subcommand("mc", "importance-sampled estimates");
    std::string mc_mode = "green", mc_z, mc_qp, mc_zp, mc_tilt = "auto";
    double mc_delta = 0.5;
    int64_t mc_n = 1, mc_paths = 100'000, mc_horizon = 0;
    uint64_t mc_seed = 1;
    cmd_mc->add_option("--model", model_path)->required();
    cmd_mc->add_option("--mode", mc_mode, "green | hit")->check(CLI::IsMember({"green", "hit"}));
    cmd_mc->add_option("--z", mc_z, "source lattice point")->required();
    cmd_mc->add_option("--q-prime", mc_qp, "target center (green mode, scaled)");
    cmd_mc->add_option("--delta", mc_delta);
    cmd_mc->add_option("--n", mc_n);
    cmd_mc->add_option("--z-prime", mc_zp, "target lattice point (hit mode)");
    cmd_mc->add_option("--tilt", mc_tilt, "tilt vector, or 'auto', or 'none'");
    cmd_mc->add_option("--paths", mc_paths);
    cmd_mc->add_option("--seed", mc_seed);
    cmd_mc->add_option("--horizon", mc_horizon, "0 = auto");
    cmd_mc->add_option("--output", output_path);

    // cutoffs
    auto* cmd_cut = app.add_subcommand("cutoffs", "short/long-time cutoff constants");
    std::string cut_q, cut_qp, cut_n_grid = "20,40";
    double cut_A = 1.0, cut_T = 1.0, cut_delta = 0.25, cut_V_radius = 1.25;
    cmd_cut->add_option("--model", model_path)->required();
    cmd_cut->add_option("--A", cut_A)->required();
    cmd_cut->add_option("--T", cut_T);
    cmd_cut->add_option("--q", cut_q)->required();
    cmd_cut->add_option("--q-prime", cut_qp)->required();
    cmd_cut->add_option("--delta", cut_delta);
    cmd_cut->add_option("--V-radius", cut_V_radius);
    cmd_cut->add_option("--n-grid", cut_n_grid);
    cmd_cut->add_option("--output", output_path);

    // verify
    auto* cmd_verify = app.add_subcommand("verify", "run the verification battery");
    int verify_samples = 1000;
    uint64_t verify_seed = 7;
    cmd_verify->add_option("--model", model_path, "model for the identity suite");
    cmd_verify->add_option("--samples", verify_samples);
    cmd_verify->add_option("--seed", verify_seed);
    cmd_verify->add_option("--output", output_path);

    // CLI11 wants mutable argc/argv-style input.
    std::vector<std::string> argv_storage = args;
    std::vector<char*> argv;
    std::string prog = "gldp";
    argv.push_back(prog.data());
    for (auto& a : argv_storage) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        DataSink sink(output_path, out);

        if (*cmd_phi) {
            const WalkModel model = load_model_file(model_path);
            const CGFEval e = phi(model, parse_vec(phi_a, "--a"));
            sink.out() << "phi=" << fmt(e.phi) << "\n"
                       << "lambda=" << fmt(e.lambda) << "\n"
                       << "grad=" << fmt_vec(e.grad) << "\n";
            for (int i = 0; i < e.hess.rows(); ++i)
                sink.out() << "hess_row" << i << "=" << fmt_vec(e.hess.row(i)) << "\n";
            return 0;
        }

        if (*cmd_rate) {
            const WalkModel model = load_model_file(model_path);
            const RateFiniteT r = rate_finite_t(model, rate_T, parse_vec(rate_q, "--q"),
                                                parse_vec(rate_qp, "--q-prime"));
            sink.out() << "value=" << fmt(r.value) << "\n";
            return 0;
        }

        if (*cmd_qpot) {
            const WalkModel model = load_model_file(model_path);
            const Vec q = parse_vec(qpot_q, "--q");
            const Vec qp = parse_vec(qpot_qp, "--q-prime");
            int exit_code = 0;
            if (qpot_method != "support") {
                const QuasipotentialResult r = quasipotential_inf_t(model, q, qp);
                sink.out() << "inf_t.value=" << fmt(r.value) << "\n"
                           << "inf_t.t_star=" << fmt(r.t_star) << "\n"
                           << "inf_t.a_star=" << fmt_vec(r.a_star) << "\n";
                if (!r.converged) {
                    err << "warning: inf-over-T search did not converge\n";
                    exit_code = 2;
                }
            }
            if (qpot_method != "inft") {
                const QuasipotentialResult r = quasipotential_support(model, qp - q);
                sink.out() << "support.value=" << fmt(r.value) << "\n"
                           << "support.t_star=" << fmt(r.t_star) << "\n"
                           << "support.a_star=" << fmt_vec(r.a_star) << "\n";
            }
            return exit_code;
        }

        if (*cmd_green) {
            const WalkModel model = load_model_file(model_path);
            const LatticePoint z = parse_lattice(green_z, "--z");
            const TargetSet target{parse_vec(green_qp, "--q-prime"), green_delta, green_n};
            GreenOptions gopt;
            gopt.threads = threads;
            GreenResult res;
            const bool want_profile = !green_profile_out.empty();
            if (green_R > 0) {
                GreenQuery query;
                query.z = z;
                query.target = target;
                query.truncation_radius = green_R;
                query.horizon = green_horizon;
                query.want_profile = want_profile;
                res = green_truncated(model, query, gopt);
            } else {
                res = green_full(model, z, target, green_tol, gopt, want_profile);
            }
            sink.out() << "value=" << fmt(res.value) << "\n"
                       << "tail_bound=" << fmt(res.horizon_tail_bound) << "\n"
                       << "truncated=" << (res.truncation_flag ? 1 : 0) << "\n"
                       << "radius=" << fmt(res.radius) << "\n"
                       << "steps=" << res.steps << "\n";
            if (!res.truncation_flag)
                sink.out() << "error_estimate=" << fmt(res.error_estimate) << "\n";
            if (want_profile) dump_profile(green_profile_out, res.visits_profile);
            return 0;
        }

        if (*cmd_scan) {
            const WalkModel model = load_model_file(model_path);
            ScanOptions opt;
            opt.threads = threads;
            opt.mc_paths = scan_mc_paths;
            opt.seed = scan_seed;
            opt.grid_points = scan_grid_points;
            const Vec q0 = parse_vec(scan_q0, "--q0");
            const Vec qp = parse_vec(scan_qp, "--q-prime");
            if (scan_localization) {
                if (scan_R_grid.empty())
                    throw ValidationError("scan --localization: --R-grid is required");
                const TargetSet target{qp, scan_delta, scan_n};
                LocalizationReport rep = localization_scan(
                    model, q0, target, scan_A, parse_grid(scan_R_grid, "--R-grid"), scan_n, opt);
                sink.out() << to_csv(rep);
                err << (rep.found ? "smallest R achieving -A: " + fmt(rep.smallest_R)
                                  : std::string("no R in grid achieves -A"))
                    << "\n";
            } else {
                if (scan_n_grid.empty()) throw ValidationError("scan: --n-grid is required");
                DiagnosticSeries s = ldp_scan(model, q0, qp, scan_delta,
                                              parse_n_grid(scan_n_grid, "--n-grid"), scan_tol, opt);
                sink.out() << to_csv(s);
                err << "slope_fit=" << fmt(s.slope_fit) << " fit_stderr=" << fmt(s.fit_stderr)
                    << " predicted=" << fmt(s.predicted)
                    << " predicted_open=" << fmt(s.predicted_open) << "\n";
            }
            return 0;
        }

        if (*cmd_mc) {
            const WalkModel model = load_model_file(model_path);
            const LatticePoint z = parse_lattice(mc_z, "--z");
            SamplerConfig cfg;
            cfg.seed = mc_seed;
            cfg.paths = mc_paths;
            cfg.horizon = mc_horizon;

            if (mc_mode == "green") {
                if (mc_qp.empty()) throw ValidationError("mc green: --q-prime is required");
                const TargetSet target{parse_vec(mc_qp, "--q-prime"), mc_delta, mc_n};
                if (mc_tilt == "auto") {
                    Vec v = target.center * static_cast<double>(target.scale) - z.cast<double>();
                    cfg.tilt = v.norm() > 0 ? quasipotential_support(model, v).a_star
                                            : Vec::Zero(model.dim);
                } else if (mc_tilt != "none") {
                    cfg.tilt = parse_vec(mc_tilt, "--tilt");
                }
                const MCEstimate est = mc_green(model, z, target, cfg, threads);
                sink.out() << "mean=" << fmt(est.mean) << "\n"
                           << "std_error=" << fmt(est.std_error) << "\n"
                           << "ess=" << fmt(est.ess) << "\n"
                           << "paths=" << est.paths_used << "\n";
                if (est.low_ess_warning) err << "warning: effective sample size below 1% of paths\n";
            } else {
                if (mc_zp.empty()) throw ValidationError("mc hit: --z-prime is required");
                const LatticePoint zp = parse_lattice(mc_zp, "--z-prime");
                if (mc_tilt == "auto") {
                    Vec v = (zp - z).cast<double>();
                    cfg.tilt = v.norm() > 0 ? quasipotential_support(model, v).a_star
                                            : Vec::Zero(model.dim);
                } else if (mc_tilt != "none") {
                    cfg.tilt = parse_vec(mc_tilt, "--tilt");
                }
                Vec dir = (zp - z).cast<double>();
                double theta = 0;
                if (dir.norm() > 0) theta = communication_theta(model, {dir / dir.norm()}).theta;
                const HittingEstimate est = mc_hitting(model, z, zp, cfg, theta, threads);
                sink.out() << "mean=" << fmt(est.estimate.mean) << "\n"
                           << "std_error=" << fmt(est.estimate.std_error) << "\n"
                           << "ess=" << fmt(est.estimate.ess) << "\n"
                           << "paths=" << est.estimate.paths_used << "\n"
                           << "log_estimate=" << fmt(est.log_estimate) << "\n"
                           << "certificate_log_bound=" << fmt(est.certificate_log_bound) << "\n"
                           << "ratio=" << fmt(est.ratio) << "\n";
            }
            return 0;
        }

        if (*cmd_cut) {
            const WalkModel model = load_model_file(model_path);
            ScanOptions opt;
            opt.threads = threads;
            const Vec q = parse_vec(cut_q, "--q");
            const Vec qp = parse_vec(cut_qp, "--q-prime");
            const auto n_grid = parse_n_grid(cut_n_grid, "--n-grid");
            const CutoffReport ks = cutoff_kappa(model, cut_A, q, qp, cut_delta, n_grid, opt);
            const CutoffReport kl = cutoff_k(model, cut_A, cut_T, q, cut_V_radius, n_grid, opt);
            sink.out() << "A=" << fmt(cut_A) << "\n"
                       << "c=" << fmt(ks.c) << "\n"
                       << "M_c=" << fmt(ks.M_c) << "\n"
                       << "kappa=" << fmt(ks.kappa) << "\n"
                       << "empirical_short=" << fmt(ks.empirical_short) << "\n"
                       << "ok_short=" << (ks.ok_short ? 1 : 0) << "\n"
                       << "lambda_star0=" << fmt(kl.lambda_star0) << "\n"
                       << "delta0=" << fmt(kl.delta0) << "\n"
                       << "K=" << fmt(kl.K) << "\n"
                       << "empirical_long=" << fmt(kl.empirical_long) << "\n"
                       << "ok_long=" << (kl.ok_long ? 1 : 0) << "\n";
            return ks.ok_short && kl.ok_long ? 0 : 2;
        }

        if (*cmd_verify) {
            VerifyOptions vopt;
            vopt.threads = threads;
            vopt.identity_samples = verify_samples;
            vopt.seed = verify_seed;
            vopt.model_path = model_path;
            // The identity report for the chosen model, then the battery.
            const WalkModel model =
                model_path.empty() ? reference_walk_1d() : load_model_file(model_path);
            sink.out() << identity_suite(model, verify_samples, verify_seed,
                                         resolve_threads(threads))
                              .to_text();
            const auto results = run_verification(vopt, sink.out());
            return all_passed(results) ? 0 : 1;
        }
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const ComputeError& e) {
        err << "compute error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

} // namespace gldp
