#pragma once

#include "gldp/green.hpp"
#include "gldp/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gldp {

struct ScanOptions {
    int threads = 1;
    int64_t max_cells = 4'000'000;
    int64_t mc_paths = 200'000; // fallback sampler size
    uint64_t seed = 1;
    int grid_points = 513; // prediction grid per axis
};

struct ScanRow {
    int64_t n = 0;
    double R = 0;          // truncation radius of the backend run
    double delta = 0;
    double log_measure = 0; // -(1/n) log mu_n
    double predicted = 0;
    std::string backend;    // "exact" | "mc" | "excluded"
    double std_error = 0;   // NaN for the exact backend
    bool excluded = false;
    std::string note;
};

struct DiagnosticSeries {
    std::vector<int64_t> n_values;
    std::vector<double> log_measures;
    double predicted = 0;      // infimum of I(q0,.) over the closed ball
    double predicted_open = 0; // same over the open ball
    double slope_fit = 0;      // alpha of the alpha + beta/n fit
    double fit_stderr = 0;
    std::vector<ScanRow> rows;
};

/// Scaled Green measures along an n grid with the rate-function
/// prediction: the decay-exponent experiment behind the scan CSV.
DiagnosticSeries ldp_scan(const WalkModel& model, const Vec& q0, const Vec& q_prime,
                          double delta, const std::vector<int64_t>& n_grid, double tol,
                          const ScanOptions& options = {});

struct CutoffReport {
    double A = 0;
    double c = 0;
    double M_c = 0;
    double kappa = 0;
    double lambda_star0 = 0; // rate at zero velocity
    double delta0 = 0;
    double K = 0;
    double empirical_short = 0; // max over the n grid, -inf when no mass
    double empirical_long = 0;
    bool ok_short = false; // empirical_short <= -0.9 A
    bool ok_long = false;
};

/// Short-time cutoff: c = 2A/|q'-q|, kappa = A / (2 log M_c), and the
/// partial-sum check sum_{t<=kappa n} at each grid n.
CutoffReport cutoff_kappa(const WalkModel& model, double A, const Vec& q, const Vec& q_prime,
                          double delta, const std::vector<int64_t>& n_grid,
                          const ScanOptions& options = {});

/// Long-time cutoff: delta0 from the dyadic grid, K = max{(|q| + V_radius
/// + 1)/delta0, 2AT/I_T(0,0)}, and the tail check sum_{t>Kn}.
CutoffReport cutoff_k(const WalkModel& model, double A, double T, const Vec& q,
                      double V_radius, const std::vector<int64_t>& n_grid,
                      const ScanOptions& options = {});

struct LocalizationRow {
    double R = 0;
    double gap = 0;
    double log_gap_rate = 0; // (1/n) log gap
};

struct LocalizationReport {
    int64_t n = 0;
    double A = 0;
    double delta = 0;
    std::vector<LocalizationRow> rows;
    bool found = false;     // some grid R achieves <= -A
    double smallest_R = 0;  // the smallest such R when found
};

/// Truncation-gap experiment over an R grid at fixed n.
LocalizationReport localization_scan(const WalkModel& model, const Vec& q0,
                                     const TargetSet& target, double A,
                                     const std::vector<double>& R_grid, int64_t n,
                                     const ScanOptions& options = {});

/// CSV emission, schema n,R,delta,log_measure,predicted,backend,std_error
/// with a mandatory header, '.' decimal point, LF line ends.
std::string to_csv(const DiagnosticSeries& series);
std::string to_csv(const LocalizationReport& report);

} // namespace gldp
