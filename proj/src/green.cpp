#include "gldp/green.hpp"

#include "gldp/errors.hpp"
#include "gldp/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <numeric>

namespace gldp {

namespace {

constexpr double kStopFraction = 1e-12;
constexpr int kContractionWindow = 50;

/// Padded box around the ball {|y| < R}, flat row-major indexing. Cells
/// outside the ball (or outside the half-space) carry no mass; the pad of
/// width max|v_j| keeps every gather read in bounds.
struct BallDomain {
    int dim;
    int bound;                 // per-axis half-width including pad
    int64_t side;              // 2*bound + 1
    int64_t volume;            // side^dim
    double radius;             // R
    std::vector<int64_t> cells;        // flat indices of in-ball cells, ascending
    std::vector<int32_t> coords;       // dim ints per cell
    std::vector<uint8_t> in_ball;      // per flat index

    BallDomain(const WalkModel& model, double R, int64_t max_cells) : dim(model.dim), radius(R) {
        int pad = 0;
        for (const auto& v : model.interior.support)
            pad = std::max(pad, v.cwiseAbs().maxCoeff());
        if (model.boundary)
            for (const auto& v : model.boundary->support)
                pad = std::max(pad, v.cwiseAbs().maxCoeff());
        bound = static_cast<int>(std::ceil(R)) + pad;
        side = 2 * static_cast<int64_t>(bound) + 1;
        double volume_check = 1;
        for (int j = 0; j < dim; ++j) volume_check *= static_cast<double>(side);
        if (volume_check > static_cast<double>(max_cells))
            throw ComputeError("green: lattice ball needs " +
                               std::to_string(static_cast<int64_t>(volume_check)) +
                               " cells, cap is " + std::to_string(max_cells));
        volume = static_cast<int64_t>(volume_check);

        in_ball.assign(static_cast<size_t>(volume), 0);
        const double R2 = R * R;
        std::vector<int> y(static_cast<size_t>(dim), -bound);
        for (;;) {
            double n2 = 0;
            for (int j = 0; j < dim; ++j) n2 += double(y[static_cast<size_t>(j)]) * y[static_cast<size_t>(j)];
            const bool in_space =
                model.state_space == StateSpace::FullLattice || y[0] >= 0;
            if (n2 < R2 && in_space) {
                const int64_t f = flat_of(y.data());
                in_ball[static_cast<size_t>(f)] = 1;
                cells.push_back(f);
                for (int j = 0; j < dim; ++j) coords.push_back(y[static_cast<size_t>(j)]);
            }
            int j = dim - 1;
            while (j >= 0 && y[static_cast<size_t>(j)] == bound) {
                y[static_cast<size_t>(j)] = -bound;
                --j;
            }
            if (j < 0) break;
            ++y[static_cast<size_t>(j)];
        }
    }

    int64_t flat_of(const int* y) const {
        int64_t f = 0;
        for (int j = 0; j < dim; ++j) f = f * side + (y[j] + bound);
        return f;
    }

    int64_t flat_of(const LatticePoint& y) const {
        int64_t f = 0;
        for (int j = 0; j < dim; ++j) f = f * side + (y[j] + bound);
        return f;
    }

    bool contains_point(const LatticePoint& y) const {
        for (int j = 0; j < dim; ++j)
            if (std::abs(y[j]) > bound) return false;
        return in_ball[static_cast<size_t>(flat_of(y))] != 0;
    }
};

struct JumpOffsets {
    std::vector<int64_t> offsets; // flat-index displacement per jump
    std::vector<double> probs;
    std::vector<int> dz1; // first-coordinate displacement (half-space logic)
};

JumpOffsets make_offsets(const JumpDistribution& kernel, const BallDomain& dom) {
    JumpOffsets out;
    for (size_t i = 0; i < kernel.support.size(); ++i) {
        const auto& v = kernel.support[i];
        int64_t off = 0;
        for (int j = 0; j < dom.dim; ++j) off = off * dom.side + v[j];
        out.offsets.push_back(off);
        out.probs.push_back(kernel.probs[i]);
        out.dz1.push_back(v[0]);
    }
    return out;
}

std::vector<int64_t> target_cells(const WalkModel& model, const TargetSet& target,
                                  const BallDomain& dom, bool require_inside) {
    if (!(target.radius > 0)) throw ValidationError("target: radius must be positive");
    if (target.scale < 1) throw ValidationError("target: scale must be >= 1");
    if (static_cast<int>(target.center.size()) != model.dim)
        throw ValidationError("target: center dimension mismatch");
    const double n = static_cast<double>(target.scale);
    const double r2 = (n * target.radius) * (n * target.radius);
    std::vector<int64_t> out;
    bool any_outside = false;
    // Scan the bounding box of the target ball.
    std::vector<int> lo(static_cast<size_t>(model.dim)), hi(static_cast<size_t>(model.dim));
    for (int j = 0; j < model.dim; ++j) {
        lo[static_cast<size_t>(j)] = static_cast<int>(std::floor(n * target.center[j] - n * target.radius));
        hi[static_cast<size_t>(j)] = static_cast<int>(std::ceil(n * target.center[j] + n * target.radius));
    }
    std::vector<int> y = lo;
    for (;;) {
        double d2 = 0;
        for (int j = 0; j < model.dim; ++j) {
            const double dj = y[static_cast<size_t>(j)] - n * target.center[j];
            d2 += dj * dj;
        }
        const bool in_space = model.state_space == StateSpace::FullLattice || y[0] >= 0;
        if (d2 < r2 && in_space) {
            double n2 = 0;
            for (int j = 0; j < model.dim; ++j) n2 += double(y[static_cast<size_t>(j)]) * y[static_cast<size_t>(j)];
            if (n2 < dom.radius * dom.radius &&
                std::all_of(y.begin(), y.end(), [&](int c) { return std::abs(c) <= dom.bound; })) {
                out.push_back(dom.flat_of(y.data()));
            } else {
                any_outside = true;
            }
        }
        int j = model.dim - 1;
        while (j >= 0 && y[static_cast<size_t>(j)] == hi[static_cast<size_t>(j)]) {
            y[static_cast<size_t>(j)] = lo[static_cast<size_t>(j)];
            --j;
        }
        if (j < 0) break;
        ++y[static_cast<size_t>(j)];
    }
    if (require_inside && any_outside)
        throw ValidationError("target: set is not contained in the open ball of radius R");
    if (require_inside && out.empty())
        throw ValidationError("target: empty lattice set at this scale");
    return out;
}

struct StepSums {
    double live = 0;
    double in_target = 0;
};

// Per-cell probability of stepping outside the domain; depends only on
// geometry, so the absorbed mass can be tracked independently of the
// live-mass sum (conservation cross-check).
std::vector<double> absorb_probability(const WalkModel& model, const BallDomain& dom,
                                       const JumpOffsets& interior,
                                       const JumpOffsets* boundary) {
    std::vector<double> absorb(dom.cells.size(), 0.0);
    const bool halfspace = model.state_space == StateSpace::HalfSpace;
    for (size_t i = 0; i < dom.cells.size(); ++i) {
        const int64_t f = dom.cells[i];
        const int x1 = dom.coords[i * static_cast<size_t>(dom.dim)];
        const JumpOffsets& k = (halfspace && x1 == 0) ? *boundary : interior;
        double out = 0;
        for (size_t jmp = 0; jmp < k.offsets.size(); ++jmp)
            if (!dom.in_ball[static_cast<size_t>(f + k.offsets[jmp])]) out += k.probs[jmp];
        absorb[i] = out;
    }
    return absorb;
}

/// One kernel application in gather form over the domain cells. Writes
/// are per-cell, partial sums land in fixed chunk slots: results do not
/// depend on the thread count.
void apply_kernel(const WalkModel& model, const BallDomain& dom, const JumpOffsets& interior,
                  const JumpOffsets* boundary, const std::vector<double>& u,
                  std::vector<double>& u_next, const std::vector<uint8_t>& target_mask,
                  int threads, StepSums& sums) {
    const int64_t n_cells = static_cast<int64_t>(dom.cells.size());
    const int64_t chunk = 8192;
    const int64_t n_chunks = chunk_count(n_cells, chunk);
    std::vector<StepSums> partial(static_cast<size_t>(n_chunks));
    const bool halfspace = model.state_space == StateSpace::HalfSpace;

    parallel_chunks(n_cells, chunk, threads, [&](int64_t ci, int64_t beg, int64_t end) {
        StepSums s;
        for (int64_t i = beg; i < end; ++i) {
            const int64_t f = dom.cells[static_cast<size_t>(i)];
            double acc = 0;
            if (!halfspace) {
                for (size_t jmp = 0; jmp < interior.offsets.size(); ++jmp)
                    acc += interior.probs[jmp] * u[static_cast<size_t>(f - interior.offsets[jmp])];
            } else {
                const int y1 = dom.coords[static_cast<size_t>(i) * static_cast<size_t>(dom.dim)];
                for (size_t jmp = 0; jmp < interior.offsets.size(); ++jmp) {
                    const int x1 = y1 - interior.dz1[jmp];
                    if (x1 != 0)
                        acc += interior.probs[jmp] * u[static_cast<size_t>(f - interior.offsets[jmp])];
                }
                for (size_t jmp = 0; jmp < boundary->offsets.size(); ++jmp) {
                    const int x1 = y1 - boundary->dz1[jmp];
                    if (x1 == 0)
                        acc += boundary->probs[jmp] * u[static_cast<size_t>(f - boundary->offsets[jmp])];
                }
            }
            u_next[static_cast<size_t>(f)] = acc;
            s.live += acc;
            if (target_mask[static_cast<size_t>(f)]) s.in_target += acc;
        }
        partial[static_cast<size_t>(ci)] = s;
    });

    sums = StepSums{};
    for (const auto& p : partial) {
        sums.live += p.live;
        sums.in_target += p.in_target;
    }
}

} // namespace

LatticePoint nearest_lattice_point(const Vec& q, int64_t n) {
    LatticePoint z(q.size());
    for (int j = 0; j < q.size(); ++j) z[j] = static_cast<int>(std::llround(n * q[j]));
    return z;
}

GreenResult green_truncated(const WalkModel& model, const GreenQuery& query,
                            const GreenOptions& options) {
    model.validate();
    const double R = query.truncation_radius;
    if (!(R > 0)) throw ValidationError("green: truncation radius must be positive");
    if (static_cast<int>(query.z.size()) != model.dim)
        throw ValidationError("green: source dimension mismatch");
    if (!model.in_state_space(query.z))
        throw ValidationError("green: source outside the state space");
    if (query.z.cast<double>().norm() >= R)
        throw ValidationError("green: source must satisfy |z| < R");

    const BallDomain dom(model, R, options.max_cells);
    const JumpOffsets interior = make_offsets(model.interior, dom);
    JumpOffsets boundary_offsets;
    const JumpOffsets* boundary = nullptr;
    if (model.state_space == StateSpace::HalfSpace) {
        boundary_offsets = make_offsets(*model.boundary, dom);
        boundary = &boundary_offsets;
    }

    const auto targets = target_cells(model, query.target, dom, /*require_inside=*/true);
    std::vector<uint8_t> target_mask(static_cast<size_t>(dom.volume), 0);
    for (int64_t f : targets) target_mask[static_cast<size_t>(f)] = 1;

    std::vector<double> u(static_cast<size_t>(dom.volume), 0.0);
    std::vector<double> u_next(static_cast<size_t>(dom.volume), 0.0);
    const int64_t z_flat = dom.flat_of(query.z);
    if (!dom.in_ball[static_cast<size_t>(z_flat)])
        throw ValidationError("green: source not in the lattice ball");
    u[static_cast<size_t>(z_flat)] = 1.0;

    GreenResult res;
    res.radius = R;
    res.truncation_flag = true;

    const std::vector<double> absorb = absorb_probability(model, dom, interior, boundary);

    double live = 1.0;
    double absorbed = 0.0;
    double value = target_mask[static_cast<size_t>(z_flat)] ? 1.0 : 0.0;
    std::vector<double> profile{value};
    std::vector<double> live_history{1.0};

    const int64_t horizon =
        std::max(query.horizon > 0 ? query.horizon
                                   : static_cast<int64_t>(std::ceil(50.0 * R)),
                 query.min_horizon);

    const int64_t n_cells = static_cast<int64_t>(dom.cells.size());
    const int64_t n_chunks = chunk_count(n_cells, 8192);
    std::vector<double> absorb_partial(static_cast<size_t>(n_chunks));

    double tail_bound = 0.0;
    int64_t t = 0;
    while (t < horizon && live > 0) {
        // Outflow this step, summed independently of the gather.
        parallel_chunks(n_cells, 8192, options.threads, [&](int64_t ci, int64_t beg, int64_t end) {
            double s = 0;
            for (int64_t i = beg; i < end; ++i)
                s += absorb[static_cast<size_t>(i)] * u[static_cast<size_t>(dom.cells[static_cast<size_t>(i)])];
            absorb_partial[static_cast<size_t>(ci)] = s;
        });
        double absorbed_inc = 0;
        for (double s : absorb_partial) absorbed_inc += s;

        StepSums sums;
        apply_kernel(model, dom, interior, boundary, u, u_next, target_mask,
                     options.threads, sums);
        std::swap(u, u_next);
        ++t;
        absorbed += absorbed_inc;
        res.max_conservation_error =
            std::max(res.max_conservation_error, std::abs(live - sums.live - absorbed_inc));
        live = sums.live;
        value += sums.in_target;
        profile.push_back(sums.in_target);
        live_history.push_back(live);

        if (t >= query.min_horizon && t >= kContractionWindow && value > 0 && live > 0) {
            const double past = live_history[static_cast<size_t>(t - kContractionWindow)];
            if (past > 0) {
                const double rho = std::pow(live / past, 1.0 / kContractionWindow);
                if (rho < 1.0) {
                    const double bound = live / (1.0 - rho);
                    if (bound < kStopFraction * value) {
                        tail_bound = bound;
                        break;
                    }
                }
            }
        }
    }
    if (live > 0 && tail_bound == 0.0) {
        // Horizon reached before the live-mass rule fired: report the same
        // heuristic bound from the final contraction estimate.
        const int64_t back = std::min<int64_t>(t, kContractionWindow);
        const double past = live_history[static_cast<size_t>(t - back)];
        if (past > 0 && back > 0) {
            const double rho = std::pow(live / past, 1.0 / static_cast<double>(back));
            tail_bound = rho < 1.0 ? live / (1.0 - rho)
                                   : std::numeric_limits<double>::infinity();
        } else {
            tail_bound = 0.0;
        }
    }

    res.value = value;
    res.horizon_tail_bound = tail_bound;
    res.steps = t;
    res.live_mass = live;
    res.absorbed_mass = absorbed;
    if (query.want_profile) res.visits_profile = std::move(profile);
    return res;
}

GreenResult green_full(const WalkModel& model, const LatticePoint& z, const TargetSet& target,
                       double tol, const GreenOptions& options, bool want_profile,
                       int64_t min_horizon) {
    if (!(tol > 0)) throw ValidationError("green_full: tol must be positive");
    if (model.transience_mode == TransienceMode::Dimension && model.dim < 3)
        throw ValidationError("green_full: model is not transient (zero drift, d < 3)");

    const double n = static_cast<double>(target.scale);
    double R = 2.0 * (z.cast<double>().norm() + n * (target.center.norm() + target.radius) + 10.0);

    GreenResult prev;
    bool have_prev = false;
    for (int k = 0; k < 24; ++k) {
        GreenQuery q;
        q.z = z;
        q.target = target;
        q.truncation_radius = R;
        q.want_profile = want_profile;
        q.min_horizon = min_horizon;
        GreenResult cur = green_truncated(model, q, options);
        if (have_prev) {
            const double diff = std::abs(cur.value - prev.value);
            if (diff <= tol * std::max(cur.value, std::numeric_limits<double>::min())) {
                cur.truncation_flag = false;
                cur.error_estimate = diff;
                return cur;
            }
        }
        prev = std::move(cur);
        have_prev = true;
        R *= 2.0;
    }
    throw ComputeError("green_full: no convergence in R within the memory cap");
}

double scaled_measure(const WalkModel& model, int64_t n, const Vec& q0,
                      const TargetSet& target, const GreenOptions& options) {
    if (n < 1) throw ValidationError("scaled_measure: n must be >= 1");
    if (target.scale != n) throw ValidationError("scaled_measure: target scale != n");
    if (!model.in_reachable_cone(q0))
        throw ValidationError("scaled_measure: q0 outside the reachable cone");
    const LatticePoint z = nearest_lattice_point(q0, n);
    return green_full(model, z, target, 1e-9, options).value;
}

double localization_gap(const WalkModel& model, int64_t n, const Vec& q0,
                        const TargetSet& target, double R,
                        const GreenOptions& options) {
    if (n < 1) throw ValidationError("localization_gap: n must be >= 1");
    if (!(R > q0.norm()))
        throw ValidationError("localization_gap: requires R > |q0|");
    if (!(R > target.center.norm() + target.radius))
        throw ValidationError("localization_gap: requires R > |q'| + delta");

    const LatticePoint z = nearest_lattice_point(q0, n);
    const double inner_R = R * static_cast<double>(n);
    if (!(z.cast<double>().norm() < inner_R))
        throw ValidationError("localization_gap: source outside the inner ball");

    const double nn = static_cast<double>(target.scale);
    double big_R =
        std::max(2.0 * inner_R,
                 2.0 * (z.cast<double>().norm() + nn * (target.center.norm() + target.radius) + 10.0));

    // Two-layer occupancy on the outer ball: layer 0 mass has never left
    // the inner ball, layer 1 mass has. The gap is the target mass
    // accumulated by layer 1; no subtraction of near-equal numbers.
    auto run = [&](double outer_R) -> double {
        const BallDomain dom(model, outer_R, options.max_cells);
        const JumpOffsets interior = make_offsets(model.interior, dom);
        JumpOffsets boundary_offsets;
        const JumpOffsets* boundary = nullptr;
        if (model.state_space == StateSpace::HalfSpace) {
            boundary_offsets = make_offsets(*model.boundary, dom);
            boundary = &boundary_offsets;
        }
        const auto targets = target_cells(model, target, dom, true);
        std::vector<uint8_t> target_mask(static_cast<size_t>(dom.volume), 0);
        for (int64_t f : targets) target_mask[static_cast<size_t>(f)] = 1;

        // inner-ball membership per cell
        std::vector<uint8_t> inner_mask(static_cast<size_t>(dom.volume), 0);
        const double inner_R2 = inner_R * inner_R;
        for (size_t i = 0; i < dom.cells.size(); ++i) {
            double n2 = 0;
            for (int j = 0; j < dom.dim; ++j) {
                const double cj = dom.coords[i * static_cast<size_t>(dom.dim) + static_cast<size_t>(j)];
                n2 += cj * cj;
            }
            if (n2 < inner_R2) inner_mask[static_cast<size_t>(dom.cells[i])] = 1;
        }

        std::vector<double> u0(static_cast<size_t>(dom.volume), 0.0);
        std::vector<double> u1(static_cast<size_t>(dom.volume), 0.0);
        std::vector<double> u0n(u0), u1n(u1);
        u0[static_cast<size_t>(dom.flat_of(z))] = 1.0;

        double gap = 0.0, live = 1.0, value_total = 0.0;
        std::vector<double> live_hist{1.0};
        const int64_t horizon = static_cast<int64_t>(std::ceil(50.0 * outer_R));
        const int64_t n_cells = static_cast<int64_t>(dom.cells.size());
        const int64_t chunk = 8192;
        const int64_t n_chunks = chunk_count(n_cells, chunk);
        struct Sums { double live = 0, gap = 0, total = 0; };
        std::vector<Sums> partial(static_cast<size_t>(n_chunks));
        const bool halfspace = model.state_space == StateSpace::HalfSpace;

        int64_t t = 0;
        while (t < horizon && live > 0) {
            parallel_chunks(n_cells, chunk, options.threads, [&](int64_t ci, int64_t beg, int64_t end) {
                Sums s;
                for (int64_t i = beg; i < end; ++i) {
                    const int64_t f = dom.cells[static_cast<size_t>(i)];
                    double acc0 = 0, acc1 = 0;
                    if (!halfspace) {
                        for (size_t jmp = 0; jmp < interior.offsets.size(); ++jmp) {
                            const size_t src = static_cast<size_t>(f - interior.offsets[jmp]);
                            acc0 += interior.probs[jmp] * u0[src];
                            acc1 += interior.probs[jmp] * u1[src];
                        }
                    } else {
                        const int y1 = dom.coords[static_cast<size_t>(i) * static_cast<size_t>(dom.dim)];
                        for (size_t jmp = 0; jmp < interior.offsets.size(); ++jmp) {
                            const int x1 = y1 - interior.dz1[jmp];
                            if (x1 != 0) {
                                const size_t src = static_cast<size_t>(f - interior.offsets[jmp]);
                                acc0 += interior.probs[jmp] * u0[src];
                                acc1 += interior.probs[jmp] * u1[src];
                            }
                        }
                        for (size_t jmp = 0; jmp < boundary->offsets.size(); ++jmp) {
                            const int x1 = y1 - boundary->dz1[jmp];
                            if (x1 == 0) {
                                const size_t src = static_cast<size_t>(f - boundary->offsets[jmp]);
                                acc0 += boundary->probs[jmp] * u0[src];
                                acc1 += boundary->probs[jmp] * u1[src];
                            }
                        }
                    }
                    if (inner_mask[static_cast<size_t>(f)]) {
                        u0n[static_cast<size_t>(f)] = acc0;
                        u1n[static_cast<size_t>(f)] = acc1;
                    } else {
                        u0n[static_cast<size_t>(f)] = 0.0;
                        u1n[static_cast<size_t>(f)] = acc0 + acc1;
                    }
                    const double tot = u0n[static_cast<size_t>(f)] + u1n[static_cast<size_t>(f)];
                    s.live += tot;
                    if (target_mask[static_cast<size_t>(f)]) {
                        s.gap += u1n[static_cast<size_t>(f)];
                        s.total += tot;
                    }
                }
                partial[static_cast<size_t>(ci)] = s;
            });
            std::swap(u0, u0n);
            std::swap(u1, u1n);
            ++t;
            Sums step;
            for (const auto& p : partial) {
                step.live += p.live;
                step.gap += p.gap;
                step.total += p.total;
            }
            live = step.live;
            gap += step.gap;
            value_total += step.total;
            live_hist.push_back(live);

            if (t >= kContractionWindow && live > 0) {
                const double past = live_hist[static_cast<size_t>(t - kContractionWindow)];
                if (past > 0) {
                    const double rho = std::pow(live / past, 1.0 / kContractionWindow);
                    if (rho < 1.0 &&
                        live / (1.0 - rho) <
                            kStopFraction * std::max(value_total, std::numeric_limits<double>::min()))
                        break;
                }
            }
        }
        return gap;
    };

    double prev = run(big_R);
    for (int k = 0; k < 20; ++k) {
        big_R *= 2.0;
        const double cur = run(big_R);
        if (std::abs(cur - prev) <= 1e-9 * std::max(cur, std::numeric_limits<double>::min()))
            return cur;
        prev = cur;
    }
    throw ComputeError("localization_gap: no convergence in the outer radius");
}

void dump_profile(const std::filesystem::path& path, const std::vector<double>& profile) {
    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    if (!f) throw ValidationError("dump_profile: cannot open " + path.string());
    const char magic[4] = {'G', 'L', 'D', 'P'};
    const uint32_t version = 1;
    const uint64_t length = profile.size();
    std::fwrite(magic, 1, 4, f);
    std::fwrite(&version, sizeof version, 1, f);
    std::fwrite(&length, sizeof length, 1, f);
    if (!profile.empty()) std::fwrite(profile.data(), sizeof(double), profile.size(), f);
    std::fclose(f);
}

std::vector<double> read_profile(const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "rb");
    if (!f) throw ValidationError("read_profile: cannot open " + path.string());
    char magic[4];
    uint32_t version = 0;
    uint64_t length = 0;
    if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, "GLDP", 4) != 0 ||
        std::fread(&version, sizeof version, 1, f) != 1 || version != 1 ||
        std::fread(&length, sizeof length, 1, f) != 1) {
        std::fclose(f);
        throw ValidationError("read_profile: bad header in " + path.string());
    }
    std::vector<double> out(length);
    if (length > 0 && std::fread(out.data(), sizeof(double), length, f) != length) {
        std::fclose(f);
        throw ValidationError("read_profile: truncated payload in " + path.string());
    }
    std::fclose(f);
    return out;
}

} // namespace gldp
