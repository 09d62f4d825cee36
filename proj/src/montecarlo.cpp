#include "gldp/montecarlo.hpp"

#include "gldp/cgf.hpp"
#include "gldp/errors.hpp"
#include "gldp/parallel.hpp"
#include "gldp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gldp {

JumpDistribution tilted_kernel(const WalkModel& model, const Vec& a) {
    const CGFEval e = phi(model, a);
    JumpDistribution out;
    out.support = model.interior.support;
    out.probs.reserve(model.interior.probs.size());
    for (size_t i = 0; i < model.interior.probs.size(); ++i) {
        const double ev = a.dot(model.interior.support[i].cast<double>());
        out.probs.push_back(model.interior.probs[i] * std::exp(ev) / e.phi);
    }
    return out;
}

namespace {

struct PathAccum {
    double sum = 0;
    double sum_sq = 0;
    double abs_sum = 0; // for the effective sample size
};

// Cumulative table for inverse-CDF sampling of a small support.
struct DiscreteSampler {
    std::vector<double> cum;
    explicit DiscreteSampler(const std::vector<double>& probs) {
        double s = 0;
        for (double p : probs) {
            s += p;
            cum.push_back(s);
        }
        cum.back() = std::numeric_limits<double>::infinity(); // guard roundoff
    }
    size_t draw(Rng& rng) const {
        const double x = rng.uniform();
        size_t i = 0;
        while (cum[i] <= x) ++i;
        return i;
    }
};

void validate_cfg(const SamplerConfig& cfg) {
    if (cfg.paths < 1) throw ValidationError("montecarlo: paths must be >= 1");
    if (cfg.horizon < 0) throw ValidationError("montecarlo: horizon must be >= 1 (0 = auto)");
}

int64_t resolve_horizon(const SamplerConfig& cfg, double distance) {
    if (cfg.horizon > 0) return cfg.horizon;
    return std::max<int64_t>(100, static_cast<int64_t>(std::ceil(20.0 * distance)));
}

MCEstimate reduce(const std::vector<PathAccum>& partial, int64_t paths) {
    PathAccum tot;
    for (const auto& p : partial) {
        tot.sum += p.sum;
        tot.sum_sq += p.sum_sq;
        tot.abs_sum += p.abs_sum;
    }
    MCEstimate est;
    est.paths_used = paths;
    const double n = static_cast<double>(paths);
    est.mean = tot.sum / n;
    if (paths > 1) {
        const double var = std::max(0.0, (tot.sum_sq - tot.sum * tot.sum / n) / (n - 1.0));
        est.std_error = std::sqrt(var / n);
    }
    est.ess = tot.sum_sq > 0 ? tot.abs_sum * tot.abs_sum / tot.sum_sq : 0.0;
    est.low_ess_warning = est.ess < 0.01 * n;
    return est;
}

} // namespace

MCEstimate mc_green(const WalkModel& model, const LatticePoint& z, const TargetSet& target,
                    const SamplerConfig& cfg, int threads) {
    validate_cfg(cfg);
    if (!model.in_state_space(z)) throw ValidationError("mc_green: source outside state space");
    const int d = model.dim;
    const Vec a = cfg.tilt.size() == d ? cfg.tilt : Vec::Zero(d);
    const CGFEval cg = phi(model, a);
    if (std::abs(cg.phi - 1.0) > 1e-9)
        throw ValidationError("mc_green: tilt must lie on the level set {phi(a) = 1}");

    const JumpDistribution tilted = tilted_kernel(model, a);
    const DiscreteSampler interior_sampler(tilted.probs);

    // Half-space models keep the interior tilt off the boundary and use
    // the untilted boundary kernel on it, with an exact per-step weight.
    std::optional<DiscreteSampler> boundary_sampler;
    if (model.state_space == StateSpace::HalfSpace)
        boundary_sampler.emplace(model.boundary->probs);

    const Vec center = target.center * static_cast<double>(target.scale);
    const double dist = (center - z.cast<double>()).norm() +
                        target.radius * static_cast<double>(target.scale);
    const int64_t horizon = resolve_horizon(cfg, dist);
    const double r2 =
        (target.radius * static_cast<double>(target.scale)) * (target.radius * static_cast<double>(target.scale));

    const bool halfspace = model.state_space == StateSpace::HalfSpace;
    const int64_t chunk = 1024;
    const int64_t n_chunks = chunk_count(cfg.paths, chunk);
    std::vector<PathAccum> partial(static_cast<size_t>(n_chunks));

    parallel_chunks(cfg.paths, chunk, threads, [&](int64_t ci, int64_t beg, int64_t end) {
        PathAccum acc;
        std::vector<int64_t> pos(static_cast<size_t>(d));
        for (int64_t path = beg; path < end; ++path) {
            Rng rng = substream(cfg.seed, static_cast<uint64_t>(path));
            for (int j = 0; j < d; ++j) pos[static_cast<size_t>(j)] = z[j];
            // log-weight tracked through the integer displacement; with
            // phi(a) = 1 it equals -a.(Z_t - z) exactly
            double path_value = 0;
            double extra_log_weight = 0; // boundary-step corrections only
            auto in_target = [&]() {
                double d2 = 0;
                for (int j = 0; j < d; ++j) {
                    const double dj = static_cast<double>(pos[static_cast<size_t>(j)]) - center[j];
                    d2 += dj * dj;
                }
                return d2 < r2;
            };
            auto weight = [&]() {
                double adisp = 0;
                for (int j = 0; j < d; ++j)
                    adisp += a[j] * (static_cast<double>(pos[static_cast<size_t>(j)]) - z[j]);
                return std::exp(-adisp + extra_log_weight);
            };
            if (in_target()) path_value += weight();
            for (int64_t t = 0; t < horizon; ++t) {
                if (halfspace && pos[0] == 0) {
                    const size_t j = boundary_sampler->draw(rng);
                    const auto& v = model.boundary->support[j];
                    for (int c = 0; c < d; ++c) pos[static_cast<size_t>(c)] += v[c];
                    // untilted boundary step: the position-only formula
                    // assumed a tilted interior step, so correct by the
                    // ratio of the two step weights
                    const double av = a.dot(v.cast<double>());
                    extra_log_weight += av;
                } else {
                    const size_t j = interior_sampler.draw(rng);
                    const auto& v = tilted.support[j];
                    for (int c = 0; c < d; ++c) pos[static_cast<size_t>(c)] += v[c];
                }
                if (in_target()) path_value += weight();
            }
            acc.sum += path_value;
            acc.sum_sq += path_value * path_value;
            acc.abs_sum += std::abs(path_value);
        }
        partial[static_cast<size_t>(ci)] = acc;
    });

    return reduce(partial, cfg.paths);
}

HittingEstimate mc_hitting(const WalkModel& model, const LatticePoint& z,
                           const LatticePoint& z_prime, const SamplerConfig& cfg,
                           double theta, int threads) {
    validate_cfg(cfg);
    if (!model.in_state_space(z) || !model.in_state_space(z_prime))
        throw ValidationError("mc_hitting: endpoint outside state space");
    const int d = model.dim;
    const Vec a = cfg.tilt.size() == d ? cfg.tilt : Vec::Zero(d);
    const CGFEval cg = phi(model, a);
    if (std::abs(cg.phi - 1.0) > 1e-9)
        throw ValidationError("mc_hitting: tilt must lie on the level set {phi(a) = 1}");

    const double dist = (z_prime - z).cast<double>().norm();
    HittingEstimate out;
    out.certificate_log_bound = -theta * dist;

    if (dist == 0.0) {
        out.estimate.mean = 1.0;
        out.estimate.paths_used = cfg.paths;
        out.estimate.ess = static_cast<double>(cfg.paths);
        out.log_estimate = 0.0;
        out.ratio = 0.0;
        return out;
    }

    const JumpDistribution tilted = tilted_kernel(model, a);
    const DiscreteSampler interior_sampler(tilted.probs);
    std::optional<DiscreteSampler> boundary_sampler;
    if (model.state_space == StateSpace::HalfSpace)
        boundary_sampler.emplace(model.boundary->probs);
    const bool halfspace = model.state_space == StateSpace::HalfSpace;

    const int64_t horizon = resolve_horizon(cfg, dist);
    const int64_t chunk = 1024;
    const int64_t n_chunks = chunk_count(cfg.paths, chunk);
    std::vector<PathAccum> partial(static_cast<size_t>(n_chunks));

    parallel_chunks(cfg.paths, chunk, threads, [&](int64_t ci, int64_t beg, int64_t end) {
        PathAccum acc;
        std::vector<int64_t> pos(static_cast<size_t>(d));
        for (int64_t path = beg; path < end; ++path) {
            Rng rng = substream(cfg.seed, static_cast<uint64_t>(path));
            for (int j = 0; j < d; ++j) pos[static_cast<size_t>(j)] = z[j];
            double extra_log_weight = 0;
            double x = 0; // per-path estimator value
            for (int64_t t = 0; t <= horizon; ++t) {
                bool hit = true;
                for (int j = 0; j < d; ++j)
                    if (pos[static_cast<size_t>(j)] != z_prime[j]) { hit = false; break; }
                if (hit) {
                    double adisp = 0;
                    for (int j = 0; j < d; ++j)
                        adisp += a[j] * (static_cast<double>(pos[static_cast<size_t>(j)]) - z[j]);
                    x = std::exp(-adisp + extra_log_weight);
                    break;
                }
                if (t == horizon) break;
                if (halfspace && pos[0] == 0) {
                    const size_t j = boundary_sampler->draw(rng);
                    const auto& v = model.boundary->support[j];
                    for (int c = 0; c < d; ++c) pos[static_cast<size_t>(c)] += v[c];
                    extra_log_weight += a.dot(v.cast<double>());
                } else {
                    const size_t j = interior_sampler.draw(rng);
                    const auto& v = tilted.support[j];
                    for (int c = 0; c < d; ++c) pos[static_cast<size_t>(c)] += v[c];
                }
            }
            acc.sum += x;
            acc.sum_sq += x * x;
            acc.abs_sum += std::abs(x);
        }
        partial[static_cast<size_t>(ci)] = acc;
    });

    out.estimate = reduce(partial, cfg.paths);
    out.log_estimate = out.estimate.mean > 0 ? std::log(out.estimate.mean)
                                             : -std::numeric_limits<double>::infinity();
    out.ratio = out.certificate_log_bound != 0 ? out.log_estimate / out.certificate_log_bound : 0.0;
    return out;
}

} // namespace gldp
