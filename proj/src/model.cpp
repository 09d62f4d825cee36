#include "gldp/model.hpp"

#include "gldp/errors.hpp"
#include "gldp/lp.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace gldp {

using json = nlohmann::json;

Vec JumpDistribution::mean() const {
    Vec m = Vec::Zero(dim());
    for (size_t i = 0; i < support.size(); ++i)
        m += probs[i] * support[i].cast<double>();
    return m;
}

double JumpDistribution::max_step_norm() const {
    double r = 0;
    for (const auto& v : support) r = std::max(r, v.cast<double>().norm());
    return r;
}

void JumpDistribution::validate(const std::string& path) const {
    if (support.empty()) throw ValidationError(path + ".support: empty support");
    if (support.size() != probs.size())
        throw ValidationError(path + ": support has " + std::to_string(support.size()) +
                              " entries but probs has " + std::to_string(probs.size()));
    const int d = dim();
    std::set<std::vector<int>> seen;
    for (size_t i = 0; i < support.size(); ++i) {
        if (static_cast<int>(support[i].size()) != d)
            throw ValidationError(path + ".support[" + std::to_string(i) + "]: dimension mismatch");
        std::vector<int> key(support[i].data(), support[i].data() + d);
        if (!seen.insert(key).second)
            throw ValidationError(path + ".support[" + std::to_string(i) + "]: duplicate step");
    }
    double sum = 0;
    for (size_t i = 0; i < probs.size(); ++i) {
        if (!(probs[i] > 0))
            throw ValidationError(path + ".probs[" + std::to_string(i) + "]: must be strictly positive");
        sum += probs[i];
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        std::ostringstream os;
        os.precision(17);
        os << path << ".probs: probability sum " << sum;
        throw ValidationError(os.str());
    }
}

void WalkModel::validate() const {
    if (dim <= 0) throw ValidationError("dim: must be a positive integer");
    interior.validate("interior");
    if (interior.dim() != dim) throw ValidationError("interior.support: dimension != dim");
    if (state_space == StateSpace::HalfSpace) {
        if (!boundary) throw ValidationError("boundary: required for halfspace models");
        boundary->validate("boundary");
        if (boundary->dim() != dim) throw ValidationError("boundary.support: dimension != dim");
        for (size_t i = 0; i < boundary->support.size(); ++i)
            if (boundary->support[i][0] < 0)
                throw ValidationError("boundary.support[" + std::to_string(i) +
                                      "]: step leaves the half-space from z1 = 0");
    }
    const Vec m = interior.mean();
    if (transience_mode == TransienceMode::Drift && !(m.norm() > 0))
        throw ValidationError("interior: zero drift is incompatible with drift transience");
    if (transience_mode == TransienceMode::Dimension) {
        // Zero-drift transience needs genuinely d-dimensional steps: the
        // support must not fit in a closed half-space through the origin.
        if (!in_hull_interior(interior.support, Vec::Zero(dim), 0.25))
            throw ValidationError(
                "interior.support: contained in a half-space through 0; "
                "dimension transience requires full-dimensional steps");
    }
}

namespace {

JumpDistribution parse_kernel(const json& j, const std::string& path, int dim) {
    JumpDistribution k;
    if (!j.contains("support"))
        throw ValidationError(path + ".support: missing");
    if (!j.contains("probs"))
        throw ValidationError(path + ".probs: missing");
    const auto& sup = j.at("support");
    if (!sup.is_array()) throw ValidationError(path + ".support: expected array of int arrays");
    for (size_t i = 0; i < sup.size(); ++i) {
        const auto& row = sup[i];
        if (!row.is_array())
            throw ValidationError(path + ".support[" + std::to_string(i) + "]: expected int array");
        LatticePoint v(dim);
        if (static_cast<int>(row.size()) != dim)
            throw ValidationError(path + ".support[" + std::to_string(i) + "]: expected " +
                                  std::to_string(dim) + " components");
        for (int c = 0; c < dim; ++c) {
            if (!row[static_cast<size_t>(c)].is_number_integer())
                throw ValidationError(path + ".support[" + std::to_string(i) + "][" +
                                      std::to_string(c) + "]: expected integer");
            v[c] = row[static_cast<size_t>(c)].get<int>();
        }
        k.support.push_back(std::move(v));
    }
    const auto& probs = j.at("probs");
    if (!probs.is_array()) throw ValidationError(path + ".probs: expected array of decimals");
    for (size_t i = 0; i < probs.size(); ++i) {
        if (!probs[i].is_number())
            throw ValidationError(path + ".probs[" + std::to_string(i) + "]: expected decimal");
        k.probs.push_back(probs[i].get<double>());
    }
    return k;
}

} // namespace

WalkModel load_model(const std::string& config_text) {
    json j;
    try {
        j = json::parse(config_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    WalkModel m;
    if (!j.contains("dim") || !j.at("dim").is_number_integer())
        throw ValidationError("dim: missing or not an integer");
    m.dim = j.at("dim").get<int>();
    if (m.dim <= 0) throw ValidationError("dim: must be a positive integer");

    std::string ss = j.value("state_space", std::string("full"));
    if (ss == "full") m.state_space = StateSpace::FullLattice;
    else if (ss == "halfspace") m.state_space = StateSpace::HalfSpace;
    else throw ValidationError("state_space: expected \"full\" or \"halfspace\", got \"" + ss + "\"");

    if (!j.contains("interior")) throw ValidationError("interior: missing");
    m.interior = parse_kernel(j.at("interior"), "interior", m.dim);
    if (j.contains("boundary")) m.boundary = parse_kernel(j.at("boundary"), "boundary", m.dim);

    m.transience_mode =
        m.interior.mean().norm() > 0 ? TransienceMode::Drift : TransienceMode::Dimension;

    m.validate();
    return m;
}

WalkModel load_model_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open model config: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return load_model(buf.str());
}

namespace {

json kernel_to_json(const JumpDistribution& k) {
    json j;
    j["support"] = json::array();
    for (const auto& v : k.support) {
        json row = json::array();
        for (int c = 0; c < v.size(); ++c) row.push_back(v[c]);
        j["support"].push_back(std::move(row));
    }
    j["probs"] = k.probs;
    return j;
}

} // namespace

std::string serialize(const WalkModel& model) {
    json j;
    j["dim"] = model.dim;
    j["state_space"] = model.state_space == StateSpace::FullLattice ? "full" : "halfspace";
    j["interior"] = kernel_to_json(model.interior);
    if (model.boundary) j["boundary"] = kernel_to_json(*model.boundary);
    return j.dump(2) + "\n";
}

Vec drift(const WalkModel& model) { return model.interior.mean(); }

const JumpDistribution& step_kernel(const WalkModel& model, const LatticePoint& z) {
    if (!model.in_state_space(z))
        throw ValidationError("step_kernel: point outside the state space");
    if (model.state_space == StateSpace::HalfSpace && z[0] == 0) return *model.boundary;
    return model.interior;
}

CommunicationCertificate communication_theta(const WalkModel& model,
                                             const std::vector<Vec>& directions) {
    const auto& kernel = model.interior;
    const int d = model.dim;
    const int k = static_cast<int>(kernel.support.size());

    Mat V(d, k);
    Vec cost(k);
    for (int j = 0; j < k; ++j) {
        V.col(j) = kernel.support[static_cast<size_t>(j)].cast<double>();
        cost[j] = -std::log(kernel.probs[static_cast<size_t>(j)]);
    }

    CommunicationCertificate cert;
    for (const auto& u : directions) {
        if (static_cast<int>(u.size()) != d)
            throw ValidationError("communication_theta: direction dimension mismatch");
        if (!model.in_reachable_cone(u))
            throw ValidationError("communication_theta: direction leaves the reachable cone");
        auto sol = lp_min_eq_nonneg(V, u, cost);
        if (!sol)
            throw ValidationError(
                "communication_theta: direction not in the positive span of the support; "
                "the communication condition cannot be certified for it");
        DirectionWitness w;
        w.direction = u;
        w.lp_cost = sol->cost;
        cert.witnesses.push_back(std::move(w));
        cert.theta = std::max(cert.theta, sol->cost);
    }

    // Build integer witness paths: scale the optimal mix until rounding
    // satisfies the certificate inequality with one theta of slack.
    size_t wi = 0;
    for (const auto& u : directions) {
        auto sol = lp_min_eq_nonneg(V, u, cost);
        DirectionWitness& w = cert.witnesses[wi++];
        bool found = false;
        for (int L = 1; L <= 512 && !found; ++L) {
            std::vector<int> counts(static_cast<size_t>(k));
            double path_cost = 0;
            Vec net = Vec::Zero(d);
            for (int j = 0; j < k; ++j) {
                counts[static_cast<size_t>(j)] = static_cast<int>(std::llround(L * sol->x[j]));
                path_cost += counts[static_cast<size_t>(j)] * cost[j];
                net += counts[static_cast<size_t>(j)] * V.col(j);
            }
            const double len = net.norm();
            if (len <= 0) continue;
            if (path_cost <= cert.theta * len + cert.theta) {
                w.steps.clear();
                for (int j = 0; j < k; ++j)
                    for (int r = 0; r < counts[static_cast<size_t>(j)]; ++r) w.steps.push_back(j);
                w.net_displacement = net;
                w.path_cost = path_cost;
                found = true;
            }
        }
        if (!found)
            throw ComputeError("communication_theta: no integer witness path within scale 512");
    }
    return cert;
}

} // namespace gldp
