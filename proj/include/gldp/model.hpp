#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gldp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using LatticePoint = Eigen::VectorXi;

/// Finite-support step law on the integer lattice.
struct JumpDistribution {
    std::vector<LatticePoint> support;
    std::vector<double> probs;

    int dim() const { return support.empty() ? 0 : static_cast<int>(support[0].size()); }
    Vec mean() const;
    double max_step_norm() const;

    /// Throws ValidationError with `path` as the field-path prefix.
    void validate(const std::string& path) const;
};

enum class StateSpace { FullLattice, HalfSpace };
enum class TransienceMode { Drift, Dimension };

/// A random walk on Z^d (FullLattice) or on the half-lattice {z1 >= 0}
/// (HalfSpace, with a separate kernel on the hyperplane z1 = 0).
struct WalkModel {
    int dim = 0;
    JumpDistribution interior;
    std::optional<JumpDistribution> boundary;
    StateSpace state_space = StateSpace::FullLattice;
    TransienceMode transience_mode = TransienceMode::Drift;

    void validate() const;
    bool homogeneous() const { return state_space == StateSpace::FullLattice; }
    bool in_state_space(const LatticePoint& z) const {
        return state_space == StateSpace::FullLattice || z[0] >= 0;
    }
    /// Closed cone of scaled-state limit points.
    bool in_reachable_cone(const Vec& q, double tol = 1e-12) const {
        return state_space == StateSpace::FullLattice || q[0] >= -tol;
    }
};

/// Parse a model from its config document (see README for the schema).
/// Probabilities are taken literally; the loader never renormalizes.
WalkModel load_model(const std::string& config_text);
WalkModel load_model_file(const std::filesystem::path& path);

/// Inverse of load_model up to formatting: load_model(serialize(m)) == m
/// field for field.
std::string serialize(const WalkModel& model);

/// Mean step of the interior kernel.
Vec drift(const WalkModel& model);

/// One-step law at z: boundary kernel on {z1 = 0} for HalfSpace models,
/// interior kernel everywhere else.
const JumpDistribution& step_kernel(const WalkModel& model, const LatticePoint& z);

struct DirectionWitness {
    Vec direction;           // requested unit vector
    double lp_cost;          // optimal cost per unit displacement
    std::vector<int> steps;  // witness path as indices into interior support
    Vec net_displacement;
    double path_cost;        // -log of the path probability
};

/// Feasible theta for the communication condition: per direction u the
/// cheapest nonnegative step mix with unit net displacement, theta = max
/// of the per-direction optima. Witness paths are integer roundings
/// checked against the certificate inequality.
struct CommunicationCertificate {
    double theta = 0.0;
    std::vector<DirectionWitness> witnesses;
};

CommunicationCertificate communication_theta(const WalkModel& model,
                                             const std::vector<Vec>& directions);

} // namespace gldp
