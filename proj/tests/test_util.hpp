#pragma once

#include "gldp/model.hpp"

#include <vector>

namespace gldp::test {

inline WalkModel make_model(int dim, const std::vector<std::vector<int>>& support,
                            const std::vector<double>& probs,
                            StateSpace space = StateSpace::FullLattice) {
    WalkModel m;
    m.dim = dim;
    for (const auto& s : support) {
        LatticePoint v(dim);
        for (int j = 0; j < dim; ++j) v[j] = s[static_cast<size_t>(j)];
        m.interior.support.push_back(v);
    }
    m.interior.probs = probs;
    m.state_space = space;
    m.transience_mode =
        m.interior.mean().norm() > 0 ? TransienceMode::Drift : TransienceMode::Dimension;
    return m;
}

inline WalkModel walk1d() { return make_model(1, {{1}, {-1}}, {0.7, 0.3}); }

inline WalkModel walk2d_drifted() {
    return make_model(2, {{1, 0}, {0, 1}, {-1, 0}, {0, -1}}, {0.4, 0.3, 0.2, 0.1});
}

inline WalkModel walk2d_symmetric() {
    return make_model(2, {{1, 0}, {0, 1}, {-1, 0}, {0, -1}}, {0.25, 0.25, 0.25, 0.25});
}

inline Vec vec1(double x) {
    Vec v(1);
    v[0] = x;
    return v;
}

inline Vec vec2(double x, double y) {
    Vec v(2);
    v[0] = x;
    v[1] = y;
    return v;
}

inline LatticePoint lat1(int x) {
    LatticePoint z(1);
    z[0] = x;
    return z;
}

inline LatticePoint lat2(int x, int y) {
    LatticePoint z(2);
    z[0] = x;
    z[1] = y;
    return z;
}

} // namespace gldp::test
