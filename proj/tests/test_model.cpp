#include "gldp/model.hpp"

#include "gldp/errors.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace gldp;
using namespace gldp::test;

namespace {

const char* kWalk1dConfig = R"({
  "dim": 1,
  "state_space": "full",
  "interior": {"support": [[1], [-1]], "probs": [0.7, 0.3]}
})";

const char* kWalk2dConfig = R"({
  "dim": 2,
  "state_space": "full",
  "interior": {"support": [[1,0],[0,1],[-1,0],[0,-1]], "probs": [0.4, 0.3, 0.2, 0.1]}
})";

} // namespace

TEST_CASE("load_model parses the 1-D asymmetric walk") {
    const WalkModel m = load_model(kWalk1dConfig);
    CHECK(m.dim == 1);
    CHECK(m.state_space == StateSpace::FullLattice);
    CHECK(m.interior.support.size() == 2);
    // 0.7*1 + 0.3*(-1)
    CHECK(drift(m)[0] == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(m.transience_mode == TransienceMode::Drift);
}

TEST_CASE("load_model parses a 2-D drifted walk") {
    const WalkModel m = load_model(kWalk2dConfig);
    const Vec d = drift(m);
    CHECK(d[0] == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(d[1] == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("load_model rejects a bad probability sum with the offending value") {
    const char* bad = R"({"dim":1,"interior":{"support":[[1],[-1]],"probs":[0.5,0.6]}})";
    try {
        load_model(bad);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("probability sum") != std::string::npos);
        CHECK(msg.find("1.1") != std::string::npos);
    }
}

TEST_CASE("load_model rejects schema violations with field paths") {
    CHECK_THROWS_AS(load_model(R"({"dim":1})"), ValidationError);
    CHECK_THROWS_AS(load_model(R"({"interior":{"support":[[1]],"probs":[1.0]}})"), ValidationError);
    CHECK_THROWS_AS(load_model(R"({"dim":1,"interior":{"support":[],"probs":[]}})"), ValidationError);
    CHECK_THROWS_AS(load_model(R"({"dim":1,"interior":{"support":[[1],[1]],"probs":[0.5,0.5]}})"),
                    ValidationError);
    CHECK_THROWS_AS(load_model(R"({"dim":1,"state_space":"ring",
                                   "interior":{"support":[[1],[-1]],"probs":[0.5,0.5]}})"),
                    ValidationError);
    // halfspace without a boundary kernel
    CHECK_THROWS_AS(load_model(R"({"dim":2,"state_space":"halfspace",
                                   "interior":{"support":[[1,0],[-1,0],[0,1],[0,-1]],
                                               "probs":[0.25,0.25,0.25,0.25]}})"),
                    ValidationError);
}

TEST_CASE("loader does not renormalize near-miss probabilities") {
    // off by 1e-10: must be rejected, not silently scaled
    const char* off = R"({"dim":1,"interior":{"support":[[1],[-1]],"probs":[0.7,0.2999999999]}})";
    CHECK_THROWS_AS(load_model(off), ValidationError);
}

TEST_CASE("serialize round-trips exactly") {
    const WalkModel m = load_model(kWalk2dConfig);
    const WalkModel again = load_model(serialize(m));
    CHECK(again.dim == m.dim);
    CHECK(again.state_space == m.state_space);
    REQUIRE(again.interior.support.size() == m.interior.support.size());
    for (size_t i = 0; i < m.interior.support.size(); ++i) {
        CHECK(again.interior.support[i] == m.interior.support[i]);
        CHECK(again.interior.probs[i] == m.interior.probs[i]); // bitwise
    }

    const char* half = R"({
      "dim": 2, "state_space": "halfspace",
      "interior": {"support": [[1,0],[0,1],[-1,0],[0,-1]], "probs": [0.4,0.3,0.2,0.1]},
      "boundary": {"support": [[1,0],[0,1],[0,-1]], "probs": [0.5,0.25,0.25]}
    })";
    const WalkModel hm = load_model(half);
    const WalkModel hm2 = load_model(serialize(hm));
    REQUIRE(hm2.boundary.has_value());
    CHECK(hm2.boundary->probs == hm.boundary->probs);
    CHECK(hm2.state_space == StateSpace::HalfSpace);
}

TEST_CASE("drift of the symmetric walk is zero") {
    const WalkModel m = make_model(1, {{1}, {-1}}, {0.5, 0.5});
    CHECK(drift(m)[0] == doctest::Approx(0.0));
    CHECK(m.transience_mode == TransienceMode::Dimension);
}

TEST_CASE("step_kernel selects boundary kernel only on the hyperplane") {
    const char* half = R"({
      "dim": 2, "state_space": "halfspace",
      "interior": {"support": [[1,0],[0,1],[-1,0],[0,-1]], "probs": [0.4,0.3,0.2,0.1]},
      "boundary": {"support": [[1,0],[0,1],[0,-1]], "probs": [0.5,0.25,0.25]}
    })";
    const WalkModel m = load_model(half);
    CHECK(&step_kernel(m, lat2(0, 3)) == &*m.boundary);
    CHECK(&step_kernel(m, lat2(2, 3)) == &m.interior);
    CHECK_THROWS_AS(step_kernel(m, lat2(-1, 0)), ValidationError);

    const WalkModel full = walk2d_drifted();
    CHECK(&step_kernel(full, lat2(-5, 7)) == &full.interior);
}

TEST_CASE("communication_theta matches single-step costs on the 1-D walk") {
    const WalkModel m = walk1d();
    const auto cert_minus = communication_theta(m, {vec1(-1)});
    CHECK(cert_minus.theta == doctest::Approx(-std::log(0.3)).epsilon(1e-12));
    const auto cert_plus = communication_theta(m, {vec1(1)});
    CHECK(cert_plus.theta == doctest::Approx(-std::log(0.7)).epsilon(1e-12));
}

TEST_CASE("communication_theta on the symmetric 2-D walk is -log 1/4 per axis") {
    const WalkModel m = walk2d_symmetric();
    const std::vector<Vec> dirs = {vec2(1, 0), vec2(0, 1), vec2(-1, 0), vec2(0, -1)};
    const auto cert = communication_theta(m, dirs);
    CHECK(cert.theta == doctest::Approx(-std::log(0.25)).epsilon(1e-12));
}

TEST_CASE("witness paths satisfy the certificate inequality exactly as stated") {
    const WalkModel m = walk2d_drifted();
    const std::vector<Vec> dirs = {vec2(1, 0), vec2(0, -1),
                                   vec2(1 / std::sqrt(2.0), 1 / std::sqrt(2.0))};
    const auto cert = communication_theta(m, dirs);
    for (const auto& w : cert.witnesses) {
        REQUIRE(!w.steps.empty());
        // recompute path probability and net displacement from the steps
        double cost = 0;
        Vec net = Vec::Zero(2);
        for (int idx : w.steps) {
            cost += -std::log(m.interior.probs[static_cast<size_t>(idx)]);
            net += m.interior.support[static_cast<size_t>(idx)].cast<double>();
        }
        CHECK(cost == doctest::Approx(w.path_cost).epsilon(1e-12));
        CHECK((net - w.net_displacement).norm() == 0.0);
        CHECK(cost <= cert.theta * net.norm() + cert.theta + 1e-12);
    }
}

TEST_CASE("nearest-neighbor LP optimum equals the cheapest single step per direction") {
    // d = 1 and d = 2 nearest-neighbor models: enumerate the single-step
    // candidates by hand and compare.
    const WalkModel m1 = walk1d();
    CHECK(communication_theta(m1, {vec1(1)}).witnesses[0].lp_cost ==
          doctest::Approx(-std::log(0.7)).epsilon(1e-12));
    CHECK(communication_theta(m1, {vec1(-1)}).witnesses[0].lp_cost ==
          doctest::Approx(-std::log(0.3)).epsilon(1e-12));

    const WalkModel m2 = walk2d_drifted();
    const std::vector<std::pair<Vec, double>> cases = {
        {vec2(1, 0), -std::log(0.4)},
        {vec2(0, 1), -std::log(0.3)},
        {vec2(-1, 0), -std::log(0.2)},
        {vec2(0, -1), -std::log(0.1)},
    };
    for (const auto& [dir, expect] : cases) {
        const auto cert = communication_theta(m2, {dir});
        CHECK(cert.witnesses[0].lp_cost == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("communication_theta rejects directions outside the positive span") {
    // one-sided 1-D walk: only rightward steps
    const WalkModel m = make_model(1, {{1}, {2}}, {0.5, 0.5});
    CHECK_THROWS_AS(communication_theta(m, {vec1(-1)}), ValidationError);
}
