#include "gldp/green.hpp"

#include "gldp/errors.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace gldp;
using namespace gldp::test;

namespace {

// Test-side oracle: dense solve of (I - P_R)' u = delta_z on the 1-D ball
// {|y| < R}, value = sum of u over the target cells. Independent of the
// occupancy iteration.
double dense_oracle_1d(const WalkModel& m, int z, const TargetSet& target, double R) {
    const int B = static_cast<int>(std::ceil(R)) - 1; // |y| <= B inside the open ball
    const int n = 2 * B + 1;
    auto idx = [&](int y) { return y + B; };
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
    for (int y = -B; y <= B; ++y)
        for (size_t j = 0; j < m.interior.support.size(); ++j) {
            const int dest = y + m.interior.support[j][0];
            if (std::abs(dest) <= B) A(idx(dest), idx(y)) -= m.interior.probs[j];
        }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs[idx(z)] = 1.0;
    const Eigen::VectorXd u = A.partialPivLu().solve(rhs);
    const double nn = static_cast<double>(target.scale);
    double value = 0;
    for (int y = -B; y <= B; ++y)
        if (std::abs(y - nn * target.center[0]) < nn * target.radius) value += u[idx(y)];
    return value;
}

// Same oracle in 2-D via a sparse factorization.
double sparse_oracle_2d(const WalkModel& m, const LatticePoint& z, const TargetSet& target,
                        double R) {
    const int B = static_cast<int>(std::ceil(R));
    const int side = 2 * B + 1;
    std::vector<int> id(static_cast<size_t>(side) * side, -1);
    std::vector<std::pair<int, int>> cells;
    for (int x = -B; x <= B; ++x)
        for (int y = -B; y <= B; ++y)
            if (double(x) * x + double(y) * y < R * R) {
                id[static_cast<size_t>((x + B) * side + (y + B))] = static_cast<int>(cells.size());
                cells.emplace_back(x, y);
            }
    const int n = static_cast<int>(cells.size());
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < n; ++i) {
        trips.emplace_back(i, i, 1.0);
        for (size_t j = 0; j < m.interior.support.size(); ++j) {
            const int dx = cells[static_cast<size_t>(i)].first + m.interior.support[j][0];
            const int dy = cells[static_cast<size_t>(i)].second + m.interior.support[j][1];
            if (std::abs(dx) > B || std::abs(dy) > B) continue;
            const int dst = id[static_cast<size_t>((dx + B) * side + (dy + B))];
            if (dst >= 0) trips.emplace_back(dst, i, -m.interior.probs[j]);
        }
    }
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    REQUIRE(lu.info() == Eigen::Success);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs[id[static_cast<size_t>((z[0] + B) * side + (z[1] + B))]] = 1.0;
    const Eigen::VectorXd u = lu.solve(rhs);
    const double nn = static_cast<double>(target.scale);
    double value = 0;
    for (int i = 0; i < n; ++i) {
        const double ddx = cells[static_cast<size_t>(i)].first - nn * target.center[0];
        const double ddy = cells[static_cast<size_t>(i)].second - nn * target.center[1];
        if (ddx * ddx + ddy * ddy < nn * target.radius * nn * target.radius) value += u[i];
    }
    return value;
}

TargetSet point_target_1d(int y) { return TargetSet{vec1(y), 0.5, 1}; }

} // namespace

TEST_CASE("expected visits to the origin: renewal value 2.5") {
    const WalkModel m = walk1d();
    GreenQuery q;
    q.z = lat1(0);
    q.target = point_target_1d(0);
    q.truncation_radius = 200;
    const GreenResult r = green_truncated(m, q);
    // return probability of the asymmetric walk is 2q = 0.6
    CHECK(r.value == doctest::Approx(2.5).epsilon(1e-9));
    CHECK(r.truncation_flag);

    const GreenResult full = green_full(m, lat1(0), point_target_1d(0), 1e-9);
    CHECK(full.value == doctest::Approx(2.5).epsilon(1e-9));
    CHECK_FALSE(full.truncation_flag);
}

TEST_CASE("gambler's-ruin geometry: G(0,{-y}) = 2.5 (3/7)^y") {
    const WalkModel m = walk1d();
    for (int y : {1, 5, 10, 15}) {
        const double expect = 2.5 * std::pow(3.0 / 7.0, y);
        const GreenResult r = green_full(m, lat1(0), point_target_1d(-y), 1e-9);
        CHECK(std::abs(r.value - expect) <= 1e-6 * expect);
    }
}

TEST_CASE("successive-site ratio is p/q = 7/3") {
    const WalkModel m = walk1d();
    double prev = green_full(m, lat1(0), point_target_1d(-1), 1e-9).value;
    for (int y = 2; y <= 16; ++y) {
        const double cur = green_full(m, lat1(0), point_target_1d(-y), 1e-9).value;
        CHECK(prev / cur == doctest::Approx(7.0 / 3.0).epsilon(1e-6));
        prev = cur;
    }
}

TEST_CASE("green_truncated equals the dense linear-solve oracle in 1-D") {
    const WalkModel m = walk1d();
    for (double R : {40.0, 60.0}) {
        for (int target_y : {0, -3, 7}) {
            GreenQuery q;
            q.z = lat1(0);
            q.target = point_target_1d(target_y);
            q.truncation_radius = R;
            const double engine = green_truncated(m, q).value;
            const double oracle = dense_oracle_1d(m, 0, q.target, R);
            CHECK(std::abs(engine - oracle) <= 1e-9 * std::max(1.0, oracle));
        }
    }
}

TEST_CASE("green_truncated equals the sparse-solve oracle in 2-D") {
    const WalkModel m = walk2d_drifted();
    for (double R : {15.0, 25.0}) {
        GreenQuery q;
        q.z = lat2(0, 0);
        q.target = TargetSet{Vec::Zero(2), 0.5, 1};
        q.truncation_radius = R;
        const double engine = green_truncated(m, q).value;
        const double oracle = sparse_oracle_2d(m, lat2(0, 0), q.target, R);
        CHECK(std::abs(engine - oracle) <= 1e-9 * std::max(1.0, oracle));
    }
}

TEST_CASE("green_full matches the big-box sparse oracle in 2-D") {
    const WalkModel m = walk2d_drifted();
    const TargetSet t{Vec::Zero(2), 0.5, 1};
    const double full = green_full(m, lat2(0, 0), t, 1e-9).value;
    const double oracle = sparse_oracle_2d(m, lat2(0, 0), t, 80.0);
    CHECK(std::abs(full - oracle) <= 1e-6 * std::max(1.0, oracle));
}

TEST_CASE("value is monotone in R, horizon, and target inclusion") {
    const WalkModel m = walk1d();
    GreenQuery q;
    q.z = lat1(0);
    q.target = point_target_1d(-4);
    q.truncation_radius = 30;
    const double v30 = green_truncated(m, q).value;
    q.truncation_radius = 60;
    const double v60 = green_truncated(m, q).value;
    q.truncation_radius = 120;
    const double v120 = green_truncated(m, q).value;
    CHECK(v60 >= v30);
    CHECK(v120 >= v60);

    q.truncation_radius = 60;
    q.horizon = 20;
    const double h20 = green_truncated(m, q).value;
    q.horizon = 80;
    const double h80 = green_truncated(m, q).value;
    q.horizon = 0;
    const double hfull = green_truncated(m, q).value;
    CHECK(h80 >= h20);
    CHECK(hfull >= h80);

    // target inclusion: wider delta dominates
    GreenQuery wide = q;
    wide.target = TargetSet{vec1(-4), 1.5, 1};
    CHECK(green_truncated(m, wide).value >= hfull);
}

TEST_CASE("probability is conserved step by step") {
    for (const WalkModel& m : {walk1d(), walk2d_drifted()}) {
        GreenQuery q;
        q.z = LatticePoint::Zero(m.dim);
        q.target = TargetSet{Vec::Zero(m.dim), 0.5, 1};
        q.truncation_radius = 25;
        const GreenResult r = green_truncated(m, q);
        CHECK(r.max_conservation_error < 1e-12);
        CHECK(r.live_mass + r.absorbed_mass == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("the visits profile sums to the value and dumps round-trip") {
    const WalkModel m = walk1d();
    GreenQuery q;
    q.z = lat1(0);
    q.target = point_target_1d(-2);
    q.truncation_radius = 50;
    q.want_profile = true;
    const GreenResult r = green_truncated(m, q);
    double sum = 0;
    for (double x : r.visits_profile) sum += x;
    CHECK(sum == doctest::Approx(r.value).epsilon(1e-12));

    const auto path = std::filesystem::temp_directory_path() / "gldp_profile_test.bin";
    dump_profile(path, r.visits_profile);
    // header layout: magic, u32 version, u64 length = 16 bytes
    {
        std::FILE* f = std::fopen(path.string().c_str(), "rb");
        REQUIRE(f != nullptr);
        char header[16];
        REQUIRE(std::fread(header, 1, 16, f) == 16);
        CHECK(std::string(header, 4) == "GLDP");
        std::fclose(f);
        CHECK(std::filesystem::file_size(path) == 16 + 8 * r.visits_profile.size());
    }
    const auto back = read_profile(path);
    REQUIRE(back.size() == r.visits_profile.size());
    for (size_t i = 0; i < back.size(); ++i) CHECK(back[i] == r.visits_profile[i]);
    std::filesystem::remove(path);
}

TEST_CASE("scaled_measure reproduces the geometric-sum value at n = 20") {
    const WalkModel m = walk1d();
    // sum over {|y + 20| < 5} of 2.5 (3/7)^|y|
    double expect = 0;
    for (int y = 16; y <= 24; ++y) expect += 2.5 * std::pow(3.0 / 7.0, y);
    const double got = scaled_measure(m, 20, Vec::Zero(1), TargetSet{vec1(-1), 0.25, 20});
    CHECK(got == doctest::Approx(expect).epsilon(1e-8));

    // n = 1 reduces to the plain Green value
    CHECK(scaled_measure(m, 1, Vec::Zero(1), TargetSet{vec1(0), 0.5, 1}) ==
          doctest::Approx(2.5).epsilon(1e-9));
}

TEST_CASE("scaled_measure is monotone in the target radius") {
    const WalkModel m = walk1d();
    const double narrow = scaled_measure(m, 10, Vec::Zero(1), TargetSet{vec1(-1), 0.2, 10});
    const double wide = scaled_measure(m, 10, Vec::Zero(1), TargetSet{vec1(-1), 0.4, 10});
    CHECK(wide >= narrow);
}

TEST_CASE("validation: target outside the ball, source outside the ball") {
    const WalkModel m = walk1d();
    GreenQuery q;
    q.z = lat1(0);
    q.target = point_target_1d(-50);
    q.truncation_radius = 20; // target disjoint from the ball
    CHECK_THROWS_AS(green_truncated(m, q), ValidationError);

    GreenQuery q2;
    q2.z = lat1(30);
    q2.target = point_target_1d(0);
    q2.truncation_radius = 20; // |z| >= R
    CHECK_THROWS_AS(green_truncated(m, q2), ValidationError);
}

TEST_CASE("green_full refuses non-transient models") {
    const WalkModel sym = make_model(1, {{1}, {-1}}, {0.5, 0.5});
    CHECK_THROWS_AS(green_full(sym, lat1(0), point_target_1d(0), 1e-9), ValidationError);
}

TEST_CASE("memory cap fires with the required cell count in the message") {
    const WalkModel m = walk2d_drifted();
    GreenQuery q;
    q.z = lat2(0, 0);
    q.target = TargetSet{Vec::Zero(2), 0.5, 1};
    q.truncation_radius = 500;
    GreenOptions opt;
    opt.max_cells = 10'000;
    try {
        green_truncated(m, q, opt);
        FAIL("expected ComputeError");
    } catch (const ComputeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("cells") != std::string::npos);
        CHECK(msg.find("10000") != std::string::npos);
    }
}

TEST_CASE("localization gap: huge R errs on the side of zero") {
    const WalkModel m = walk1d();
    const TargetSet t{vec1(-1), 0.25, 20};
    const double gap = localization_gap(m, 20, Vec::Zero(1), t, 100.0 * (0 + 1 + 1));
    CHECK(gap < 1e-12);
}

TEST_CASE("localization gap is nonincreasing in R and matches brute force") {
    const WalkModel m = walk1d();
    const TargetSet t{vec1(-1), 0.25, 20};

    // brute-force two-layer path sum on a wide 1-D interval, horizon 4000
    auto brute = [&](double R_scaled) {
        const int inner = static_cast<int>(R_scaled * 20); // nR
        const int B = 800;
        std::vector<double> u0(static_cast<size_t>(2 * B + 1), 0.0), u1(u0), n0(u0), n1(u0);
        auto ix = [&](int y) { return static_cast<size_t>(y + B); };
        u0[ix(0)] = 1.0;
        double gap = 0;
        auto in_target = [&](int y) { return std::abs(y + 20.0) < 5.0; };
        for (int t_step = 1; t_step <= 4000; ++t_step) {
            std::fill(n0.begin(), n0.end(), 0.0);
            std::fill(n1.begin(), n1.end(), 0.0);
            for (int y = -B + 1; y <= B - 1; ++y) {
                const double from0 = 0.7 * u0[ix(y - 1)] + 0.3 * u0[ix(y + 1)];
                const double from1 = 0.7 * u1[ix(y - 1)] + 0.3 * u1[ix(y + 1)];
                if (std::abs(y) < inner) {
                    n0[ix(y)] = from0;
                    n1[ix(y)] = from1;
                } else {
                    n1[ix(y)] = from0 + from1;
                }
            }
            std::swap(u0, n0);
            std::swap(u1, n1);
            for (int y = -24; y <= -16; ++y)
                if (in_target(y)) gap += u1[ix(y)];
        }
        return gap;
    };

    double prev = std::numeric_limits<double>::infinity();
    for (double R : {2.0, 3.0, 4.0}) {
        const double gap = localization_gap(m, 20, Vec::Zero(1), t, R);
        CHECK(gap <= prev * (1 + 1e-12));
        const double oracle = brute(R);
        CHECK(gap == doctest::Approx(oracle).epsilon(1e-6));
        // decays at least exponentially in n at some positive rate
        CHECK(gap <= std::exp(-20 * 0.5));
        prev = gap;
    }
}

TEST_CASE("half-space walks conserve mass and use the boundary kernel") {
    const char* half = R"({
      "dim": 2, "state_space": "halfspace",
      "interior": {"support": [[1,0],[0,1],[-1,0],[0,-1]], "probs": [0.4,0.3,0.2,0.1]},
      "boundary": {"support": [[1,0],[0,1],[0,-1]], "probs": [0.5,0.25,0.25]}
    })";
    const WalkModel m = load_model(half);
    GreenQuery q;
    q.z = lat2(0, 0);
    q.target = TargetSet{vec2(0, 0), 0.5, 1};
    q.truncation_radius = 25;
    const GreenResult r = green_truncated(m, q);
    CHECK(r.max_conservation_error < 1e-12);
    CHECK(r.value > 1.0); // at least the visit at t = 0

    // one-step check by hand: mass after a single boundary step
    GreenQuery q1 = q;
    q1.horizon = 1;
    q1.want_profile = true;
    q1.target = TargetSet{vec2(1, 0), 0.4, 1};
    const GreenResult r1 = green_truncated(m, q1, {});
    REQUIRE(r1.visits_profile.size() == 2);
    CHECK(r1.visits_profile[1] == doctest::Approx(0.5).epsilon(1e-15));
}
