#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "basincert/dynamics.hpp"
#include "basincert/io.hpp"

using namespace basincert;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kT = 2.0 * kPi;

StandardSystem vdp_amp() {
    return make_standard_system(1, kT, {"x1*sin(t)^2 - x1^3*cos(t)^2*sin(t)^2"}, "vdp-amp");
}

Box box1(double lo, double hi) { return Box{{lo}, {hi}}; }

Certificate vdp_certificate() {
    CertifyOptions opts;
    opts.alpha_grid = {0.08};
    opts.grid_per_dim = 101;
    Certificate cert = certify(vdp_amp(), box1(1.5, 2.5), opts);
    REQUIRE(cert.status == CertStatus::Certified);
    cert.eps0 = epsilon0_estimate(vdp_amp(), cert, 32, 0).eps0;
    return cert;
}

} // namespace

TEST_CASE("poincare_map: examples") {
    auto sys = vdp_amp();
    Vec v{1.8};
    CHECK(poincare_map(sys, v, 0.0)[0] == 1.8); // eps = 0 is the identity

    auto growth = make_standard_system(1, kT, {"x1"});
    CHECK(poincare_map(growth, {1.0}, 0.1)[0] == Catch::Approx(1.874477).margin(1e-6));

    // O(eps) deviation, oracle: reference integration at tol 1e-13
    IntegratorConfig ref;
    ref.rel_tol = 1e-13;
    ref.abs_tol = 1e-14;
    double p = poincare_map(sys, {2.0}, 0.05)[0];
    CHECK(std::abs(p - poincare_map(sys, {2.0}, 0.05, ref)[0]) < 1e-8);
    CHECK(std::abs(p - 2.0) < 0.05);
}

TEST_CASE("find_periodic: vdp-amp at eps 0.05") {
    auto sys = vdp_amp();
    Certificate cert = vdp_certificate();
    auto rep = find_periodic(sys, 0.05, cert);
    CHECK(rep.v_eps[0] >= 1.9);
    CHECK(rep.v_eps[0] <= 2.1);
    CHECK(rep.residual <= 1e-9 * (1.0 + std::abs(rep.v_eps[0])));
    REQUIRE(rep.floquet.size() == 1);
    CHECK(std::abs(rep.floquet[0]) < 1.0);
    CHECK(rep.theoretical_kappa == Catch::Approx(1.0 - 0.05 * (1.0 - cert.q_cert) / 0.16));
    CHECK(rep.eps_exceeds_eps0); // eps0 = 0.01 on this certificate
    REQUIRE(rep.distance_to_v0.has_value());
    CHECK(*rep.distance_to_v0 < 0.01);
}

TEST_CASE("find_periodic: dyadic eps sweep has slope >= 0.9") {
    auto sys = vdp_amp();
    Certificate cert = vdp_certificate();
    std::vector<double> epss{0.04, 0.02, 0.01};
    std::vector<double> devs;
    for (double e : epss) devs.push_back(std::abs(find_periodic(sys, e, cert).v_eps[0] - 2.0));
    double slope = std::log(devs.front() / devs.back()) / std::log(epss.front() / epss.back());
    CHECK(slope >= 0.9);
}

TEST_CASE("find_periodic: iterate escaping a forced certificate is reported") {
    auto sys = vdp_amp();
    // hand-built certificate around the unstable zero a = 0, bypassing
    // the preconditions on purpose; center 0.05 repels toward a = 2
    Certificate cert;
    cert.set = box1(-0.15, 0.25);
    cert.alpha = 0.1;
    cert.q_grid = cert.q_cert = 0.9;
    cert.grid_per_dim = 3;
    cert.status = CertStatus::Certified;
    cert.eps0 = 0.1;
    CHECK_THROWS_AS(find_periodic(sys, 0.05, cert), NumericalError);
}

TEST_CASE("find_periodic: uniqueness from both endpoints of V") {
    auto sys = vdp_amp();
    Certificate cert = vdp_certificate();
    auto lo = find_periodic(sys, 0.05, cert, {}, Vec{1.5});
    auto hi = find_periodic(sys, 0.05, cert, {}, Vec{2.5});
    CHECK(std::abs(lo.v_eps[0] - hi.v_eps[0]) < 1e-6);
}

TEST_CASE("find_periodic: scalar Floquet multiplier matches the Liouville oracle") {
    auto sys = vdp_amp();
    Certificate cert = vdp_certificate();
    const double eps = 0.05;
    auto rep = find_periodic(sys, eps, cert);

    // oracle: integrate the variational equation y' = eps*g_x(t, x(t))*y
    // along the orbit; multiplier = y(T) for y(0) = 1
    auto augmented = make_lambda_system(
        2, kT, [&](double t, std::span<const double> x, double e, std::span<double> out) {
            double a = x[0];
            double s2 = std::sin(t) * std::sin(t), c2 = std::cos(t) * std::cos(t);
            out[0] = a * s2 - a * a * a * c2 * s2;
            out[1] = (s2 - 3.0 * a * a * c2 * s2) * x[1];
            (void)e;
        });
    Vec y = flow_map(augmented, {rep.v_eps[0], 1.0}, eps);
    CHECK(rep.floquet[0].real() == Catch::Approx(y[1]).margin(1e-4));
}

TEST_CASE("contraction_measure: bound honoring and limits") {
    auto sys = vdp_amp();
    Certificate cert = vdp_certificate();

    // eps = 0: the identity map, factor exactly 1
    CHECK(contraction_measure(sys, 0.0, cert, 16, 3) == Catch::Approx(1.0).margin(1e-12));

    double prev = 1.0;
    for (double eps : {0.005, 0.01, 0.02}) {
        double measured = contraction_measure(sys, eps, cert, 50, 3);
        double kappa = 1.0 - eps * (1.0 - cert.q_cert) / (2.0 * cert.alpha);
        CHECK(measured <= kappa + 0.02);
        CHECK(measured < prev); // empirical factor decreases as eps grows
        prev = measured;
    }
}

TEST_CASE("basin_sample: certified set fully converges at eps 0.05") {
    auto sys = vdp_amp();
    Certificate cert = vdp_certificate();
    auto orbit = find_periodic(sys, 0.05, cert);
    auto rep = basin_sample(sys, 0.05, cert.set, orbit.v_eps, cert.norm, 200, 50, 0);
    CHECK(rep.fraction_converged == 1.0);
    for (const auto& s : rep.samples) {
        if (s.converged) CHECK(s.final_distance < 1e-4);
    }
}

TEST_CASE("basin_sample: region outside the certificate still converges") {
    // the certificate is conservative: the true basin includes (0, 2)
    auto sys = vdp_amp();
    Certificate cert = vdp_certificate();
    auto orbit = find_periodic(sys, 0.05, cert);
    auto rep = basin_sample(sys, 0.05, box1(0.3, 0.6), orbit.v_eps, cert.norm, 50, 50, 1);
    CHECK(rep.fraction_converged == 1.0);
}

TEST_CASE("basin_sample: starts at the unstable zero never converge") {
    auto sys = vdp_amp();
    Certificate cert = vdp_certificate();
    auto orbit = find_periodic(sys, 0.05, cert);
    auto rep = basin_sample(sys, 0.05, box1(-1e-7, 1e-7), orbit.v_eps, cert.norm, 10, 50, 2);
    CHECK(rep.fraction_converged == 0.0);
    for (const auto& s : rep.samples) CHECK_FALSE(s.converged);
}

TEST_CASE("basin_sample: identical seeds give byte-identical reports at any thread count") {
    auto sys = vdp_amp();
    Certificate cert = vdp_certificate();
    auto orbit = find_periodic(sys, 0.05, cert);
    auto a = basin_sample(sys, 0.05, cert.set, orbit.v_eps, cert.norm, 40, 50, 9, {}, 1);
    auto b = basin_sample(sys, 0.05, cert.set, orbit.v_eps, cert.norm, 40, 50, 9, {}, 4);
    auto c = basin_sample(sys, 0.05, cert.set, orbit.v_eps, cert.norm, 40, 50, 9, {}, 1);
    CHECK(to_json(a).dump() == to_json(b).dump());
    CHECK(to_json(a).dump() == to_json(c).dump());
}

TEST_CASE("end to end in two dimensions: certify, eps0, orbit, basin") {
    // averaged field T*(-2x1 + x2, -x1 - 2x2 + x1*x2/4): hyperbolic stable
    // zero at the origin with the complex pair -2 +- i (times T)
    auto sys = make_standard_system(
        2, kT, {"-2*x1 + x2 + sin(t)*x2^2", "-x1 - 2*x2 + cos(t)^2*x1*x2/2"}, "spiral2d");

    auto bog = bogolubov_check(sys, {0.0, 0.0});
    REQUIRE(bog.is_zero);
    REQUIRE(bog.asymptotically_stable);
    CHECK(bog.eigenvalues[0].real() == Catch::Approx(-2.0 * kT).epsilon(1e-4));
    CHECK(std::abs(bog.eigenvalues[0].imag()) == Catch::Approx(kT).epsilon(1e-4));

    CertifyOptions opts;
    opts.grid_per_dim = 17;
    Certificate cert = certify_nonsmooth(sys, Box{{-0.3, -0.3}, {0.3, 0.3}}, opts);
    REQUIRE(cert.status == CertStatus::Certified);

    cert.eps0 = epsilon0_estimate(sys, cert, 16, 0).eps0;
    CHECK(cert.eps0 > 0.0);

    const double eps = 0.02;
    auto orbit = find_periodic(sys, eps, cert);
    REQUIRE(orbit.floquet.size() == 2);
    for (const auto& m : orbit.floquet) CHECK(std::abs(m) < 1.0);
    CHECK(cert.norm(orbit.v_eps) < 0.1); // periodic point near the averaged zero

    auto basin = basin_sample(sys, eps, cert.set, orbit.v_eps, cert.norm, 60, 50, 11);
    CHECK(basin.fraction_converged == 1.0);
}

TEST_CASE("basin_sample: per-sample integration failures are recorded, not fatal") {
    auto sys = make_standard_system(1, kT, {"1/(1 - x1)"});
    // trajectories from [0.85, 0.95] blow up against the singular line
    // x1 = 1 in finite time
    auto rep = basin_sample(sys, 0.5, box1(0.85, 0.95), Vec{-5.0}, WeightedNorm{}, 5, 50, 4);
    CHECK(rep.fraction_converged == 0.0);
    bool some_error = false;
    for (const auto& s : rep.samples) some_error = some_error || !s.error.empty();
    CHECK(some_error);
}
