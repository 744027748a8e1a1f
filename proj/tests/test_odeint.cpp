#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>

#include "basincert/averaging.hpp"
#include "basincert/odeint.hpp"
#include "basincert/system.hpp"

using namespace basincert;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kT = 2.0 * kPi;

StandardSystem scalar_growth() { return make_standard_system(1, kT, {"x1"}, "growth"); }

StandardSystem vdp_amp() {
    return make_standard_system(1, kT, {"x1*sin(t)^2 - x1^3*cos(t)^2*sin(t)^2"}, "vdp-amp");
}

StandardSystem nonsmooth_vdp() {
    return make_standard_system(1, kT, {"x1*sin(t)^2*(1 - x1*abs(cos(t)))"}, "nonsmooth");
}

} // namespace

TEST_CASE("integrate: closed-form exponential growth") {
    // dx/dt = eps*x over [0, 2pi]: x(T) = exp(0.2 pi) for eps = 0.1
    auto sys = scalar_growth();
    Trajectory tr = integrate(sys, {1.0}, 0.1, 0.0, kT);
    CHECK(tr.final_state()[0] == Catch::Approx(std::exp(0.2 * kPi)).margin(1e-8));
    CHECK(tr.event_times.empty());
    for (std::size_t i = 1; i < tr.times.size(); ++i) REQUIRE(tr.times[i] > tr.times[i - 1]);
}

TEST_CASE("integrate: eps = 0 keeps the state exactly") {
    auto sys = vdp_amp();
    Trajectory tr = integrate(sys, {1.7}, 0.0, 0.0, kT);
    CHECK(tr.final_state()[0] == 1.7);
    CHECK(flow_map(sys, {1.7}, 0.0)[0] == 1.7);
}

TEST_CASE("integrate: harmonic original form with h = 0 is constant") {
    Mat A(2, 2);
    A(0, 1) = 1.0;
    A(1, 0) = -1.0;
    auto sys = to_standard_form(make_original_system(A, kT, {"0", "0"}));
    Vec xT = flow_map(sys, {0.3, -0.8}, 0.2);
    CHECK(xT[0] == Catch::Approx(0.3).margin(1e-9));
    CHECK(xT[1] == Catch::Approx(-0.8).margin(1e-9));
}

TEST_CASE("flow_map: scalar closed form") {
    auto sys = scalar_growth();
    CHECK(flow_map(sys, {2.0}, 0.05)[0] == Catch::Approx(2.0 * std::exp(0.1 * kPi)).margin(1e-8));
}

TEST_CASE("flow_map: vdp-amp stays within O(eps) of the averaged fixed point") {
    auto sys = vdp_amp();
    // oracle: high-accuracy reference at tol 1e-13
    IntegratorConfig ref;
    ref.rel_tol = 1e-13;
    ref.abs_tol = 1e-14;
    double reference = flow_map(sys, {2.0}, 0.05, ref)[0];
    double v = flow_map(sys, {2.0}, 0.05)[0];
    CHECK(std::abs(v - reference) < 1e-8);
    CHECK(std::abs(v - 2.0) < 0.05);
}

TEST_CASE("tolerance scaling against a tol=1e-13 reference") {
    auto sys = scalar_growth();
    const double exact = std::exp(0.2 * kPi);
    auto err_at = [&](double rtol) {
        IntegratorConfig cfg;
        cfg.rel_tol = rtol;
        cfg.abs_tol = 1e-16;
        cfg.max_step = kT; // the default T/16 cap floors the error here
        return std::abs(flow_map(sys, {1.0}, 0.1, cfg)[0] - exact);
    };
    // tightening rel_tol must tighten the result; single halvings are
    // controller-noise dominated, so assert the aggregate slope: at least
    // a factor 2 per decade over four decades (measured ~97x)
    double coarse = err_at(1e-4);
    double mid = err_at(1e-6);
    double fine = err_at(1e-8);
    CHECK(coarse / fine >= 16.0);
    CHECK(mid < coarse);
    CHECK(fine < mid);
}

TEST_CASE("semigroup: [0,T] equals [0,T/2] then [T/2,T]") {
    auto sys = vdp_amp();
    Vec full = integrate(sys, {1.8}, 0.05, 0.0, kT).final_state();
    Vec half = integrate(sys, {1.8}, 0.05, 0.0, kT / 2.0).final_state();
    Vec rest = integrate(sys, half, 0.05, kT / 2.0, kT).final_state();
    CHECK(std::abs(full[0] - rest[0]) < 1e-8);
}

TEST_CASE("event residuals on the nonsmooth testbed") {
    auto sys = nonsmooth_vdp();
    Trajectory tr = integrate(sys, {2.3}, 0.05, 0.0, kT);
    REQUIRE(tr.event_times.size() == 2); // cos t crosses at pi/2, 3pi/2
    CHECK(tr.event_times[0] == Catch::Approx(kPi / 2.0).margin(1e-9));
    CHECK(tr.event_times[1] == Catch::Approx(3.0 * kPi / 2.0).margin(1e-9));
    for (double te : tr.event_times) {
        // locate the recorded sample at the event
        std::size_t idx = 0;
        while (idx < tr.times.size() && tr.times[idx] != te) ++idx;
        REQUIRE(idx < tr.times.size());
        double sigma = sys.field->switching_value(0, te, tr.states[idx], 0.05);
        CHECK(std::abs(sigma) <= 1e-10 * (1.0 + inf_norm(tr.states[idx])));
    }
}

TEST_CASE("reverse consistency on a smooth testbed") {
    auto sys = vdp_amp();
    const double eps = 0.05;
    Vec fwd = integrate(sys, {1.6}, eps, 0.0, kT).final_state();
    // integrate the time-reversed field y' = -g(T - t, y) over [0, T]
    auto rev = make_lambda_system(1, kT, [&](double t, std::span<const double> x, double e,
                                             std::span<double> out) {
        Vec v(x.begin(), x.end());
        Vec g = sys.field->eval(kT - t, v, e);
        out[0] = -g[0];
    });
    Vec back = integrate(rev, fwd, eps, 0.0, kT).final_state();
    CHECK(std::abs(back[0] - 1.6) < 1e-7);
}

TEST_CASE("switching chatter raises an error") {
    // sin(64 t) has 128 roots per period
    auto sys = make_standard_system(1, kT, {"x1*abs(sin(64*t))"}, "chatter");
    CHECK_THROWS_AS(integrate(sys, {1.0}, 0.1, 0.0, kT), NumericalError);
}

TEST_CASE("non-finite field and bad preconditions") {
    auto sys = make_standard_system(1, kT, {"1/x1"});
    CHECK_THROWS_AS(integrate(sys, {0.0}, 0.1, 0.0, 1.0), NumericalError);
    CHECK_THROWS_AS(integrate(scalar_growth(), {1.0}, 0.1, 1.0, 0.5), ConfigError);
}

TEST_CASE("trajectory CSV format") {
    auto sys = scalar_growth();
    Trajectory tr = integrate(sys, {1.0}, 0.1, 0.0, 0.5);
    std::ostringstream os;
    tr.write_csv(os);
    std::string csv = os.str();
    CHECK(csv.rfind("t,x1\n", 0) == 0);
    CHECK(csv.find('\r') == std::string::npos); // LF only
    // every row round-trips through %.17g
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line);
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        double t = 0.0, x = 0.0;
        REQUIRE(std::sscanf(line.c_str(), "%lf,%lf", &t, &x) == 2);
        CHECK(t == tr.times[rows]);
        CHECK(x == tr.states[rows][0]);
        ++rows;
    }
    CHECK(rows == tr.times.size());
}
