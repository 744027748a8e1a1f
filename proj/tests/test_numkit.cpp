#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <functional>

#include "basincert/numkit.hpp"
#include "basincert/rng.hpp"

using namespace basincert;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Brute-force midpoint Riemann sum: the independent oracle for integrals.
double riemann(const std::function<double(double)>& f, double a, double b, long panels) {
    double h = (b - a) / static_cast<double>(panels);
    double s = 0.0;
    for (long i = 0; i < panels; ++i) s += f(a + (static_cast<double>(i) + 0.5) * h);
    return s * h;
}

Mat mat2(double a, double b, double c, double d) {
    Mat m(2, 2);
    m(0, 0) = a; m(0, 1) = b; m(1, 0) = c; m(1, 1) = d;
    return m;
}

Mat random_mat(SplitMix64& rng, int n, double scale) {
    Mat m(n, n);
    for (double& v : m.a) v = rng.uniform(-scale, scale);
    return m;
}

std::complex<double> charpoly_residual(const Mat& M, std::complex<double> lambda) {
    using cd = std::complex<double>;
    const int n = M.rows;
    std::vector<cd> a(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            a[static_cast<std::size_t>(i) * n + j] = cd(M(i, j)) - (i == j ? lambda : cd(0.0));
    return lu_det(lu_factor<cd>(n, std::move(a)));
}

} // namespace

TEST_CASE("quad: textbook integrals") {
    QuadratureSpec spec;
    CHECK(quad([](double t) { return std::sin(t) * std::sin(t); }, 0.0, 2.0 * kPi, spec) ==
          Catch::Approx(kPi).margin(1e-10));
    CHECK(quad([](double) { return 1.0; }, 0.0, 1.0, spec) == Catch::Approx(1.0).margin(0.0));
}

TEST_CASE("quad: |cos t| sin^2 t with splits equals 4/3") {
    auto f = [](double t) { return std::abs(std::cos(t)) * std::sin(t) * std::sin(t); };
    // oracle: symmetry gives 4*int_0^{pi/2} cos t sin^2 t dt = 4/3; confirm
    // by brute-force Riemann sum before freezing the value
    double oracle = riemann(f, 0.0, 2.0 * kPi, 1'000'000);
    REQUIRE(oracle == Catch::Approx(4.0 / 3.0).margin(1e-6));

    QuadratureSpec spec;
    spec.splits = {kPi / 2.0, 3.0 * kPi / 2.0};
    CHECK(quad(f, 0.0, 2.0 * kPi, spec) == Catch::Approx(4.0 / 3.0).margin(1e-10));
}

TEST_CASE("quad: linearity on random smooth integrands") {
    SplitMix64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        double c1 = rng.uniform(-2.0, 2.0), c2 = rng.uniform(-2.0, 2.0);
        double w1 = rng.uniform(0.5, 3.0), w2 = rng.uniform(0.5, 3.0);
        auto f = [&](double t) { return std::sin(w1 * t) + 0.3 * t * t; };
        auto g = [&](double t) { return std::cos(w2 * t) - t; };
        double lhs = quad([&](double t) { return c1 * f(t) + c2 * g(t); }, 0.0, 2.0, {});
        double rhs = c1 * quad(f, 0.0, 2.0, {}) + c2 * quad(g, 0.0, 2.0, {});
        CHECK(lhs == Catch::Approx(rhs).margin(1e-9));
    }
}

TEST_CASE("quad: non-finite integrand reported") {
    CHECK_THROWS_AS(quad([](double t) { return 1.0 / (t - 1.0); }, 0.0, 2.0, {}), NumericalError);
}

TEST_CASE("fd_jacobian: exact on linear maps") {
    Mat B = mat2(1.5, -2.0, 0.25, 3.0);
    auto F = [&](const Vec& v) { return mat_vec(B, v); };
    Mat J = fd_jacobian(F, {0.7, -1.3});
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(J(i, j) == Catch::Approx(B(i, j)).margin(1e-9));
}

TEST_CASE("fd_jacobian: scalar square") {
    auto F = [](const Vec& v) { return Vec{v[0] * v[0]}; };
    Mat J = fd_jacobian(F, {3.0});
    CHECK(J(0, 0) == Catch::Approx(6.0).margin(1e-6));
}

TEST_CASE("fd_jacobian: halved step agrees on random polynomial maps") {
    SplitMix64 rng(99);
    for (int trial = 0; trial < 10; ++trial) {
        double a = rng.uniform(-1.0, 1.0), b = rng.uniform(-1.0, 1.0), c = rng.uniform(-1.0, 1.0);
        auto F = [&](const Vec& v) {
            return Vec{a * v[0] * v[0] * v[1] + b * v[1], c * v[0] * v[1] * v[1] - a * v[0]};
        };
        Vec at{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
        Mat J1 = fd_jacobian(F, at, 1e-6);
        Mat J2 = fd_jacobian(F, at, 5e-7);
        CHECK(inf_norm(J1 - J2) <= 1e-5);
    }
}

TEST_CASE("newton: examples") {
    CHECK(newton([](const Vec& v) { return Vec{v[0] - 1.0}; }, {5.0})[0] ==
          Catch::Approx(1.0).margin(1e-12));
    CHECK(newton([](const Vec& v) { return Vec{v[0] * v[0] - 4.0}; }, {3.0})[0] ==
          Catch::Approx(2.0).margin(1e-10));
    // VDP-amp averaged field, closed form pi*a*(1 - a^2/4)
    auto g0 = [](const Vec& v) { return Vec{kPi * v[0] * (1.0 - v[0] * v[0] / 4.0)}; };
    CHECK(newton(g0, {1.5})[0] == Catch::Approx(2.0).margin(1e-8));
}

TEST_CASE("newton: singular Jacobian reported") {
    auto F = [](const Vec& v) { return Vec{v[0] * v[0] + 1.0, v[0] * v[1]}; };
    CHECK_THROWS_AS(newton(F, {0.0, 1.0}), SingularJacobianError);
}

TEST_CASE("newton: no convergence reported") {
    NewtonOptions opt;
    opt.max_iter = 4;
    // root-free function: residual tends to 1 from above
    CHECK_THROWS_AS(newton([](const Vec& v) { return Vec{1.0 + std::exp(-v[0] * v[0])}; }, {0.5}, opt),
                    NumericalError);
}

TEST_CASE("expm: identities") {
    Mat Z(3, 3);
    Mat E = expm(Z);
    CHECK(inf_norm(E - Mat::identity(3)) == 0.0);

    Mat D(1, 1);
    D(0, 0) = 1.0;
    CHECK(expm(D)(0, 0) == Catch::Approx(std::exp(1.0)).epsilon(1e-12));

    double theta = kPi / 3.0;
    Mat R = expm(mat2(0.0, theta, -theta, 0.0));
    CHECK(R(0, 0) == Catch::Approx(std::cos(theta)).margin(1e-12));
    CHECK(R(0, 1) == Catch::Approx(std::sin(theta)).margin(1e-12));
    CHECK(R(1, 0) == Catch::Approx(-std::sin(theta)).margin(1e-12));
    CHECK(R(1, 1) == Catch::Approx(std::cos(theta)).margin(1e-12));
}

TEST_CASE("expm: expm(M) expm(-M) = I on random matrices") {
    SplitMix64 rng(4242);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 1 + static_cast<int>(rng.next() % 5);
        Mat M = random_mat(rng, n, 2.0 / n); // keeps ‖M‖ <= 2 roughly
        Mat P = expm(M) * expm(-1.0 * M);
        CHECK(inf_norm(P - Mat::identity(n)) <= 1e-10);
    }
}

TEST_CASE("expm: relative accuracy holds up to the stated norm 10") {
    Mat D(2, 2);
    D(0, 0) = 10.0;
    D(1, 1) = -10.0;
    Mat E = expm(D);
    CHECK(E(0, 0) == Catch::Approx(std::exp(10.0)).epsilon(1e-12));
    CHECK(E(1, 1) == Catch::Approx(std::exp(-10.0)).epsilon(1e-12));

    double theta = 5.0; // rotation with ‖M‖ = 5
    Mat R = expm(mat2(0.0, theta, -theta, 0.0));
    CHECK(R(0, 0) == Catch::Approx(std::cos(theta)).margin(1e-12));
    CHECK(R(0, 1) == Catch::Approx(std::sin(theta)).margin(1e-12));
}

TEST_CASE("expm: dimension cap") {
    CHECK_THROWS_AS(expm(Mat(9, 9)), NumericalError);
}

TEST_CASE("eig_small: examples") {
    Mat D(3, 3);
    D(0, 0) = 1.0; D(1, 1) = 2.0; D(2, 2) = 3.0;
    auto ev = eig_small(D);
    REQUIRE(ev.size() == 3);
    CHECK(ev[0].real() == Catch::Approx(3.0).margin(1e-12));
    CHECK(ev[1].real() == Catch::Approx(2.0).margin(1e-12));
    CHECK(ev[2].real() == Catch::Approx(1.0).margin(1e-12));

    auto rot = eig_small(mat2(0.0, 1.0, -1.0, 0.0));
    REQUIRE(rot.size() == 2);
    CHECK(rot[0].imag() == Catch::Approx(1.0).margin(1e-14));
    CHECK(rot[1].imag() == Catch::Approx(-1.0).margin(1e-14));
}

TEST_CASE("eig_small: companion matrix of (l-1)(l-2)(l-3)") {
    // (l-1)(l-2)(l-3) = l^3 - 6l^2 + 11l - 6; oracle: brute-force roots by
    // sign scanning the cubic
    auto p = [](double l) { return ((l - 6.0) * l + 11.0) * l - 6.0; };
    std::vector<double> roots;
    double prev = p(-10.0);
    for (int i = 1; i <= 20000; ++i) {
        double l = -10.0 + 20.0 * i / 20000.0;
        double cur = p(l);
        if ((prev < 0.0 && cur >= 0.0) || (prev > 0.0 && cur <= 0.0)) {
            double lo = l - 0.001, hi = l, plo = prev;
            for (int k = 0; k < 80; ++k) {
                double mid = 0.5 * (lo + hi);
                if ((plo < 0.0) == (p(mid) < 0.0)) { lo = mid; plo = p(mid); }
                else hi = mid;
            }
            roots.push_back(0.5 * (lo + hi));
        }
        prev = cur;
    }
    REQUIRE(roots.size() == 3);
    REQUIRE(roots[0] == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(roots[2] == Catch::Approx(3.0).margin(1e-9));

    Mat C(3, 3);
    C(0, 0) = 6.0; C(0, 1) = -11.0; C(0, 2) = 6.0;
    C(1, 0) = 1.0; C(2, 1) = 1.0;
    auto ev = eig_small(C);
    REQUIRE(ev.size() == 3);
    CHECK(ev[0].real() == Catch::Approx(roots[2]).margin(1e-9));
    CHECK(ev[1].real() == Catch::Approx(roots[1]).margin(1e-9));
    CHECK(ev[2].real() == Catch::Approx(roots[0]).margin(1e-9));
    for (const auto& e : ev) CHECK(std::abs(e.imag()) <= 1e-9);
}

TEST_CASE("eig_small: characteristic polynomial residual") {
    SplitMix64 rng(777);
    for (int trial = 0; trial < 60; ++trial) {
        int n = 2 + static_cast<int>(rng.next() % 7); // up to the n = 8 cap
        Mat M = random_mat(rng, n, 1.0);
        double bound = 1e-8 * std::pow(std::max(inf_norm(M), 1.0), n);
        auto evs = eig_small(M);
        REQUIRE(evs.size() == static_cast<std::size_t>(n));
        for (const auto& ev : evs) {
            CHECK(std::abs(charpoly_residual(M, ev)) <= bound);
        }
        for (std::size_t i = 1; i < evs.size(); ++i)
            REQUIRE(evs[i - 1].real() >= evs[i].real()); // sorted
    }
}

TEST_CASE("eig_small: dimension cap") {
    CHECK_THROWS_AS(eig_small(Mat(9, 9)), NumericalError);
}

TEST_CASE("induced_norm: examples") {
    WeightedNorm id;
    CHECK(induced_norm(Mat::identity(3), id) == 1.0);

    Mat half(1, 1);
    half(0, 0) = -0.5;
    CHECK(induced_norm(half, id) == 0.5);

    Mat P(2, 2);
    P(0, 0) = 1.0; P(1, 1) = 2.0;
    WeightedNorm W(P);
    CHECK(induced_norm(mat2(0.0, 2.0, 0.0, 0.0), W) == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("induced_norm: submultiplicative and absolutely homogeneous") {
    SplitMix64 rng(31);
    Mat P = random_mat(rng, 3, 1.0) + 3.0 * Mat::identity(3); // well-conditioned
    WeightedNorm W(P);
    for (int trial = 0; trial < 20; ++trial) {
        Mat A = random_mat(rng, 3, 2.0), B = random_mat(rng, 3, 2.0);
        CHECK(induced_norm(A * B, W) <= induced_norm(A, W) * induced_norm(B, W) + 1e-12);
        double c = rng.uniform(-3.0, 3.0);
        CHECK(induced_norm(c * A, W) == Catch::Approx(std::abs(c) * induced_norm(A, W)).epsilon(1e-15));
    }
}

TEST_CASE("weighted norm rejects singular P") {
    Mat P(2, 2);
    P(0, 0) = 1.0; P(0, 1) = 2.0; P(1, 0) = 2.0; P(1, 1) = 4.0;
    CHECK_THROWS_AS(WeightedNorm(P), NumericalError);
}

TEST_CASE("weighted norm evaluates max |Px|") {
    Mat P = mat2(1.0, 1.0, 0.0, 2.0);
    WeightedNorm W(P);
    CHECK(W(Vec{1.0, -3.0}) == 6.0); // |1-3| = 2, |2*-3| = 6
    WeightedNorm id;
    CHECK(id(Vec{1.0, -3.0}) == 3.0);
}
