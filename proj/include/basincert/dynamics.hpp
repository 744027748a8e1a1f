#pragma once

// Poincaré-map validation of certificates: locate the periodic point
// v_eps by iterating the time-T map (the proof shows it contracts),
// measure the empirical contraction factor against the proof's bound,
// and sample basins of attraction stroboscopically.

#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "basincert/averaging.hpp"
#include "basincert/certify.hpp"
#include "basincert/errors.hpp"
#include "basincert/numkit.hpp"
#include "basincert/odeint.hpp"
#include "basincert/parallel.hpp"
#include "basincert/rng.hpp"

namespace basincert {

// v -> x(T, v, eps), with the certificate's norm available for distances.
inline Vec poincare_map(const StandardSystem& sys, const Vec& v, double eps,
                        const IntegratorConfig& cfg = {}) {
    return flow_map(sys, v, eps, cfg);
}

struct PeriodicOrbitReport {
    double eps = 0.0;
    Vec v_eps;
    double residual = 0.0; // ‖P(v_eps) - v_eps‖_0
    std::vector<std::complex<double>> floquet;
    int iterations = 0;
    double empirical_kappa = 0.0;   // measured per-iteration contraction
    double theoretical_kappa = 0.0; // 1 - eps(1-q)/(2 alpha), derived convention
    std::optional<double> distance_to_v0;
    bool eps_exceeds_eps0 = false; // theory bound only guarantees eps <= eps0
    bool used_newton_fallback = false;
};

// Iterates the Poincaré map from `start` (default: center of V) until the
// residual drops below 1e-9*(1+‖v‖), with the contraction-based iteration
// cap and a Newton fallback. An iterate leaving V is reported loudly: it
// means the certified contraction failed numerically.
inline PeriodicOrbitReport find_periodic(const StandardSystem& sys, double eps,
                                         const Certificate& cert, const IntegratorConfig& cfg = {},
                                         std::optional<Vec> start = std::nullopt) {
    if (cert.status != CertStatus::Certified && cert.status != CertStatus::InconclusiveForEps)
        throw PreconditionError("find_periodic requires a Certified certificate");
    if (!(eps > 0.0)) throw ConfigError("find_periodic requires eps > 0");

    PeriodicOrbitReport rep;
    rep.eps = eps;
    rep.eps_exceeds_eps0 = cert.eps0 > 0.0 ? eps > cert.eps0 : true;
    rep.theoretical_kappa = 1.0 - eps * (1.0 - cert.q_cert) / (2.0 * cert.alpha);

    const WeightedNorm& W = cert.norm;
    double kappa = rep.theoretical_kappa;
    long cap = 10000;
    if (kappa > 0.0 && kappa < 1.0)
        cap = static_cast<long>(std::ceil(10.0 * std::log(1e-9) / std::log(kappa)));
    cap = std::max<long>(cap, 50);

    Vec v = start ? *start : set_center(cert.set);
    double prev_step = -1.0;
    std::vector<double> ratios;
    bool converged = false;
    long it = 0;
    for (; it < cap; ++it) {
        Vec w = poincare_map(sys, v, eps, cfg);
        if (!set_contains(cert.set, w, 1e-9 * (1.0 + inf_norm(w))))
            throw NumericalError(
                "find_periodic: Poincaré iterate left the certified set V; the certified "
                "contraction does not hold numerically at eps = " + std::to_string(eps));
        double step = W.distance(w, v);
        if (prev_step > 1e-14) ratios.push_back(step / prev_step);
        prev_step = step;
        v = std::move(w);
        if (step <= 1e-9 * (1.0 + W(v))) {
            converged = true;
            ++it;
            break;
        }
    }
    if (!converged) {
        rep.used_newton_fallback = true;
        NewtonOptions nopt;
        nopt.tol = 1e-9;
        nopt.max_iter = 40;
        v = newton(
            [&](const Vec& u) {
                Vec w = poincare_map(sys, u, eps, cfg);
                return w - u;
            },
            v, nopt);
    }
    rep.iterations = static_cast<int>(it);
    rep.v_eps = v;
    rep.residual = W.distance(poincare_map(sys, v, eps, cfg), v);

    if (!ratios.empty()) {
        std::size_t m = std::min<std::size_t>(ratios.size(), 5);
        double s = 0.0;
        for (std::size_t i = ratios.size() - m; i < ratios.size(); ++i) s += ratios[i];
        rep.empirical_kappa = s / static_cast<double>(m);
    }

    rep.floquet = eig_small(
        fd_jacobian([&](const Vec& u) { return poincare_map(sys, u, eps, cfg); }, rep.v_eps));

    try {
        Vec v0 = find_zero(sys, set_center(cert.set));
        rep.distance_to_v0 = W.distance(rep.v_eps, v0);
    } catch (const NumericalError&) {
        rep.distance_to_v0 = std::nullopt;
    }
    return rep;
}

// max over seeded pairs v1, v2 in V of ‖P(v1) - P(v2)‖_0 / ‖v1 - v2‖_0;
// compare against the report's theoretical_kappa.
inline double contraction_measure(const StandardSystem& sys, double eps, const Certificate& cert,
                                  int pair_count, std::uint64_t seed,
                                  const IntegratorConfig& cfg = {}) {
    if (cert.status != CertStatus::Certified && cert.status != CertStatus::InconclusiveForEps)
        throw PreconditionError("contraction_measure requires a Certified certificate");
    const WeightedNorm& W = cert.norm;
    Box bb = bounding_box(cert.set);
    double diam = 0.0;
    for (std::size_t i = 0; i < bb.lo.size(); ++i) diam = std::max(diam, bb.hi[i] - bb.lo[i]);

    double worst = 0.0;
    for (int i = 0; i < pair_count; ++i) {
        SplitMix64 rng = rng_stream(seed, static_cast<std::uint64_t>(i));
        Vec v1 = sample_in(cert.set, rng);
        Vec v2;
        if (i % 2 == 1) {
            for (int attempt = 0; attempt < 64; ++attempt) {
                v2 = v1;
                for (auto& c : v2) c += 1e-3 * diam * rng.uniform(-1.0, 1.0);
                if (set_contains(cert.set, v2, 0.0)) break;
                v2.clear();
            }
            if (v2.empty()) v2 = sample_in(cert.set, rng);
        } else {
            v2 = sample_in(cert.set, rng);
        }
        double d = W.distance(v1, v2);
        if (d < 1e-12) continue;
        Vec p1 = eps == 0.0 ? v1 : poincare_map(sys, v1, eps, cfg);
        Vec p2 = eps == 0.0 ? v2 : poincare_map(sys, v2, eps, cfg);
        worst = std::max(worst, W.distance(p1, p2) / d);
    }
    return worst;
}

struct BasinSample {
    Vec v_start;
    bool converged = false;
    int periods_to_converge = 0; // 0 when not converged
    double final_distance = 0.0;
    std::string error; // per-sample integration failures are recorded, not fatal
};

struct BasinReport {
    double eps = 0.0;
    ConvexSet region;
    std::uint64_t seed = 0;
    std::vector<BasinSample> samples;
    double fraction_converged = 0.0;
};

// Seeded uniform starts in `region`, each integrated stroboscopically up
// to horizon_periods*T; converged when the distance to v_eps at a period
// multiple falls below 1e-4. Per-sample RNG streams keep the report
// byte-identical for any thread count.
inline BasinReport basin_sample(const StandardSystem& sys, double eps, const ConvexSet& region,
                                const Vec& v_eps, const WeightedNorm& W, int n_samples,
                                int horizon_periods, std::uint64_t seed,
                                const IntegratorConfig& cfg = {}, int threads = 1) {
    validate_set(region);
    BasinReport rep;
    rep.eps = eps;
    rep.region = region;
    rep.seed = seed;
    rep.samples.resize(static_cast<std::size_t>(n_samples));

    parallel_for(n_samples, threads, [&](long i) {
        SplitMix64 rng = rng_stream(seed, static_cast<std::uint64_t>(i));
        BasinSample& smp = rep.samples[static_cast<std::size_t>(i)];
        smp.v_start = sample_in(region, rng);
        Vec x = smp.v_start;
        smp.final_distance = W.distance(x, v_eps);
        try {
            for (int p = 1; p <= horizon_periods; ++p) {
                x = flow_map(sys, x, eps, cfg);
                smp.final_distance = W.distance(x, v_eps);
                if (smp.final_distance < 1e-4) {
                    smp.converged = true;
                    smp.periods_to_converge = p;
                    break;
                }
            }
        } catch (const NumericalError& e) {
            smp.error = e.what();
        }
    });

    int ok = 0;
    for (const auto& s : rep.samples)
        if (s.converged) ++ok;
    rep.fraction_converged = n_samples > 0 ? static_cast<double>(ok) / n_samples : 0.0;
    return rep;
}

} // namespace basincert
