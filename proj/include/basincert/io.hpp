#pragma once

// JSON serialization with stable key order (ordered_json everywhere), so
// reports with a fixed seed are byte-identical across runs.

#include <complex>
#include <optional>

#include <json.hpp>

#include "basincert/averaging.hpp"
#include "basincert/certify.hpp"
#include "basincert/dynamics.hpp"
#include "basincert/numkit.hpp"

namespace basincert {

using ojson = nlohmann::ordered_json;

inline ojson to_json(const Mat& m) { // row-major flat array
    ojson a = ojson::array();
    for (double v : m.a) a.push_back(v);
    return a;
}

inline ojson to_json(const std::vector<std::complex<double>>& evs) {
    ojson a = ojson::array();
    for (const auto& ev : evs) a.push_back(ojson{{"re", ev.real()}, {"im", ev.imag()}});
    return a;
}

inline ojson norm_to_json(const WeightedNorm& W, int n) {
    if (W.is_identity()) return to_json(Mat::identity(n));
    return to_json(W.P());
}

inline ojson to_json(const ConvexSet& s) {
    if (const auto* b = std::get_if<Box>(&s))
        return ojson{{"type", "box"}, {"lo", b->lo}, {"hi", b->hi}};
    const auto& ball = std::get<BallSet>(s);
    ojson j{{"type", "ball"}, {"center", ball.center}, {"radius", ball.radius}};
    if (!ball.norm.is_identity()) j["P"] = to_json(ball.norm.P());
    return j;
}

inline ojson to_json(const Certificate& c) {
    const int n = set_dim(c.set);
    ojson j;
    j["set"] = to_json(c.set);
    j["P"] = norm_to_json(c.norm, n);
    j["alpha"] = c.alpha;
    j["q_grid"] = c.q_grid;
    j["q_cert"] = c.q_cert;
    j["margin"] = c.margin;
    j["eps0"] = c.eps0;
    j["status"] = to_string(c.status);
    j["grid_per_dim"] = c.grid_per_dim;
    j["seed"] = c.seed;
    if (c.falsifying_point) j["falsifying_point"] = *c.falsifying_point;
    return j;
}

inline ojson to_json(const BogolubovReport& r) {
    return ojson{{"v0", r.v0},
                 {"residual", r.residual},
                 {"jacobian", to_json(r.jacobian)},
                 {"det", r.det},
                 {"eigenvalues", to_json(r.eigenvalues)},
                 {"is_zero", r.is_zero},
                 {"hyperbolic_zero", r.hyperbolic_zero},
                 {"asymptotically_stable", r.asymptotically_stable}};
}

inline ojson to_json(const PeriodicOrbitReport& r) {
    ojson j{{"eps", r.eps},
            {"v_eps", r.v_eps},
            {"residual", r.residual},
            {"floquet", to_json(r.floquet)},
            {"iterations", r.iterations},
            {"empirical_kappa", r.empirical_kappa},
            {"theoretical_kappa", r.theoretical_kappa},
            {"eps_exceeds_eps0", r.eps_exceeds_eps0},
            {"used_newton_fallback", r.used_newton_fallback}};
    j["distance_to_v0"] = r.distance_to_v0 ? ojson(*r.distance_to_v0) : ojson(nullptr);
    return j;
}

inline ojson to_json(const BasinReport& r) {
    ojson samples = ojson::array();
    for (const auto& s : r.samples) {
        ojson js{{"v_start", s.v_start},
                 {"converged", s.converged},
                 {"periods_to_converge", s.periods_to_converge},
                 {"final_distance", s.final_distance}};
        if (!s.error.empty()) js["error"] = s.error;
        samples.push_back(std::move(js));
    }
    return ojson{{"eps", r.eps},
                 {"region", to_json(r.region)},
                 {"seed", r.seed},
                 {"fraction_converged", r.fraction_converged},
                 {"samples", std::move(samples)}};
}

inline ojson to_json(const NonsmoothReport& r) {
    ojson samples = ojson::array();
    for (const auto& s : r.samples) {
        ojson ivs = ojson::array();
        for (const auto& iv : s.intervals) ivs.push_back(ojson::array({iv.first, iv.second}));
        samples.push_back(ojson{{"v", s.v},
                                {"interval_count", s.interval_count},
                                {"intervals", std::move(ivs)},
                                {"jacobian_oscillation", s.jacobian_oscillation}});
    }
    return ojson{{"gamma", r.gamma},
                 {"delta", r.delta},
                 {"fat_switching", r.fat_switching},
                 {"samples", std::move(samples)}};
}

} // namespace basincert
