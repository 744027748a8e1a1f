#pragma once

// Adaptive Dormand-Prince 5(4) integration of dx/dt = eps * g(t, x, eps)
// with event detection at switching-function sign changes. Crossings are
// localized by bisection in time (re-stepping from the last accepted
// state) and integration restarts at the crossing, which restores full
// order for piecewise-smooth fields.

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "basincert/errors.hpp"
#include "basincert/system.hpp"

namespace basincert {

struct IntegratorConfig {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double initial_step = 0.0;   // 0: automatic
    double max_step = 0.0;       // 0: (t1 - t0)/16
    long max_steps = 2'000'000;
};

struct Trajectory {
    std::vector<double> times;       // strictly increasing
    std::vector<Vec> states;
    std::vector<double> event_times; // where a switching function crossed zero

    const Vec& final_state() const { return states.back(); }

    // header t,x1,...,xn then one %.17g row per sample, LF line endings
    void write_csv(std::ostream& os) const {
        const int n = states.empty() ? 0 : static_cast<int>(states.front().size());
        os << "t";
        for (int i = 1; i <= n; ++i) os << ",x" << i;
        os << "\n";
        char buf[40];
        for (std::size_t k = 0; k < times.size(); ++k) {
            std::snprintf(buf, sizeof(buf), "%.17g", times[k]);
            os << buf;
            for (int i = 0; i < n; ++i) {
                std::snprintf(buf, sizeof(buf), "%.17g", states[k][i]);
                os << ',' << buf;
            }
            os << "\n";
        }
    }
};

namespace detail {

// Dormand-Prince 5(4) tableau
struct DP45 {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    // embedded 4th-order error weights (b - bhat)
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
};

class Stepper {
public:
    Stepper(const StandardSystem& sys, double eps) : sys_(sys), eps_(eps), n_(sys.n) {
        for (auto& k : k_) k.resize(n_);
        tmp_.resize(n_);
    }

    void deriv(double t, const Vec& y, Vec& out) {
        sys_.field->eval(t, std::span<const double>(y), eps_, std::span<double>(out));
        for (double& v : out) v *= eps_;
        for (double v : out)
            if (!std::isfinite(v)) throw NumericalError("non-finite field value at t = " + std::to_string(t));
    }

    // One DP45 step of size h from (t, y); fills y5 (order 5) and the
    // componentwise error estimate. k1 must hold deriv(t, y).
    void step(double t, const Vec& y, double h, const Vec& k1, Vec& y5, Vec& err) {
        using C = DP45;
        auto& k2 = k_[0]; auto& k3 = k_[1]; auto& k4 = k_[2];
        auto& k5 = k_[3]; auto& k6 = k_[4]; auto& k7 = k_[5];
        Vec& u = tmp_;

        for (int i = 0; i < n_; ++i) u[i] = y[i] + h * C::a21 * k1[i];
        deriv(t + C::c2 * h, u, k2);
        for (int i = 0; i < n_; ++i) u[i] = y[i] + h * (C::a31 * k1[i] + C::a32 * k2[i]);
        deriv(t + C::c3 * h, u, k3);
        for (int i = 0; i < n_; ++i)
            u[i] = y[i] + h * (C::a41 * k1[i] + C::a42 * k2[i] + C::a43 * k3[i]);
        deriv(t + C::c4 * h, u, k4);
        for (int i = 0; i < n_; ++i)
            u[i] = y[i] + h * (C::a51 * k1[i] + C::a52 * k2[i] + C::a53 * k3[i] + C::a54 * k4[i]);
        deriv(t + C::c5 * h, u, k5);
        for (int i = 0; i < n_; ++i)
            u[i] = y[i] + h * (C::a61 * k1[i] + C::a62 * k2[i] + C::a63 * k3[i] + C::a64 * k4[i] +
                               C::a65 * k5[i]);
        deriv(t + h, u, k6);
        y5.resize(n_);
        for (int i = 0; i < n_; ++i)
            y5[i] = y[i] + h * (C::b1 * k1[i] + C::b3 * k3[i] + C::b4 * k4[i] + C::b5 * k5[i] +
                                C::b6 * k6[i]);
        deriv(t + h, y5, k7);
        err.resize(n_);
        for (int i = 0; i < n_; ++i)
            err[i] = h * (C::e1 * k1[i] + C::e3 * k3[i] + C::e4 * k4[i] + C::e5 * k5[i] +
                          C::e6 * k6[i] + C::e7 * k7[i]);
    }

    const Vec& fsal() const { return k_[5]; } // k7 of the last step()

private:
    const StandardSystem& sys_;
    double eps_;
    int n_;
    Vec k_[6];
    Vec tmp_;
};

} // namespace detail

// Integrates over [t0, t1]; throws on step underflow, the step cap, or a
// non-finite state. Places a sample at every accepted step end and at
// every switching crossing.
inline Trajectory integrate(const StandardSystem& sys, Vec v, double eps, double t0, double t1,
                            const IntegratorConfig& cfg = {}) {
    if (!(t0 < t1)) throw ConfigError("integrate requires t0 < t1");
    if (!(cfg.rel_tol > 0.0) || !(cfg.abs_tol > 0.0) || cfg.max_steps < 1)
        throw ConfigError("integrator tolerances must be positive and max_steps >= 1");
    for (double c : v)
        if (!std::isfinite(c)) throw ConfigError("initial state is not finite");

    const int n = sys.n;
    const int nsw = sys.field->switching_count();
    const double span = t1 - t0;
    const double hmax = cfg.max_step > 0.0 ? cfg.max_step : span / 16.0;
    const double time_tol = 1e-12 * std::max(span, sys.T);

    Trajectory traj;
    traj.times.push_back(t0);
    traj.states.push_back(v);

    detail::Stepper st(sys, eps);
    Vec k1(n), y5, err;
    double t = t0;
    Vec y = std::move(v);
    st.deriv(t, y, k1);

    double h = cfg.initial_step > 0.0 ? std::min(cfg.initial_step, hmax) : std::min(hmax, span / 100.0);
    double err_prev = 1.0;
    long steps = 0;
    std::vector<double> sig0(nsw), sig1(nsw);
    for (int k = 0; k < nsw; ++k)
        sig0[k] = sys.field->switching_value(k, t, std::span<const double>(y), eps);
    long events_this_period = 0;
    long period_bucket = 0;

    while (t < t1 - time_tol) {
        if (++steps > cfg.max_steps)
            throw NumericalError("integrate: max step count exceeded");
        h = std::min(h, t1 - t);
        if (h < 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t)))
            throw NumericalError("integrate: step size underflow (stiffness?) at t = " +
                                 std::to_string(t));

        st.step(t, y, h, k1, y5, err);
        double scaled = 0.0;
        for (int i = 0; i < n; ++i) {
            double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y[i]), std::abs(y5[i]));
            scaled = std::max(scaled, std::abs(err[i]) / sc);
        }

        if (scaled <= 1.0) { // accept
            double tn = t + h;
            for (double c : y5)
                if (!std::isfinite(c))
                    throw NumericalError("integrate: non-finite state at t = " + std::to_string(tn));

            // event scan across [t, tn]
            int first_cross = -1;
            double t_cross = tn;
            bool fsal_valid = true;
            if (nsw > 0) {
                for (int k = 0; k < nsw; ++k)
                    sig1[k] = sys.field->switching_value(k, tn, std::span<const double>(y5), eps);
                for (int k = 0; k < nsw; ++k) {
                    bool crossed = (sig0[k] < 0.0 && sig1[k] > 0.0) ||
                                   (sig0[k] > 0.0 && sig1[k] < 0.0) ||
                                   (sig0[k] != 0.0 && sig1[k] == 0.0);
                    if (!crossed) continue;
                    // bisection on sign, re-stepping from (t, y); this
                    // clobbers the stepper's stage buffers, so FSAL reuse
                    // is off for this step
                    fsal_valid = false;
                    double lo = t, hi = tn;
                    double slo = sig0[k];
                    Vec ym, e_unused;
                    for (int it = 0; it < 80 && hi - lo > time_tol; ++it) {
                        double tm = 0.5 * (lo + hi);
                        st.step(t, y, tm - t, k1, ym, e_unused);
                        double sm =
                            sys.field->switching_value(k, tm, std::span<const double>(ym), eps);
                        if ((slo < 0.0 && sm <= 0.0) || (slo > 0.0 && sm >= 0.0)) {
                            lo = tm;
                            slo = sm;
                        } else {
                            hi = tm;
                        }
                    }
                    double tk = hi;
                    if (tk - t <= time_tol) continue; // crossing at step start: already handled
                    if (tk < t_cross - time_tol) {
                        t_cross = tk;
                        first_cross = k;
                    } else if (tk <= t_cross + time_tol && first_cross < 0) {
                        first_cross = k;
                    }
                }
            }

            if (first_cross >= 0 && t_cross < tn - time_tol) {
                // truncate the step at the crossing and restart there
                Vec yc, e_unused;
                st.step(t, y, t_cross - t, k1, yc, e_unused);
                t = t_cross;
                y = yc;
                traj.times.push_back(t);
                traj.states.push_back(y);
                traj.event_times.push_back(t);
                st.deriv(t, y, k1);
                for (int k = 0; k < nsw; ++k)
                    sig0[k] = sys.field->switching_value(k, t, std::span<const double>(y), eps);
            } else {
                t = tn;
                y = y5;
                traj.times.push_back(t);
                traj.states.push_back(y);
                if (first_cross >= 0) { // crossing at the step end itself
                    traj.event_times.push_back(t);
                }
                if (fsal_valid) k1 = st.fsal();
                else st.deriv(t, y, k1);
                std::swap(sig0, sig1);
            }

            if (!traj.event_times.empty()) {
                long bucket = static_cast<long>(std::floor((t - t0) / sys.T));
                if (bucket != period_bucket) {
                    period_bucket = bucket;
                    events_this_period = 0;
                }
                if (traj.event_times.back() == t) ++events_this_period;
                if (events_this_period > 100)
                    throw NumericalError(
                        "integrate: more than 100 switching events in one period (chatter)");
            }

            double fac = 0.9 * std::pow(std::max(scaled, 1e-10), -0.7 / 5.0) *
                         std::pow(std::max(err_prev, 1e-10), 0.4 / 5.0);
            fac = std::min(5.0, std::max(0.2, fac));
            h = std::min(hmax, h * fac);
            err_prev = std::max(scaled, 1e-10);
        } else { // reject
            double fac = std::max(0.1, 0.9 * std::pow(scaled, -1.0 / 5.0));
            h *= fac;
        }
    }
    return traj;
}

// Time-T map: integrate over one period, return the final state.
inline Vec flow_map(const StandardSystem& sys, const Vec& v, double eps,
                    const IntegratorConfig& cfg = {}) {
    if (eps == 0.0) return v; // zero field
    return integrate(sys, v, eps, 0.0, sys.T, cfg).final_state();
}

} // namespace basincert
