#pragma once

// The averaging function g0(v) = ∫_0^T g(τ, v, 0) dτ, its Jacobian, the
// perturbed average g_eps reconstructed from the flow, zeros of g0, the
// Second Bogolubov stability check, and the linear-case change of
// variables from u' = A u + eps h to standard form.

#include <cmath>
#include <complex>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "basincert/errors.hpp"
#include "basincert/numkit.hpp"
#include "basincert/odeint.hpp"
#include "basincert/system.hpp"

namespace basincert {

namespace detail {

// Roots in t of sigma(t, v) over [0, T], by scanning 4096 subintervals
// and bisecting each sign change. Used to split the quadrature at the
// times where the integrand loses smoothness.
inline void switching_roots_in_time(const VectorField& field, int k, const Vec& v, double T,
                                    std::vector<double>& out) {
    constexpr int kScan = 4096;
    auto sigma = [&](double t) {
        return field.switching_value(k, t, std::span<const double>(v), 0.0);
    };
    double prev = sigma(0.0);
    for (int i = 1; i <= kScan; ++i) {
        double t = T * static_cast<double>(i) / kScan;
        double cur = sigma(t);
        if ((prev < 0.0 && cur > 0.0) || (prev > 0.0 && cur < 0.0)) {
            double lo = T * static_cast<double>(i - 1) / kScan, hi = t, slo = prev;
            for (int it = 0; it < 60; ++it) {
                double mid = 0.5 * (lo + hi);
                double sm = sigma(mid);
                if ((slo < 0.0 && sm <= 0.0) || (slo > 0.0 && sm >= 0.0)) {
                    lo = mid;
                    slo = sm;
                } else {
                    hi = mid;
                }
            }
            out.push_back(0.5 * (lo + hi));
            if (out.size() > 64)
                throw NumericalError(
                    "average: more than 64 switching roots in one period (pathological field)");
        } else if (cur == 0.0 && prev != 0.0) {
            out.push_back(t);
            if (out.size() > 64)
                throw NumericalError(
                    "average: more than 64 switching roots in one period (pathological field)");
        }
        prev = cur;
    }
}

inline std::vector<double> quadrature_splits(const StandardSystem& sys, const Vec& v) {
    std::vector<double> roots;
    for (int k = 0; k < sys.field->switching_count(); ++k)
        switching_roots_in_time(*sys.field, k, v, sys.T, roots);
    std::sort(roots.begin(), roots.end());
    return roots;
}

} // namespace detail

// g0(v), componentwise adaptive Simpson with splits at the switching
// roots so nonsmooth integrands keep full-order accuracy.
inline Vec average(const StandardSystem& sys, const Vec& v) {
    QuadratureSpec spec;
    spec.splits = detail::quadrature_splits(sys, v);
    Vec out(sys.n);
    for (int i = 0; i < sys.n; ++i) {
        out[i] = quad(
            [&](double t) { return sys.field->eval(t, v, 0.0)[i]; }, 0.0, sys.T, spec);
    }
    return out;
}

inline Mat average_jacobian(const StandardSystem& sys, const Vec& v) {
    return fd_jacobian([&](const Vec& u) { return average(sys, u); }, v);
}

// g_eps(v) = (x(T, v, eps) - v) / eps, the exact per-period average of g
// along the flow; it tends to g0 as eps -> 0.
inline Vec g_eps(const StandardSystem& sys, const Vec& v, double eps,
                 const IntegratorConfig& cfg = {}) {
    if (!(eps > 0.0)) throw ConfigError("g_eps requires eps > 0");
    Vec xT = flow_map(sys, v, eps, cfg);
    Vec out(sys.n);
    for (int i = 0; i < sys.n; ++i) out[i] = (xT[i] - v[i]) / eps;
    return out;
}

// Newton on g0 from v_start. Raises the distinct singular-Jacobian error
// both when Newton's own gate trips and when the Jacobian at the computed
// zero is numerically singular, which signals non-isolated zeros (e.g.
// the Cartesian van der Pol circle).
inline Vec find_zero(const StandardSystem& sys, const Vec& v_start, double tol = 1e-8,
                     int max_iter = 60) {
    NewtonOptions opt;
    opt.tol = tol;
    opt.max_iter = max_iter;
    Vec v = newton([&](const Vec& u) { return average(sys, u); }, v_start, opt);
    Mat J = average_jacobian(sys, v);
    double scale = std::max(1.0, std::pow(inf_norm(J), sys.n));
    if (std::abs(det(J)) < 1e-6 * scale)
        throw SingularJacobianError(
            "find_zero: Jacobian of g0 is numerically singular at the computed zero; the zero "
            "set is likely non-isolated (consider symmetry reduction before certifying)");
    return v;
}

struct BogolubovReport {
    Vec v0;
    double residual = 0.0; // ‖g0(v0)‖_inf
    Mat jacobian;
    double det = 0.0;
    std::vector<std::complex<double>> eigenvalues;
    bool is_zero = false;               // residual <= 1e-8
    bool hyperbolic_zero = false;       // |det| > 1e-10 * scale
    bool asymptotically_stable = false; // all real parts < 0
};

// Second Bogolubov check at a candidate zero; never throws on a non-zero
// v0, it just reports the residual.
inline BogolubovReport bogolubov_check(const StandardSystem& sys, const Vec& v0) {
    BogolubovReport rep;
    rep.v0 = v0;
    rep.residual = inf_norm(average(sys, v0));
    rep.jacobian = average_jacobian(sys, v0);
    rep.det = det(rep.jacobian);
    rep.eigenvalues = eig_small(rep.jacobian);
    rep.is_zero = rep.residual <= 1e-8;
    double scale = std::max(1.0, std::pow(inf_norm(rep.jacobian), sys.n));
    rep.hyperbolic_zero = std::abs(rep.det) > 1e-10 * scale;
    rep.asymptotically_stable = true;
    for (const auto& ev : rep.eigenvalues)
        if (ev.real() >= 0.0) rep.asymptotically_stable = false;
    return rep;
}

// u' = A u + eps h(t, u, eps) with linear A whose flow is T-periodic.
struct OriginalSystem {
    Mat A;
    double T = 0.0;
    std::vector<Expr> h;
    std::string label;

    int n() const { return A.rows; }
};

inline OriginalSystem make_original_system(Mat A, double T, const std::vector<std::string>& h_sources,
                                           std::string label = {}) {
    if (!A.square()) throw ConfigError("A must be square");
    if (!(T > 0.0)) throw ConfigError("period T must be positive");
    OriginalSystem orig;
    orig.A = std::move(A);
    orig.T = T;
    orig.label = std::move(label);
    for (const auto& src : h_sources) orig.h.push_back(Expr::parse(src, orig.A.rows));
    return orig;
}

namespace detail {

// g(t, x, eps) = e^{-At} h(t, e^{At} x, eps); switching functions of h
// composed with u = e^{At} x.
class TransformedField final : public VectorField {
public:
    TransformedField(Mat A, std::vector<Expr> h) : A_(std::move(A)), h_(std::move(h)), n_(A_.rows) {
        std::vector<std::string> seen;
        for (const Expr& comp : h_) {
            for (Expr& s : comp.switching_functions()) {
                std::string key = s.str();
                bool dup = false;
                for (const auto& k : seen)
                    if (k == key) { dup = true; break; }
                if (dup) continue;
                seen.push_back(std::move(key));
                sigma_.push_back(std::move(s));
            }
        }
    }

    int dim() const override { return n_; }

    void eval(double t, std::span<const double> x, double eps, std::span<double> out) const override {
        Mat E = expm(t * A_);
        Vec u = mat_vec(E, Vec(x.begin(), x.end()));
        Vec hv(n_);
        for (int i = 0; i < n_; ++i) hv[i] = h_[i].eval(t, u, eps);
        Mat Einv = expm(-t * A_);
        Vec g = mat_vec(Einv, hv);
        for (int i = 0; i < n_; ++i) out[i] = g[i];
    }

    int switching_count() const override { return static_cast<int>(sigma_.size()); }

    double switching_value(int k, double t, std::span<const double> x, double eps) const override {
        Mat E = expm(t * A_);
        Vec u = mat_vec(E, Vec(x.begin(), x.end()));
        return sigma_[k].eval(t, u, eps);
    }

    // u = e^{At} x mixes time and state, so composed switching functions
    // are conservatively treated as depending on both.
    bool switching_depends_on_state(int k) const override { return sigma_[k].references_state(); }
    bool switching_depends_on_time(int /*k*/) const override { return true; }

private:
    Mat A_;
    std::vector<Expr> h_;
    std::vector<Expr> sigma_;
    int n_;
};

} // namespace detail

// Change of variables u = e^{At} x. Requires e^{AT} = I (all unperturbed
// solutions T-periodic); rejects otherwise.
inline StandardSystem to_standard_form(const OriginalSystem& orig) {
    Mat EAT = expm(orig.T * orig.A);
    double defect = inf_norm(EAT - Mat::identity(orig.n()));
    if (defect > 1e-8)
        throw NotPeriodicError("to_standard_form: exp(A*T) differs from identity by " +
                               std::to_string(defect) +
                               "; the unperturbed flow is not T-periodic");
    StandardSystem sys;
    sys.n = orig.n();
    sys.T = orig.T;
    sys.label = orig.label.empty() ? std::string("standard form") : orig.label + " (standard form)";
    sys.field = std::make_shared<detail::TransformedField>(orig.A, orig.h);
    return sys;
}

} // namespace basincert
