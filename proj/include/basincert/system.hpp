#pragma once

// Systems in averaging standard form dx/dt = eps * g(t, x, eps).
//
// The field is an interface rather than a fixed expression list because
// the original-form transformation produces a composed field (matrix
// exponentials around parsed expressions) that has no textual form.

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "basincert/expr.hpp"
#include "basincert/linalg.hpp"

namespace basincert {

class VectorField {
public:
    virtual ~VectorField() = default;

    virtual int dim() const = 0;
    virtual void eval(double t, std::span<const double> x, double eps,
                      std::span<double> out) const = 0;

    // Scalar switching functions; the field may be nonsmooth only across
    // their zero sets.
    virtual int switching_count() const { return 0; }
    virtual double switching_value(int /*k*/, double /*t*/, std::span<const double> /*x*/,
                                   double /*eps*/) const {
        throw NumericalError("field has no switching functions");
    }
    virtual bool switching_depends_on_state(int /*k*/) const { return false; }
    virtual bool switching_depends_on_time(int /*k*/) const { return true; }

    Vec eval(double t, const Vec& x, double eps) const {
        Vec out(dim());
        eval(t, std::span<const double>(x), eps, std::span<double>(out));
        return out;
    }
};

// Field defined componentwise by parsed expressions.
class ExprField final : public VectorField {
public:
    ExprField(int n, std::vector<Expr> components) : n_(n), g_(std::move(components)) {
        if (static_cast<int>(g_.size()) != n_)
            throw ConfigError("field needs exactly n component expressions");
        // Collect switching functions across components, deduplicated by
        // printed form so repeated subexpressions do not double the event
        // scans. Per-expression counts stay exact in Expr itself.
        std::vector<std::string> seen;
        for (const Expr& comp : g_) {
            for (Expr& s : comp.switching_functions()) {
                std::string key = s.str();
                bool dup = false;
                for (const auto& k : seen)
                    if (k == key) { dup = true; break; }
                if (dup) continue;
                seen.push_back(std::move(key));
                sigma_time_.push_back(s.references_time());
                sigma_state_.push_back(s.references_state());
                sigma_.push_back(std::move(s));
            }
        }
    }

    int dim() const override { return n_; }

    void eval(double t, std::span<const double> x, double eps, std::span<double> out) const override {
        for (int i = 0; i < n_; ++i) out[i] = g_[i].eval(t, x, eps);
    }

    int switching_count() const override { return static_cast<int>(sigma_.size()); }

    double switching_value(int k, double t, std::span<const double> x, double eps) const override {
        return sigma_[k].eval(t, x, eps);
    }

    bool switching_depends_on_state(int k) const override { return sigma_state_[k]; }
    bool switching_depends_on_time(int k) const override { return sigma_time_[k]; }

    const std::vector<Expr>& components() const { return g_; }
    const std::vector<Expr>& switching_exprs() const { return sigma_; }

private:
    int n_;
    std::vector<Expr> g_;
    std::vector<Expr> sigma_;
    std::vector<bool> sigma_time_, sigma_state_;
};

// Field backed by a callable; used by tests and internal constructions.
// Carries no switching functions.
class LambdaField final : public VectorField {
public:
    using Fn = std::function<void(double, std::span<const double>, double, std::span<double>)>;

    LambdaField(int n, Fn fn) : n_(n), fn_(std::move(fn)) {}

    int dim() const override { return n_; }
    void eval(double t, std::span<const double> x, double eps, std::span<double> out) const override {
        fn_(t, x, eps, out);
    }

private:
    int n_;
    Fn fn_;
};

struct StandardSystem {
    int n = 0;
    double T = 0.0;
    std::string label;
    std::shared_ptr<const VectorField> field;

    Vec g(double t, const Vec& x, double eps) const { return field->eval(t, x, eps); }
};

inline StandardSystem make_standard_system(int n, double T, const std::vector<std::string>& g_sources,
                                           std::string label = {}) {
    if (n < 1) throw ConfigError("system dimension must be >= 1");
    if (!(T > 0.0)) throw ConfigError("period T must be positive");
    std::vector<Expr> comps;
    comps.reserve(g_sources.size());
    for (const auto& src : g_sources) comps.push_back(Expr::parse(src, n));
    StandardSystem sys;
    sys.n = n;
    sys.T = T;
    sys.label = std::move(label);
    sys.field = std::make_shared<ExprField>(n, std::move(comps));
    return sys;
}

inline StandardSystem make_lambda_system(int n, double T, LambdaField::Fn fn, std::string label = {}) {
    StandardSystem sys;
    sys.n = n;
    sys.T = T;
    sys.label = std::move(label);
    sys.field = std::make_shared<LambdaField>(n, std::move(fn));
    return sys;
}

} // namespace basincert
