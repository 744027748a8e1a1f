#pragma once

// Shared numerical kernels: adaptive composite-Simpson quadrature,
// central finite-difference Jacobians, damped Newton, matrix exponential
// by scaling and squaring, small dense eigenvalues (Hessenberg + shifted
// QR), and weighted max norms with their exact induced matrix norms.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "basincert/errors.hpp"
#include "basincert/linalg.hpp"

namespace basincert {

// ‖x‖0 = max_i |(P x)_i| with P invertible. A default-constructed norm is
// the plain max norm (P = I for every dimension).
class WeightedNorm {
public:
    WeightedNorm() = default;

    explicit WeightedNorm(Mat P) : p_(std::move(P)) {
        if (!p_.square()) throw ConfigError("norm matrix P must be square");
        pinv_ = inverse(p_); // throws if singular
        double cond = inf_norm(p_) * inf_norm(pinv_);
        if (!std::isfinite(cond) || cond > 1e14)
            throw NumericalError("norm matrix P is too ill-conditioned (cond estimate " +
                                 std::to_string(cond) + ")");
    }

    bool is_identity() const { return p_.rows == 0; }
    int dim() const { return p_.rows; } // 0 means "any" (identity)

    double operator()(std::span<const double> x) const {
        if (is_identity()) {
            double m = 0.0;
            for (double v : x) m = std::max(m, std::abs(v));
            return m;
        }
        double m = 0.0;
        for (int i = 0; i < p_.rows; ++i) {
            double s = 0.0;
            for (int j = 0; j < p_.cols; ++j) s += p_(i, j) * x[j];
            m = std::max(m, std::abs(s));
        }
        return m;
    }

    double operator()(const Vec& x) const { return (*this)(std::span<const double>(x)); }

    double distance(const Vec& a, const Vec& b) const {
        Vec d(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
        return (*this)(d);
    }

    const Mat& P() const { return p_; }
    const Mat& Pinv() const { return pinv_; }

private:
    Mat p_, pinv_; // empty when identity
};

// Exactly ‖P·M·P⁻¹‖_inf (maximum absolute row sum).
inline double induced_norm(const Mat& M, const WeightedNorm& W) {
    if (W.is_identity()) return inf_norm(M);
    return inf_norm(W.P() * M * W.Pinv());
}

struct QuadratureSpec {
    int panels = 8;                // initial Simpson panels per subinterval
    std::vector<double> splits;    // sorted, strictly inside (a, b)
    double tol = 1e-10;
    long max_panels = 1L << 20;
};

namespace detail {

inline double simpson(const std::function<double(double)>& f, double a, double b, long m) {
    // composite Simpson with m panels (m even), m+1 nodes
    const double h = (b - a) / static_cast<double>(m);
    double s_end = f(a) + f(b);
    double s_odd = 0.0, s_even = 0.0;
    for (long i = 1; i < m; ++i) {
        double v = f(a + h * static_cast<double>(i));
        if (!std::isfinite(v))
            throw NumericalError("non-finite integrand value at t = " +
                                 std::to_string(a + h * static_cast<double>(i)));
        if (i & 1) s_odd += v; else s_even += v;
    }
    if (!std::isfinite(s_end)) throw NumericalError("non-finite integrand value at an endpoint");
    return (h / 3.0) * (s_end + 4.0 * s_odd + 2.0 * s_even);
}

inline double quad_subinterval(const std::function<double(double)>& f, double a, double b,
                               const QuadratureSpec& spec) {
    long m = std::max(2, spec.panels);
    if (m & 1) ++m;
    double prev = simpson(f, a, b, m);
    while (m <= spec.max_panels) {
        m *= 2;
        double cur = simpson(f, a, b, m);
        if (std::abs(cur - prev) <= spec.tol * (1.0 + std::abs(cur))) return cur;
        prev = cur;
    }
    throw NumericalError("quadrature did not converge within the panel cap on [" +
                         std::to_string(a) + ", " + std::to_string(b) + "]");
}

} // namespace detail

// Composite Simpson on each subinterval between consecutive split points,
// panel-doubling until successive estimates agree to tol*(1+|estimate|).
inline double quad(const std::function<double(double)>& f, double a, double b,
                   const QuadratureSpec& spec = {}) {
    if (!(a < b)) throw ConfigError("quad requires a < b");
    std::vector<double> edges;
    edges.push_back(a);
    for (double s : spec.splits)
        if (s > a && s < b) edges.push_back(s);
    edges.push_back(b);
    std::sort(edges.begin(), edges.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        if (edges[i + 1] - edges[i] < 1e-14 * (std::abs(a) + std::abs(b) + 1.0)) continue;
        total += detail::quad_subinterval(f, edges[i], edges[i + 1], spec);
    }
    return total;
}

using VecMap = std::function<Vec(const Vec&)>;

// Central differences, step h_i = rel_step * max(1, |v_i|).
inline Mat fd_jacobian(const VecMap& F, const Vec& v, double rel_step = 1e-6) {
    const int n = static_cast<int>(v.size());
    Vec probe = v;
    Mat J;
    for (int j = 0; j < n; ++j) {
        const double h = rel_step * std::max(1.0, std::abs(v[j]));
        probe[j] = v[j] + h;
        Vec fp = F(probe);
        probe[j] = v[j] - h;
        Vec fm = F(probe);
        probe[j] = v[j];
        if (J.rows == 0) J = Mat(static_cast<int>(fp.size()), n);
        for (int i = 0; i < J.rows; ++i) {
            double d = (fp[i] - fm[i]) / (2.0 * h);
            if (!std::isfinite(d))
                throw NumericalError("non-finite value while forming finite-difference Jacobian");
            J(i, j) = d;
        }
    }
    return J;
}

struct NewtonOptions {
    double tol = 1e-8;       // on ‖F‖_inf
    int max_iter = 50;
    double rel_step = 1e-6;  // FD Jacobian step
};

namespace detail {

// Hadamard-style scale for the singularity test: |det| <= prod of row
// inf-norms, so |det|/scale is a conditioning-free ratio in [0, 1].
inline double det_scale(const Mat& J) {
    double s = 1.0;
    for (int i = 0; i < J.rows; ++i) {
        double r = 0.0;
        for (int j = 0; j < J.cols; ++j) r = std::max(r, std::abs(J(i, j)));
        s *= std::max(r, 1e-30);
    }
    return std::max(s, 1.0);
}

} // namespace detail

// Damped Newton with step halving (floor 2^-20) on ‖F‖_inf.
inline Vec newton(const VecMap& F, Vec v, const NewtonOptions& opt = {}) {
    Vec Fv = F(v);
    double r = inf_norm(Fv);
    for (int iter = 0; iter < opt.max_iter; ++iter) {
        if (r <= opt.tol) return v;
        Mat J = fd_jacobian(F, v, opt.rel_step);
        auto f = lu_factor(J);
        double d = std::abs(lu_det(f));
        if (f.singular || d < 1e-12 * detail::det_scale(J))
            throw SingularJacobianError("Newton: Jacobian numerically singular (|det| = " +
                                        std::to_string(d) + ")");
        Vec rhs(Fv.size());
        for (std::size_t i = 0; i < Fv.size(); ++i) rhs[i] = -Fv[i];
        Vec step = lu_solve(f, rhs);

        double lambda = 1.0;
        bool improved = false;
        while (lambda >= 0x1.0p-20) {
            Vec trial = v;
            for (std::size_t i = 0; i < v.size(); ++i) trial[i] += lambda * step[i];
            try {
                Vec Ft = F(trial);
                double rt = inf_norm(Ft);
                if (std::isfinite(rt) && rt < r) {
                    v = std::move(trial);
                    Fv = std::move(Ft);
                    r = rt;
                    improved = true;
                    break;
                }
            } catch (const NumericalError&) {
                // probe left the field's domain; shrink
            }
            lambda *= 0.5;
        }
        if (!improved)
            throw NumericalError("Newton: line search stalled at residual " + std::to_string(r));
    }
    if (r <= opt.tol) return v;
    throw NumericalError("Newton: no convergence after " + std::to_string(opt.max_iter) +
                         " iterations (residual " + std::to_string(r) + ")");
}

// Scaling-and-squaring with a truncated Taylor kernel on ‖M‖/2^s <= 0.5.
inline Mat expm(const Mat& M) {
    if (!M.square()) throw ConfigError("expm requires a square matrix");
    const int n = M.rows;
    if (n > 8) throw NumericalError("expm: dimension cap is n <= 8");
    double norm = inf_norm(M);
    int s = 0;
    while (norm > 0.5) { norm *= 0.5; ++s; }
    Mat A = std::ldexp(1.0, -s) * M;

    Mat sum = Mat::identity(n);
    Mat term = Mat::identity(n);
    for (int k = 1; k <= 40; ++k) {
        term = (1.0 / static_cast<double>(k)) * (term * A);
        sum = sum + term;
        if (inf_norm(term) < 1e-20 * std::max(1.0, inf_norm(sum))) break;
    }
    for (int i = 0; i < s; ++i) sum = sum * sum;
    return sum;
}

namespace detail {

// Francis double-shift QR on an upper Hessenberg matrix (EISPACK hqr).
// Destroys H, appends eigenvalues to out.
inline void hqr_eigenvalues(Mat& H, std::vector<std::complex<double>>& out) {
    const int n = H.rows;
    const double eps = std::numeric_limits<double>::epsilon();
    double anorm = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::abs(H(i, j));
    if (anorm == 0.0) anorm = 1.0;

    int nn = n - 1;
    double t = 0.0;
    int total_its = 0;
    while (nn >= 0) {
        int its = 0;
        int l;
        do {
            for (l = nn; l >= 1; --l) {
                double s = std::abs(H(l - 1, l - 1)) + std::abs(H(l, l));
                if (s == 0.0) s = anorm;
                if (std::abs(H(l, l - 1)) <= eps * s) {
                    H(l, l - 1) = 0.0;
                    break;
                }
            }
            double x = H(nn, nn);
            if (l == nn) { // one real root
                out.emplace_back(x + t, 0.0);
                --nn;
            } else {
                double y = H(nn - 1, nn - 1);
                double w = H(nn, nn - 1) * H(nn - 1, nn);
                if (l == nn - 1) { // a 2x2 block
                    double p = 0.5 * (y - x);
                    double q = p * p + w;
                    double z = std::sqrt(std::abs(q));
                    x += t;
                    if (q >= 0.0) { // real pair
                        z = p + (p >= 0.0 ? z : -z);
                        out.emplace_back(x + z, 0.0);
                        out.emplace_back(z != 0.0 ? x - w / z : x + z, 0.0);
                    } else { // complex pair
                        out.emplace_back(x + p, z);
                        out.emplace_back(x + p, -z);
                    }
                    nn -= 2;
                } else { // QR sweep
                    if (its == 30 || total_its > 40 * n)
                        throw NumericalError("eig_small: QR iteration did not converge");
                    if (its == 10 || its == 20) { // exceptional shift
                        t += x;
                        for (int i = 0; i <= nn; ++i) H(i, i) -= x;
                        double s = std::abs(H(nn, nn - 1)) + std::abs(H(nn - 1, nn - 2));
                        y = x = 0.75 * s;
                        w = -0.4375 * s * s;
                    }
                    ++its;
                    ++total_its;
                    int m;
                    double p = 0, q = 0, z = 0, r = 0, s = 0;
                    for (m = nn - 2; m >= l; --m) {
                        z = H(m, m);
                        r = x - z;
                        s = y - z;
                        p = (r * s - w) / H(m + 1, m) + H(m, m + 1);
                        q = H(m + 1, m + 1) - z - r - s;
                        r = H(m + 2, m + 1);
                        s = std::abs(p) + std::abs(q) + std::abs(r);
                        p /= s; q /= s; r /= s;
                        if (m == l) break;
                        double u = std::abs(H(m, m - 1)) * (std::abs(q) + std::abs(r));
                        double v = std::abs(p) * (std::abs(H(m - 1, m - 1)) + std::abs(z) +
                                                  std::abs(H(m + 1, m + 1)));
                        if (u <= eps * v) break;
                    }
                    for (int i = m + 2; i <= nn; ++i) {
                        H(i, i - 2) = 0.0;
                        if (i != m + 2) H(i, i - 3) = 0.0;
                    }
                    for (int k = m; k <= nn - 1; ++k) {
                        if (k != m) {
                            p = H(k, k - 1);
                            q = H(k + 1, k - 1);
                            r = (k != nn - 1) ? H(k + 2, k - 1) : 0.0;
                            x = std::abs(p) + std::abs(q) + std::abs(r);
                            if (x != 0.0) { p /= x; q /= x; r /= x; }
                        }
                        s = std::sqrt(p * p + q * q + r * r);
                        if (p < 0.0) s = -s;
                        if (s == 0.0) continue;
                        if (k == m) {
                            if (l != m) H(k, k - 1) = -H(k, k - 1);
                        } else {
                            H(k, k - 1) = -s * x;
                        }
                        p += s;
                        x = p / s; y = q / s; z = r / s;
                        q /= p; r /= p;
                        for (int j = k; j <= nn; ++j) { // row modification
                            p = H(k, j) + q * H(k + 1, j);
                            if (k != nn - 1) {
                                p += r * H(k + 2, j);
                                H(k + 2, j) -= p * z;
                            }
                            H(k + 1, j) -= p * y;
                            H(k, j) -= p * x;
                        }
                        int mmin = (nn < k + 3) ? nn : k + 3;
                        for (int i = l; i <= mmin; ++i) { // column modification
                            p = x * H(i, k) + y * H(i, k + 1);
                            if (k != nn - 1) {
                                p += z * H(i, k + 2);
                                H(i, k + 2) -= p * r;
                            }
                            H(i, k + 1) -= p * q;
                            H(i, k) -= p;
                        }
                    }
                }
            }
        } while (l < nn - 1 && nn >= 0);
    }
}

inline void hessenberg_reduce(Mat& A) {
    // Householder reduction to upper Hessenberg form
    const int n = A.rows;
    for (int k = 0; k < n - 2; ++k) {
        double scale = 0.0;
        for (int i = k + 1; i < n; ++i) scale += std::abs(A(i, k));
        if (scale == 0.0) continue;
        Vec v(n, 0.0);
        double alpha = 0.0;
        for (int i = k + 1; i < n; ++i) {
            v[i] = A(i, k) / scale;
            alpha += v[i] * v[i];
        }
        alpha = std::sqrt(alpha);
        if (v[k + 1] < 0.0) alpha = -alpha;
        v[k + 1] += alpha;
        double beta = alpha * v[k + 1];
        if (beta == 0.0) continue;
        // A <- (I - v v^T / beta) A (I - v v^T / beta)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int i = k + 1; i < n; ++i) s += v[i] * A(i, j);
            s /= beta;
            for (int i = k + 1; i < n; ++i) A(i, j) -= s * v[i];
        }
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = k + 1; j < n; ++j) s += A(i, j) * v[j];
            s /= beta;
            for (int j = k + 1; j < n; ++j) A(i, j) -= s * v[j];
        }
        for (int i = k + 2; i < n; ++i) A(i, k) = 0.0;
        A(k + 1, k) = -alpha * scale;
    }
}

} // namespace detail

// Eigenvalues of a small dense matrix: closed form for n <= 2, Hessenberg
// reduction plus shifted QR otherwise. Sorted by real part descending
// (ties by imaginary part descending).
inline std::vector<std::complex<double>> eig_small(const Mat& M) {
    if (!M.square()) throw ConfigError("eig_small requires a square matrix");
    const int n = M.rows;
    if (n > 8) throw NumericalError("eig_small: dimension cap is n <= 8");
    std::vector<std::complex<double>> ev;
    if (n == 0) return ev;
    if (n == 1) {
        ev.emplace_back(M(0, 0), 0.0);
    } else if (n == 2) {
        double tr = M(0, 0) + M(1, 1);
        double dt = M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
        double disc = 0.25 * tr * tr - dt;
        if (disc >= 0.0) {
            double rt = std::sqrt(disc);
            ev.emplace_back(0.5 * tr + rt, 0.0);
            ev.emplace_back(0.5 * tr - rt, 0.0);
        } else {
            double im = std::sqrt(-disc);
            ev.emplace_back(0.5 * tr, im);
            ev.emplace_back(0.5 * tr, -im);
        }
    } else {
        Mat H = M;
        detail::hessenberg_reduce(H);
        detail::hqr_eigenvalues(H, ev);
    }
    std::sort(ev.begin(), ev.end(), [](const auto& a, const auto& b) {
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
    return ev;
}

} // namespace basincert
