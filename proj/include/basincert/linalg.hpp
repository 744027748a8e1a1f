#pragma once

// Small dense linear algebra. Everything here targets n <= 8, so the
// routines are unblocked and allocation cost is irrelevant.

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "basincert/errors.hpp"

namespace basincert {

using Vec = std::vector<double>;

struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, fill) {}

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    bool square() const { return rows == cols; }
};

inline Mat operator+(const Mat& x, const Mat& y) {
    Mat r = x;
    for (std::size_t i = 0; i < r.a.size(); ++i) r.a[i] += y.a[i];
    return r;
}

inline Mat operator-(const Mat& x, const Mat& y) {
    Mat r = x;
    for (std::size_t i = 0; i < r.a.size(); ++i) r.a[i] -= y.a[i];
    return r;
}

inline Mat operator*(double c, const Mat& x) {
    Mat r = x;
    for (double& v : r.a) v *= c;
    return r;
}

inline Mat operator*(const Mat& x, const Mat& y) {
    Mat r(x.rows, y.cols);
    for (int i = 0; i < x.rows; ++i)
        for (int k = 0; k < x.cols; ++k) {
            const double xik = x(i, k);
            if (xik == 0.0) continue;
            for (int j = 0; j < y.cols; ++j) r(i, j) += xik * y(k, j);
        }
    return r;
}

inline Vec mat_vec(const Mat& m, const Vec& v) {
    Vec r(m.rows, 0.0);
    for (int i = 0; i < m.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < m.cols; ++j) s += m(i, j) * v[j];
        r[i] = s;
    }
    return r;
}

inline double inf_norm(const Vec& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// max absolute row sum
inline double inf_norm(const Mat& m) {
    double best = 0.0;
    for (int i = 0; i < m.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < m.cols; ++j) s += std::abs(m(i, j));
        best = std::max(best, s);
    }
    return best;
}

inline Vec operator+(const Vec& x, const Vec& y) {
    Vec r = x;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += y[i];
    return r;
}

inline Vec operator-(const Vec& x, const Vec& y) {
    Vec r = x;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
    return r;
}

inline Vec operator*(double c, const Vec& x) {
    Vec r = x;
    for (double& v : r) v *= c;
    return r;
}

// LU factorization with partial pivoting, templated so the same code
// serves double and std::complex<double> (inverse iteration needs the
// complex case).
template <class T>
struct LUFactors {
    int n = 0;
    std::vector<T> lu;        // row-major
    std::vector<int> piv;
    int sign = 1;
    bool singular = false;

    T& at(int i, int j) { return lu[static_cast<std::size_t>(i) * n + j]; }
    const T& at(int i, int j) const { return lu[static_cast<std::size_t>(i) * n + j]; }
};

template <class T>
LUFactors<T> lu_factor(int n, std::vector<T> a) {
    LUFactors<T> f;
    f.n = n;
    f.lu = std::move(a);
    f.piv.resize(n);
    for (int i = 0; i < n; ++i) f.piv[i] = i;
    for (int k = 0; k < n; ++k) {
        int p = k;
        double best = std::abs(f.at(k, k));
        for (int i = k + 1; i < n; ++i) {
            double m = std::abs(f.at(i, k));
            if (m > best) { best = m; p = i; }
        }
        if (best == 0.0) { f.singular = true; continue; }
        if (p != k) {
            for (int j = 0; j < n; ++j) std::swap(f.at(p, j), f.at(k, j));
            std::swap(f.piv[p], f.piv[k]);
            f.sign = -f.sign;
        }
        for (int i = k + 1; i < n; ++i) {
            T m = f.at(i, k) / f.at(k, k);
            f.at(i, k) = m;
            for (int j = k + 1; j < n; ++j) f.at(i, j) -= m * f.at(k, j);
        }
    }
    return f;
}

inline LUFactors<double> lu_factor(const Mat& m) { return lu_factor<double>(m.rows, m.a); }

template <class T>
std::vector<T> lu_solve(const LUFactors<T>& f, const std::vector<T>& b) {
    const int n = f.n;
    std::vector<T> x(n);
    for (int i = 0; i < n; ++i) x[i] = b[f.piv[i]];
    for (int i = 1; i < n; ++i)
        for (int j = 0; j < i; ++j) x[i] -= f.at(i, j) * x[j];
    for (int i = n - 1; i >= 0; --i) {
        for (int j = i + 1; j < n; ++j) x[i] -= f.at(i, j) * x[j];
        x[i] /= f.at(i, i);
    }
    return x;
}

template <class T>
T lu_det(const LUFactors<T>& f) {
    if (f.singular) return T(0);
    T d = static_cast<T>(f.sign);
    for (int i = 0; i < f.n; ++i) d *= f.at(i, i);
    return d;
}

inline double det(const Mat& m) { return lu_det(lu_factor(m)); }

inline Mat inverse(const Mat& m) {
    auto f = lu_factor(m);
    if (f.singular) throw NumericalError("matrix is singular, cannot invert");
    const int n = m.rows;
    Mat inv(n, n);
    std::vector<double> e(n, 0.0);
    for (int j = 0; j < n; ++j) {
        e.assign(n, 0.0);
        e[j] = 1.0;
        Vec col = lu_solve(f, e);
        for (int i = 0; i < n; ++i) inv(i, j) = col[i];
    }
    return inv;
}

inline Mat solve(const Mat& m, const Mat& rhs) {
    auto f = lu_factor(m);
    if (f.singular) throw NumericalError("matrix is singular, cannot solve");
    Mat x(m.rows, rhs.cols);
    std::vector<double> b(m.rows);
    for (int j = 0; j < rhs.cols; ++j) {
        for (int i = 0; i < m.rows; ++i) b[i] = rhs(i, j);
        Vec col = lu_solve(f, b);
        for (int i = 0; i < m.rows; ++i) x(i, j) = col[i];
    }
    return x;
}

} // namespace basincert
