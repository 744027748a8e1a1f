#pragma once

// Contraction certificates: search for (norm P, step alpha, q < 1) making
// v -> v + alpha*g0(v) a contraction on a convex set V, estimate the
// admissible eps0, grow certified balls around a stable zero, and handle
// weakly differentiable (nonsmooth) fields.
//
// The contraction condition is checked through its mean-value sufficient
// condition on convex V: sup_V ‖I + alpha*(g0)'(v)‖_0 <= q. The grid
// supremum carries an explicit Lipschitz-based margin, so these are
// numerical certificates with a measurable soundness gap, not proofs.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "basincert/averaging.hpp"
#include "basincert/errors.hpp"
#include "basincert/numkit.hpp"
#include "basincert/parallel.hpp"
#include "basincert/rng.hpp"
#include "basincert/system.hpp"

namespace basincert {

struct Box {
    Vec lo, hi;
};

struct BallSet {
    Vec center;
    double radius = 0.0;
    WeightedNorm norm; // the ball lives in this norm
};

using ConvexSet = std::variant<Box, BallSet>;

inline int set_dim(const ConvexSet& s) {
    if (const auto* b = std::get_if<Box>(&s)) return static_cast<int>(b->lo.size());
    return static_cast<int>(std::get<BallSet>(s).center.size());
}

inline Vec set_center(const ConvexSet& s) {
    if (const auto* b = std::get_if<Box>(&s)) {
        Vec c(b->lo.size());
        for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.5 * (b->lo[i] + b->hi[i]);
        return c;
    }
    return std::get<BallSet>(s).center;
}

// Axis-aligned bounding box; for a ball in norm ‖P·‖_inf the extent of
// coordinate i is radius * ‖row_i(P^-1)‖_1 around the center.
inline Box bounding_box(const ConvexSet& s) {
    if (const auto* b = std::get_if<Box>(&s)) return *b;
    const auto& ball = std::get<BallSet>(s);
    const int n = static_cast<int>(ball.center.size());
    Box bb{ball.center, ball.center};
    for (int i = 0; i < n; ++i) {
        double ext = 0.0;
        if (ball.norm.is_identity()) {
            ext = ball.radius;
        } else {
            for (int j = 0; j < n; ++j) ext += std::abs(ball.norm.Pinv()(i, j));
            ext *= ball.radius;
        }
        bb.lo[i] -= ext;
        bb.hi[i] += ext;
    }
    return bb;
}

inline bool set_contains(const ConvexSet& s, const Vec& v, double slack = 0.0) {
    if (const auto* b = std::get_if<Box>(&s)) {
        for (std::size_t i = 0; i < v.size(); ++i)
            if (v[i] < b->lo[i] - slack || v[i] > b->hi[i] + slack) return false;
        return true;
    }
    const auto& ball = std::get<BallSet>(s);
    return ball.norm.distance(v, ball.center) <= ball.radius + slack;
}

inline Vec sample_in(const ConvexSet& s, SplitMix64& rng) {
    Box bb = bounding_box(s);
    for (int attempt = 0; attempt < 4096; ++attempt) {
        Vec v(bb.lo.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = rng.uniform(bb.lo[i], bb.hi[i]);
        if (set_contains(s, v, 1e-15)) return v;
    }
    throw NumericalError("sample_in: rejection sampling failed (degenerate set?)");
}

inline void validate_set(const ConvexSet& s) {
    if (const auto* b = std::get_if<Box>(&s)) {
        if (b->lo.size() != b->hi.size() || b->lo.empty())
            throw ConfigError("box needs matching non-empty lo/hi");
        for (std::size_t i = 0; i < b->lo.size(); ++i)
            if (!(b->lo[i] < b->hi[i])) throw ConfigError("box needs lo < hi componentwise");
        return;
    }
    const auto& ball = std::get<BallSet>(s);
    if (ball.center.empty()) throw ConfigError("ball needs a center");
    if (!(ball.radius > 0.0)) throw ConfigError("ball radius must be positive");
}

enum class CertStatus { Certified, Falsified, Inconclusive, InconclusiveForEps };

inline const char* to_string(CertStatus s) {
    switch (s) {
        case CertStatus::Certified: return "certified";
        case CertStatus::Falsified: return "falsified";
        case CertStatus::Inconclusive: return "inconclusive";
        case CertStatus::InconclusiveForEps: return "inconclusive_for_eps";
    }
    return "?";
}

struct Certificate {
    ConvexSet set;
    WeightedNorm norm;
    double alpha = 0.0;
    double q_grid = std::numeric_limits<double>::infinity();
    double q_cert = std::numeric_limits<double>::infinity();
    double margin = 0.0;
    int grid_per_dim = 0;
    double eps0 = 0.0; // 0 until epsilon0_estimate has run (or it failed)
    CertStatus status = CertStatus::Inconclusive;
    std::optional<Vec> falsifying_point;
    std::uint64_t seed = 0;
};

inline std::vector<double> log_spaced(double lo, double hi, int steps) {
    if (!(lo > 0.0) || !(hi >= lo) || steps < 1) throw ConfigError("bad alpha grid parameters");
    std::vector<double> out;
    if (steps == 1) {
        out.push_back(lo);
        return out;
    }
    double llo = std::log(lo), lhi = std::log(hi);
    for (int i = 0; i < steps; ++i)
        out.push_back(std::exp(llo + (lhi - llo) * static_cast<double>(i) / (steps - 1)));
    return out;
}

struct CertifyOptions {
    std::vector<double> alpha_grid;     // empty: log-spaced default
    std::vector<WeightedNorm> norms;    // empty: identity + modal suggestions
    int grid_per_dim = 33;
    std::uint64_t seed = 0;
    int threads = 1;
};

namespace detail {

// Uniform lattice over the bounding box, filtered to the set. Lattice
// indices are kept so axis-adjacent pairs can estimate the Jacobian's
// Lipschitz constant for the certification margin.
struct JacobianGrid {
    int n = 0;
    int per_dim = 0;
    std::vector<Vec> points;
    std::vector<Mat> jac;
    std::vector<long> lattice;        // lattice cell -> point index, -1 if outside
    std::vector<double> axis_step;
    double max_step = 0.0;
};

inline JacobianGrid compute_jacobian_grid(const StandardSystem& sys, const ConvexSet& V,
                                          int grid_per_dim, int threads) {
    if (grid_per_dim < 3) throw ConfigError("grid_per_dim must be >= 3");
    validate_set(V);
    JacobianGrid g;
    g.n = set_dim(V);
    g.per_dim = grid_per_dim;
    Box bb = bounding_box(V);

    g.axis_step.resize(g.n);
    for (int i = 0; i < g.n; ++i) {
        g.axis_step[i] = (bb.hi[i] - bb.lo[i]) / static_cast<double>(grid_per_dim - 1);
        g.max_step = std::max(g.max_step, g.axis_step[i]);
    }

    long total = 1;
    for (int i = 0; i < g.n; ++i) {
        total *= grid_per_dim;
        if (total > 4'000'000)
            throw ConfigError("certification grid has over 4e6 nodes; lower grid_per_dim");
    }
    g.lattice.assign(total, -1);

    for (long idx = 0; idx < total; ++idx) {
        long rem = idx;
        Vec v(g.n);
        for (int i = 0; i < g.n; ++i) {
            int ki = static_cast<int>(rem % grid_per_dim);
            rem /= grid_per_dim;
            v[i] = bb.lo[i] + g.axis_step[i] * ki;
        }
        if (!set_contains(V, v, 1e-12 * (1.0 + inf_norm(v)))) continue;
        g.lattice[idx] = static_cast<long>(g.points.size());
        g.points.push_back(std::move(v));
    }
    if (g.points.empty()) throw NumericalError("certification grid is empty");

    g.jac.resize(g.points.size());
    parallel_for(static_cast<long>(g.points.size()), threads,
                 [&](long i) { g.jac[i] = average_jacobian(sys, g.points[i]); });
    return g;
}

// L-hat: twice the largest finite-difference slope of v -> J(v) between
// axis-adjacent grid nodes, measured in the induced norm of W.
inline double jacobian_lipschitz(const JacobianGrid& g, const WeightedNorm& W) {
    double lhat = 0.0;
    long stride = 1;
    for (int axis = 0; axis < g.n; ++axis) {
        for (long idx = 0; idx < static_cast<long>(g.lattice.size()); ++idx) {
            int k = static_cast<int>((idx / stride) % g.per_dim);
            if (k + 1 >= g.per_dim) continue;
            long a = g.lattice[idx], b = g.lattice[idx + stride];
            if (a < 0 || b < 0) continue;
            double slope = induced_norm(g.jac[b] - g.jac[a], W) / g.axis_step[axis];
            lhat = std::max(lhat, slope);
        }
        stride *= g.per_dim;
    }
    return 2.0 * lhat;
}

struct FactorResult {
    double q_grid = 0.0, q_cert = 0.0, margin = 0.0;
    long argmax = 0;
};

inline FactorResult contraction_factor_from(const JacobianGrid& g, double alpha,
                                            const WeightedNorm& W,
                                            const std::vector<Mat>* extra_per_node = nullptr) {
    FactorResult r;
    Mat I = Mat::identity(g.n);
    for (long i = 0; i < static_cast<long>(g.jac.size()); ++i) {
        double q = induced_norm(I + alpha * g.jac[i], W);
        if (q > r.q_grid) {
            r.q_grid = q;
            r.argmax = i;
        }
    }
    if (extra_per_node) {
        for (long i = 0; i < static_cast<long>(extra_per_node->size()); ++i) {
            const Mat& J = (*extra_per_node)[i];
            if (J.rows == 0) continue;
            double q = induced_norm(I + alpha * J, W);
            r.q_grid = std::max(r.q_grid, q);
        }
    }
    r.margin = alpha * jacobian_lipschitz(g, W) * g.max_step / 2.0;
    r.q_cert = r.q_grid + r.margin;
    return r;
}

// A real eigenvalue with nonnegative real part at a grid point defeats
// every alpha and every norm (any induced norm is at least the spectral
// radius |1 + alpha*lambda| >= 1). Complex pairs can still fail just the
// weighted-max family, so they yield Inconclusive, not Falsified.
inline std::optional<long> real_eigenvalue_obstruction(const std::vector<Mat>& jacs,
                                                       const std::vector<long>& owner,
                                                       double* worst_out) {
    std::optional<long> worst_node;
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < jacs.size(); ++i) {
        const Mat& J = jacs[i];
        if (J.rows == 0) continue;
        double scale = std::max(1.0, inf_norm(J));
        for (const auto& ev : eig_small(J)) {
            if (std::abs(ev.imag()) > 1e-9 * scale) continue;
            if (ev.real() >= -1e-12 * scale && ev.real() > worst) {
                worst = ev.real();
                worst_node = owner[i];
            }
        }
    }
    if (worst_out) *worst_out = worst;
    return worst_node;
}

} // namespace detail

struct ContractionFactor {
    double q_grid = 0.0;
    double q_cert = 0.0;
    double margin = 0.0;
};

// Grid supremum of ‖I + alpha*J(v)‖_0 over V plus the Lipschitz margin.
inline ContractionFactor contraction_factor(const StandardSystem& sys, const ConvexSet& V,
                                            double alpha, const WeightedNorm& W,
                                            int grid_per_dim, int threads = 1) {
    if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
    auto g = detail::compute_jacobian_grid(sys, V, grid_per_dim, threads);
    auto r = detail::contraction_factor_from(g, alpha, W);
    return ContractionFactor{r.q_grid, r.q_cert, r.margin};
}

struct NormSuggestions {
    std::vector<WeightedNorm> candidates;
    std::string warning; // nonempty when the modal matrix was unusable
};

namespace detail {

// Eigenvector by inverse iteration with a slightly shifted complex LU.
inline std::vector<std::complex<double>> inverse_iteration(const Mat& J,
                                                           std::complex<double> lambda,
                                                           std::uint64_t salt) {
    const int n = J.rows;
    using cd = std::complex<double>;
    double scale = std::max(1.0, inf_norm(J));
    cd mu = lambda + cd(1e-8 * scale, 1e-8 * scale);
    std::vector<cd> a(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a[static_cast<std::size_t>(i) * n + j] = cd(J(i, j)) - (i == j ? mu : cd(0.0));
    auto f = lu_factor<cd>(n, std::move(a));
    if (f.singular) throw NumericalError("inverse iteration hit an exactly singular shift");
    SplitMix64 rng = rng_stream(0xBA5EC0DEULL, salt);
    std::vector<cd> w(n);
    for (int i = 0; i < n; ++i) w[i] = cd(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    for (int pass = 0; pass < 3; ++pass) {
        w = lu_solve(f, w);
        double nrm = 0.0;
        for (const auto& c : w) nrm = std::max(nrm, std::abs(c));
        if (!(nrm > 0.0) || !std::isfinite(nrm))
            throw NumericalError("inverse iteration produced a degenerate vector");
        for (auto& c : w) c /= nrm;
    }
    return w;
}

} // namespace detail

// Norm candidates adapted to the eigenstructure of J0: the identity, the
// inverse of the real modal matrix (2x2 real blocks for complex pairs,
// columns scaled to unit length), and for complex pairs extra block
// scalings {2, 4} that trade off the two block axes.
inline NormSuggestions suggest_norm(const Mat& J0) {
    NormSuggestions out;
    out.candidates.emplace_back(); // identity
    if (!J0.square() || J0.rows == 0) {
        out.warning = "suggest_norm: empty or non-square Jacobian";
        return out;
    }
    const int n = J0.rows;
    if (n == 1) return out; // every 1x1 weighted norm is the identity norm

    try {
        auto eigs = eig_small(J0);
        Mat M(n, n);
        std::vector<std::pair<int, int>> complex_blocks;
        int col = 0;
        for (std::size_t k = 0; k < eigs.size() && col < n; ++k) {
            const auto& ev = eigs[k];
            if (ev.imag() < 0.0) continue; // conjugate partner of a handled pair
            auto w = detail::inverse_iteration(J0, ev, k);
            if (ev.imag() > 1e-12 * std::max(1.0, inf_norm(J0))) {
                if (col + 1 >= n) break;
                for (int i = 0; i < n; ++i) {
                    M(i, col) = w[i].real();
                    M(i, col + 1) = w[i].imag();
                }
                complex_blocks.emplace_back(col, col + 1);
                col += 2;
            } else {
                for (int i = 0; i < n; ++i) M(i, col) = w[i].real();
                col += 1;
            }
        }
        if (col != n) throw NumericalError("modal matrix incomplete");
        // scale columns to unit Euclidean length
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += M(i, j) * M(i, j);
            s = std::sqrt(s);
            if (!(s > 0.0)) throw NumericalError("zero modal column");
            for (int i = 0; i < n; ++i) M(i, j) /= s;
        }
        Mat Minv = inverse(M);
        double cond = inf_norm(M) * inf_norm(Minv);
        if (!std::isfinite(cond) || cond > 1e6)
            throw NumericalError("modal matrix ill-conditioned (cond " + std::to_string(cond) + ")");
        // defective matrices slip past the condition estimate (inverse
        // iteration returns nearly parallel columns); demand that M
        // actually block-diagonalizes J0
        Mat B = Minv * J0 * M;
        double offblock = 0.0;
        std::vector<bool> coupled(static_cast<std::size_t>(n), false);
        for (auto [c0, c1] : complex_blocks) coupled[c0] = true;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                bool in_block = (j == i + 1 && coupled[i]) || (i == j + 1 && coupled[j]);
                if (!in_block) offblock = std::max(offblock, std::abs(B(i, j)));
            }
        if (offblock > 1e-5 * std::max(1.0, inf_norm(J0)))
            throw NumericalError("modal matrix does not block-diagonalize (defective Jacobian?)");
        out.candidates.emplace_back(Minv);
        for (double s : {2.0, 4.0}) {
            if (complex_blocks.empty()) break;
            Mat Ms = M;
            for (auto [c0, c1] : complex_blocks)
                for (int i = 0; i < n; ++i) Ms(i, c1) *= s;
            out.candidates.emplace_back(inverse(Ms));
        }
    } catch (const NumericalError& e) {
        out.candidates.resize(1);
        out.warning = std::string("suggest_norm: falling back to the identity norm (") + e.what() + ")";
    }
    return out;
}

// Full certificate search over the alpha grid and norm candidates;
// returns the certificate minimizing q_cert.
inline Certificate certify(const StandardSystem& sys, const ConvexSet& V,
                           const CertifyOptions& opts = {}) {
    validate_set(V);
    auto grid = detail::compute_jacobian_grid(sys, V, opts.grid_per_dim, opts.threads);

    std::vector<double> alphas =
        opts.alpha_grid.empty() ? log_spaced(1e-3, 4.0, 30) : opts.alpha_grid;
    std::vector<WeightedNorm> norms = opts.norms;
    if (norms.empty()) {
        // identity plus eigenstructure-adapted candidates at the grid's
        // most central Jacobian
        auto sug = suggest_norm(grid.jac[grid.jac.size() / 2]);
        norms = std::move(sug.candidates);
    }

    Certificate best;
    best.set = V;
    best.grid_per_dim = opts.grid_per_dim;
    best.seed = opts.seed;

    for (const auto& W : norms) {
        if (!W.is_identity() && W.dim() != grid.n)
            throw ConfigError("norm dimension does not match the set");
        for (double alpha : alphas) {
            auto r = detail::contraction_factor_from(grid, alpha, W);
            if (r.q_cert < best.q_cert) {
                best.q_cert = r.q_cert;
                best.q_grid = r.q_grid;
                best.margin = r.margin;
                best.alpha = alpha;
                best.norm = W;
            }
        }
    }

    std::vector<long> owner(grid.jac.size());
    for (std::size_t i = 0; i < owner.size(); ++i) owner[i] = static_cast<long>(i);
    double worst_real = 0.0;
    auto obstruction = detail::real_eigenvalue_obstruction(grid.jac, owner, &worst_real);
    if (obstruction) {
        best.status = CertStatus::Falsified;
        best.falsifying_point = grid.points[static_cast<std::size_t>(*obstruction)];
    } else {
        best.status = best.q_cert < 1.0 ? CertStatus::Certified : CertStatus::Inconclusive;
    }
    return best;
}

// As certify, but near spatial switching surfaces (switching functions
// that depend on the state) the Jacobian set additionally contains
// one-sided Jacobians evaluated at probe points reflected across the
// surface. Pure time switching is already smoothed by the averaging
// integral, so systems without spatial switching take the certify path
// unchanged (bit-for-bit identical result).
inline Certificate certify_nonsmooth(const StandardSystem& sys, const ConvexSet& V,
                                     const CertifyOptions& opts = {}) {
    std::vector<int> spatial;
    for (int k = 0; k < sys.field->switching_count(); ++k)
        if (sys.field->switching_depends_on_state(k)) spatial.push_back(k);
    if (spatial.empty()) return certify(sys, V, opts);

    validate_set(V);
    auto grid = detail::compute_jacobian_grid(sys, V, opts.grid_per_dim, opts.threads);
    const int n = grid.n;
    const double h = grid.max_step;

    // Nearest approach to surface k from v: min over a coarse time grid of
    // |sigma| / ‖grad_x sigma‖; returns the unit normal at the minimizer.
    auto surface_distance = [&](int k, const Vec& v, Vec& normal_out) {
        const bool time_dep = sys.field->switching_depends_on_time(k);
        const int t_nodes = time_dep ? 64 : 1;
        double best = std::numeric_limits<double>::infinity();
        for (int it = 0; it < t_nodes; ++it) {
            double t = sys.T * static_cast<double>(it) / t_nodes;
            Vec grad(n);
            double s0 = sys.field->switching_value(k, t, std::span<const double>(v), 0.0);
            double gn = 0.0;
            Vec probe = v;
            for (int j = 0; j < n; ++j) {
                double hj = 1e-6 * std::max(1.0, std::abs(v[j]));
                probe[j] = v[j] + hj;
                double sp = sys.field->switching_value(k, t, std::span<const double>(probe), 0.0);
                probe[j] = v[j] - hj;
                double sm = sys.field->switching_value(k, t, std::span<const double>(probe), 0.0);
                probe[j] = v[j];
                grad[j] = (sp - sm) / (2.0 * hj);
                gn += grad[j] * grad[j];
            }
            gn = std::sqrt(gn);
            if (gn < 1e-12) continue; // flat in state here
            double dist = std::abs(s0) / gn;
            if (dist < best) {
                best = dist;
                normal_out.resize(n);
                double sgn = s0 >= 0.0 ? 1.0 : -1.0;
                for (int j = 0; j < n; ++j) normal_out[j] = sgn * grad[j] / gn;
            }
        }
        return best;
    };

    std::vector<Mat> extra;
    std::vector<long> extra_owner;
    for (long i = 0; i < static_cast<long>(grid.points.size()); ++i) {
        const Vec& v = grid.points[i];
        for (int k : spatial) {
            Vec normal;
            double dist = surface_distance(k, v, normal);
            if (!(dist <= 2.0 * h) || normal.empty()) continue;
            std::vector<Vec> probes;
            if (dist < 0.5 * h) {
                // essentially on the surface: probe both sides
                Vec p1 = v, p2 = v;
                for (int j = 0; j < n; ++j) {
                    p1[j] += h * normal[j];
                    p2[j] -= h * normal[j];
                }
                probes.push_back(std::move(p1));
                probes.push_back(std::move(p2));
            } else {
                // reflect across the surface: v - 2*dist*n (n points away
                // from the surface on v's side)
                Vec p = v;
                for (int j = 0; j < n; ++j) p[j] -= 2.0 * dist * normal[j];
                probes.push_back(std::move(p));
            }
            for (auto& p : probes) {
                extra.push_back(average_jacobian(sys, p));
                extra_owner.push_back(i);
            }
        }
    }

    std::vector<double> alphas =
        opts.alpha_grid.empty() ? log_spaced(1e-3, 4.0, 30) : opts.alpha_grid;
    std::vector<WeightedNorm> norms = opts.norms;
    if (norms.empty()) {
        auto sug = suggest_norm(grid.jac[grid.jac.size() / 2]);
        norms = std::move(sug.candidates);
    }

    Certificate best;
    best.set = V;
    best.grid_per_dim = opts.grid_per_dim;
    best.seed = opts.seed;
    for (const auto& W : norms) {
        if (!W.is_identity() && W.dim() != grid.n)
            throw ConfigError("norm dimension does not match the set");
        for (double alpha : alphas) {
            auto r = detail::contraction_factor_from(grid, alpha, W, &extra);
            if (r.q_cert < best.q_cert) {
                best.q_cert = r.q_cert;
                best.q_grid = r.q_grid;
                best.margin = r.margin;
                best.alpha = alpha;
                best.norm = W;
            }
        }
    }

    // obstruction test over base and one-sided Jacobians together
    std::vector<Mat> all_jacs = grid.jac;
    std::vector<long> owner(all_jacs.size());
    for (std::size_t i = 0; i < owner.size(); ++i) owner[i] = static_cast<long>(i);
    for (std::size_t i = 0; i < extra.size(); ++i) {
        all_jacs.push_back(extra[i]);
        owner.push_back(extra_owner[i]);
    }
    double worst_real = 0.0;
    auto obstruction = detail::real_eigenvalue_obstruction(all_jacs, owner, &worst_real);
    if (obstruction) {
        best.status = CertStatus::Falsified;
        best.falsifying_point = grid.points[static_cast<std::size_t>(*obstruction)];
    } else {
        best.status = best.q_cert < 1.0 ? CertStatus::Certified : CertStatus::Inconclusive;
    }
    return best;
}

struct LocalBasinOptions {
    double r_max = 1.0;
    std::vector<double> alpha_grid; // empty: certify default
    int grid_per_dim = 33;
    std::uint64_t seed = 0;
    int threads = 1;
};

// Largest ball around a stable zero (within 1% relative) on which certify
// succeeds, using eigenstructure-suggested norms. A hyperbolic
// asymptotically stable zero always admits some certified ball, so this
// cannot come back empty on healthy inputs. The ball and the certificate
// share the same norm.
inline Certificate local_basin(const StandardSystem& sys, const Vec& v0,
                               const LocalBasinOptions& opts = {}) {
    auto rep = bogolubov_check(sys, v0);
    if (!rep.is_zero)
        throw PreconditionError("local_basin: v0 is not a zero of g0 (residual " +
                                std::to_string(rep.residual) + ")");
    if (!rep.hyperbolic_zero)
        throw PreconditionError("local_basin: zero is not hyperbolic (|det| too small)");
    if (!rep.asymptotically_stable)
        throw PreconditionError(
            "local_basin: zero is not asymptotically stable (an eigenvalue has nonnegative "
            "real part)");

    auto sug = suggest_norm(rep.jacobian);

    CertifyOptions copts;
    copts.alpha_grid = opts.alpha_grid;
    copts.grid_per_dim = opts.grid_per_dim;
    copts.seed = opts.seed;
    copts.threads = opts.threads;

    std::optional<Certificate> best;
    const double r_floor = opts.r_max * 0x1.0p-20;
    for (const auto& W : sug.candidates) {
        auto attempt = [&](double r) -> std::optional<Certificate> {
            CertifyOptions o = copts;
            o.norms = {W};
            Certificate c = certify(sys, BallSet{v0, r, W}, o);
            if (c.status == CertStatus::Certified) return c;
            return std::nullopt;
        };

        std::optional<Certificate> got = attempt(opts.r_max);
        if (!got) {
            double lo = 0.0, hi = opts.r_max;
            double r = 0.5 * opts.r_max;
            while (r >= r_floor) {
                got = attempt(r);
                if (got) { lo = r; break; }
                hi = r;
                r *= 0.5;
            }
            if (!got) continue; // this norm certifies nothing above the floor
            while (hi - lo > 0.01 * lo) {
                double mid = 0.5 * (lo + hi);
                auto c = attempt(mid);
                if (c) {
                    lo = mid;
                    got = c;
                } else {
                    hi = mid;
                }
            }
        }
        if (got && (!best || std::get<BallSet>(got->set).radius > std::get<BallSet>(best->set).radius))
            best = got;
    }
    if (!best)
        throw NumericalError(
            "local_basin: no radius down to r_max*2^-20 certifies; a hyperbolic stable zero "
            "always admits a small certified ball, so this signals numerical trouble");
    return *best;
}

struct Eps0Report {
    double eps0 = 0.0;
    std::vector<std::pair<double, double>> table; // (eps, D(eps)), eps descending
};

// Largest dyadic eps <= alpha with D(eps) <= (1-q)/(2*alpha), where D is
// the sampled Lipschitz quotient of g_eps - g0 over pairs in V. Under
// that bound the time-T map contracts by 1 - eps(1-q)/(2*alpha). The
// estimate is statistical (sampled pairs), not proven.
inline Eps0Report epsilon0_estimate(const StandardSystem& sys, const Certificate& cert,
                                    int pair_samples = 32, std::uint64_t seed = 0,
                                    const IntegratorConfig& cfg = {}, bool full_table = false) {
    if (cert.status != CertStatus::Certified && cert.status != CertStatus::InconclusiveForEps)
        throw PreconditionError("epsilon0_estimate requires a Certified certificate");
    const double alpha = cert.alpha;
    const double bound = (1.0 - cert.q_cert) / (2.0 * alpha);
    const auto& W = cert.norm;

    // fixed pair set across the eps sweep; every other pair is
    // near-diagonal to probe the local difference quotient
    Box bb = bounding_box(cert.set);
    double diam = 0.0;
    for (std::size_t i = 0; i < bb.lo.size(); ++i) diam = std::max(diam, bb.hi[i] - bb.lo[i]);
    std::vector<std::pair<Vec, Vec>> pairs;
    std::vector<Vec> g0a, g0b;
    for (int i = 0; i < pair_samples; ++i) {
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
        if (W.distance(v1, v2) < 1e-12) continue;
        g0a.push_back(average(sys, v1));
        g0b.push_back(average(sys, v2));
        pairs.emplace_back(std::move(v1), std::move(v2));
    }

    Eps0Report rep;
    for (int k = 0; k <= 10; ++k) {
        double eps = alpha * std::ldexp(1.0, -k);
        double D = 0.0;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            Vec d1 = g_eps(sys, pairs[i].first, eps, cfg) - g0a[i];
            Vec d2 = g_eps(sys, pairs[i].second, eps, cfg) - g0b[i];
            D = std::max(D, W(d1 - d2) / W.distance(pairs[i].first, pairs[i].second));
        }
        rep.table.emplace_back(eps, D);
        if (D <= bound && rep.eps0 == 0.0) {
            rep.eps0 = eps;
            if (!full_table) return rep;
        }
    }
    // eps0 == 0 here means the bound failed on the whole grid; the caller
    // downgrades the certificate to InconclusiveForEps
    return rep;
}

struct WeakDiffSample {
    Vec v;
    int interval_count = 0;
    std::vector<std::pair<double, double>> intervals; // sorted, disjoint, in [0, T]
    double jacobian_oscillation = 0.0;
};

struct NonsmoothReport {
    double gamma = 0.0; // max over samples of total excluded measure
    double delta = 0.0;
    bool fat_switching = false;
    std::vector<WeakDiffSample> samples;
};

// Empirical weak-differentiability diagnostics: per sample point, the
// excluded time intervals around switching roots within a delta
// neighborhood, and the Jacobian oscillation outside them.
inline NonsmoothReport weak_diff_report(const StandardSystem& sys, const ConvexSet& V, double delta,
                                        int sample_count, std::uint64_t seed = 0) {
    if (!(delta > 0.0)) throw ConfigError("weak_diff_report requires delta > 0");
    validate_set(V);
    NonsmoothReport rep;
    rep.delta = delta;
    const int n = set_dim(V);
    const int nsw = sys.field->switching_count();

    for (int s = 0; s < sample_count; ++s) {
        SplitMix64 rng = rng_stream(seed, static_cast<std::uint64_t>(s));
        WeakDiffSample smp;
        // sample 0 is always the center of V, so symmetric trouble spots
        // (a switching surface through the middle) are probed
        // deterministically; the rest are seeded uniform draws
        smp.v = s == 0 ? set_center(V) : sample_in(V, rng);

        std::vector<Vec> probes{smp.v};
        for (int j = 0; j < n; ++j) {
            Vec p = smp.v;
            p[j] += delta;
            probes.push_back(p);
            p[j] = smp.v[j] - delta;
            probes.push_back(p);
        }

        std::vector<double> roots;
        for (int k = 0; k < nsw; ++k) {
            for (const Vec& u : probes) {
                // flat-zero detection: a switching function identically
                // zero over a time stretch makes the excluded set fat
                constexpr int kScan = 4096;
                int zero_run = 0;
                double prev = sys.field->switching_value(k, 0.0, std::span<const double>(u), 0.0);
                double mag = std::abs(prev);
                for (int i = 1; i <= kScan; ++i) {
                    double t = sys.T * static_cast<double>(i) / kScan;
                    double cur = sys.field->switching_value(k, t, std::span<const double>(u), 0.0);
                    mag = std::max(mag, std::abs(cur));
                    if (std::abs(cur) <= 1e-14 * (1.0 + mag)) {
                        if (++zero_run >= 8) rep.fat_switching = true;
                    } else {
                        zero_run = 0;
                    }
                    if ((prev < 0.0 && cur > 0.0) || (prev > 0.0 && cur < 0.0)) {
                        double lo = sys.T * static_cast<double>(i - 1) / kScan, hi = t, slo = prev;
                        for (int it = 0; it < 60; ++it) {
                            double mid = 0.5 * (lo + hi);
                            double sm =
                                sys.field->switching_value(k, mid, std::span<const double>(u), 0.0);
                            if ((slo < 0.0 && sm <= 0.0) || (slo > 0.0 && sm >= 0.0)) {
                                lo = mid;
                                slo = sm;
                            } else {
                                hi = mid;
                            }
                        }
                        roots.push_back(0.5 * (lo + hi));
                    }
                    prev = cur;
                }
                if (mag <= 1e-14) rep.fat_switching = true; // identically zero for this state
            }
        }

        std::sort(roots.begin(), roots.end());
        for (double r : roots) {
            double lo = std::max(0.0, r - delta), hi = std::min(sys.T, r + delta);
            if (!smp.intervals.empty() && lo <= smp.intervals.back().second) {
                smp.intervals.back().second = std::max(smp.intervals.back().second, hi);
            } else {
                smp.intervals.emplace_back(lo, hi);
            }
        }
        smp.interval_count = static_cast<int>(smp.intervals.size());
        double measure = 0.0;
        for (const auto& iv : smp.intervals) measure += iv.second - iv.first;
        rep.gamma = std::max(rep.gamma, measure);

        // Jacobian oscillation of the instantaneous field outside the
        // excluded intervals
        auto excluded = [&](double t) {
            for (const auto& iv : smp.intervals)
                if (t >= iv.first && t <= iv.second) return true;
            return false;
        };
        double osc = 0.0;
        for (int trial = 0; trial < 16; ++trial) {
            double t = -1.0;
            for (int attempt = 0; attempt < 256; ++attempt) {
                double cand = rng.uniform(0.0, sys.T);
                if (!excluded(cand)) { t = cand; break; }
            }
            if (t < 0.0) break; // intervals cover nearly everything
            Vec h1(n), h2(n);
            for (int j = 0; j < n; ++j) {
                h1[j] = rng.uniform(-delta, delta);
                h2[j] = rng.uniform(-delta, delta);
            }
            auto inst_jac = [&](const Vec& at) {
                return fd_jacobian(
                    [&](const Vec& u) { return sys.field->eval(t, u, 0.0); }, at);
            };
            Mat J1 = inst_jac(smp.v + h1), J2 = inst_jac(smp.v + h2);
            osc = std::max(osc, inf_norm(J1 - J2));
        }
        smp.jacobian_oscillation = osc;
        rep.samples.push_back(std::move(smp));
    }
    return rep;
}

} // namespace basincert
