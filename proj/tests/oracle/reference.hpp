#pragma once
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <Eigen/Dense>
#include <gesso/dataset.hpp>
#include <gesso/model.hpp>

// Reference computations written directly from the objective definitions,
// without the library's fused kernels or projection code.

namespace oracle {

using gesso::index_t;
using gesso::mat_t;
using gesso::vec_t;

/// Explicit interaction matrix G * diag(E).
inline mat_t interaction_matrix(const gesso::Dataset& ds)
{
    return ds.e().asDiagonal() * ds.g();
}

struct Point
{
    double beta0 = 0.0;
    double beta_e = 0.0;
    vec_t b;
    vec_t t;
};

inline Point from_coefficients(const gesso::Coefficients& c)
{
    return Point{c.beta0, c.beta_e, c.beta_g(), c.beta_gxe};
}

inline vec_t residual(const gesso::Dataset& ds, const Point& x)
{
    const mat_t z = interaction_matrix(ds);
    return ds.y() - vec_t::Constant(ds.n(), x.beta0) - x.beta_e * ds.e() - ds.g() * x.b - z * x.t;
}

inline double penalty(const vec_t& b, const vec_t& t, double lambda1, double lambda2)
{
    double s = 0.0;
    for (index_t i = 0; i < b.size(); ++i) s += lambda1 * std::max(std::abs(b[i]), std::abs(t[i])) + lambda2 * std::abs(t[i]);
    return s;
}

inline double objective(const gesso::Dataset& ds, const Point& x, double lambda1, double lambda2)
{
    const double n = static_cast<double>(ds.n());
    return residual(ds, x).squaredNorm() / (2.0 * n) + penalty(x.b, x.t, lambda1, lambda2);
}

/// Orthonormal basis of span{1, E} (one column when E is constant).
inline mat_t unpenalized_basis(const gesso::Dataset& ds)
{
    mat_t u(ds.n(), 2);
    u.col(0).setOnes();
    u.col(1) = ds.e();
    Eigen::ColPivHouseholderQR<mat_t> qr(u);
    qr.setThreshold(1e-10);
    const index_t rank = qr.rank();
    const mat_t q = qr.householderQ() * mat_t::Identity(ds.n(), rank);
    return q;
}

inline vec_t residualize(const mat_t& q, const vec_t& v) { return v - q * (q.transpose() * v); }

inline double dual_value(const gesso::Dataset& ds, const vec_t& nu)
{
    const double n = static_cast<double>(ds.n());
    const vec_t yn = ds.y() / n;
    return 0.5 * n * (yn.squaredNorm() - (yn - nu).squaredNorm());
}

/**
 * Dual value of the best feasible multiple of the (residualized) residual.
 * A scaled nu = x r is feasible iff some delta in [0, lambda1] satisfies both
 * block constraints, i.e. |x| A <= lambda1 and |x| (A + B) <= lambda1 + lambda2.
 */
inline double dual_from_residual(const gesso::Dataset& ds, const vec_t& resid, double lambda1, double lambda2)
{
    const double n = static_cast<double>(ds.n());
    const mat_t q = unpenalized_basis(ds);
    const vec_t r = residualize(q, resid) / n;
    const mat_t z = interaction_matrix(ds);
    double bound = std::numeric_limits<double>::infinity();
    for (index_t i = 0; i < ds.p(); ++i) {
        const double a = std::abs(ds.g().col(i).dot(r));
        const double b = std::abs(z.col(i).dot(r));
        if (a > 0.0) bound = std::min(bound, lambda1 / a);
        if (a + b > 0.0) bound = std::min(bound, (lambda1 + lambda2) / (a + b));
    }
    const double sq = r.squaredNorm();
    if (sq == 0.0) return dual_value(ds, vec_t::Zero(ds.n()));
    double x = ds.y().dot(r) / (n * sq);
    x = std::clamp(x, -bound, bound);
    return dual_value(ds, x * r);
}

struct GapReport
{
    double primal = 0.0;
    double dual = 0.0;
    double gap = 0.0;
};

/// Primal at x, dual from the residual at x after re-optimizing the unpenalized part.
inline GapReport gap_at(const gesso::Dataset& ds, const Point& x, double lambda1, double lambda2)
{
    GapReport g;
    g.primal = objective(ds, x, lambda1, lambda2);
    g.dual = dual_from_residual(ds, residual(ds, x), lambda1, lambda2);
    g.gap = g.primal - g.dual;
    return g;
}

/// Least-squares intercept and exposure coefficient for a fixed penalized part.
inline void refit_unpenalized(const gesso::Dataset& ds, Point& x)
{
    const mat_t z = interaction_matrix(ds);
    const vec_t target = ds.y() - ds.g() * x.b - z * x.t;
    mat_t u(ds.n(), 2);
    u.col(0).setOnes();
    u.col(1) = ds.e();
    Eigen::CompleteOrthogonalDecomposition<mat_t> cod(u);
    const vec_t coef = cod.solve(target);
    x.beta0 = coef[0];
    x.beta_e = coef[1];
}

/**
 * Projection onto {(p, m, q, r) >= 0 : q + r <= p + m} by enumerating the
 * affine hulls of all 32 faces and keeping the nearest feasible candidate.
 */
inline std::array<double, 4> project_cone(const std::array<double, 4>& z)
{
    static constexpr std::array<double, 4> a = {-1.0, -1.0, 1.0, 1.0};
    std::array<double, 4> best = {0.0, 0.0, 0.0, 0.0};
    double best_dist = std::numeric_limits<double>::infinity();
    for (int mask = 0; mask < 16; ++mask) {
        for (int lin = 0; lin < 2; ++lin) {
            std::array<double, 4> x{};
            for (int j = 0; j < 4; ++j) x[j] = (mask >> j) & 1 ? 0.0 : z[j];
            if (lin) {
                double ax = 0.0, aa = 0.0;
                for (int j = 0; j < 4; ++j) {
                    if ((mask >> j) & 1) continue;
                    ax += a[j] * x[j];
                    aa += a[j] * a[j];
                }
                if (aa > 0.0) {
                    for (int j = 0; j < 4; ++j) {
                        if (!((mask >> j) & 1)) x[j] -= ax / aa * a[j];
                    }
                }
            }
            const double tol = 1e-15;
            bool ok = x[2] + x[3] <= x[0] + x[1] + tol;
            for (int j = 0; j < 4; ++j) ok = ok && x[j] >= -tol;
            if (!ok) continue;
            double d = 0.0;
            for (int j = 0; j < 4; ++j) d += (x[j] - z[j]) * (x[j] - z[j]);
            if (d < best_dist) {
                best_dist = d;
                for (int j = 0; j < 4; ++j) best[j] = std::max(x[j], 0.0);
            }
        }
    }
    return best;
}

struct ReferenceResult
{
    Point x;
    GapReport gap;
    long iterations = 0;
};

/**
 * Accelerated projected gradient with adaptive restart on the split form
 * b = p - m, t = q - r, penalty lambda1 (p + m) + lambda2 (q + r), after
 * removing the unpenalized columns. Runs until the gap is below target.
 */
inline ReferenceResult reference_solve(const gesso::Dataset& ds, double lambda1, double lambda2, double target_gap,
                                       long max_iter = 3000000)
{
    const index_t n = ds.n(), p = ds.p();
    const double nd = static_cast<double>(n);
    const mat_t q = unpenalized_basis(ds);
    mat_t x(n, 2 * p);
    x.leftCols(p) = ds.g();
    x.rightCols(p) = interaction_matrix(ds);
    for (index_t j = 0; j < 2 * p; ++j) x.col(j) = residualize(q, x.col(j));
    const vec_t y = residualize(q, ds.y());
    const mat_t gram = x.transpose() * x / nd;
    const vec_t xty = x.transpose() * y / nd;
    Eigen::SelfAdjointEigenSolver<mat_t> es(gram);
    const double lip = std::max(2.0 * es.eigenvalues().maxCoeff(), 1e-12);
    const double step = 1.0 / lip;

    // state: for block i, (p_i, m_i, q_i, r_i)
    vec_t cur = vec_t::Zero(4 * p), prev = cur, mom = cur;
    double theta = 1.0;
    ReferenceResult res;
    auto to_point = [&](const vec_t& s) {
        Point pt;
        pt.b.resize(p);
        pt.t.resize(p);
        for (index_t i = 0; i < p; ++i) {
            pt.b[i] = s[4 * i] - s[4 * i + 1];
            pt.t[i] = s[4 * i + 2] - s[4 * i + 3];
        }
        refit_unpenalized(ds, pt);
        return pt;
    };
    vec_t bt(2 * p), grad(2 * p);
    for (long it = 1; it <= max_iter; ++it) {
        for (index_t i = 0; i < p; ++i) {
            bt[i] = mom[4 * i] - mom[4 * i + 1];
            bt[p + i] = mom[4 * i + 2] - mom[4 * i + 3];
        }
        grad = gram * bt - xty;
        prev = cur;
        for (index_t i = 0; i < p; ++i) {
            const double gb = grad[i], gt = grad[p + i];
            const std::array<double, 4> zz = {mom[4 * i] - step * (gb + lambda1), mom[4 * i + 1] - step * (-gb + lambda1),
                                              mom[4 * i + 2] - step * (gt + lambda2),
                                              mom[4 * i + 3] - step * (-gt + lambda2)};
            const auto pr = project_cone(zz);
            for (int j = 0; j < 4; ++j) cur[4 * i + j] = pr[j];
        }
        // gradient-based restart
        if ((mom - cur).dot(cur - prev) > 0.0) {
            theta = 1.0;
            mom = cur;
        } else {
            const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
            mom = cur + ((theta - 1.0) / next) * (cur - prev);
            theta = next;
        }
        res.iterations = it;
        if (it % 50 == 0 || it == max_iter) {
            const Point pt = to_point(cur);
            const GapReport g = gap_at(ds, pt, lambda1, lambda2);
            if (g.gap <= target_gap || it == max_iter) {
                res.x = pt;
                res.gap = g;
                return res;
            }
        }
    }
    res.x = to_point(cur);
    res.gap = gap_at(ds, res.x, lambda1, lambda2);
    return res;
}

} // namespace oracle
