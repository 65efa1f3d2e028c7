#pragma once
#include <algorithm>
#include <cmath>
#include <limits>
#include <gesso/model.hpp>

namespace gesso {

/// nu_res = (y - X beta) / n
inline vec_t residual_dual(const Dataset& ds, const Coefficients& b)
{
    return residuals(ds, b) / static_cast<double>(ds.n());
}

/**
 * Closed-form choice of delta_i for one block: the value that equalizes
 * (lambda1 - delta)/A and (lambda2 + delta)/B, clamped to [0, lambda1].
 * a and b are |nu^T G_i| and |nu^T (G_i E)|.
 */
inline double optimal_delta(double a, double b, double lambda1, double lambda2)
{
    if (a + b <= 0.0) return 0.0;
    const double d = (b * lambda1 - a * lambda2) / (b + a);
    return std::clamp(d, 0.0, lambda1);
}

/// Largest |x| for which x * nu keeps block i feasible given delta; +inf when unconstrained.
inline double block_scale_bound(double a, double b, double delta, double lambda1, double lambda2)
{
    constexpr double inf = std::numeric_limits<double>::infinity();
    const double m1 = a > 0.0 ? (lambda1 - delta) / a : inf;
    const double m2 = b > 0.0 ? (lambda2 + delta) / b : inf;
    return std::min(m1, m2);
}

/// Unconstrained maximizer of D(x * nu) over x: y^T nu / (n ||nu||^2).
inline double unconstrained_scale(const Dataset& ds, const vec_t& nu)
{
    const double sq = nu.squaredNorm();
    if (sq == 0.0) return 0.0;
    return ds.y().dot(nu) / (static_cast<double>(ds.n()) * sq);
}

inline double clamp_scale(double x_star, double bound)
{
    if (std::abs(x_star) <= bound) return x_star;
    return std::copysign(bound, x_star);
}

namespace detail {

/// Rescale an orthogonalized residual dual; signed_a/b hold nu^T G_i and nu^T (G_i E) for every block.
inline DualPoint rescale_dual(const Dataset& ds, const vec_t& nu, const vec_t& signed_a, const vec_t& signed_b,
                              const PenaltyPair& pen, bool optimal_delta_choice, double* scale_out = nullptr)
{
    const index_t p = ds.p();
    DualPoint dp;
    dp.delta = vec_t::Zero(p);
    double bound = std::numeric_limits<double>::infinity();
    for (index_t i = 0; i < p; ++i) {
        const double a = std::abs(signed_a[i]);
        const double b = std::abs(signed_b[i]);
        const double d = optimal_delta_choice ? optimal_delta(a, b, pen.lambda1, pen.lambda2) : 0.0;
        dp.delta[i] = d;
        bound = std::min(bound, block_scale_bound(a, b, d, pen.lambda1, pen.lambda2));
    }
    const double x = clamp_scale(unconstrained_scale(ds, nu), bound);
    dp.nu = x * nu;
    if (scale_out) *scale_out = x;
    return dp;
}

inline DualPoint project(const Dataset& ds, const vec_t& nu_res, const PenaltyPair& pen, bool optimal)
{
    pen.validate();
    if (nu_res.size() != ds.n()) throw dimension_error("projection: residual dual has wrong length");
    vec_t nu = nu_res;
    ds.project_out_unpenalized(nu);
    vec_t a(ds.p()), b(ds.p());
    for (index_t i = 0; i < ds.p(); ++i) {
        const auto [ga, gb] = ds.dot_pair(i, nu);
        a[i] = ga;
        b[i] = gb;
    }
    return rescale_dual(ds, nu, a, b, pen, optimal);
}

} // namespace detail

/**
 * Feasible dual point x * nu_res with per-block delta chosen to maximize the
 * admissible range of x, and x the clamped maximizer of D along nu_res.
 *
 * nu_res is first projected onto the orthogonal complement of {1, E} (a no-op
 * for residuals of a fit whose intercept and exposure effect are optimal);
 * without this the dual objective is not a lower bound on the primal.
 */
inline DualPoint optimal_naive_projection(const Dataset& ds, const vec_t& nu_res, const PenaltyPair& pen)
{
    return detail::project(ds, nu_res, pen, true);
}

/// Same rescaling with delta fixed at zero.
inline DualPoint naive_projection(const Dataset& ds, const vec_t& nu_res, const PenaltyPair& pen)
{
    return detail::project(ds, nu_res, pen, false);
}

/// Euclidean ball known to contain the dual optimum.
struct ScreenBall
{
    vec_t center;
    double radius = 0.0;
};

/// Ball centered at y/n through the feasible point nu0.
inline ScreenBall safe_ball(const Dataset& ds, const DualPoint& nu0)
{
    if (nu0.nu.size() != ds.n()) throw dimension_error("safe_ball: dual point has wrong length");
    ScreenBall ball;
    ball.center = ds.y() / static_cast<double>(ds.n());
    ball.radius = (ball.center - nu0.nu).norm();
    return ball;
}

/**
 * Radius sqrt(2 gap / n) from a primal/dual pair. scale is the magnitude of the
 * objectives; the gap is padded by a rounding allowance relative to it so the
 * ball stays valid when the computed gap is at the level of rounding error.
 */
inline double gap_radius(double gap, index_t n, double scale)
{
    const double allowance = 1e-14 * (1.0 + std::abs(scale));
    if (gap < -1e-10 * (1.0 + std::abs(scale))) {
        throw infeasible_dual_error("negative duality gap " + std::to_string(gap) +
                                    ": infeasible dual point or objective mismatch");
    }
    return std::sqrt(2.0 * (std::max(gap, 0.0) + allowance) / static_cast<double>(n));
}

/// Gap ball: center nu0, radius sqrt((2/n) Gap(b, nu0)).
inline ScreenBall gap_ball(const Dataset& ds, const Coefficients& b, const PenaltyPair& pen, const DualPoint& nu0)
{
    const double primal = primal_objective(ds, b, pen);
    const double gap = duality_gap(ds, b, pen, nu0);
    return ScreenBall{nu0.nu, gap_radius(gap, ds.n(), primal)};
}

/**
 * Sphere test on one block. abs_gc = |G_i^T c|, abs_zc = |(G_i E)^T c|.
 * True means both coefficients of the block vanish at every optimum.
 */
inline bool safe_discard_test(double abs_gc, double abs_zc, double norm_g, double norm_z, double r,
                              const PenaltyPair& pen)
{
    const double lhs = std::max(0.0, r * norm_z + abs_zc - pen.lambda2);
    const double rhs = pen.lambda1 - r * norm_g - abs_gc;
    return lhs < rhs;
}

/**
 * Working-set score: the largest radius at which the sphere test still
 * discards the block, min((lambda1 - |gc|) / |G_i|, (lambda1 + lambda2 - |gc| -
 * |zc|) / (|G_i| + |G_i E|)). The block is discardable at radius r iff the score
 * exceeds r; smaller values indicate blocks likely to be nonzero. Blocks with
 * two null columns score +inf.
 */
inline double ws_score(double abs_gc, double abs_zc, double norm_g, double norm_z, const PenaltyPair& pen)
{
    const double denom = norm_g + norm_z;
    if (denom <= 0.0) return std::numeric_limits<double>::infinity();
    const double joint = (pen.lambda1 + pen.lambda2 - abs_gc - abs_zc) / denom;
    if (norm_g <= 0.0) return joint;
    return std::min((pen.lambda1 - abs_gc) / norm_g, joint);
}

inline bool safe_discard(const Dataset& ds, const ScreenBall& ball, const PenaltyPair& pen, index_t i)
{
    const auto [gc, zc] = ds.dot_pair(i, ball.center);
    return safe_discard_test(std::abs(gc), std::abs(zc), ds.col_norm_g()[i], ds.col_norm_gxe()[i], ball.radius, pen);
}

struct ScreenScores
{
    vec_t a;  ///< |c^T G_i|
    vec_t b;  ///< |c^T (G_i E)|
    vec_t d;  ///< working-set score
};

inline ScreenScores ws_scores(const Dataset& ds, const ScreenBall& ball, const PenaltyPair& pen)
{
    if (ball.center.size() != ds.n()) throw dimension_error("ws_scores: ball center has wrong length");
    ScreenScores s;
    s.a.resize(ds.p());
    s.b.resize(ds.p());
    s.d.resize(ds.p());
    for (index_t i = 0; i < ds.p(); ++i) {
        const auto [gc, zc] = ds.dot_pair(i, ball.center);
        s.a[i] = std::abs(gc);
        s.b[i] = std::abs(zc);
        s.d[i] = ws_score(s.a[i], s.b[i], ds.col_norm_g()[i], ds.col_norm_gxe()[i], pen);
    }
    return s;
}

} // namespace gesso
