#pragma once
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace gesso {

/**
 * Two-variable subproblem for one (main effect, interaction) block:
 *
 *   f(b, t) = 1/2 (a b^2 + 2 h b t + c t^2) - u b - v t
 *             + lambda1 max(|b|, |t|) + lambda2 |t|
 *
 * With columns g, z = g * E and partial residual rho (block removed):
 * a = g'g/n, c = z'z/n, h = g'z/n, u = g'rho/n, v = z'rho/n.
 */
struct BlockQuadratic
{
    double a = 0.0;
    double h = 0.0;
    double c = 0.0;
    double u = 0.0;
    double v = 0.0;

    double value(double b, double t, double lambda1, double lambda2) const
    {
        return 0.5 * (a * b * b + 2.0 * h * b * t + c * t * t) - u * b - v * t +
               lambda1 * std::max(std::abs(b), std::abs(t)) + lambda2 * std::abs(t);
    }
};

struct BlockSolution
{
    double b = 0.0;
    double t = 0.0;
};

/**
 * Exact minimizer of the block subproblem.
 *
 * The penalty is linear on each cell of the fan cut out by the lines
 * t = 0, b = 0 and |b| = |t|, so the minimizer is the stationary point of a
 * smooth quadratic restricted to one cell (open wedge, ray, or the origin).
 * Every such candidate is formed and the one with the lowest true objective
 * is returned. Cells whose restricted quadratic is flat are skipped; a
 * minimizer there extends to a boundary cell that is enumerated.
 */
inline BlockSolution solve_block(const BlockQuadratic& q, double lambda1, double lambda2)
{
    const double scale = std::max({q.a, q.c, std::abs(q.h), 1e-300});
    const double curv_eps = 1e-14 * scale;
    const double det = q.a * q.c - q.h * q.h;
    const bool invertible = det > 1e-12 * std::max(q.a * q.c, 1e-300) && q.a > curv_eps && q.c > curv_eps;

    BlockSolution best{0.0, 0.0};
    double best_val = 0.0; // f(0, 0)

    auto consider = [&](double b, double t) {
        if (!std::isfinite(b) || !std::isfinite(t)) return;
        const double val = q.value(b, t, lambda1, lambda2);
        if (val < best_val) {
            best_val = val;
            best = {b, t};
        }
    };
    auto soft = [](double x, double thr) { return std::copysign(std::max(std::abs(x) - thr, 0.0), x); };
    // solve [a h; h c] [b; t] = [rb; rt]
    auto solve2 = [&](double rb, double rt) {
        consider((q.c * rb - q.h * rt) / det, (q.a * rt - q.h * rb) / det);
    };

    // ray t = 0: penalty lambda1 |b|
    if (q.a > curv_eps) consider(soft(q.u, lambda1) / q.a, 0.0);
    // ray b = 0: penalty (lambda1 + lambda2) |t|
    if (q.c > curv_eps) consider(0.0, soft(q.v, lambda1 + lambda2) / q.c);
    // diagonals b = sb m, t = st m, m > 0: penalty (lambda1 + lambda2) m
    for (const double sb : {1.0, -1.0}) {
        for (const double st : {1.0, -1.0}) {
            const double curv = q.a + 2.0 * q.h * sb * st + q.c;
            if (curv <= curv_eps) continue;
            const double m = (sb * q.u + st * q.v - lambda1 - lambda2) / curv;
            if (m > 0.0) consider(sb * m, st * m);
        }
    }
    if (invertible) {
        for (const double sb : {1.0, -1.0}) {
            for (const double st : {1.0, -1.0}) {
                // |b| > |t|: penalty lambda1 sb b + lambda2 st t
                solve2(q.u - lambda1 * sb, q.v - lambda2 * st);
            }
        }
        for (const double st : {1.0, -1.0}) {
            // |t| > |b|: penalty (lambda1 + lambda2) st t
            solve2(q.u, q.v - (lambda1 + lambda2) * st);
        }
    }
    return best;
}

} // namespace gesso
