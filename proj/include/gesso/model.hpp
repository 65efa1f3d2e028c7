#pragma once
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>
#include <gesso/dataset.hpp>

namespace gesso {

struct PenaltyPair
{
    double lambda1 = 1.0;
    double lambda2 = 1.0;

    void validate() const
    {
        if (!(std::isfinite(lambda1) && lambda1 > 0.0) || !(std::isfinite(lambda2) && lambda2 > 0.0)) {
            throw value_error("penalty pair must be finite and strictly positive (lambda1=" +
                              std::to_string(lambda1) + ", lambda2=" + std::to_string(lambda2) + ")");
        }
    }

    /// Slack used for dual feasibility comparisons.
    double tol_feas() const { return 1e-10 * (1.0 + lambda1 + lambda2); }
};

/**
 * Coefficients of the relaxed (constrained) formulation.
 * The main effect of G_i is beta_g_plus[i] - beta_g_minus[i]; the hierarchy
 * constraint |beta_gxe[i]| <= beta_g_plus[i] + beta_g_minus[i] always holds.
 */
struct Coefficients
{
    double beta0 = 0.0;
    double beta_e = 0.0;
    vec_t beta_g_plus;
    vec_t beta_g_minus;
    vec_t beta_gxe;

    static Coefficients zeros(index_t p)
    {
        Coefficients c;
        c.beta_g_plus = vec_t::Zero(p);
        c.beta_g_minus = vec_t::Zero(p);
        c.beta_gxe = vec_t::Zero(p);
        return c;
    }

    index_t p() const { return beta_gxe.size(); }
    double beta_g(index_t i) const { return beta_g_plus[i] - beta_g_minus[i]; }
    vec_t beta_g() const { return beta_g_plus - beta_g_minus; }

    /**
     * Store block i from its main effect b and interaction t, choosing the
     * decomposition with beta_g_plus + beta_g_minus = max(|b|, |t|).
     */
    void set_block(index_t i, double b, double t)
    {
        const double plus = std::max(std::max(b, 0.0), 0.5 * (std::abs(t) + b));
        beta_g_plus[i] = plus;
        beta_g_minus[i] = plus - b;
        beta_gxe[i] = t;
    }

    bool block_nonzero(index_t i) const { return beta_g(i) != 0.0 || beta_gxe[i] != 0.0; }

    bool satisfies_hierarchy(double tol) const
    {
        for (index_t i = 0; i < p(); ++i) {
            if (beta_g_plus[i] < 0.0 || beta_g_minus[i] < 0.0) return false;
            if (std::abs(beta_gxe[i]) > beta_g_plus[i] + beta_g_minus[i] + tol) return false;
        }
        return true;
    }
};

struct DualPoint
{
    vec_t nu;
    vec_t delta;
};

struct FitMeta
{
    double primal = 0.0;
    double dual = 0.0;
    double gap = 0.0;
    double tol_gap = 0.0;
    long iters_outer = 0;
    long iters_inner = 0;
    long gap_checks = 0;
    long failed_certifications = 0;
    double maxdiff_tol = 0.0;
    index_t ws_size_final = 0;
    index_t ws_size_max = 0;
    index_t screened_out = 0;
    bool converged = false;
    double elapsed_seconds = 0.0;
    /// Gap-ball radii of every full-problem certification attempt, in order.
    std::vector<double> radius_trace;
    /// Primal objective after each completed full cycle.
    std::vector<double> primal_trace;
};

inline void check_dims(const Dataset& ds, const Coefficients& b)
{
    if (b.beta_g_plus.size() != ds.p() || b.beta_g_minus.size() != ds.p() || b.beta_gxe.size() != ds.p()) {
        throw dimension_error("coefficients have length " + std::to_string(b.beta_gxe.size()) +
                              ", dataset has p = " + std::to_string(ds.p()));
    }
    if (!std::isfinite(b.beta0) || !std::isfinite(b.beta_e) || !b.beta_g_plus.allFinite() ||
        !b.beta_g_minus.allFinite() || !b.beta_gxe.allFinite()) {
        throw value_error("coefficients contain non-finite values");
    }
}

/// X beta = beta0 + G beta_g + E beta_e + (G * E) beta_gxe
inline vec_t linear_predictor(const Dataset& ds, const Coefficients& b)
{
    check_dims(ds, b);
    vec_t eta = vec_t::Constant(ds.n(), b.beta0) + b.beta_e * ds.e();
    vec_t neg = vec_t::Zero(ds.n());
    for (index_t i = 0; i < ds.p(); ++i) ds.sub_pair(i, b.beta_g(i), b.beta_gxe[i], neg);
    return eta - neg;
}

inline vec_t residuals(const Dataset& ds, const Coefficients& b) { return ds.y() - linear_predictor(ds, b); }

/// lambda1 * sum_i max(|beta_g[i]|, |beta_gxe[i]|) + lambda2 * ||beta_gxe||_1
inline double penalty_value(const Coefficients& b, const PenaltyPair& pen)
{
    double group = 0.0;
    for (index_t i = 0; i < b.p(); ++i) group += std::max(std::abs(b.beta_g(i)), std::abs(b.beta_gxe[i]));
    return pen.lambda1 * group + pen.lambda2 * b.beta_gxe.lpNorm<1>();
}

/// Primal objective given a residual vector that is known to match b.
inline double primal_from_residual(const vec_t& resid, const Coefficients& b, const PenaltyPair& pen)
{
    return resid.squaredNorm() / (2.0 * static_cast<double>(resid.size())) + penalty_value(b, pen);
}

/// (1/2n)||y - X beta||^2 + lambda1 sum_i max(|beta_g[i]|, |beta_gxe[i]|) + lambda2 ||beta_gxe||_1
inline double primal_objective(const Dataset& ds, const Coefficients& b, const PenaltyPair& pen)
{
    return primal_from_residual(residuals(ds, b), b, pen);
}

/// Objective of the constrained formulation: the group term is lambda1 * sum(beta_g_plus + beta_g_minus).
inline double relaxed_objective(const Dataset& ds, const Coefficients& b, const PenaltyPair& pen)
{
    const vec_t r = residuals(ds, b);
    return r.squaredNorm() / (2.0 * static_cast<double>(ds.n())) +
           pen.lambda1 * (b.beta_g_plus.sum() + b.beta_g_minus.sum()) + pen.lambda2 * b.beta_gxe.lpNorm<1>();
}

/// (n/2)(||y/n||^2 - ||y/n - nu||^2)
inline double dual_objective(const Dataset& ds, const vec_t& nu)
{
    if (nu.size() != ds.n()) {
        throw dimension_error("dual point has length " + std::to_string(nu.size()) + ", expected n = " +
                              std::to_string(ds.n()));
    }
    const double nn = static_cast<double>(ds.n());
    const vec_t yn = ds.y() / nn;
    return 0.5 * nn * (yn.squaredNorm() - (yn - nu).squaredNorm());
}

struct FeasibilityReport
{
    bool feasible = true;
    double worst_violation = 0.0;
    std::string reason;
};

/**
 * Membership in the dual feasible region. Besides the per-block conditions,
 * nu must be orthogonal to the unpenalized columns 1 and E.
 */
inline FeasibilityReport check_dual_feasibility(const Dataset& ds, const PenaltyPair& pen, const DualPoint& dp)
{
    if (dp.nu.size() != ds.n() || dp.delta.size() != ds.p()) throw dimension_error("dual point dimensions");
    FeasibilityReport rep;
    const double tol = pen.tol_feas();
    auto flag = [&](double violation, const std::string& why) {
        if (violation > rep.worst_violation) rep.worst_violation = violation;
        if (violation > 0.0 && rep.feasible) {
            rep.feasible = false;
            rep.reason = why;
        }
    };
    for (index_t i = 0; i < ds.p(); ++i) {
        const double d = dp.delta[i];
        flag(-d - tol, "delta[" + std::to_string(i) + "] < 0");
        flag(d - pen.lambda1 - tol, "delta[" + std::to_string(i) + "] > lambda1");
        const auto [a, bb] = ds.dot_pair(i, dp.nu);
        flag(std::abs(a) - (pen.lambda1 - d) - tol, "|nu^T G_" + std::to_string(i) + "| > lambda1 - delta");
        flag(std::abs(bb) - (pen.lambda2 + d) - tol, "|nu^T (G_" + std::to_string(i) + " E)| > lambda2 + delta");
    }
    const double nrm = dp.nu.norm();
    const double nn = static_cast<double>(ds.n());
    flag(std::abs(dp.nu.sum()) - 1e-9 * (1.0 + nrm * std::sqrt(nn)), "nu not orthogonal to intercept");
    flag(std::abs(dp.nu.dot(ds.e())) - 1e-9 * (1.0 + nrm * ds.e().norm()), "nu not orthogonal to exposure");
    return rep;
}

/// P(b) - D(nu); throws infeasible_dual_error unless dp is dual feasible.
inline double duality_gap(const Dataset& ds, const Coefficients& b, const PenaltyPair& pen, const DualPoint& dp)
{
    pen.validate();
    const auto rep = check_dual_feasibility(ds, pen, dp);
    if (!rep.feasible) throw infeasible_dual_error("duality_gap: dual point infeasible: " + rep.reason);
    return primal_objective(ds, b, pen) - dual_objective(ds, dp.nu);
}

struct KktDiscard
{
    bool can_zero_g = false;
    bool can_zero_gxe = false;
};

/// Strict KKT conditions under which block i's coefficients vanish at the optimum.
inline KktDiscard kkt_discard_check(const Dataset& ds, const PenaltyPair& pen, const DualPoint& dp, index_t i)
{
    if (i < 0 || i >= ds.p()) throw dimension_error("kkt_discard_check: block index out of range");
    const auto [a, b] = ds.dot_pair(i, dp.nu);
    KktDiscard out;
    out.can_zero_gxe = std::abs(b) < pen.lambda2 + dp.delta[i];
    out.can_zero_g = std::abs(a) < pen.lambda1 - dp.delta[i];
    return out;
}

} // namespace gesso
