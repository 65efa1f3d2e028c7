#pragma once
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>
#include <gesso/block_update.hpp>
#include <gesso/model.hpp>
#include <gesso/screening.hpp>

namespace gesso {

struct SolverConfig
{
    /// Duality-gap tolerance; relative to ||y||^2/(2n) unless tol_relative is false.
    double tol = 1e-4;
    bool tol_relative = true;
    long max_iter_outer = 1000;
    long max_iter_inner = 100000;
    index_t ws_init_size = 10;
    bool use_working_set = true;
    bool use_screening = true;
    bool use_active_set = true;
    bool use_adaptive_maxdiff = true;
    bool record_trace = false;

    void validate() const
    {
        if (!(tol > 0.0) || !std::isfinite(tol)) throw value_error("solver: tol must be positive");
        if (max_iter_outer < 1 || max_iter_inner < 1) throw value_error("solver: iteration caps must be >= 1");
        if (ws_init_size < 1) throw value_error("solver: ws_init_size must be >= 1");
    }

    double resolve_tol(const Dataset& ds) const
    {
        if (!tol_relative) return tol;
        const double scale = ds.y().squaredNorm() / (2.0 * static_cast<double>(ds.n()));
        return tol * std::max(scale, std::numeric_limits<double>::min());
    }

    bool optimized_inner() const { return use_active_set || use_adaptive_maxdiff; }
};

struct FitResult
{
    Coefficients coefficients;
    FitMeta meta;
    PenaltyPair pen;
};

/// Coefficients together with the residual y - X beta they induce.
struct FitState
{
    Coefficients coef;
    vec_t resid;

    static FitState init(const Dataset& ds, const Coefficients* warm = nullptr)
    {
        FitState s;
        s.coef = warm ? *warm : Coefficients::zeros(ds.p());
        check_dims(ds, s.coef);
        for (index_t i = 0; i < ds.p(); ++i) {
            if (ds.is_null_block(i)) s.coef.set_block(i, 0.0, 0.0);
        }
        s.resid = residuals(ds, s.coef);
        return s;
    }
};

/// Exact joint update of intercept and exposure effect; returns (beta0, beta_e).
inline std::pair<double, double> unpenalized_update(const Dataset& ds, FitState& state)
{
    auto& c = state.coef;
    // least-squares fit of the residual gives the correction to (beta0, beta_e)
    const auto [d0, de] = ds.unpenalized_ls(state.resid);
    c.beta0 += d0;
    state.resid.array() -= d0;
    if (ds.exposure_identifiable()) {
        c.beta_e += de;
        if (de != 0.0) state.resid -= de * ds.e();
    } else if (c.beta_e != 0.0) {
        state.resid += c.beta_e * ds.e();
        c.beta_e = 0.0;
        const double fix = state.resid.mean();
        c.beta0 += fix;
        state.resid.array() -= fix;
    }
    return {c.beta0, c.beta_e};
}

/**
 * Exact minimization over block i with all other coefficients fixed.
 * Updates the coefficients and the residual; returns the new (beta_g, beta_gxe).
 */
inline BlockSolution block_update(const Dataset& ds, FitState& state, const PenaltyPair& pen, index_t i)
{
    auto& c = state.coef;
    const double b_old = c.beta_g(i);
    const double t_old = c.beta_gxe[i];
    if (ds.is_null_block(i)) {
        c.set_block(i, 0.0, 0.0);
        return {0.0, 0.0};
    }
    const double nn = static_cast<double>(ds.n());
    const auto [gr, zr] = ds.dot_pair(i, state.resid);
    BlockQuadratic q;
    q.a = ds.sq_norm_g(i) / nn;
    q.c = ds.sq_norm_gxe(i) / nn;
    q.h = ds.cross(i) / nn;
    q.u = (gr + ds.sq_norm_g(i) * b_old + ds.cross(i) * t_old) / nn;
    q.v = (zr + ds.cross(i) * b_old + ds.sq_norm_gxe(i) * t_old) / nn;
    const BlockSolution sol = solve_block(q, pen.lambda1, pen.lambda2);
    ds.sub_pair(i, sol.b - b_old, sol.t - t_old, state.resid);
    c.set_block(i, sol.b, sol.t);
    return sol;
}

namespace detail {

/// Feasible dual point built from the current residual, restricted to a set of blocks.
struct Certificate
{
    double primal = 0.0;
    double dual = 0.0;
    double gap = 0.0;
    double radius = 0.0;
    double scale = 0.0;       ///< nu0 = scale * nu_dir
    vec_t nu_dir;             ///< residual / n with 1 and E projected out
    vec_t dot_g, dot_gxe;     ///< nu_dir^T G_i, nu_dir^T (G_i E) for each listed block
};

/// blocks == nullptr means every block.
inline Certificate certify(const Dataset& ds, const FitState& state, const PenaltyPair& pen,
                           const std::vector<index_t>* blocks)
{
    Certificate cert;
    const double nn = static_cast<double>(ds.n());
    cert.nu_dir = state.resid / nn;
    ds.project_out_unpenalized(cert.nu_dir);
    const index_t m = blocks ? static_cast<index_t>(blocks->size()) : ds.p();
    cert.dot_g.resize(m);
    cert.dot_gxe.resize(m);
    double bound = std::numeric_limits<double>::infinity();
    for (index_t k = 0; k < m; ++k) {
        const index_t i = blocks ? (*blocks)[k] : k;
        const auto [a, b] = ds.dot_pair(i, cert.nu_dir);
        cert.dot_g[k] = a;
        cert.dot_gxe[k] = b;
        const double aa = std::abs(a), bb = std::abs(b);
        bound = std::min(bound, block_scale_bound(aa, bb, optimal_delta(aa, bb, pen.lambda1, pen.lambda2),
                                                  pen.lambda1, pen.lambda2));
    }
    cert.scale = clamp_scale(unconstrained_scale(ds, cert.nu_dir), bound);
    const vec_t yn = ds.y() / nn;
    cert.dual = 0.5 * nn * (yn.squaredNorm() - (yn - cert.scale * cert.nu_dir).squaredNorm());
    cert.primal = primal_from_residual(state.resid, state.coef, pen);
    cert.gap = cert.primal - cert.dual;
    cert.radius = gap_radius(cert.gap, ds.n(), cert.primal);
    return cert;
}

/// Working-set score of the k-th listed block at the certificate's dual point.
inline double cert_score(const Dataset& ds, const Certificate& cert, const PenaltyPair& pen, index_t k, index_t i)
{
    const double s = std::abs(cert.scale);
    return ws_score(s * std::abs(cert.dot_g[k]), s * std::abs(cert.dot_gxe[k]), ds.col_norm_g()[i],
                    ds.col_norm_gxe()[i], pen);
}

inline void zero_block(const Dataset& ds, FitState& state, index_t i)
{
    const double b = state.coef.beta_g(i);
    const double t = state.coef.beta_gxe[i];
    if (b != 0.0 || t != 0.0) ds.sub_pair(i, -b, -t, state.resid);
    state.coef.set_block(i, 0.0, 0.0);
}

inline void accept(FitMeta& meta, const Certificate& cert)
{
    meta.primal = cert.primal;
    meta.dual = cert.dual;
    meta.gap = cert.gap;
}

/// One pass over `blocks`; returns the max-difference criterion and marks moved blocks.
inline double cycle(const Dataset& ds, FitState& state, const PenaltyPair& pen, const std::vector<index_t>& blocks,
                    std::vector<index_t>* moved)
{
    double max_diff = 0.0;
    if (moved) moved->clear();
    for (const index_t i : blocks) {
        const double b_old = state.coef.beta_g(i);
        const double t_old = state.coef.beta_gxe[i];
        const BlockSolution s = block_update(ds, state, pen, i);
        const double db = s.b - b_old, dt = s.t - t_old;
        const double diff = std::max(db * db * ds.sq_norm_g(i), dt * dt * ds.sq_norm_gxe(i));
        max_diff = std::max(max_diff, diff);
        if (moved && (db != 0.0 || dt != 0.0)) moved->push_back(i);
    }
    unpenalized_update(ds, state);
    return max_diff;
}

/// Drop blocks the gap ball proves to be zero from `updating`, zeroing them in the state.
inline index_t screen_blocks(const Dataset& ds, FitState& state, const PenaltyPair& pen, const Certificate& cert,
                             const std::vector<index_t>& checked, std::vector<index_t>& updating,
                             std::vector<char>& discarded)
{
    index_t count = 0;
    for (index_t k = 0; k < static_cast<index_t>(checked.size()); ++k) {
        const index_t i = checked[k];
        if (discarded[i]) continue;
        if (cert_score(ds, cert, pen, k, i) > cert.radius) {
            discarded[i] = 1;
            zero_block(ds, state, i);
            ++count;
        }
    }
    if (count) {
        std::erase_if(updating, [&](index_t i) { return discarded[i] != 0; });
        unpenalized_update(ds, state);
    }
    return count;
}

inline std::vector<index_t> live_blocks(const Dataset& ds, const std::vector<index_t>& index_set)
{
    std::vector<index_t> out;
    out.reserve(index_set.size());
    for (const index_t i : index_set) {
        if (!ds.is_null_block(i)) out.push_back(i);
    }
    return out;
}

inline void validate_index_set(const Dataset& ds, const std::vector<index_t>& index_set)
{
    for (const index_t i : index_set) {
        if (i < 0 || i >= ds.p()) throw dimension_error("index set entry out of range");
    }
}

/// Plain cyclic body. The certificate covers index_set; screening only removes blocks from the update list.
inline FitMeta run_cyclic(const Dataset& ds, FitState& state, const PenaltyPair& pen, const SolverConfig& cfg,
                          const std::vector<index_t>& index_set, bool screen)
{
    FitMeta meta;
    meta.tol_gap = cfg.resolve_tol(ds);
    std::vector<index_t> updating = live_blocks(ds, index_set);
    std::vector<char> discarded(ds.p(), 0);
    unpenalized_update(ds, state);
    while (true) {
        const Certificate cert = certify(ds, state, pen, &index_set);
        ++meta.gap_checks;
        if (cfg.record_trace) meta.radius_trace.push_back(cert.radius);
        accept(meta, cert);
        if (cert.gap <= meta.tol_gap) {
            meta.converged = true;
            break;
        }
        if (meta.iters_inner >= cfg.max_iter_inner) break;
        if (screen) meta.screened_out += screen_blocks(ds, state, pen, cert, index_set, updating, discarded);
        cycle(ds, state, pen, updating, nullptr);
        ++meta.iters_inner;
        if (cfg.record_trace) meta.primal_trace.push_back(primal_from_residual(state.resid, state.coef, pen));
    }
    return meta;
}

/// Active-set body: gap checks gated by the max-difference proxy, active-set sweeps in between.
inline FitMeta run_optimized(const Dataset& ds, FitState& state, const PenaltyPair& pen, const SolverConfig& cfg,
                             const std::vector<index_t>& index_set, bool screen)
{
    FitMeta meta;
    meta.tol_gap = cfg.resolve_tol(ds);
    std::vector<index_t> updating = live_blocks(ds, index_set);
    std::vector<char> discarded(ds.p(), 0);
    std::vector<index_t> active;
    double md_tol = meta.tol_gap;
    bool first_check = true;
    unpenalized_update(ds, state);

    auto record = [&] {
        ++meta.iters_inner;
        if (cfg.record_trace) meta.primal_trace.push_back(primal_from_residual(state.resid, state.coef, pen));
    };

    while (true) {
        const Certificate cert = certify(ds, state, pen, &index_set);
        ++meta.gap_checks;
        if (cfg.record_trace) meta.radius_trace.push_back(cert.radius);
        accept(meta, cert);
        if (cert.gap <= meta.tol_gap) {
            meta.converged = true;
            break;
        }
        if (!first_check) {
            ++meta.failed_certifications;
            if (cfg.use_adaptive_maxdiff) md_tol /= 10.0;
        }
        first_check = false;
        if (meta.iters_inner >= cfg.max_iter_inner) break;
        if (screen) meta.screened_out += screen_blocks(ds, state, pen, cert, index_set, updating, discarded);

        while (meta.iters_inner < cfg.max_iter_inner) {
            const double full_diff = cycle(ds, state, pen, updating, &active);
            record();
            if (full_diff < md_tol) break;
            if (!cfg.use_active_set) continue;
            while (meta.iters_inner < cfg.max_iter_inner) {
                const double diff = cycle(ds, state, pen, active, nullptr);
                record();
                if (diff < md_tol) break;
            }
        }
    }
    meta.maxdiff_tol = md_tol;
    return meta;
}

inline std::vector<index_t> all_blocks(const Dataset& ds)
{
    std::vector<index_t> v(static_cast<std::size_t>(ds.p()));
    std::iota(v.begin(), v.end(), index_t{0});
    return v;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

/**
 * Cyclic block coordinate descent over index_set, stopped by the
 * duality gap of the problem restricted to index_set. Blocks outside the set
 * are held at their current values and are expected to be zero.
 */
inline FitMeta solve_inner(const Dataset& ds, FitState& state, const PenaltyPair& pen, const SolverConfig& cfg,
                           const std::vector<index_t>& index_set)
{
    pen.validate();
    cfg.validate();
    detail::validate_index_set(ds, index_set);
    return detail::run_cyclic(ds, state, pen, cfg, index_set, false);
}

/**
 * Like solve_inner, but the duality gap is evaluated only once
 * the max-difference proxy falls below its tolerance. That tolerance starts at
 * the gap tolerance and shrinks tenfold after every failed certification.
 */
inline FitMeta solve_inner_optimized(const Dataset& ds, FitState& state, const PenaltyPair& pen,
                                     const SolverConfig& cfg, const std::vector<index_t>& index_set)
{
    pen.validate();
    cfg.validate();
    detail::validate_index_set(ds, index_set);
    return detail::run_optimized(ds, state, pen, cfg, index_set, false);
}

/**
 * Working-set outer loop. Each outer iteration certifies the
 * full problem, scores blocks against the gap ball, and doubles the working
 * set with the lowest-scoring blocks before re-solving on it.
 */
inline FitResult solve_working_set(const Dataset& ds, const PenaltyPair& pen, const SolverConfig& cfg,
                                   const Coefficients* warm = nullptr)
{
    pen.validate();
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const index_t p = ds.p();
    FitState state = FitState::init(ds, warm);
    unpenalized_update(ds, state);

    FitMeta meta;
    meta.tol_gap = cfg.resolve_tol(ds);
    meta.maxdiff_tol = meta.tol_gap;
    std::vector<char> discarded(p, 0);
    std::vector<char> in_ws(p, 0);
    std::vector<index_t> ws;
    index_t ws_size = 0;
    std::vector<double> score(p);
    std::vector<index_t> order;
    order.reserve(p);

    for (long outer = 1; outer <= cfg.max_iter_outer; ++outer) {
        const detail::Certificate cert = detail::certify(ds, state, pen, nullptr);
        ++meta.gap_checks;
        meta.radius_trace.push_back(cert.radius);
        detail::accept(meta, cert);
        meta.iters_outer = outer;
        if (cert.gap <= meta.tol_gap) {
            meta.converged = true;
            break;
        }

        for (index_t i = 0; i < p; ++i) score[i] = detail::cert_score(ds, cert, pen, i, i);
        if (cfg.use_screening) {
            bool any = false;
            for (index_t i = 0; i < p; ++i) {
                if (discarded[i] || !(score[i] > cert.radius)) continue;
                discarded[i] = 1;
                detail::zero_block(ds, state, i);
                ++meta.screened_out;
                any = true;
            }
            if (any) {
                std::erase_if(ws, [&](index_t i) { return discarded[i] != 0; });
                std::fill(in_ws.begin(), in_ws.end(), 0);
                for (const index_t i : ws) in_ws[i] = 1;
                unpenalized_update(ds, state);
            }
        }

        order.clear();
        for (index_t i = 0; i < p; ++i) {
            if (!discarded[i] && !ds.is_null_block(i)) order.push_back(i);
        }
        const index_t available = static_cast<index_t>(order.size());

        if (outer == 1) {
            ws.clear();
            for (const index_t i : order) {
                if (state.coef.block_nonzero(i)) ws.push_back(i);
            }
            if (ws.empty()) ws_size = std::min(cfg.ws_init_size, available);
            else ws_size = static_cast<index_t>(ws.size());
        } else {
            ws_size = std::min(std::max<index_t>(2 * ws_size, 1), available);
        }
        if (static_cast<index_t>(ws.size()) < ws_size) {
            // current members first, then the smallest scores
            for (const index_t i : ws) score[i] = -std::numeric_limits<double>::infinity();
            auto by_score = [&](index_t l, index_t r) { return score[l] < score[r] || (score[l] == score[r] && l < r); };
            std::partial_sort(order.begin(), order.begin() + ws_size, order.end(), by_score);
            ws.assign(order.begin(), order.begin() + ws_size);
        }
        std::sort(ws.begin(), ws.end());
        std::fill(in_ws.begin(), in_ws.end(), 0);
        for (const index_t i : ws) in_ws[i] = 1;
        meta.ws_size_final = static_cast<index_t>(ws.size());
        meta.ws_size_max = std::max(meta.ws_size_max, meta.ws_size_final);

        const FitMeta inner = cfg.optimized_inner() ? detail::run_optimized(ds, state, pen, cfg, ws, false)
                                                    : detail::run_cyclic(ds, state, pen, cfg, ws, false);
        meta.iters_inner += inner.iters_inner;
        meta.gap_checks += inner.gap_checks;
        meta.failed_certifications += inner.failed_certifications;
        if (cfg.optimized_inner()) meta.maxdiff_tol = inner.maxdiff_tol;
        if (cfg.record_trace) {
            meta.primal_trace.insert(meta.primal_trace.end(), inner.primal_trace.begin(), inner.primal_trace.end());
        }
    }
    if (!cfg.record_trace) meta.radius_trace.clear();
    meta.elapsed_seconds = detail::seconds_since(t0);
    return FitResult{std::move(state.coef), std::move(meta), pen};
}

/// Fit one penalty pair with the strategy selected in cfg; the result is always certified on the full problem.
inline FitResult fit(const Dataset& ds, const PenaltyPair& pen, const SolverConfig& cfg,
                     const Coefficients* warm = nullptr)
{
    if (cfg.use_working_set) return solve_working_set(ds, pen, cfg, warm);
    pen.validate();
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    FitState state = FitState::init(ds, warm);
    const auto blocks = detail::all_blocks(ds);
    FitMeta meta = cfg.optimized_inner() ? detail::run_optimized(ds, state, pen, cfg, blocks, cfg.use_screening)
                                         : detail::run_cyclic(ds, state, pen, cfg, blocks, cfg.use_screening);
    meta.iters_outer = 1;
    meta.ws_size_final = meta.ws_size_max = ds.p();
    meta.elapsed_seconds = detail::seconds_since(t0);
    return FitResult{std::move(state.coef), std::move(meta), pen};
}

// ---------------------------------------------------------------------------
// Plain lasso baseline over [G, G E] with unpenalized intercept and exposure.
// ---------------------------------------------------------------------------

struct LassoFitResult
{
    double beta0 = 0.0;
    double beta_e = 0.0;
    vec_t beta_g;
    vec_t beta_gxe;
    double lambda = 0.0;
    FitMeta meta;
};

/// Smallest lambda at which all penalized lasso coefficients are zero.
inline double lasso_lambda_max(const Dataset& ds)
{
    vec_t r = ds.y();
    ds.project_out_unpenalized(r);
    double m = 0.0;
    for (index_t i = 0; i < ds.p(); ++i) {
        const auto [a, b] = ds.dot_pair(i, r);
        m = std::max({m, std::abs(a), std::abs(b)});
    }
    return m / static_cast<double>(ds.n());
}

namespace detail {

struct LassoState
{
    double beta0 = 0.0, beta_e = 0.0;
    vec_t b, t, resid;
};

inline void lasso_unpenalized(const Dataset& ds, LassoState& s)
{
    const auto [d0, de] = ds.unpenalized_ls(s.resid);
    s.beta0 += d0;
    s.resid.array() -= d0;
    s.beta_e += de;
    if (de != 0.0) s.resid -= de * ds.e();
}

inline double lasso_cycle(const Dataset& ds, LassoState& s, double lambda, const std::vector<index_t>& blocks,
                          std::vector<index_t>* moved)
{
    const double nn = static_cast<double>(ds.n());
    auto soft = [](double x, double thr) { return std::copysign(std::max(std::abs(x) - thr, 0.0), x); };
    double max_diff = 0.0;
    if (moved) moved->clear();
    for (const index_t i : blocks) {
        bool changed = false;
        if (ds.sq_norm_g(i) > 0.0) {
            const double g_r = ds.dot_pair(i, s.resid).first;
            const double nb = soft(g_r + ds.sq_norm_g(i) * s.b[i], nn * lambda) / ds.sq_norm_g(i);
            const double d = nb - s.b[i];
            if (d != 0.0) {
                ds.sub_pair(i, d, 0.0, s.resid);
                s.b[i] = nb;
                max_diff = std::max(max_diff, d * d * ds.sq_norm_g(i));
                changed = true;
            }
        }
        if (ds.sq_norm_gxe(i) > 0.0) {
            const double z_r = ds.dot_pair(i, s.resid).second;
            const double nt = soft(z_r + ds.sq_norm_gxe(i) * s.t[i], nn * lambda) / ds.sq_norm_gxe(i);
            const double d = nt - s.t[i];
            if (d != 0.0) {
                ds.sub_pair(i, 0.0, d, s.resid);
                s.t[i] = nt;
                max_diff = std::max(max_diff, d * d * ds.sq_norm_gxe(i));
                changed = true;
            }
        }
        if (moved && changed) moved->push_back(i);
    }
    lasso_unpenalized(ds, s);
    return max_diff;
}

inline Certificate lasso_certify(const Dataset& ds, const LassoState& s, double lambda)
{
    Certificate cert;
    const double nn = static_cast<double>(ds.n());
    cert.nu_dir = s.resid / nn;
    ds.project_out_unpenalized(cert.nu_dir);
    double m = 0.0;
    for (index_t i = 0; i < ds.p(); ++i) {
        const auto [a, b] = ds.dot_pair(i, cert.nu_dir);
        m = std::max({m, std::abs(a), std::abs(b)});
    }
    const double bound = m > 0.0 ? lambda / m : std::numeric_limits<double>::infinity();
    cert.scale = clamp_scale(unconstrained_scale(ds, cert.nu_dir), bound);
    const vec_t yn = ds.y() / nn;
    cert.dual = 0.5 * nn * (yn.squaredNorm() - (yn - cert.scale * cert.nu_dir).squaredNorm());
    cert.primal = s.resid.squaredNorm() / (2.0 * nn) + lambda * (s.b.lpNorm<1>() + s.t.lpNorm<1>());
    cert.gap = cert.primal - cert.dual;
    return cert;
}

} // namespace detail

/**
 * Coordinate descent for the plain lasso, every G and G x E coefficient
 * penalized by lambda. Uses the same proxy-gated gap checks and active-set
 * sweeps as the hierarchical solver.
 */
inline LassoFitResult solve_lasso_baseline(const Dataset& ds, double lambda, const SolverConfig& cfg,
                                           const LassoFitResult* warm = nullptr)
{
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw value_error("lasso: lambda must be positive");
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    detail::LassoState s;
    if (warm) {
        s.beta0 = warm->beta0;
        s.beta_e = warm->beta_e;
        s.b = warm->beta_g;
        s.t = warm->beta_gxe;
    } else {
        s.b = vec_t::Zero(ds.p());
        s.t = vec_t::Zero(ds.p());
    }
    Coefficients tmp = Coefficients::zeros(ds.p());
    tmp.beta0 = s.beta0;
    tmp.beta_e = s.beta_e;
    for (index_t i = 0; i < ds.p(); ++i) {
        tmp.beta_g_plus[i] = std::max(s.b[i], 0.0);
        tmp.beta_g_minus[i] = std::max(-s.b[i], 0.0);
        tmp.beta_gxe[i] = s.t[i];
    }
    s.resid = residuals(ds, tmp);
    detail::lasso_unpenalized(ds, s);

    FitMeta meta;
    meta.tol_gap = cfg.resolve_tol(ds);
    double md_tol = meta.tol_gap;
    bool first = true;
    const auto blocks = detail::all_blocks(ds);
    std::vector<index_t> active;
    while (true) {
        const auto cert = detail::lasso_certify(ds, s, lambda);
        ++meta.gap_checks;
        detail::accept(meta, cert);
        if (cert.gap <= meta.tol_gap) {
            meta.converged = true;
            break;
        }
        if (!first) {
            ++meta.failed_certifications;
            md_tol /= 10.0;
        }
        first = false;
        if (meta.iters_inner >= cfg.max_iter_inner) break;
        while (meta.iters_inner < cfg.max_iter_inner) {
            const double diff = detail::lasso_cycle(ds, s, lambda, blocks, &active);
            ++meta.iters_inner;
            if (diff < md_tol) break;
            while (meta.iters_inner < cfg.max_iter_inner) {
                const double d2 = detail::lasso_cycle(ds, s, lambda, active, nullptr);
                ++meta.iters_inner;
                if (d2 < md_tol) break;
            }
        }
    }
    meta.maxdiff_tol = md_tol;
    meta.iters_outer = 1;
    meta.elapsed_seconds = detail::seconds_since(t0);
    LassoFitResult out;
    out.beta0 = s.beta0;
    out.beta_e = s.beta_e;
    out.beta_g = std::move(s.b);
    out.beta_gxe = std::move(s.t);
    out.lambda = lambda;
    out.meta = std::move(meta);
    return out;
}

struct NamedConfig
{
    std::string name;
    SolverConfig config;
};

/**
 * The four solver variants compared by benchmarks: plain cyclic descent over
 * all blocks (alg1), active-set cycling with the adaptive max-difference rule
 * (alg3), and each inner loop inside the working-set outer loop (alg2_ws,
 * alg3_ws). Tolerances and screening come from base.
 */
inline std::vector<NamedConfig> solver_variants(const SolverConfig& base)
{
    SolverConfig alg1 = base;
    alg1.use_working_set = false;
    alg1.use_screening = false;
    alg1.use_active_set = false;
    alg1.use_adaptive_maxdiff = false;
    SolverConfig alg3 = alg1;
    alg3.use_active_set = true;
    alg3.use_adaptive_maxdiff = true;
    SolverConfig alg2_ws = alg1;
    alg2_ws.use_working_set = true;
    alg2_ws.use_screening = base.use_screening;
    SolverConfig alg3_ws = alg3;
    alg3_ws.use_working_set = true;
    alg3_ws.use_screening = base.use_screening;
    return {{"alg1", alg1}, {"alg3", alg3}, {"alg2_ws", alg2_ws}, {"alg3_ws", alg3_ws}};
}

} // namespace gesso
