#include <random>
#include <Eigen/Dense>
#include <gtest/gtest.h>
#include <gesso/screening.hpp>
#include <gesso/solver.hpp>
#include <gesso/tuning.hpp>
#include "oracle/instances.hpp"
#include "oracle/reference.hpp"

using namespace gesso;

namespace {

SolverConfig algorithm1()
{
    SolverConfig c;
    c.use_working_set = false;
    c.use_screening = false;
    c.use_active_set = false;
    c.use_adaptive_maxdiff = false;
    return c;
}

SolverConfig algorithm3()
{
    SolverConfig c = algorithm1();
    c.use_active_set = true;
    c.use_adaptive_maxdiff = true;
    return c;
}

/// Gap recomputed from scratch with core-model functions.
double recomputed_gap(const Dataset& ds, const Coefficients& c, const PenaltyPair& pen)
{
    const DualPoint dp = optimal_naive_projection(ds, residual_dual(ds, c), pen);
    return duality_gap(ds, c, pen, dp);
}

PenaltyPair random_pair(std::mt19937_64& rng, const Dataset& ds)
{
    std::uniform_real_distribution<double> frac(0.05, 0.7);
    const double top = lambda_max(ds);
    return PenaltyPair{frac(rng) * top, frac(rng) * top};
}

std::vector<index_t> support(const Coefficients& c, double thr)
{
    std::vector<index_t> s;
    for (index_t i = 0; i < c.p(); ++i) {
        if (std::abs(c.beta_g(i)) > thr) s.push_back(2 * i);
        if (std::abs(c.beta_gxe[i]) > thr) s.push_back(2 * i + 1);
    }
    return s;
}

} // namespace

TEST(SolverConfig, Validation)
{
    SolverConfig c;
    c.tol = 0.0;
    EXPECT_THROW(c.validate(), value_error);
    c = SolverConfig{};
    c.ws_init_size = 0;
    EXPECT_THROW(c.validate(), value_error);
    std::mt19937_64 rng(1);
    const Dataset ds = oracle::random_dataset(rng, 10, 2);
    EXPECT_THROW(fit(ds, PenaltyPair{0.0, 1.0}, SolverConfig{}), value_error);
    EXPECT_NEAR(SolverConfig{}.resolve_tol(ds), 1e-4 * ds.y().squaredNorm() / 20.0, 1e-18);
}

TEST(SolveInner, EmptyIndexSetFitsOnlyUnpenalized)
{
    std::mt19937_64 rng(2);
    const Dataset ds = oracle::random_dataset(rng, 20, 3);
    FitState st = FitState::init(ds);
    const FitMeta m = solve_inner(ds, st, PenaltyPair{0.1, 0.1}, algorithm1(), {});
    EXPECT_TRUE(m.converged);
    EXPECT_EQ(st.coef.beta_g(), vec_t::Zero(3));
    EXPECT_EQ(st.coef.beta_gxe, vec_t::Zero(3));
    EXPECT_THROW(solve_inner(ds, st, PenaltyPair{0.1, 0.1}, algorithm1(), {7}), dimension_error);
}

TEST(SolveInner, MatchesReferenceAndDescends)
{
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 8; ++rep) {
        const Dataset ds = oracle::random_dataset(rng, 30, 5, 0.4, 3);
        const PenaltyPair pen = random_pair(rng, ds);
        SolverConfig cfg = algorithm1();
        cfg.record_trace = true;
        FitState st = FitState::init(ds);
        const FitMeta m = solve_inner(ds, st, pen, cfg, detail::all_blocks(ds));
        ASSERT_TRUE(m.converged);
        const auto ref = oracle::reference_solve(ds, pen.lambda1, pen.lambda2, 1e-11);
        const double p_solver = oracle::objective(ds, oracle::from_coefficients(st.coef), pen.lambda1, pen.lambda2);
        EXPECT_GE(p_solver, ref.gap.primal - 1e-9);
        EXPECT_LE(p_solver, ref.gap.primal + m.tol_gap);
        for (std::size_t k = 1; k < m.primal_trace.size(); ++k) {
            EXPECT_LE(m.primal_trace[k], m.primal_trace[k - 1] + 1e-12 * (1.0 + std::abs(m.primal_trace[k - 1])));
        }
    }
}

TEST(SolveInnerOptimized, AgreesWithPlainAndChecksLess)
{
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 50; ++rep) {
        const Dataset ds = oracle::random_dataset(rng, 40, 12, 0.4, 3);
        const PenaltyPair pen = random_pair(rng, ds);
        FitState s1 = FitState::init(ds), s3 = FitState::init(ds);
        const auto blocks = detail::all_blocks(ds);
        const FitMeta m1 = solve_inner(ds, s1, pen, algorithm1(), blocks);
        const FitMeta m3 = solve_inner_optimized(ds, s3, pen, algorithm3(), blocks);
        ASSERT_TRUE(m1.converged && m3.converged);
        EXPECT_NEAR(m1.primal, m3.primal, 10.0 * m1.tol_gap);
        EXPECT_LE(m3.gap_checks, m1.gap_checks) << "rep " << rep;
        EXPECT_DOUBLE_EQ(m3.maxdiff_tol, m3.tol_gap / std::pow(10.0, static_cast<double>(m3.failed_certifications)));
    }
}

TEST(WorkingSet, NullModelAboveLambdaMax)
{
    std::mt19937_64 rng(5);
    const Dataset ds = oracle::random_dataset(rng, 30, 20);
    const double top = lambda_max(ds);
    const FitResult r = solve_working_set(ds, PenaltyPair{1.01 * top, 1.01 * top}, SolverConfig{});
    EXPECT_TRUE(r.meta.converged);
    EXPECT_EQ(r.meta.iters_outer, 1);
    for (index_t i = 0; i < ds.p(); ++i) EXPECT_FALSE(r.coefficients.block_nonzero(i));
}

TEST(WorkingSet, AllVariantsAgree)
{
    std::mt19937_64 rng(6);
    for (int rep = 0; rep < 25; ++rep) {
        const Dataset ds = oracle::random_dataset(rng, 40, 30, 0.4, 4);
        const PenaltyPair pen = random_pair(rng, ds);
        SolverConfig tight;
        tight.tol = 1e-9;
        std::vector<FitResult> results;
        for (const bool ws : {false, true}) {
            for (const bool screen : {false, true}) {
                for (const bool opt : {false, true}) {
                    SolverConfig c = tight;
                    c.use_working_set = ws;
                    c.use_screening = screen;
                    c.use_active_set = opt;
                    c.use_adaptive_maxdiff = opt;
                    results.push_back(fit(ds, pen, c));
                }
            }
        }
        const auto ref_support = support(results.front().coefficients, 1e-6);
        for (const auto& r : results) {
            ASSERT_TRUE(r.meta.converged);
            EXPECT_NEAR(r.meta.primal, results.front().meta.primal, 10.0 * r.meta.tol_gap);
            EXPECT_EQ(support(r.coefficients, 1e-6), ref_support) << "rep " << rep;
            EXPECT_LE(recomputed_gap(ds, r.coefficients, pen), r.meta.tol_gap * (1.0 + 1e-6) + 1e-14);
            EXPECT_TRUE(r.coefficients.satisfies_hierarchy(pen.tol_feas()));
        }
    }
}

TEST(WorkingSet, RadiusTraceShrinksToTolerance)
{
    std::mt19937_64 rng(7);
    const Dataset ds = oracle::random_dataset(rng, 50, 60, 0.4, 4);
    const PenaltyPair pen = random_pair(rng, ds);
    SolverConfig cfg;
    cfg.record_trace = true;
    const FitResult r = fit(ds, pen, cfg);
    ASSERT_TRUE(r.meta.converged);
    ASSERT_FALSE(r.meta.radius_trace.empty());
    const double last = r.meta.radius_trace.back();
    for (const double x : r.meta.radius_trace) EXPECT_GE(x, last - 1e-12);
    const double allowance = 1e-14 * (1.0 + std::abs(r.meta.primal));
    EXPECT_LE(last, std::sqrt(2.0 * (r.meta.tol_gap + allowance) / static_cast<double>(ds.n())));
}

TEST(WorkingSet, PrimalDualLinkAtConvergence)
{
    std::mt19937_64 rng(8);
    const Dataset ds = oracle::random_dataset(rng, 40, 15, 0.4, 3);
    const PenaltyPair pen = random_pair(rng, ds);
    SolverConfig cfg;
    cfg.tol = 1e-10;
    const FitResult r = fit(ds, pen, cfg);
    ASSERT_TRUE(r.meta.converged);
    const vec_t nu_res = residual_dual(ds, r.coefficients);
    const DualPoint nu0 = optimal_naive_projection(ds, nu_res, pen);
    EXPECT_LE((nu0.nu - nu_res).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(WorkingSet, WarmStartAndNonConvergence)
{
    std::mt19937_64 rng(9);
    const Dataset ds = oracle::random_dataset(rng, 40, 25, 0.4, 3);
    const PenaltyPair pen = random_pair(rng, ds);
    const FitResult cold = fit(ds, pen, SolverConfig{});
    const FitResult warm = fit(ds, pen, SolverConfig{}, &cold.coefficients);
    EXPECT_TRUE(warm.meta.converged);
    EXPECT_LE(warm.meta.iters_inner, cold.meta.iters_inner);

    SolverConfig starved;
    starved.tol = 1e-14;
    starved.max_iter_outer = 1;
    starved.max_iter_inner = 1;
    const FitResult r = fit(ds, PenaltyPair{0.05 * lambda_max(ds), 0.05 * lambda_max(ds)}, starved);
    EXPECT_FALSE(r.meta.converged);
    SolverConfig starved1 = starved;
    starved1.use_working_set = false;
    EXPECT_FALSE(fit(ds, PenaltyPair{0.05 * lambda_max(ds), 0.05 * lambda_max(ds)}, starved1).meta.converged);
}

TEST(WorkingSet, MaterializedMatchesLazy)
{
    std::mt19937_64 rng(10);
    const RawData raw = oracle::random_raw(rng, 30, 10, 0.4, 3);
    const Dataset lazy = Dataset::from_raw(raw);
    const Dataset dense = Dataset::from_raw(raw, DatasetOptions{true, true});
    const PenaltyPair pen{0.3 * lambda_max(lazy), 0.3 * lambda_max(lazy)};
    const FitResult a = fit(lazy, pen, SolverConfig{});
    const FitResult b = fit(dense, pen, SolverConfig{});
    EXPECT_NEAR(a.meta.primal, b.meta.primal, 10.0 * a.meta.tol_gap);
}

// ---------------------------------------------------------------------------

namespace {

/// Plain coordinate descent on explicit matrices until coefficient changes vanish.
vec_t reference_lasso(const Dataset& ds, double lambda)
{
    const index_t n = ds.n(), p = ds.p();
    const mat_t q = oracle::unpenalized_basis(ds);
    mat_t x(n, 2 * p);
    x.leftCols(p) = ds.g();
    x.rightCols(p) = oracle::interaction_matrix(ds);
    for (index_t j = 0; j < 2 * p; ++j) x.col(j) = oracle::residualize(q, x.col(j));
    vec_t r = oracle::residualize(q, ds.y());
    vec_t beta = vec_t::Zero(2 * p);
    const double nn = static_cast<double>(n);
    for (int it = 0; it < 200000; ++it) {
        double change = 0.0;
        for (index_t j = 0; j < 2 * p; ++j) {
            const double sq = x.col(j).squaredNorm() / nn;
            if (sq == 0.0) continue;
            const double z = x.col(j).dot(r) / nn + sq * beta[j];
            const double nb = std::copysign(std::max(std::abs(z) - lambda, 0.0), z) / sq;
            if (nb != beta[j]) {
                r -= (nb - beta[j]) * x.col(j);
                change = std::max(change, std::abs(nb - beta[j]));
                beta[j] = nb;
            }
        }
        if (change < 1e-14) break;
    }
    return beta;
}

} // namespace

TEST(LassoBaseline, NullAboveLambdaMax)
{
    std::mt19937_64 rng(11);
    const Dataset ds = oracle::random_dataset(rng, 30, 8);
    const LassoFitResult r = solve_lasso_baseline(ds, 1.0001 * lasso_lambda_max(ds), SolverConfig{});
    EXPECT_TRUE(r.meta.converged);
    EXPECT_EQ(r.beta_g.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(r.beta_gxe.cwiseAbs().maxCoeff(), 0.0);
    const LassoFitResult below = solve_lasso_baseline(ds, 0.98 * lasso_lambda_max(ds), SolverConfig{});
    EXPECT_GT(below.beta_g.cwiseAbs().maxCoeff() + below.beta_gxe.cwiseAbs().maxCoeff(), 0.0);
}

TEST(LassoBaseline, MatchesReferenceCoordinateDescent)
{
    std::mt19937_64 rng(12);
    for (int rep = 0; rep < 10; ++rep) {
        const Dataset ds = oracle::random_dataset(rng, 35, 6, 0.4, 3);
        const double lambda = 0.2 * lasso_lambda_max(ds);
        SolverConfig cfg;
        cfg.tol = 1e-13;
        const LassoFitResult r = solve_lasso_baseline(ds, lambda, cfg);
        ASSERT_TRUE(r.meta.converged);
        const vec_t ref = reference_lasso(ds, lambda);
        for (index_t i = 0; i < 6; ++i) {
            EXPECT_NEAR(r.beta_g[i], ref[i], 1e-6);
            EXPECT_NEAR(r.beta_gxe[i], ref[6 + i], 1e-6);
        }
    }
}

TEST(LassoBaseline, SmallLambdaApproachesLeastSquares)
{
    std::mt19937_64 rng(13);
    const Dataset ds = oracle::random_dataset(rng, 40, 3, 0.5, 2, 0.5);
    SolverConfig cfg;
    cfg.tol = 1e-14;
    const LassoFitResult r = solve_lasso_baseline(ds, 1e-7, cfg);
    mat_t x(40, 8);
    x.col(0).setOnes();
    x.col(1) = ds.e();
    x.middleCols(2, 3) = ds.g();
    x.rightCols(3) = oracle::interaction_matrix(ds);
    const vec_t ols = x.colPivHouseholderQr().solve(ds.y());
    for (index_t i = 0; i < 3; ++i) {
        EXPECT_NEAR(r.beta_g[i], ols[2 + i], 1e-3);
        EXPECT_NEAR(r.beta_gxe[i], ols[5 + i], 1e-3);
    }
}
