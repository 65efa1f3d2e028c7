#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>
#include <gesso/parallel.hpp>
#include <gesso/solver.hpp>

namespace gesso {

/**
 * Smallest common value of (lambda1, lambda2) at which the null model
 * (intercept and exposure only) is optimal:
 * max_i max(A_i, (A_i + B_i) / 2) with A_i, B_i the absolute inner products of
 * the null-model residual / n with G_i and G_i E.
 */
inline double lambda_max(const Dataset& ds)
{
    vec_t nu = ds.y() / static_cast<double>(ds.n());
    ds.project_out_unpenalized(nu);
    double m = 0.0;
    for (index_t i = 0; i < ds.p(); ++i) {
        const auto [ga, gb] = ds.dot_pair(i, nu);
        const double a = std::abs(ga), b = std::abs(gb);
        m = std::max({m, a, 0.5 * (a + b)});
    }
    return m;
}

struct GridCell
{
    index_t i1 = 0;           ///< position in lambda1_values
    index_t i2 = 0;           ///< position in lambda2_values
    long predecessor = -1;    ///< cell whose solution warm-starts this one
};

/**
 * Two-dimensional logarithmic penalty grid. Cells are stored in traversal
 * order: rows of descending lambda1, each swept in descending lambda2. Every
 * cell warm-starts from the previous cell of its row; the first cell of a row
 * from the first cell of the previous row.
 */
struct PenaltyGrid
{
    std::vector<double> lambda1_values;
    std::vector<double> lambda2_values;
    std::vector<GridCell> cells;
    double lambda_max = 0.0;

    std::size_t size() const { return cells.size(); }
    PenaltyPair pair(std::size_t k) const { return {lambda1_values[cells[k].i1], lambda2_values[cells[k].i2]}; }
};

inline std::vector<double> log_sequence(double top, index_t count, double eps_ratio)
{
    std::vector<double> v(static_cast<std::size_t>(count));
    if (count == 1) {
        v[0] = top;
        return v;
    }
    const double step = std::log(eps_ratio) / static_cast<double>(count - 1);
    for (index_t k = 0; k < count; ++k) v[k] = top * std::exp(step * static_cast<double>(k));
    return v;
}

/// Grid from an explicit top value (degenerate zero tops fall back to 1).
inline PenaltyGrid make_grid(double top, index_t n1, index_t n2, double eps_ratio)
{
    if (n1 < 1 || n2 < 1) throw value_error("grid: sizes must be >= 1");
    if (!(eps_ratio > 0.0 && eps_ratio < 1.0)) throw value_error("grid: eps_ratio must lie in (0, 1)");
    PenaltyGrid grid;
    grid.lambda_max = top;
    const double base = top > 0.0 ? top : 1.0;
    grid.lambda1_values = log_sequence(base, n1, eps_ratio);
    grid.lambda2_values = log_sequence(base, n2, eps_ratio);
    grid.cells.reserve(static_cast<std::size_t>(n1 * n2));
    for (index_t i = 0; i < n1; ++i) {
        for (index_t j = 0; j < n2; ++j) {
            GridCell c{i, j, -1};
            if (j > 0) c.predecessor = static_cast<long>(grid.cells.size()) - 1;
            else if (i > 0) c.predecessor = static_cast<long>((i - 1) * n2);
            grid.cells.push_back(c);
        }
    }
    return grid;
}

inline PenaltyGrid build_grid(const Dataset& ds, index_t n1 = 30, index_t n2 = 30, double eps_ratio = 0.01)
{
    return make_grid(lambda_max(ds), n1, n2, eps_ratio);
}

/// Coefficients with only the nonzero blocks kept.
struct SparseCoefficients
{
    double beta0 = 0.0;
    double beta_e = 0.0;
    std::vector<index_t> index;
    std::vector<double> beta_g;
    std::vector<double> beta_gxe;

    static SparseCoefficients from_dense(const Coefficients& c, double threshold = 0.0)
    {
        SparseCoefficients s;
        s.beta0 = c.beta0;
        s.beta_e = c.beta_e;
        for (index_t i = 0; i < c.p(); ++i) {
            const double b = c.beta_g(i), t = c.beta_gxe[i];
            if (std::abs(b) > threshold || std::abs(t) > threshold) {
                s.index.push_back(i);
                s.beta_g.push_back(b);
                s.beta_gxe.push_back(t);
            }
        }
        return s;
    }

    Coefficients to_dense(index_t p) const
    {
        Coefficients c = Coefficients::zeros(p);
        c.beta0 = beta0;
        c.beta_e = beta_e;
        for (std::size_t k = 0; k < index.size(); ++k) c.set_block(index[k], beta_g[k], beta_gxe[k]);
        return c;
    }

    /// Prediction for one row of a dataset with the same columns.
    double predict_row(const Dataset& ds, index_t row) const
    {
        const double e = ds.e()[row];
        double eta = beta0 + beta_e * e;
        for (std::size_t k = 0; k < index.size(); ++k) {
            const double g = ds.g()(row, index[k]);
            eta += g * (beta_g[k] + beta_gxe[k] * e);
        }
        return eta;
    }

    index_t count_gxe(double threshold) const
    {
        return static_cast<index_t>(std::count_if(beta_gxe.begin(), beta_gxe.end(),
                                                   [&](double t) { return std::abs(t) > threshold; }));
    }
};

struct PathCell
{
    PenaltyPair pen;
    SparseCoefficients coef;
    FitMeta meta;
};

struct PathResult
{
    std::vector<PathCell> cells; ///< in grid traversal order
    index_t max_ws_size() const
    {
        index_t m = 0;
        for (const auto& c : cells) m = std::max(m, c.meta.ws_size_max);
        return m;
    }
    bool all_converged() const
    {
        return std::all_of(cells.begin(), cells.end(), [](const PathCell& c) { return c.meta.converged; });
    }
};

/// Warm-started fits over every grid cell.
inline PathResult fit_path(const Dataset& ds, const PenaltyGrid& grid, const SolverConfig& cfg)
{
    PathResult out;
    out.cells.resize(grid.size());
    Coefficients prev;
    Coefficients row_start;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const GridCell& cell = grid.cells[k];
        const Coefficients* warm = nullptr;
        if (cell.predecessor >= 0) {
            // predecessor is either the previous cell or the first cell of the previous row
            warm = (static_cast<std::size_t>(cell.predecessor) == k - 1) ? &prev : &row_start;
        }
        FitResult r = fit(ds, grid.pair(k), cfg, warm);
        out.cells[k] = PathCell{r.pen, SparseCoefficients::from_dense(r.coefficients), std::move(r.meta)};
        prev = std::move(r.coefficients);
        if (cell.i2 == 0) row_start = prev;
    }
    return out;
}

struct FoldSummary
{
    index_t n_train = 0;
    index_t n_test = 0;
    index_t non_converged = 0;
};

struct CvResult
{
    std::vector<double> mean_loss;               ///< per cell
    std::vector<double> se_loss;                 ///< per cell
    std::vector<std::vector<double>> fold_loss;  ///< [fold][cell]
    std::vector<FoldSummary> folds;
    std::vector<int> fold_of;                    ///< fold index of every row
    std::size_t best_cell = 0;
    PenaltyPair best_pair;
};

/// Fold label of every row from a seeded shuffle; fold sizes differ by at most one.
inline std::vector<int> assign_folds(index_t n, int k, std::uint64_t seed)
{
    if (k < 2 || k > n) throw value_error("cross-validation: folds must satisfy 2 <= k <= n");
    std::vector<index_t> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), index_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> fold_of(static_cast<std::size_t>(n));
    for (index_t j = 0; j < n; ++j) fold_of[perm[j]] = static_cast<int>(j % k);
    return fold_of;
}

/// Cell with the smallest mean loss; ties go to larger lambda1, then larger lambda2.
inline std::size_t select_best_cell(const PenaltyGrid& grid, const std::vector<double>& mean_loss)
{
    std::size_t best = 0;
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const auto& a = grid.cells[k];
        const auto& b = grid.cells[best];
        const double la = mean_loss[k], lb = mean_loss[best];
        if (la < lb || (la == lb && (a.i1 < b.i1 || (a.i1 == b.i1 && a.i2 < b.i2)))) best = k;
    }
    return best;
}

/// Cross-validation with an explicit fold label per row (labels 0 .. k-1, all present).
inline CvResult cross_validate_folds(const Dataset& ds, const PenaltyGrid& grid, const std::vector<int>& fold_of,
                                     const SolverConfig& cfg)
{
    if (static_cast<index_t>(fold_of.size()) != ds.n()) throw dimension_error("fold labels must cover every row");
    const int k = fold_of.empty() ? 0 : *std::max_element(fold_of.begin(), fold_of.end()) + 1;
    if (k < 2) throw value_error("cross-validation needs at least two folds");
    CvResult out;
    out.fold_of = fold_of;
    out.fold_loss.assign(k, std::vector<double>(grid.size(), 0.0));
    out.folds.resize(k);
    parallel_for(static_cast<std::size_t>(k), [&](std::size_t f) {
        std::vector<index_t> train, test;
        for (index_t r = 0; r < ds.n(); ++r) (fold_of[r] == static_cast<int>(f) ? test : train).push_back(r);
        if (test.empty() || train.empty()) throw value_error("cross-validation: empty fold");
        const Dataset train_ds = ds.subset_rows(train);
        const PathResult path = fit_path(train_ds, grid, cfg);
        FoldSummary& fs = out.folds[f];
        fs.n_train = static_cast<index_t>(train.size());
        fs.n_test = static_cast<index_t>(test.size());
        for (std::size_t c = 0; c < grid.size(); ++c) {
            if (!path.cells[c].meta.converged) ++fs.non_converged;
            double sse = 0.0;
            for (const index_t r : test) {
                const double res = ds.y()[r] - path.cells[c].coef.predict_row(ds, r);
                sse += res * res;
            }
            out.fold_loss[f][c] = sse / static_cast<double>(test.size());
        }
    });
    out.mean_loss.assign(grid.size(), 0.0);
    out.se_loss.assign(grid.size(), 0.0);
    for (std::size_t c = 0; c < grid.size(); ++c) {
        double s = 0.0;
        for (int f = 0; f < k; ++f) s += out.fold_loss[f][c];
        const double mean = s / k;
        double ss = 0.0;
        for (int f = 0; f < k; ++f) ss += (out.fold_loss[f][c] - mean) * (out.fold_loss[f][c] - mean);
        out.mean_loss[c] = mean;
        out.se_loss[c] = std::sqrt(ss / (k - 1)) / std::sqrt(static_cast<double>(k));
    }
    out.best_cell = select_best_cell(grid, out.mean_loss);
    out.best_pair = grid.pair(out.best_cell);
    return out;
}

inline CvResult cross_validate(const Dataset& ds, const PenaltyGrid& grid, int k, const SolverConfig& cfg,
                               std::uint64_t seed)
{
    return cross_validate_folds(ds, grid, assign_folds(ds.n(), k, seed), cfg);
}

struct SelectionRates
{
    vec_t rate_g;                      ///< main effects
    vec_t rate_gxe;                    ///< interactions
    std::vector<index_t> rank_g;       ///< 1 = most frequently selected
    std::vector<index_t> rank_gxe;
    std::vector<std::size_t> best_cells;
    int runs = 0;
};

/// Rank 1 for the largest value; ties keep index order.
inline std::vector<index_t> rank_descending(const vec_t& v)
{
    std::vector<index_t> order(static_cast<std::size_t>(v.size()));
    std::iota(order.begin(), order.end(), index_t{0});
    std::stable_sort(order.begin(), order.end(), [&](index_t a, index_t b) { return v[a] > v[b]; });
    std::vector<index_t> rank(order.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) rank[order[pos]] = static_cast<index_t>(pos + 1);
    return rank;
}

/// Per-run fold seeds derived from the master seed.
inline std::vector<std::uint64_t> run_seeds(std::uint64_t seed, int runs)
{
    std::mt19937_64 master(seed);
    std::vector<std::uint64_t> s(static_cast<std::size_t>(runs));
    for (auto& v : s) v = master();
    return s;
}

/**
 * Repeated cross-validation: each run draws new folds, picks the cell with the
 * minimum CV loss, and counts which coefficients are nonzero (|beta| > 1e-8)
 * in the full-data fit at that cell.
 */
inline SelectionRates selection_rates(const Dataset& ds, const PenaltyGrid& grid, int k, int runs,
                                      const SolverConfig& cfg, std::uint64_t seed)
{
    if (runs < 1) throw value_error("selection_rates: runs must be >= 1");
    constexpr double threshold = 1e-8;
    const PathResult full = fit_path(ds, grid, cfg);
    SelectionRates out;
    out.runs = runs;
    out.rate_g = vec_t::Zero(ds.p());
    out.rate_gxe = vec_t::Zero(ds.p());
    for (const std::uint64_t s : run_seeds(seed, runs)) {
        const CvResult cv = cross_validate(ds, grid, k, cfg, s);
        out.best_cells.push_back(cv.best_cell);
        const auto& coef = full.cells[cv.best_cell].coef;
        for (std::size_t j = 0; j < coef.index.size(); ++j) {
            if (std::abs(coef.beta_g[j]) > threshold) out.rate_g[coef.index[j]] += 1.0;
            if (std::abs(coef.beta_gxe[j]) > threshold) out.rate_gxe[coef.index[j]] += 1.0;
        }
    }
    out.rate_g /= static_cast<double>(runs);
    out.rate_gxe /= static_cast<double>(runs);
    out.rank_g = rank_descending(out.rate_g);
    out.rank_gxe = rank_descending(out.rate_gxe);
    return out;
}

/// Warm-started lasso fits along a descending lambda sequence.
inline std::vector<LassoFitResult> fit_lasso_path(const Dataset& ds, const std::vector<double>& lambdas,
                                                  const SolverConfig& cfg)
{
    std::vector<LassoFitResult> out;
    out.reserve(lambdas.size());
    for (const double lam : lambdas) out.push_back(solve_lasso_baseline(ds, lam, cfg, out.empty() ? nullptr : &out.back()));
    return out;
}

} // namespace gesso
