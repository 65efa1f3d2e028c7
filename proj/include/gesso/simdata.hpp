#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>
#include <gesso/dataset.hpp>
#include <gesso/tuning.hpp>

namespace gesso {

enum class SimMode
{
    strong_hierarchical,
    hierarchical,
    anti_hierarchical,
};

inline std::string to_string(SimMode m)
{
    switch (m) {
        case SimMode::strong_hierarchical: return "strong_hierarchical";
        case SimMode::hierarchical: return "hierarchical";
        case SimMode::anti_hierarchical: return "anti_hierarchical";
    }
    return "unknown";
}

inline SimMode parse_sim_mode(const std::string& s)
{
    if (s == "strong_hierarchical") return SimMode::strong_hierarchical;
    if (s == "hierarchical") return SimMode::hierarchical;
    if (s == "anti_hierarchical") return SimMode::anti_hierarchical;
    throw value_error("unknown simulation mode '" + s + "'");
}

enum class GenotypeModel
{
    normal,   ///< i.i.d. standard normal entries
    binomial, ///< Binomial(2, maf) allele counts
};

struct SimSpec
{
    index_t n = 100;
    index_t p = 2500;
    index_t p_g = 10;
    index_t p_gxe = 5;
    SimMode mode = SimMode::strong_hierarchical;
    /// Magnitudes; unset means the mode default (3 / 1.5, or 0.75 / 1.5 in hierarchical mode).
    std::optional<double> beta_g_mag;
    std::optional<double> beta_gxe_mag;
    double beta_e = 1.0;
    double e_prevalence = 0.3;
    double target_snr = 2.0;
    GenotypeModel genotype = GenotypeModel::normal;
    double maf = 0.3;
    std::uint64_t seed = 1;

    double main_magnitude() const
    {
        if (beta_g_mag) return *beta_g_mag;
        return mode == SimMode::hierarchical ? 0.75 : 3.0;
    }
    double interaction_magnitude() const { return beta_gxe_mag ? *beta_gxe_mag : 1.5; }

    void validate() const
    {
        if (n < 2 || p < 1) throw value_error("simulate: need n >= 2 and p >= 1");
        if (p_g < 0 || p_gxe < 0) throw value_error("simulate: support sizes must be non-negative");
        if (p_g > p) throw value_error("simulate: p_g exceeds p");
        if (mode == SimMode::anti_hierarchical) {
            if (p_g + p_gxe > p) throw value_error("simulate: anti-hierarchical mode needs p_g + p_gxe <= p");
        } else if (p_gxe > p_g) {
            throw value_error("simulate: hierarchical modes need p_gxe <= p_g");
        }
        if (!(e_prevalence > 0.0 && e_prevalence < 1.0)) throw value_error("simulate: prevalence must lie in (0, 1)");
        if (!(target_snr > 0.0) || !std::isfinite(target_snr)) throw value_error("simulate: target_snr must be positive");
        if (genotype == GenotypeModel::binomial && !(maf > 0.0 && maf < 1.0)) throw value_error("simulate: maf in (0, 1)");
        if (mode == SimMode::strong_hierarchical && interaction_magnitude() > main_magnitude()) {
            throw value_error("simulate: strong_hierarchical mode needs |beta_gxe| <= |beta_g|");
        }
        if (mode == SimMode::hierarchical && main_magnitude() > interaction_magnitude()) {
            throw value_error("simulate: hierarchical mode needs |beta_g| <= |beta_gxe|");
        }
    }
};

struct SimTruth
{
    std::vector<index_t> main_support;        ///< sorted
    std::vector<index_t> interaction_support; ///< sorted
    vec_t beta_g;
    vec_t beta_gxe;
    double beta0 = 0.0;
    double beta_e = 0.0;
    double noise_variance = 0.0;
    double realized_snr = 0.0;
    SimMode mode = SimMode::strong_hierarchical;
};

struct SimData
{
    RawData data;
    SimTruth truth;
};

inline double sample_variance(const vec_t& v)
{
    if (v.size() < 2) return 0.0;
    const double mu = v.mean();
    return (v.array() - mu).square().sum() / static_cast<double>(v.size() - 1);
}

/**
 * Draws G, a binary exposure E and Y = G b_G + E b_E + (G E) b_GxE + noise.
 * Nonzero effects share one magnitude with random signs. The noise vector is
 * rescaled so that var(interaction signal) / var(noise) equals target_snr in
 * the sample.
 */
inline SimData simulate(const SimSpec& spec)
{
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::bernoulli_distribution exposure(spec.e_prevalence);
    std::bernoulli_distribution coin(0.5);
    std::binomial_distribution<int> allele(2, spec.maf);

    const index_t n = spec.n, p = spec.p;
    SimData out;
    RawData& d = out.data;
    d.g.resize(n, p);
    for (index_t j = 0; j < p; ++j) {
        for (index_t i = 0; i < n; ++i) {
            d.g(i, j) = spec.genotype == GenotypeModel::normal ? normal(rng) : static_cast<double>(allele(rng));
        }
    }
    d.e.resize(n);
    for (index_t i = 0; i < n; ++i) d.e[i] = exposure(rng) ? 1.0 : 0.0;

    std::vector<index_t> cols(static_cast<std::size_t>(p));
    std::iota(cols.begin(), cols.end(), index_t{0});
    std::shuffle(cols.begin(), cols.end(), rng);

    SimTruth& truth = out.truth;
    truth.mode = spec.mode;
    truth.beta_e = spec.beta_e;
    truth.main_support.assign(cols.begin(), cols.begin() + spec.p_g);
    if (spec.mode == SimMode::anti_hierarchical) {
        truth.interaction_support.assign(cols.begin() + spec.p_g, cols.begin() + spec.p_g + spec.p_gxe);
    } else {
        truth.interaction_support.assign(cols.begin(), cols.begin() + spec.p_gxe);
    }
    std::sort(truth.main_support.begin(), truth.main_support.end());
    std::sort(truth.interaction_support.begin(), truth.interaction_support.end());

    auto sign = [&] { return coin(rng) ? 1.0 : -1.0; };
    truth.beta_g = vec_t::Zero(p);
    truth.beta_gxe = vec_t::Zero(p);
    for (const index_t j : truth.main_support) truth.beta_g[j] = sign() * spec.main_magnitude();
    for (const index_t j : truth.interaction_support) truth.beta_gxe[j] = sign() * spec.interaction_magnitude();

    const vec_t interaction_signal = (d.g * truth.beta_gxe).cwiseProduct(d.e);
    const vec_t signal = d.g * truth.beta_g + spec.beta_e * d.e + interaction_signal;

    vec_t noise(n);
    for (index_t i = 0; i < n; ++i) noise[i] = normal(rng);
    const double v_int = sample_variance(interaction_signal);
    const double v_noise = sample_variance(noise);
    if (v_int > 0.0 && v_noise > 0.0) {
        noise *= std::sqrt(v_int / spec.target_snr / v_noise);
        truth.realized_snr = v_int / sample_variance(noise);
    }
    truth.noise_variance = sample_variance(noise);
    d.y = signal + noise;
    return out;
}

/**
 * Order in which interactions are discovered along a sequence of fits.
 * Fits are visited by increasing number of selected interactions (ties in the
 * given order); an interaction enters at the first visited fit where it is
 * nonzero, and interactions entering together are ordered by decreasing
 * magnitude there.
 */
inline std::vector<index_t> interaction_entry_order(const std::vector<SparseCoefficients>& fits, index_t p,
                                                    double threshold = 1e-8)
{
    std::vector<std::size_t> visit(fits.size());
    std::iota(visit.begin(), visit.end(), std::size_t{0});
    std::vector<index_t> counts(fits.size());
    for (std::size_t k = 0; k < fits.size(); ++k) counts[k] = fits[k].count_gxe(threshold);
    std::stable_sort(visit.begin(), visit.end(), [&](std::size_t a, std::size_t b) { return counts[a] < counts[b]; });

    std::vector<char> seen(static_cast<std::size_t>(p), 0);
    std::vector<index_t> order;
    for (const std::size_t k : visit) {
        std::vector<std::pair<double, index_t>> entering;
        const auto& f = fits[k];
        for (std::size_t j = 0; j < f.index.size(); ++j) {
            const index_t i = f.index[j];
            if (std::abs(f.beta_gxe[j]) > threshold && !seen[i]) entering.emplace_back(std::abs(f.beta_gxe[j]), i);
        }
        std::sort(entering.begin(), entering.end(), [](const auto& a, const auto& b) {
            return a.first > b.first || (a.first == b.first && a.second < b.second);
        });
        for (const auto& [mag, i] : entering) {
            seen[i] = 1;
            order.push_back(i);
        }
    }
    return order;
}

/// Interactions ordered by decreasing |beta_gxe| in a single fit (zeros omitted).
inline std::vector<index_t> interaction_magnitude_order(const SparseCoefficients& fit, double threshold = 1e-8)
{
    std::vector<std::pair<double, index_t>> v;
    for (std::size_t j = 0; j < fit.index.size(); ++j) {
        if (std::abs(fit.beta_gxe[j]) > threshold) v.emplace_back(std::abs(fit.beta_gxe[j]), fit.index[j]);
    }
    std::sort(v.begin(), v.end(),
              [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    std::vector<index_t> out;
    for (const auto& [m, i] : v) out.push_back(i);
    return out;
}

struct SelectionMetrics
{
    double auc_gxe = 0.0;
    /// precision_at_k[k - 1] = true positives among the first k discoveries / k
    std::vector<double> precision_at_k;
    index_t discovered = 0;
};

/**
 * AUC and precision curve for a discovery ranking of interactions. Undiscovered
 * interactions share the lowest rank; ties count one half in the AUC.
 */
inline SelectionMetrics selection_metrics(const std::vector<index_t>& ranking, const SimTruth& truth, index_t p)
{
    std::vector<char> is_true(static_cast<std::size_t>(p), 0);
    for (const index_t i : truth.interaction_support) is_true[i] = 1;
    SelectionMetrics m;
    m.discovered = static_cast<index_t>(ranking.size());
    index_t tp = 0;
    for (std::size_t k = 0; k < ranking.size(); ++k) {
        tp += is_true[ranking[k]];
        m.precision_at_k.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    }
    // score = p - position for discovered, 0 for the rest
    std::vector<double> score(static_cast<std::size_t>(p), 0.0);
    for (std::size_t k = 0; k < ranking.size(); ++k) score[ranking[k]] = static_cast<double>(p - static_cast<index_t>(k));
    const index_t n_pos = static_cast<index_t>(truth.interaction_support.size());
    const index_t n_neg = p - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        m.auc_gxe = 0.5;
        return m;
    }
    // Mann-Whitney with average ranks
    std::vector<index_t> idx(static_cast<std::size_t>(p));
    std::iota(idx.begin(), idx.end(), index_t{0});
    std::sort(idx.begin(), idx.end(), [&](index_t a, index_t b) { return score[a] < score[b]; });
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && score[idx[j + 1]] == score[idx[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (is_true[idx[k]]) rank_sum_pos += avg_rank;
        }
        i = j + 1;
    }
    const double u = rank_sum_pos - static_cast<double>(n_pos) * static_cast<double>(n_pos + 1) / 2.0;
    m.auc_gxe = u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
    return m;
}

inline SelectionMetrics selection_metrics(const PathResult& path, const SimTruth& truth, index_t p)
{
    std::vector<SparseCoefficients> fits;
    fits.reserve(path.cells.size());
    for (const auto& c : path.cells) fits.push_back(c.coef);
    return selection_metrics(interaction_entry_order(fits, p), truth, p);
}

inline SelectionMetrics selection_metrics(const std::vector<LassoFitResult>& path, const SimTruth& truth, index_t p)
{
    std::vector<SparseCoefficients> fits;
    fits.reserve(path.size());
    for (const auto& f : path) {
        SparseCoefficients s;
        for (index_t i = 0; i < f.beta_gxe.size(); ++i) {
            if (f.beta_g[i] != 0.0 || f.beta_gxe[i] != 0.0) {
                s.index.push_back(i);
                s.beta_g.push_back(f.beta_g[i]);
                s.beta_gxe.push_back(f.beta_gxe[i]);
            }
        }
        fits.push_back(std::move(s));
    }
    return selection_metrics(interaction_entry_order(fits, p), truth, p);
}

} // namespace gesso
