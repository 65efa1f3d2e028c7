#pragma once
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>
#include <Eigen/Core>
#include <gesso/error.hpp>

namespace gesso {

using index_t = Eigen::Index;
using vec_t = Eigen::VectorXd;
using mat_t = Eigen::MatrixXd;

/**
 * Untransformed problem data as read from disk or produced by the simulator.
 * g is n x p, y and e have length n.
 */
struct RawData
{
    vec_t y;
    vec_t e;
    mat_t g;

    index_t n() const { return y.size(); }
    index_t p() const { return g.cols(); }
};

struct DatasetOptions
{
    /// center y; center G and scale its columns to unit norm; center E.
    bool standardize = true;
    /// store the n x p interaction matrix instead of forming G_i * E on the fly.
    bool materialize_gxe = false;
};

/**
 * Immutable problem data for the hierarchical G x E lasso.
 *
 * Interaction column i is the elementwise product G_i * E. It is never stored
 * unless materialization was requested; every kernel below forms it inside the
 * same pass that reads G_i.
 *
 * Safe for concurrent read-only use.
 */
class Dataset
{
public:
    Dataset() = default;

    static Dataset from_raw(const RawData& raw, const DatasetOptions& opts = {})
    {
        validate(raw);
        Dataset ds;
        ds.y_ = raw.y;
        ds.e_ = raw.e;
        ds.g_ = raw.g;
        ds.standardized_ = opts.standardize;
        const index_t p = raw.p();
        ds.g_center_ = vec_t::Zero(p);
        ds.g_scale_ = vec_t::Ones(p);
        if (opts.standardize) {
            ds.y_center_ = ds.y_.mean();
            ds.y_.array() -= ds.y_center_;
            ds.e_center_ = ds.e_.mean();
            const double e_raw_norm = ds.e_.norm();
            ds.e_.array() -= ds.e_center_;
            if (ds.e_.norm() <= 1e-12 * std::max(1.0, e_raw_norm)) ds.e_.setZero();
            for (index_t i = 0; i < p; ++i) {
                auto col = ds.g_.col(i);
                const double raw_norm = col.norm();
                const double mu = col.mean();
                col.array() -= mu;
                const double nrm = col.norm();
                ds.g_center_[i] = mu;
                if (nrm <= 1e-12 * std::max(1.0, raw_norm)) {
                    col.setZero();
                } else {
                    col /= nrm;
                    ds.g_scale_[i] = nrm;
                }
            }
        }
        ds.finalize(opts.materialize_gxe);
        return ds;
    }

    /// Rows of this (already transformed) dataset as a new dataset; no further standardization.
    Dataset subset_rows(std::span<const index_t> rows) const
    {
        const index_t m = static_cast<index_t>(rows.size());
        Dataset ds;
        ds.y_.resize(m);
        ds.e_.resize(m);
        ds.g_.resize(m, p());
        for (index_t k = 0; k < m; ++k) {
            const index_t r = rows[k];
            if (r < 0 || r >= n()) throw dimension_error("subset_rows: row index out of range");
            ds.y_[k] = y_[r];
            ds.e_[k] = e_[r];
        }
        for (index_t j = 0; j < p(); ++j) {
            for (index_t k = 0; k < m; ++k) ds.g_(k, j) = g_(rows[k], j);
        }
        ds.standardized_ = standardized_;
        ds.g_center_ = g_center_;
        ds.g_scale_ = g_scale_;
        ds.y_center_ = y_center_;
        ds.e_center_ = e_center_;
        ds.finalize(gxe_.has_value());
        return ds;
    }

    /// Same columns in a different order: column j of the result is column perm[j] of this one.
    Dataset permute_columns(std::span<const index_t> perm) const
    {
        if (static_cast<index_t>(perm.size()) != p()) throw dimension_error("permute_columns: size mismatch");
        Dataset ds = *this;
        for (index_t j = 0; j < p(); ++j) {
            ds.g_.col(j) = g_.col(perm[j]);
            ds.g_center_[j] = g_center_[perm[j]];
            ds.g_scale_[j] = g_scale_[perm[j]];
        }
        ds.finalize(gxe_.has_value());
        return ds;
    }

    index_t n() const { return y_.size(); }
    index_t p() const { return g_.cols(); }

    const vec_t& y() const { return y_; }
    const vec_t& e() const { return e_; }
    const mat_t& g() const { return g_; }
    bool standardized() const { return standardized_; }
    bool materialized() const { return gxe_.has_value(); }

    const vec_t& col_norm_g() const { return norm_g_; }
    const vec_t& col_norm_gxe() const { return norm_gxe_; }
    double sq_norm_g(index_t i) const { return sq_g_[i]; }
    double sq_norm_gxe(index_t i) const { return sq_gxe_[i]; }
    /// G_i^T (G_i * E)
    double cross(index_t i) const { return cross_[i]; }
    /// Both columns of block i vanish; its coefficients are pinned to zero.
    bool is_null_block(index_t i) const { return norm_g_[i] == 0.0 && norm_gxe_[i] == 0.0; }

    const vec_t& g_center() const { return g_center_; }
    const vec_t& g_scale() const { return g_scale_; }
    double y_center() const { return y_center_; }
    double e_center() const { return e_center_; }

    vec_t gxe_column(index_t i) const
    {
        if (gxe_) return gxe_->col(i);
        return g_.col(i).cwiseProduct(e_);
    }

    /// (G_i^T v, (G_i * E)^T v) in one pass.
    std::pair<double, double> dot_pair(index_t i, const vec_t& v) const
    {
        const double* gi = g_.col(i).data();
        const double* vp = v.data();
        double s1 = 0.0, s2 = 0.0;
        const index_t n_ = n();
        if (gxe_) {
            const double* zi = gxe_->col(i).data();
            for (index_t k = 0; k < n_; ++k) {
                s1 += gi[k] * vp[k];
                s2 += zi[k] * vp[k];
            }
        } else {
            const double* ep = e_.data();
            for (index_t k = 0; k < n_; ++k) {
                const double gv = gi[k] * vp[k];
                s1 += gv;
                s2 += gv * ep[k];
            }
        }
        return {s1, s2};
    }

    /// r -= G_i * db + (G_i * E) * dt
    void sub_pair(index_t i, double db, double dt, vec_t& r) const
    {
        if (db == 0.0 && dt == 0.0) return;
        const double* gi = g_.col(i).data();
        double* rp = r.data();
        const index_t n_ = n();
        if (gxe_) {
            const double* zi = gxe_->col(i).data();
            for (index_t k = 0; k < n_; ++k) rp[k] -= gi[k] * db + zi[k] * dt;
        } else {
            const double* ep = e_.data();
            for (index_t k = 0; k < n_; ++k) rp[k] -= gi[k] * (db + ep[k] * dt);
        }
    }

    /**
     * Least-squares coefficients (intercept, exposure) of v on [1, E].
     * A zero or constant exposure gets coefficient 0.
     */
    std::pair<double, double> unpenalized_ls(const vec_t& v) const
    {
        const double nn = static_cast<double>(n());
        const double sv = v.sum();
        const double ev = e_.dot(v);
        if (!exposure_identifiable_) return {sv / nn, 0.0};
        const double det = nn * sq_e_ - sum_e_ * sum_e_;
        const double b0 = (sq_e_ * sv - sum_e_ * ev) / det;
        const double be = (nn * ev - sum_e_ * sv) / det;
        return {b0, be};
    }

    /// v minus its projection onto span{1, E}.
    void project_out_unpenalized(vec_t& v) const
    {
        const auto [b0, be] = unpenalized_ls(v);
        v.array() -= b0;
        if (be != 0.0) v -= be * e_;
    }

    bool exposure_identifiable() const { return exposure_identifiable_; }

private:
    static void validate(const RawData& raw)
    {
        const index_t n = raw.y.size();
        if (n < 1) throw dimension_error("dataset: need at least one observation");
        if (raw.e.size() != n) {
            throw dimension_error("dataset: exposure length " + std::to_string(raw.e.size()) +
                                  " != outcome length " + std::to_string(n));
        }
        if (raw.g.rows() != n) {
            throw dimension_error("dataset: G has " + std::to_string(raw.g.rows()) +
                                  " rows, expected " + std::to_string(n));
        }
        if (raw.g.cols() < 1) throw dimension_error("dataset: G needs at least one column");
        if (!raw.y.allFinite()) throw value_error("dataset: non-finite outcome value");
        if (!raw.e.allFinite()) throw value_error("dataset: non-finite exposure value");
        if (!raw.g.allFinite()) throw value_error("dataset: non-finite genotype value");
    }

    void finalize(bool materialize)
    {
        const index_t p_ = p();
        sum_e_ = e_.sum();
        sq_e_ = e_.squaredNorm();
        const double nn = static_cast<double>(n());
        const double det = nn * sq_e_ - sum_e_ * sum_e_;
        exposure_identifiable_ = sq_e_ > 0.0 && det > 1e-12 * nn * sq_e_;
        if (materialize) {
            gxe_ = g_.array().colwise() * e_.array();
        } else {
            gxe_.reset();
        }
        norm_g_.resize(p_);
        norm_gxe_.resize(p_);
        sq_g_.resize(p_);
        sq_gxe_.resize(p_);
        cross_.resize(p_);
        for (index_t i = 0; i < p_; ++i) {
            const auto gi = g_.col(i);
            double sg = 0.0, sz = 0.0, c = 0.0;
            for (index_t k = 0; k < n(); ++k) {
                const double z = gi[k] * e_[k];
                sg += gi[k] * gi[k];
                sz += z * z;
                c += gi[k] * z;
            }
            sq_g_[i] = sg;
            sq_gxe_[i] = sz;
            cross_[i] = c;
            norm_g_[i] = std::sqrt(sg);
            norm_gxe_[i] = std::sqrt(sz);
        }
    }

    vec_t y_;
    vec_t e_;
    mat_t g_;
    std::optional<mat_t> gxe_;
    bool standardized_ = false;

    vec_t norm_g_, norm_gxe_, sq_g_, sq_gxe_, cross_;
    double sum_e_ = 0.0;
    double sq_e_ = 0.0;
    bool exposure_identifiable_ = false;

    vec_t g_center_, g_scale_;
    double y_center_ = 0.0;
    double e_center_ = 0.0;
};

} // namespace gesso
