#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "knnbandit/core.hpp"

namespace knnbandit {

// Ridge regression on intercept-augmented contexts, with incremental
// gram/moment accumulation so LinUCB runs never refit from scratch.
//
// The L2 penalty applies to the feature weights only, never the intercept;
// regularizing the intercept would make the constant-offset rewards of the
// bandit scenarios unrepresentable as alpha grows.
class RidgeModel {
public:
    RidgeModel() = default;
    RidgeModel(int context_dim, double l2_alpha)
        : dim_(context_dim),
          l2_alpha_(l2_alpha),
          gram_(Eigen::MatrixXd::Zero(context_dim + 1, context_dim + 1)),
          moment_(Eigen::VectorXd::Zero(context_dim + 1)) {
        if (context_dim < 1) throw validation_error("RidgeModel context_dim must be >= 1");
        if (l2_alpha < 0.0) throw validation_error("l2_alpha must be nonnegative");
        for (int j = 0; j < dim_; ++j) gram_(j, j) = l2_alpha_;
    }

    int context_dim() const { return dim_; }
    double l2_alpha() const { return l2_alpha_; }
    std::size_t observation_count() const { return count_; }
    const Eigen::MatrixXd& gram() const { return gram_; }
    const Eigen::VectorXd& moment() const { return moment_; }

    void add_observation(const ContextPoint& x, double reward) {
        const Eigen::VectorXd f = features(x);
        gram_.noalias() += f * f.transpose();
        moment_ += reward * f;
        ++count_;
        if (inverse_fresh_) {
            // Sherman-Morrison rank-1 update of the cached inverse; refreshed
            // from scratch periodically to cap numeric drift.
            if (++updates_since_refresh_ >= kRefreshInterval) {
                inverse_fresh_ = false;
            } else {
                const Eigen::VectorXd u = inverse_ * f;
                inverse_.noalias() -= (u * u.transpose()) / (1.0 + f.dot(u));
            }
        }
        weights_fresh_ = false;
    }

    // Weight vector solving the regularized normal equations; last entry is
    // the intercept.
    const Eigen::VectorXd& weights() const {
        if (!weights_fresh_) {
            weights_ = gram_inverse() * moment_;
            weights_fresh_ = true;
        }
        return weights_;
    }

    double predict(const ContextPoint& x) const { return weights().dot(features(x)); }

    // LinUCB exploration term sqrt(f' G^-1 f).
    double exploration_width(const ContextPoint& x) const {
        const Eigen::VectorXd f = features(x);
        const double q = f.dot(gram_inverse() * f);
        return std::sqrt(std::max(q, 0.0));
    }

    Eigen::VectorXd features(const ContextPoint& x) const {
        if (x.dim() != dim_) {
            throw validation_error("context dimension " + std::to_string(x.dim()) +
                                   " does not match model dimension " + std::to_string(dim_));
        }
        Eigen::VectorXd f(dim_ + 1);
        for (int j = 0; j < dim_; ++j) f[j] = x[j];
        f[dim_] = 1.0;
        return f;
    }

private:
    static constexpr int kRefreshInterval = 512;

    int dim_ = 0;
    double l2_alpha_ = 0.0;
    Eigen::MatrixXd gram_;
    Eigen::VectorXd moment_;
    std::size_t count_ = 0;

    mutable Eigen::MatrixXd inverse_;
    mutable bool inverse_fresh_ = false;
    mutable int updates_since_refresh_ = 0;
    mutable Eigen::VectorXd weights_;
    mutable bool weights_fresh_ = false;

    const Eigen::MatrixXd& gram_inverse() const {
        if (!inverse_fresh_) {
            Eigen::LDLT<Eigen::MatrixXd> ldlt(gram_);
            const double pivot_floor =
                gram_.diagonal().cwiseAbs().maxCoeff() * 1e-12 * (dim_ + 1);
            if (ldlt.info() != Eigen::Success ||
                ldlt.vectorD().cwiseAbs().minCoeff() <= pivot_floor) {
                throw validation_error(
                    "gram matrix is rank deficient; add observations or use l2_alpha > 0");
            }
            inverse_ = ldlt.solve(Eigen::MatrixXd::Identity(dim_ + 1, dim_ + 1));
            inverse_fresh_ = true;
            updates_since_refresh_ = 0;
        }
        return inverse_;
    }
};

inline RidgeModel ridge_fit(const std::vector<ContextPoint>& contexts,
                            const std::vector<double>& rewards, double l2_alpha) {
    if (contexts.empty()) throw validation_error("ridge_fit requires at least one observation");
    if (contexts.size() != rewards.size()) {
        throw validation_error("ridge_fit: contexts and rewards differ in length");
    }
    RidgeModel model(contexts.front().dim(), l2_alpha);
    for (std::size_t i = 0; i < contexts.size(); ++i) {
        model.add_observation(contexts[i], rewards[i]);
    }
    model.weights();  // force the solve so rank deficiency surfaces here
    return model;
}

// Disjoint LinUCB decision: argmax of predict(x) + confidence * width(x),
// ties going to the lowest arm index.
inline int linucb_decide(const std::vector<RidgeModel>& models, const ContextPoint& x,
                         double confidence) {
    if (models.empty()) throw validation_error("linucb_decide requires at least one model");
    if (confidence < 0.0) throw validation_error("confidence must be nonnegative");
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < models.size(); ++i) {
        double score = models[i].predict(x);
        if (confidence > 0.0) score += confidence * models[i].exploration_width(x);
        if (score > best_score) {
            best_score = score;
            best = static_cast<int>(i);
        }
    }
    return best;
}

}  // namespace knnbandit
