#pragma once

#include <memory>
#include <vector>

#include "knnbandit/environments.hpp"
#include "knnbandit/knn.hpp"

namespace knnbandit {

// Compact box action set. The argmax over the continuum is realized as a
// fixed uniform candidate grid, regenerated identically for every decision,
// so runs stay reproducible and the discretization error is bounded by the
// grid spacing times the Lipschitz constant.
struct ActionSpace {
    int dim = 1;
    std::vector<double> lo{0.0};
    std::vector<double> hi{1.0};
    int candidate_count = 101;

    void validate() const {
        if (dim < 1) throw validation_error("action dimension must be >= 1");
        if (static_cast<int>(lo.size()) != dim || static_cast<int>(hi.size()) != dim) {
            throw validation_error("action bounds must have length dim");
        }
        for (int j = 0; j < dim; ++j) {
            if (!(lo[j] < hi[j])) throw validation_error("action bounds require lo < hi");
        }
        if (candidate_count < 1) throw validation_error("candidate_count must be >= 1");
    }

    // For dim 1 the grid has exactly candidate_count points; for higher
    // dimensions it is the product grid with the largest per-axis count m
    // satisfying m^dim <= candidate_count.
    std::vector<std::vector<double>> candidate_grid() const {
        validate();
        int per_axis = candidate_count;
        if (dim > 1) {
            per_axis = 1;
            while (std::pow(static_cast<double>(per_axis + 1), dim) <= candidate_count) {
                ++per_axis;
            }
        }
        std::vector<std::vector<double>> grid;
        std::vector<int> idx(dim, 0);
        while (true) {
            std::vector<double> a(dim);
            for (int j = 0; j < dim; ++j) {
                a[j] = per_axis == 1 ? 0.5 * (lo[j] + hi[j])
                                     : lo[j] + (hi[j] - lo[j]) * idx[j] / (per_axis - 1);
            }
            grid.push_back(std::move(a));
            int j = dim - 1;
            while (j >= 0 && ++idx[j] == per_axis) idx[j--] = 0;
            if (j < 0) break;
        }
        return grid;
    }

    std::vector<double> sample_uniform(Rng& rng) const {
        std::vector<double> a(dim);
        for (int j = 0; j < dim; ++j) {
            a[j] = std::uniform_real_distribution<double>(lo[j], hi[j])(rng);
        }
        return a;
    }
};

namespace detail {

inline ContextPoint concat(const ContextPoint& x, const std::vector<double>& a) {
    ContextPoint joint;
    joint.coords.reserve(x.coords.size() + a.size());
    joint.coords.insert(joint.coords.end(), x.coords.begin(), x.coords.end());
    joint.coords.insert(joint.coords.end(), a.begin(), a.end());
    return joint;
}

}  // namespace detail

// Single k-NN regressor over concatenated (context, action) samples of
// dimension D + D', with k = floor(n^(2/(2+D+D'))).
struct JointPolicyState {
    SpatialIndex joint;
    ActionSpace actions;
    int context_dim = 1;
    std::size_t warmup = 0;      // M
    double width_scale = 1.0;    // M1
    std::int64_t step = 0;

    JointPolicyState(int ctx_dim, ActionSpace space, std::size_t warmup_steps = 0,
                     double m1 = 1.0)
        : joint(ctx_dim + space.dim),
          actions(std::move(space)),
          context_dim(ctx_dim),
          warmup(warmup_steps),
          width_scale(m1) {
        actions.validate();
    }

    std::size_t k() const { return default_k(joint.size(), context_dim + actions.dim); }

    void record(const ContextPoint& x, const std::vector<double>& a, double reward) {
        joint.insert(detail::concat(x, a), reward);
        ++step;
    }
};

// Frozen policy for the infinite-armed setting: argmax of the joint k-NN
// estimate over the candidate grid, first candidate winning ties.
class JointPolicy {
public:
    explicit JointPolicy(std::shared_ptr<const JointPolicyState> state)
        : state_(std::move(state)), grid_(state_->actions.candidate_grid()) {}

    double estimate(const ContextPoint& x, const std::vector<double>& a) const {
        return knn_regress(state_->joint, detail::concat(x, a), state_->k()).value;
    }

    std::vector<double> decide(const ContextPoint& x) const {
        std::size_t best = 0;
        double best_value = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < grid_.size(); ++c) {
            const double v = estimate(x, grid_[c]);
            if (v > best_value) {
                best_value = v;
                best = c;
            }
        }
        return grid_[best];
    }

    const JointPolicyState& state() const { return *state_; }

private:
    std::shared_ptr<const JointPolicyState> state_;
    std::vector<std::vector<double>> grid_;
};

struct InfiniteRunResult {
    std::shared_ptr<JointPolicyState> state;
    std::vector<std::vector<double>> chosen_actions;
    std::vector<double> mean_rewards;  // true mean of each chosen action

    JointPolicy policy() const { return JointPolicy(state); }
};

// Uniform sampling over the action box for T steps, then a frozen greedy
// policy over the joint estimate.
inline InfiniteRunResult infinite_uniform_run(JointEnvironment& env, const ActionSpace& actions,
                                              std::int64_t horizon, std::uint64_t seed = 1) {
    if (horizon < 1) throw validation_error("horizon must be >= 1");
    auto state = std::make_shared<JointPolicyState>(env.context_dim(), actions);
    Rng rng = make_rng(seed, "actions");
    InfiniteRunResult out;
    for (std::int64_t t = 0; t < horizon; ++t) {
        ContextPoint x = env.next_context();
        std::vector<double> a = actions.sample_uniform(rng);
        const double reward = env.observe(x, a);
        out.mean_rewards.push_back(env.mean_reward(x, a));
        out.chosen_actions.push_back(a);
        state->record(x, a, reward);
    }
    out.state = std::move(state);
    return out;
}

// One UCB decision over the candidate grid. The width M1 * t^(-1/(2+D+D'))
// depends on the global time only, so it is constant across candidates and
// the decision reduces to the plain argmax of the estimate.
inline std::vector<double> infinite_ucb_step(const JointPolicyState& state,
                                             const ContextPoint& x) {
    if (state.joint.size() < state.warmup || state.joint.empty()) {
        throw validation_error("complete the " + std::to_string(state.warmup) +
                               "-step uniform warmup before UCB steps");
    }
    const auto grid = state.actions.candidate_grid();
    const std::size_t k = state.k();
    const double width =
        state.width_scale *
        std::pow(static_cast<double>(std::max<std::int64_t>(state.step, 1)),
                 -1.0 / (2.0 + state.context_dim + state.actions.dim));
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < grid.size(); ++c) {
        const double score =
            knn_regress(state.joint, detail::concat(x, grid[c]), k).value + width;
        if (score > best_score) {
            best_score = score;
            best = c;
        }
    }
    return grid[best];
}

// Infinite-armed UCB: M uniform warmup pulls, then grid-argmax UCB steps.
inline InfiniteRunResult run_infinite_ucb(JointEnvironment& env, const ActionSpace& actions,
                                          std::size_t warmup, double width_scale,
                                          std::int64_t horizon, std::uint64_t seed = 1) {
    if (horizon < 1) throw validation_error("horizon must be >= 1");
    if (warmup < 1 || static_cast<std::int64_t>(warmup) > horizon) {
        throw validation_error("warmup must be in [1, horizon]");
    }
    auto state = std::make_shared<JointPolicyState>(env.context_dim(), actions, warmup,
                                                    width_scale);
    Rng rng = make_rng(seed, "actions");
    InfiniteRunResult out;
    for (std::int64_t t = 0; t < horizon; ++t) {
        ContextPoint x = env.next_context();
        std::vector<double> a = t < static_cast<std::int64_t>(warmup)
                                    ? actions.sample_uniform(rng)
                                    : infinite_ucb_step(*state, x);
        const double reward = env.observe(x, a);
        out.mean_rewards.push_back(env.mean_reward(x, a));
        out.chosen_actions.push_back(a);
        state->record(x, a, reward);
    }
    out.state = std::move(state);
    return out;
}

}  // namespace knnbandit
