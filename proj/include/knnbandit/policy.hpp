#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "knnbandit/baselines.hpp"
#include "knnbandit/environments.hpp"
#include "knnbandit/knn.hpp"

namespace knnbandit {

// Full state of a running bandit policy: one history and one spatial index
// per arm. The index duplicates the history's contexts; the history is the
// record, the index the acceleration structure.
struct PolicyState {
    BanditConfig config;
    std::optional<std::size_t> k_override;
    std::vector<ArmHistory> histories;
    std::vector<SpatialIndex> indexes;
    std::int64_t step = 0;

    PolicyState(BanditConfig cfg, std::optional<std::size_t> k_over = std::nullopt)
        : config(cfg), k_override(k_over) {
        config.validate();
        histories.resize(config.num_arms);
        indexes.resize(config.num_arms, SpatialIndex(config.context_dim));
        for (int i = 0; i < config.num_arms; ++i) histories[i].arm = i;
    }

    std::size_t pulls(int arm) const { return histories[arm].pull_count(); }

    std::size_t k_for(int arm) const {
        const std::size_t n = pulls(arm);
        if (k_override) return std::min(*k_override, n);
        return default_k(n, config.effective_intrinsic_dim());
    }

    void record(int arm, const ContextPoint& x, double reward) {
        append_observation(histories[arm], Observation{x, reward, step});
        indexes[arm].insert(x, reward);
        ++step;
    }
};

// A frozen context-to-arm mapping.
class Policy {
public:
    virtual ~Policy() = default;
    virtual int num_arms() const = 0;
    virtual int decide(const ContextPoint& x) const = 0;
};

// Greedy policy over per-arm k-NN regression estimates; ties go to the
// lowest arm index.
class KnnPolicy : public Policy {
public:
    explicit KnnPolicy(std::shared_ptr<const PolicyState> state) : state_(std::move(state)) {}

    int num_arms() const override { return state_->config.num_arms; }

    double estimate(int arm, const ContextPoint& x) const {
        return knn_regress(state_->indexes[arm], x, state_->k_for(arm)).value;
    }

    int decide(const ContextPoint& x) const override {
        int best = 0;
        double best_value = estimate(0, x);
        for (int i = 1; i < num_arms(); ++i) {
            const double v = estimate(i, x);
            if (v > best_value) {
                best_value = v;
                best = i;
            }
        }
        return best;
    }

    const PolicyState& state() const { return *state_; }

private:
    std::shared_ptr<const PolicyState> state_;
};

// Greedy policy over per-arm ridge predictions (exploitation-only LinUCB).
class RidgePolicy : public Policy {
public:
    explicit RidgePolicy(std::shared_ptr<const std::vector<RidgeModel>> models)
        : models_(std::move(models)) {}

    int num_arms() const override { return static_cast<int>(models_->size()); }
    int decide(const ContextPoint& x) const override { return linucb_decide(*models_, x, 0.0); }
    const std::vector<RidgeModel>& models() const { return *models_; }

private:
    std::shared_ptr<const std::vector<RidgeModel>> models_;
};

// Confidence width sigma(n) = M1 * sqrt(log n * log(n K / delta)) * n^(-1/(2+d)).
// Natural logarithms; n is replaced by 2 inside the logarithms only, so the
// width is finite and positive at n = 1.
inline double ucb_width(std::size_t n, const BanditConfig& config) {
    if (n < 1) throw validation_error("ucb_width requires n >= 1");
    const double nl = static_cast<double>(std::max<std::size_t>(n, 2));
    const double logs = std::log(nl) * std::log(nl * config.num_arms / config.delta);
    const double poly = std::pow(static_cast<double>(n),
                                 -1.0 / (2.0 + config.effective_intrinsic_dim()));
    return config.width_scale * std::sqrt(logs) * poly;
}

// One UCB decision: argmax over arms of the k-NN estimate at x plus the
// width at the arm's current pull count. State is not modified.
inline int knn_ucb_step(const PolicyState& state, const ContextPoint& x) {
    for (int i = 0; i < state.config.num_arms; ++i) {
        if (state.pulls(i) < static_cast<std::size_t>(state.config.warmup)) {
            throw validation_error("arm " + std::to_string(i) + " has " +
                                   std::to_string(state.pulls(i)) + " pulls; complete the " +
                                   std::to_string(state.config.warmup) +
                                   "-round warmup before UCB steps");
        }
    }
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < state.config.num_arms; ++i) {
        const double est = knn_regress(state.indexes[i], x, state.k_for(i)).value;
        const double score = est + ucb_width(state.pulls(i), state.config);
        if (score > best_score) {
            best_score = score;
            best = i;
        }
    }
    return best;
}

namespace detail {

inline TraceStep make_step(const Environment& env, const ContextPoint& x, int arm, double reward) {
    TraceStep s;
    s.context = x;
    s.arm = arm;
    s.reward = reward;
    s.mean_chosen = env.mean_reward(arm, x);
    s.mean_best = env.best_mean(x);
    return s;
}

}  // namespace detail

struct KnnUcbResult {
    std::shared_ptr<PolicyState> state;
    ExperimentTrace trace;

    KnnPolicy policy() const { return KnnPolicy(state); }
};

// kNN-UCB: round-robin warmup of M0 pulls per arm, then UCB decisions.
// Every observed reward is appended to the chosen arm's history before the
// next step; the trace records the environment's true means.
inline KnnUcbResult run_knn_ucb(Environment& env, const BanditConfig& config,
                                std::optional<std::size_t> k_override = std::nullopt) {
    config.validate();
    auto state = std::make_shared<PolicyState>(config, k_override);
    ExperimentTrace trace;
    const std::int64_t warmup_steps =
        static_cast<std::int64_t>(config.warmup) * config.num_arms;
    for (std::int64_t t = 0; t < config.horizon; ++t) {
        ContextPoint x = env.next_context();
        const int arm = t < warmup_steps ? static_cast<int>(t % config.num_arms)
                                         : knn_ucb_step(*state, x);
        const double reward = env.observe(arm, x);
        trace.append(detail::make_step(env, x, arm, reward));
        state->record(arm, x, reward);
    }
    return KnnUcbResult{std::move(state), std::move(trace)};
}

struct UniformRunResult {
    std::shared_ptr<PolicyState> state;
    ExperimentTrace trace;
    std::int64_t truncated_steps = 0;  // steps dropped when T is not divisible by K

    KnnPolicy policy() const { return KnnPolicy(state); }
};

// Uniform sampling: arm i receives the i-th block of floor(T/K) consecutive
// pulls. Returns the frozen greedy policy over the per-arm estimates.
inline UniformRunResult uniform_sampling_run(Environment& env, const BanditConfig& config,
                                             std::optional<std::size_t> k_override = std::nullopt) {
    config.validate();
    if (config.horizon < config.num_arms) {
        throw validation_error("uniform sampling needs horizon >= num_arms");
    }
    const std::int64_t per_arm = config.horizon / config.num_arms;
    auto state = std::make_shared<PolicyState>(config, k_override);
    ExperimentTrace trace;
    for (int arm = 0; arm < config.num_arms; ++arm) {
        for (std::int64_t j = 0; j < per_arm; ++j) {
            ContextPoint x = env.next_context();
            const double reward = env.observe(arm, x);
            trace.append(detail::make_step(env, x, arm, reward));
            state->record(arm, x, reward);
        }
    }
    UniformRunResult out{std::move(state), std::move(trace)};
    out.truncated_steps = config.horizon - per_arm * config.num_arms;
    return out;
}

struct LinUcbResult {
    std::shared_ptr<std::vector<RidgeModel>> models;
    ExperimentTrace trace;

    RidgePolicy policy() const { return RidgePolicy(models); }
};

// Disjoint LinUCB with the same round-robin warmup as kNN-UCB.
inline LinUcbResult run_linucb(Environment& env, const BanditConfig& config, double l2_alpha,
                               double confidence) {
    config.validate();
    if (!(l2_alpha > 0.0)) throw validation_error("linucb requires l2_alpha > 0");
    auto models = std::make_shared<std::vector<RidgeModel>>();
    for (int i = 0; i < config.num_arms; ++i) {
        models->emplace_back(config.context_dim, l2_alpha);
    }
    ExperimentTrace trace;
    const std::int64_t warmup_steps =
        static_cast<std::int64_t>(config.warmup) * config.num_arms;
    for (std::int64_t t = 0; t < config.horizon; ++t) {
        ContextPoint x = env.next_context();
        const int arm = t < warmup_steps ? static_cast<int>(t % config.num_arms)
                                         : linucb_decide(*models, x, confidence);
        const double reward = env.observe(arm, x);
        trace.append(detail::make_step(env, x, arm, reward));
        (*models)[arm].add_observation(x, reward);
    }
    return LinUcbResult{std::move(models), std::move(trace)};
}

// Ridge baseline under the uniform sampling schedule; the frozen policy is
// the greedy argmax over per-arm ridge fits.
inline LinUcbResult run_ridge_uniform(Environment& env, const BanditConfig& config,
                                      double l2_alpha) {
    config.validate();
    if (config.horizon < config.num_arms) {
        throw validation_error("uniform sampling needs horizon >= num_arms");
    }
    if (!(l2_alpha > 0.0)) throw validation_error("ridge baseline requires l2_alpha > 0");
    auto models = std::make_shared<std::vector<RidgeModel>>();
    for (int i = 0; i < config.num_arms; ++i) {
        models->emplace_back(config.context_dim, l2_alpha);
    }
    ExperimentTrace trace;
    const std::int64_t per_arm = config.horizon / config.num_arms;
    for (int arm = 0; arm < config.num_arms; ++arm) {
        for (std::int64_t j = 0; j < per_arm; ++j) {
            ContextPoint x = env.next_context();
            const double reward = env.observe(arm, x);
            trace.append(detail::make_step(env, x, arm, reward));
            (*models)[arm].add_observation(x, reward);
        }
    }
    return LinUcbResult{std::move(models), std::move(trace)};
}

// Diagnostic baseline: picks arms uniformly at random. Its regret grows
// linearly, which is the reference the sublinearity check compares against.
inline ExperimentTrace run_uniform_random(Environment& env, const BanditConfig& config) {
    config.validate();
    Rng rng = make_rng(config.rng_seed, "random-policy");
    std::uniform_int_distribution<int> pick(0, config.num_arms - 1);
    ExperimentTrace trace;
    for (std::int64_t t = 0; t < config.horizon; ++t) {
        ContextPoint x = env.next_context();
        const int arm = pick(rng);
        const double reward = env.observe(arm, x);
        trace.append(detail::make_step(env, x, arm, reward));
    }
    return trace;
}

}  // namespace knnbandit
