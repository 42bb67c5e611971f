#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "knnbandit/core.hpp"
#include "knnbandit/idx.hpp"

namespace knnbandit {

// A reward-generating world. Contexts arrive from a seeded stream; rewards
// are the arm's true mean at the context plus white noise. The true means
// stay queryable so regret can be accounted exactly.
class Environment {
public:
    virtual ~Environment() = default;

    virtual int num_arms() const = 0;
    virtual int context_dim() const = 0;
    virtual ContextPoint next_context() = 0;
    virtual double observe(int arm, const ContextPoint& x) = 0;
    virtual double mean_reward(int arm, const ContextPoint& x) const = 0;

    int top_arm(const ContextPoint& x) const {
        int best = 0;
        double best_mean = mean_reward(0, x);
        for (int i = 1; i < num_arms(); ++i) {
            const double m = mean_reward(i, x);
            if (m > best_mean) {
                best_mean = m;
                best = i;
            }
        }
        return best;
    }

    double best_mean(const ContextPoint& x) const { return mean_reward(top_arm(x), x); }
};

enum class ScenarioKind { quintic, smiley, bullseye, manifold_curve };

inline const char* to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::quintic: return "quintic";
        case ScenarioKind::smiley: return "smiley";
        case ScenarioKind::bullseye: return "bullseye";
        case ScenarioKind::manifold_curve: return "manifold-curve";
    }
    return "?";
}

inline ScenarioKind scenario_from_string(const std::string& name) {
    if (name == "quintic") return ScenarioKind::quintic;
    if (name == "smiley") return ScenarioKind::smiley;
    if (name == "bullseye") return ScenarioKind::bullseye;
    if (name == "manifold-curve") return ScenarioKind::manifold_curve;
    throw validation_error("unknown scenario: " + name);
}

// Two-arm simulated scenario. Arm 0 is top inside its region, arm 1
// everywhere else; means are 1.0 inside the own region and 0.5 outside, so
// the gap is 0.5 at every context. Boundary points belong to arm 0.
struct Scenario {
    ScenarioKind kind = ScenarioKind::bullseye;
    double noise_sigma = 0.5;
    std::uint64_t rng_seed = 1;
    int ambient_dim = 2;  // > 2 only meaningful for manifold-curve

    int dim() const { return kind == ScenarioKind::manifold_curve ? ambient_dim : 2; }

    void validate() const {
        if (noise_sigma < 0.0) throw validation_error("noise_sigma must be nonnegative");
        if (dim() < 2) throw validation_error("scenario dimension must be >= 2");
    }
};

namespace geometry {

constexpr double kQuinticScale = 1.8 * 16.0;  // 28.8
constexpr double kEyeRadius = 0.1;
constexpr double kMouthInner = 0.35;
constexpr double kMouthOuter = 0.45;
constexpr double kMouthCutY = 0.45;

inline double quintic_boundary(double x0) {
    const double u = x0 - 0.5;
    return std::clamp(0.5 + kQuinticScale * u * u * u * u * u, 0.0, 1.0);
}

inline bool quintic_arm0(const ContextPoint& x) { return x[1] >= quintic_boundary(x[0]); }

inline bool smiley_arm0(const ContextPoint& x) {
    const double e1 = std::hypot(x[0] - 0.3, x[1] - 0.7);
    const double e2 = std::hypot(x[0] - 0.7, x[1] - 0.7);
    if (e1 <= kEyeRadius || e2 <= kEyeRadius) return true;
    const double r = std::hypot(x[0] - 0.5, x[1] - 0.55);
    return r >= kMouthInner && r <= kMouthOuter && x[1] < kMouthCutY;
}

inline bool bullseye_arm0(const ContextPoint& x) {
    const double r = std::hypot(x[0] - 0.5, x[1] - 0.5);
    return r <= 0.1 || (r >= 0.2 && r <= 0.3) || r >= 0.4;
}

// Bullseye bands, innermost first: 0 disc, 1 first annulus, 2 second
// annulus, 3 third annulus, 4 everything outside the largest circle.
// Arm 0 owns bands {0, 2, 4}, arm 1 owns {1, 3}.
inline int bullseye_band(const ContextPoint& x) {
    const double r = std::hypot(x[0] - 0.5, x[1] - 0.5);
    if (r <= 0.1) return 0;
    if (r < 0.2) return 1;
    if (r <= 0.3) return 2;
    if (r < 0.4) return 3;
    return 4;
}

// Smiley components of arm 0: 0/1 the eyes, 2 the mouth band; -1 outside.
inline int smiley_component(const ContextPoint& x) {
    if (std::hypot(x[0] - 0.3, x[1] - 0.7) <= kEyeRadius) return 0;
    if (std::hypot(x[0] - 0.7, x[1] - 0.7) <= kEyeRadius) return 1;
    const double r = std::hypot(x[0] - 0.5, x[1] - 0.55);
    if (r >= kMouthInner && r <= kMouthOuter && x[1] < kMouthCutY) return 2;
    return -1;
}

inline bool manifold_arm0(const ContextPoint& x) { return x[1] >= 0.5; }

// Smooth closed curve with intrinsic dimension 1: a circle in the first two
// ambient coordinates and low-amplitude low-frequency sinusoids in the rest,
// so the image stays inside [0,1]^D for any D >= 2 and local neighborhoods
// stay one dimensional.
inline ContextPoint curve_point(double s, int ambient_dim) {
    ContextPoint p;
    p.coords.resize(ambient_dim);
    const double theta = 2.0 * M_PI * s;
    p[0] = 0.5 + 0.45 * std::cos(theta);
    p[1] = 0.5 + 0.45 * std::sin(theta);
    for (int j = 2; j < ambient_dim; ++j) {
        const double phase = 2.39996322972865332 * j;
        p[j] = 0.5 + 0.02 * std::sin(2.0 * theta + phase);
    }
    return p;
}

inline bool arm0_region(ScenarioKind kind, const ContextPoint& x) {
    switch (kind) {
        case ScenarioKind::quintic: return quintic_arm0(x);
        case ScenarioKind::smiley: return smiley_arm0(x);
        case ScenarioKind::bullseye: return bullseye_arm0(x);
        case ScenarioKind::manifold_curve: return manifold_arm0(x);
    }
    throw validation_error("unknown scenario kind");
}

inline double arm0_area(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::quintic: return 0.5;
        case ScenarioKind::smiley: return 0.16827748917581205;  // two eyes + mouth band
        case ScenarioKind::bullseye: return 1.0 - 0.1 * M_PI;
        case ScenarioKind::manifold_curve: return 0.5;
    }
    throw validation_error("unknown scenario kind");
}

}  // namespace geometry

inline double mean_reward(const Scenario& scenario, int arm, const ContextPoint& x) {
    if (arm < 0 || arm >= 2) throw validation_error("arm index out of range");
    if (x.dim() != scenario.dim()) {
        throw validation_error("context dimension does not match scenario");
    }
    for (double c : x.coords) {
        if (!(c >= 0.0 && c <= 1.0)) {
            throw validation_error("context outside the scenario support [0,1]^D");
        }
    }
    const bool in_arm0 = geometry::arm0_region(scenario.kind, x);
    return in_arm0 == (arm == 0) ? 1.0 : 0.5;
}

class ScenarioEnv : public Environment {
public:
    explicit ScenarioEnv(Scenario scenario) : scenario_(scenario) {
        scenario_.validate();
        context_rng_ = make_rng(scenario_.rng_seed, "contexts");
        noise_rng_ = make_rng(scenario_.rng_seed, "noise");
    }

    const Scenario& scenario() const { return scenario_; }
    int num_arms() const override { return 2; }
    int context_dim() const override { return scenario_.dim(); }

    ContextPoint next_context() override {
        if (scenario_.kind == ScenarioKind::manifold_curve) {
            return geometry::curve_point(unit_(context_rng_), scenario_.ambient_dim);
        }
        ContextPoint x;
        x.coords = {unit_(context_rng_), unit_(context_rng_)};
        return x;
    }

    double observe(int arm, const ContextPoint& x) override {
        double r = mean_reward(arm, x);
        if (scenario_.noise_sigma > 0.0) r += scenario_.noise_sigma * normal_(noise_rng_);
        return r;
    }

    double mean_reward(int arm, const ContextPoint& x) const override {
        return knnbandit::mean_reward(scenario_, arm, x);
    }

private:
    Scenario scenario_;
    Rng context_rng_, noise_rng_;
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
    std::normal_distribution<double> normal_{0.0, 1.0};
};

inline std::pair<ContextPoint, double> sample_step(ScenarioEnv& env, int arm) {
    ContextPoint x = env.next_context();
    const double r = env.observe(arm, x);
    return {std::move(x), r};
}

// Streams contexts from a fixed smooth closed curve embedded in D ambient
// dimensions; intrinsic dimension is 1 regardless of D.
inline ContextPoint manifold_context(int ambient_dim, Rng& rng) {
    if (ambient_dim < 2) throw validation_error("ambient dimension must be >= 2");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    return geometry::curve_point(unit(rng), ambient_dim);
}

// Classification dataset reframed as a bandit: images are contexts, classes
// are arms, reward is 1 on the true label and 0 otherwise (no added noise).
class ClassificationEnv : public Environment {
public:
    ClassificationEnv(std::vector<std::vector<double>> features, std::vector<int> labels,
                      std::uint64_t seed = 1)
        : features_(std::move(features)), labels_(std::move(labels)) {
        if (features_.empty()) throw data_error("classification dataset is empty");
        if (features_.size() != labels_.size()) {
            throw data_error("feature/label count mismatch: " + std::to_string(features_.size()) +
                             " images vs " + std::to_string(labels_.size()) + " labels");
        }
        num_classes_ = *std::max_element(labels_.begin(), labels_.end()) + 1;
        order_.resize(features_.size());
        std::iota(order_.begin(), order_.end(), 0u);
        shuffle_rng_ = make_rng(seed, "shuffle");
        std::shuffle(order_.begin(), order_.end(), shuffle_rng_);
    }

    int num_arms() const override { return num_classes_; }
    int context_dim() const override { return static_cast<int>(features_.front().size()); }
    std::size_t dataset_size() const { return features_.size(); }
    int label(std::size_t item) const { return labels_[item]; }

    // Reshuffles and restarts once the stream is exhausted, so horizons
    // longer than the dataset keep drawing from the same empirical
    // distribution.
    ContextPoint next_context() override {
        if (cursor_ == order_.size()) {
            std::shuffle(order_.begin(), order_.end(), shuffle_rng_);
            cursor_ = 0;
        }
        current_ = order_[cursor_++];
        return ContextPoint(features_[current_]);
    }

    double observe(int arm, const ContextPoint&) override {
        return arm == labels_[current_] ? 1.0 : 0.0;
    }

    // True mean for the context currently at the head of the stream.
    double mean_reward(int arm, const ContextPoint&) const override {
        return arm == labels_[current_] ? 1.0 : 0.0;
    }

private:
    std::vector<std::vector<double>> features_;
    std::vector<int> labels_;
    int num_classes_ = 0;
    std::vector<std::uint32_t> order_;
    std::size_t cursor_ = 0;
    std::size_t current_ = 0;
    Rng shuffle_rng_;
};

// Loads an IDX image/label pair; pixels are scaled to [0,1] by dividing by
// 255 and images are flattened to rows*cols feature columns.
inline ClassificationEnv load_idx_dataset(const std::string& image_path,
                                          const std::string& label_path,
                                          std::uint64_t seed = 1,
                                          std::size_t max_items = 0) {
    const IdxImages images = read_idx_images(image_path);
    const IdxLabels labels = read_idx_labels(label_path);
    if (images.count != labels.count) {
        throw data_error("image/label count mismatch: " + std::to_string(images.count) +
                         " images vs " + std::to_string(labels.count) + " labels");
    }
    std::size_t n = images.count;
    if (max_items > 0) n = std::min<std::size_t>(n, max_items);
    const std::size_t dim = std::size_t(images.rows) * images.cols;
    std::vector<std::vector<double>> features(n, std::vector<double>(dim));
    std::vector<int> lab(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            features[i][j] = images.pixels[i * dim + j] / 255.0;
        }
        lab[i] = labels.labels[i];
    }
    return ClassificationEnv(std::move(features), std::move(lab), seed);
}

// Context-action world with a compact action set: rewards depend jointly on
// the context and the chosen action.
class JointEnvironment {
public:
    virtual ~JointEnvironment() = default;
    virtual int context_dim() const = 0;
    virtual int action_dim() const = 0;
    virtual ContextPoint next_context() = 0;
    virtual double mean_reward(const ContextPoint& x, const std::vector<double>& a) const = 0;
    virtual double observe(const ContextPoint& x, const std::vector<double>& a) = 0;
};

// f(x, a) = -(a0 - peak)^2, independent of the context. The default noise is
// small relative to the quadratic's flat top so that action-localization
// tolerances of a few grid cells stay resolvable at desk-scale horizons.
class QuadraticActionEnv : public JointEnvironment {
public:
    QuadraticActionEnv(int context_dim = 1, double peak = 0.5, double noise_sigma = 0.01,
                       std::uint64_t seed = 1)
        : dim_(context_dim), peak_(peak), sigma_(noise_sigma) {
        context_rng_ = make_rng(seed, "contexts");
        noise_rng_ = make_rng(seed, "noise");
    }

    int context_dim() const override { return dim_; }
    int action_dim() const override { return 1; }
    double peak() const { return peak_; }

    ContextPoint next_context() override {
        ContextPoint x;
        x.coords.resize(dim_);
        for (double& c : x.coords) c = unit_(context_rng_);
        return x;
    }

    double mean_reward(const ContextPoint&, const std::vector<double>& a) const override {
        const double d = a.at(0) - peak_;
        return -d * d;
    }

    double observe(const ContextPoint& x, const std::vector<double>& a) override {
        double r = mean_reward(x, a);
        if (sigma_ > 0.0) r += sigma_ * normal_(noise_rng_);
        return r;
    }

private:
    int dim_;
    double peak_;
    double sigma_;
    Rng context_rng_, noise_rng_;
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace knnbandit
