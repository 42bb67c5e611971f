#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "knnbandit/core.hpp"
#include "knnbandit/environments.hpp"
#include "knnbandit/policy.hpp"

namespace knnbandit {

// Cumulative regret checkpoints (t, R_t); nondecreasing, starting from the
// first step.
struct RegretCurve {
    std::vector<std::pair<std::int64_t, double>> checkpoints;

    double final_regret() const {
        return checkpoints.empty() ? 0.0 : checkpoints.back().second;
    }
};

// R_T accumulated from true means recorded in the trace, never from the
// realized noisy rewards.
inline RegretCurve cumulative_regret(const ExperimentTrace& trace) {
    RegretCurve curve;
    curve.checkpoints.reserve(trace.size());
    double total = 0.0;
    for (std::size_t t = 0; t < trace.steps.size(); ++t) {
        const TraceStep& s = trace.steps[t];
        if (!std::isfinite(s.mean_best) || !std::isfinite(s.mean_chosen)) {
            throw validation_error("trace step " + std::to_string(t) + " lacks true means");
        }
        total += s.mean_best - s.mean_chosen;
        curve.checkpoints.emplace_back(static_cast<std::int64_t>(t) + 1, total);
    }
    return curve;
}

inline RegretCurve checkpoint_curve(const RegretCurve& full,
                                    const std::vector<std::int64_t>& at) {
    RegretCurve out;
    for (std::int64_t t : at) {
        if (t < 1 || t > static_cast<std::int64_t>(full.checkpoints.size())) {
            throw validation_error("checkpoint " + std::to_string(t) + " outside the curve");
        }
        out.checkpoints.push_back(full.checkpoints[t - 1]);
    }
    return out;
}

// Fraction of test contexts where the policy's arm differs from the true
// top arm.
inline double top_arm_error(const Policy& policy, const Environment& env,
                            const std::vector<ContextPoint>& test_contexts) {
    if (test_contexts.empty()) throw validation_error("top_arm_error requires test contexts");
    std::size_t wrong = 0;
    for (const ContextPoint& x : test_contexts) {
        if (policy.decide(x) != env.top_arm(x)) ++wrong;
    }
    return static_cast<double>(wrong) / test_contexts.size();
}

// Largest true-mean gap incurred by the policy over the test contexts; the
// policy is epsilon-optimal on the sample iff the result is <= epsilon.
inline double epsilon_optimality_gap(const Policy& policy, const Environment& env,
                                     const std::vector<ContextPoint>& test_contexts) {
    if (test_contexts.empty()) {
        throw validation_error("epsilon_optimality_gap requires test contexts");
    }
    double gap = 0.0;
    for (const ContextPoint& x : test_contexts) {
        gap = std::max(gap, env.best_mean(x) - env.mean_reward(policy.decide(x), x));
    }
    return gap;
}

struct ExponentFit {
    double slope = 0.0;
    bool degenerate = false;  // set when no checkpoint had positive regret
};

// Least-squares slope of log R_t against log t. Checkpoints with zero
// regret are excluded from the fit.
inline ExponentFit regret_exponent(const RegretCurve& curve) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& [t, r] : curve.checkpoints) {
        if (r > 0.0) pts.emplace_back(std::log(static_cast<double>(t)), std::log(r));
    }
    if (pts.empty()) return ExponentFit{0.0, true};
    if (pts.size() < 2) return ExponentFit{0.0, true};
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : pts) {
        mx += x;
        my += y;
    }
    mx /= pts.size();
    my /= pts.size();
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [x, y] : pts) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if (sxx == 0.0) return ExponentFit{0.0, true};
    return ExponentFit{sxy / sxx, false};
}

// Average per-step regret of the frozen policy over a fresh evaluation
// stream (exploration widths set to zero). This is the desk-scale stand-in
// for the reported "test regret" numbers.
inline double test_regret(const Policy& policy, Environment& env, std::int64_t steps) {
    if (steps < 1) throw validation_error("test_regret requires steps >= 1");
    double total = 0.0;
    for (std::int64_t t = 0; t < steps; ++t) {
        const ContextPoint x = env.next_context();
        total += env.best_mean(x) - env.mean_reward(policy.decide(x), x);
    }
    return total / static_cast<double>(steps);
}

struct MetricRow {
    std::string metric;
    std::string scenario;
    std::string method;
    std::int64_t horizon = 0;
    double value = 0.0;
    std::uint64_t seed = 0;
};

// Report format: `metric,scenario,method,T,value,seed`.
inline void write_metrics_csv(const std::vector<MetricRow>& rows, std::ostream& os) {
    os << "metric,scenario,method,T,value,seed\n";
    for (const MetricRow& r : rows) {
        os << r.metric << ',' << r.scenario << ',' << r.method << ',' << r.horizon << ','
           << detail::format_double(r.value) << ',' << r.seed << '\n';
    }
}

inline void write_metrics_csv(const std::vector<MetricRow>& rows, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw data_error("cannot open metrics file for writing: " + path);
    write_metrics_csv(rows, os);
}

inline void write_regret_curve_csv(const RegretCurve& curve, std::ostream& os,
                                   std::int64_t stride = 1) {
    os << "t,cumulative_regret\n";
    const std::size_t n = curve.checkpoints.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& [t, r] = curve.checkpoints[i];
        if (t % stride == 0 || i + 1 == n) {
            os << t << ',' << detail::format_double(r) << '\n';
        }
    }
}

inline void write_regret_curve_csv(const RegretCurve& curve, const std::string& path,
                                   std::int64_t stride = 1) {
    std::ofstream os(path);
    if (!os) throw data_error("cannot open regret curve file for writing: " + path);
    write_regret_curve_csv(curve, os, stride);
}

}  // namespace knnbandit
