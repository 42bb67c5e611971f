#include <catch2/catch_amalgamated.hpp>

#include "knnbandit/metrics.hpp"
#include "testutil.hpp"

using namespace knnbandit;

namespace {

ExperimentTrace make_trace(const std::vector<std::pair<double, double>>& chosen_best) {
    ExperimentTrace t;
    for (const auto& [chosen, best] : chosen_best) {
        TraceStep s;
        s.context = ContextPoint{0.5, 0.5};
        s.mean_chosen = chosen;
        s.mean_best = best;
        s.reward = chosen;
        t.append(s);
    }
    return t;
}

class OraclePolicy : public Policy {
public:
    explicit OraclePolicy(const Environment& env, bool invert = false)
        : env_(env), invert_(invert) {}
    int num_arms() const override { return env_.num_arms(); }
    int decide(const ContextPoint& x) const override {
        const int top = env_.top_arm(x);
        return invert_ ? 1 - top : top;
    }

private:
    const Environment& env_;
    bool invert_;
};

}  // namespace

TEST_CASE("zero-gap traces accumulate zero regret") {
    const auto t = make_trace({{1.0, 1.0}, {0.7, 0.7}, {0.2, 0.2}});
    const RegretCurve curve = cumulative_regret(t);
    for (const auto& [step, regret] : curve.checkpoints) CHECK(regret == 0.0);
}

TEST_CASE("each suboptimal pull in the simulated scenarios adds exactly one half") {
    std::vector<std::pair<double, double>> steps;
    int suboptimal = 0;
    for (int i = 0; i < 100; ++i) {
        if (i % 3 == 0) {
            steps.emplace_back(0.5, 1.0);
            ++suboptimal;
        } else {
            steps.emplace_back(1.0, 1.0);
        }
    }
    const RegretCurve curve = cumulative_regret(make_trace(steps));
    CHECK(curve.final_regret() == 0.5 * suboptimal);
}

TEST_CASE("classification regret counts misses") {
    std::vector<std::pair<double, double>> steps;
    for (int i = 0; i < 60; ++i) steps.emplace_back(i % 4 == 0 ? 0.0 : 1.0, 1.0);
    const RegretCurve curve = cumulative_regret(make_trace(steps));
    CHECK(curve.final_regret() == 15.0);
}

TEST_CASE("regret is additive over concatenated traces") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::pair<double, double>> a, b;
    for (int i = 0; i < 50; ++i) {
        const double m = unit(rng);
        a.emplace_back(m, m + unit(rng));
        const double m2 = unit(rng);
        b.emplace_back(m2, m2 + unit(rng));
    }
    auto joined = a;
    joined.insert(joined.end(), b.begin(), b.end());
    const double ra = cumulative_regret(make_trace(a)).final_regret();
    const double rb = cumulative_regret(make_trace(b)).final_regret();
    const double rj = cumulative_regret(make_trace(joined)).final_regret();
    CHECK(rj == Catch::Approx(ra + rb).margin(1e-9));
}

TEST_CASE("regret exponent recovers synthetic power laws") {
    RegretCurve linear, sub;
    for (int t = 1; t <= 2000; ++t) {
        linear.checkpoints.emplace_back(t, static_cast<double>(t));
        sub.checkpoints.emplace_back(t, std::pow(static_cast<double>(t), 0.75));
    }
    CHECK(regret_exponent(linear).slope == Catch::Approx(1.0).margin(1e-9));
    CHECK(regret_exponent(sub).slope == Catch::Approx(0.75).margin(1e-6));

    RegretCurve with_zeros;
    with_zeros.checkpoints.emplace_back(1, 0.0);
    for (int t = 2; t <= 500; ++t) {
        with_zeros.checkpoints.emplace_back(t, std::pow(static_cast<double>(t), 0.6));
    }
    CHECK(regret_exponent(with_zeros).slope == Catch::Approx(0.6).margin(1e-6));
    CHECK_FALSE(regret_exponent(with_zeros).degenerate);

    RegretCurve zero;
    for (int t = 1; t <= 10; ++t) zero.checkpoints.emplace_back(t, 0.0);
    const ExponentFit fit = regret_exponent(zero);
    CHECK(fit.degenerate);
    CHECK(fit.slope == 0.0);
}

TEST_CASE("top-arm error and epsilon gap for oracle-like policies") {
    Scenario s;
    s.kind = ScenarioKind::bullseye;
    s.rng_seed = 8;
    ScenarioEnv env(s);
    std::vector<ContextPoint> test;
    for (int i = 0; i < 100000; ++i) test.push_back(env.next_context());

    const OraclePolicy oracle(env);
    CHECK(top_arm_error(oracle, env, test) == 0.0);
    CHECK(epsilon_optimality_gap(oracle, env, test) == 0.0);

    const OraclePolicy anti(env, true);
    CHECK(top_arm_error(anti, env, test) == 1.0);
    CHECK(epsilon_optimality_gap(anti, env, test) == 0.5);

    // A constant-arm policy errs exactly on the other arm's region, whose
    // area is 0.1 * pi for the bullseye geometry.
    class Constant : public Policy {
    public:
        int num_arms() const override { return 2; }
        int decide(const ContextPoint&) const override { return 0; }
    } constant;
    const double err = top_arm_error(constant, env, test);
    CHECK(err == Catch::Approx(0.1 * M_PI).margin(0.005));

    CHECK_THROWS_AS(top_arm_error(oracle, env, {}), validation_error);
}

TEST_CASE("gap is zero exactly when the error is zero on two-arm scenarios") {
    Scenario s;
    s.kind = ScenarioKind::smiley;
    s.rng_seed = 9;
    ScenarioEnv env(s);
    std::vector<ContextPoint> test;
    for (int i = 0; i < 2000; ++i) test.push_back(env.next_context());

    // Policy wrong on exactly one designated context.
    class AlmostOracle : public Policy {
    public:
        AlmostOracle(const Environment& env, const ContextPoint& wrong)
            : env_(env), wrong_(wrong) {}
        int num_arms() const override { return 2; }
        int decide(const ContextPoint& x) const override {
            const int top = env_.top_arm(x);
            return x == wrong_ ? 1 - top : top;
        }

    private:
        const Environment& env_;
        ContextPoint wrong_;
    };

    const AlmostOracle nearly(env, test[42]);
    CHECK(top_arm_error(nearly, env, test) == Catch::Approx(1.0 / 2000).margin(1e-12));
    CHECK(epsilon_optimality_gap(nearly, env, test) == 0.5);

    const OraclePolicy oracle(env);
    const double gap = epsilon_optimality_gap(oracle, env, test);
    const double err = top_arm_error(oracle, env, test);
    CHECK(((gap == 0.0) == (err == 0.0)));
}

TEST_CASE("checkpoint curves index by time") {
    RegretCurve full;
    for (int t = 1; t <= 100; ++t) full.checkpoints.emplace_back(t, t * 0.25);
    const RegretCurve sel = checkpoint_curve(full, {10, 50, 100});
    REQUIRE(sel.checkpoints.size() == 3);
    CHECK(sel.checkpoints[1].first == 50);
    CHECK(sel.checkpoints[1].second == 12.5);
    CHECK_THROWS_AS(checkpoint_curve(full, {101}), validation_error);
}
