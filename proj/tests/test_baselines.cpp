#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "knnbandit/baselines.hpp"
#include "testutil.hpp"

using namespace knnbandit;

TEST_CASE("ridge_fit interpolates exact linear data with no regularization") {
    const std::vector<ContextPoint> xs = {ContextPoint{0.0}, ContextPoint{1.0},
                                          ContextPoint{2.0}};
    const std::vector<double> ys = {1.0, 3.0, 5.0};  // y = 2x + 1
    const RidgeModel model = ridge_fit(xs, ys, 0.0);
    REQUIRE(model.weights()[0] == Catch::Approx(2.0).margin(1e-9));
    REQUIRE(model.weights()[1] == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("huge regularization drives the feature weights to zero") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<ContextPoint> xs;
    std::vector<double> ys;
    double mean_y = 0.0;
    for (int i = 0; i < 50; ++i) {
        xs.push_back(testutil::random_point(rng, 3, false));
        ys.push_back(unit(rng) * 4 - 1);
        mean_y += ys.back();
    }
    mean_y /= 50;
    const RidgeModel model = ridge_fit(xs, ys, 1e12);
    for (int j = 0; j < 3; ++j) CHECK(std::abs(model.weights()[j]) <= 1e-6);
    // The intercept is unpenalized; it falls back to the response mean.
    CHECK(model.weights()[3] == Catch::Approx(mean_y).margin(1e-6));
}

TEST_CASE("ridge_fit hand-solved 2x2 instance") {
    const std::vector<ContextPoint> xs = {ContextPoint{0.0}, ContextPoint{1.0}};
    const std::vector<double> ys = {0.0, 1.0};
    const RidgeModel model = ridge_fit(xs, ys, 1.0);
    // Normal equations with an unpenalized intercept:
    //   [1 + 1, 1; 1, 2] w = [1; 1]  =>  w = (1/3, 1/3).
    REQUIRE(model.weights()[0] == Catch::Approx(1.0 / 3.0).margin(1e-12));
    REQUIRE(model.weights()[1] == Catch::Approx(1.0 / 3.0).margin(1e-12));
}

TEST_CASE("singular unregularized design is rejected") {
    const std::vector<ContextPoint> xs = {ContextPoint{1.0, 2.0}, ContextPoint{1.0, 2.0},
                                          ContextPoint{1.0, 2.0}};
    const std::vector<double> ys = {1.0, 2.0, 3.0};
    CHECK_THROWS_WITH(ridge_fit(xs, ys, 0.0), Catch::Matchers::ContainsSubstring("rank"));
}

TEST_CASE("ridge_fit matches an independent normal-equations solve") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 25; ++trial) {
        const int dim = 1 + trial % 4;
        const int n = 20 + trial;
        const double alpha = 0.1 + unit(rng);
        Eigen::MatrixXd design(n, dim + 1);
        Eigen::VectorXd y(n);
        std::vector<ContextPoint> xs;
        std::vector<double> ys;
        for (int i = 0; i < n; ++i) {
            auto p = testutil::random_point(rng, dim, false);
            for (int j = 0; j < dim; ++j) design(i, j) = p[j];
            design(i, dim) = 1.0;
            y[i] = unit(rng) * 2 - 1;
            xs.push_back(p);
            ys.push_back(y[i]);
        }
        Eigen::MatrixXd reg = Eigen::MatrixXd::Zero(dim + 1, dim + 1);
        for (int j = 0; j < dim; ++j) reg(j, j) = alpha;
        const Eigen::VectorXd direct =
            (design.transpose() * design + reg).fullPivLu().solve(design.transpose() * y);
        const RidgeModel model = ridge_fit(xs, ys, alpha);
        for (int j = 0; j <= dim; ++j) {
            REQUIRE(model.weights()[j] == Catch::Approx(direct[j]).margin(1e-8));
        }
    }
}

TEST_CASE("gram stays symmetric positive definite with regularization") {
    std::mt19937_64 rng(41);
    RidgeModel model(2, 0.5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 40; ++i) {
        model.add_observation(testutil::random_point(rng, 2, false), unit(rng));
        const Eigen::MatrixXd& g = model.gram();
        REQUIRE((g - g.transpose()).cwiseAbs().maxCoeff() <= 1e-9);
        Eigen::LLT<Eigen::MatrixXd> llt(g);
        REQUIRE(llt.info() == Eigen::Success);
    }
}

TEST_CASE("linucb_decide tie-breaks and exploits") {
    const ContextPoint query{0.5};

    std::vector<RidgeModel> single;
    single.emplace_back(1, 1.0);
    single[0].add_observation(ContextPoint{0.2}, 0.0);
    CHECK(linucb_decide(single, query, 0.1) == 0);

    std::vector<RidgeModel> twins;
    twins.emplace_back(1, 1.0);
    twins.emplace_back(1, 1.0);
    for (auto& m : twins) {
        m.add_observation(ContextPoint{0.1}, 0.3);
        m.add_observation(ContextPoint{0.9}, 0.7);
    }
    CHECK(linucb_decide(twins, query, 0.1) == 0);

    std::vector<RidgeModel> split;
    split.emplace_back(1, 1.0);
    split.emplace_back(1, 1.0);
    for (int i = 0; i < 10; ++i) {
        split[0].add_observation(ContextPoint{0.5}, 0.0);
        split[1].add_observation(ContextPoint{0.5}, 1.0);
    }
    CHECK(linucb_decide(split, query, 0.0) == 1);
}

TEST_CASE("duplicate observations change decisions only through the gram update") {
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<ContextPoint> xs;
    std::vector<double> ys;
    for (int i = 0; i < 30; ++i) {
        xs.push_back(testutil::random_point(rng, 2, false));
        ys.push_back(unit(rng));
    }
    xs.push_back(xs[3]);  // duplicate of an existing observation
    ys.push_back(ys[3]);

    RidgeModel incremental(2, 1.0);
    for (std::size_t i = 0; i < xs.size(); ++i) incremental.add_observation(xs[i], ys[i]);
    const RidgeModel refit = ridge_fit(xs, ys, 1.0);

    std::vector<RidgeModel> a{incremental, refit};
    for (int q = 0; q < 50; ++q) {
        const auto query = testutil::random_point(rng, 2, false);
        CHECK(std::abs(a[0].predict(query) - a[1].predict(query)) <= 1e-9);
        CHECK(std::abs(a[0].exploration_width(query) - a[1].exploration_width(query)) <= 1e-9);
    }
}
