#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "knnbandit/infinite.hpp"
#include "knnbandit/metrics.hpp"
#include "knnbandit/policy.hpp"
#include "knnbandit/topology.hpp"
#include "knnbandit/version.hpp"

namespace knnbandit {

enum class Method { knn_uniform, knn_ucb, ridge_uniform, linucb };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::knn_uniform: return "knn-uniform";
        case Method::knn_ucb: return "knn-ucb";
        case Method::ridge_uniform: return "ridge-uniform";
        case Method::linucb: return "linucb";
    }
    return "?";
}

inline Method method_from_string(const std::string& name) {
    if (name == "knn-uniform") return Method::knn_uniform;
    if (name == "knn-ucb") return Method::knn_ucb;
    if (name == "ridge-uniform") return Method::ridge_uniform;
    if (name == "linucb") return Method::linucb;
    throw validation_error("unknown method: " + name);
}

// Everything a run needs, resolvable from flags, a key=value config file, or
// a previously written manifest (flags win over file values).
struct ExperimentConfig {
    std::string scenario;        // one of the scenario names, or empty
    std::string dataset_images;  // IDX paths, or empty
    std::string dataset_labels;
    std::size_t dataset_limit = 0;  // 0 = whole dataset
    Method method = Method::knn_ucb;

    int ambient_dim = 0;   // 0 = scenario default
    int intrinsic_dim = 0;  // 0 = context dimension
    int warmup = 25;
    double width_scale = 1.0;
    double delta = 0.1;
    std::int64_t horizon = 10000;
    std::optional<std::size_t> k;  // overrides default_k when set
    std::optional<double> topology_radius;
    int topology_grid = 200;  // vertex grid side for region recovery
    double noise_sigma = 0.5;
    double l2_alpha = 1.0;
    double linucb_confidence = 0.1;
    std::int64_t test_contexts = 10000;
    std::string output_dir = "out";
    std::vector<std::uint64_t> seeds{1};

    bool uses_dataset() const { return !dataset_images.empty() || !dataset_labels.empty(); }

    void validate() const {
        if (scenario.empty() == !uses_dataset()) {
            throw validation_error("exactly one of scenario or dataset must be set");
        }
        if (uses_dataset() && (dataset_images.empty() || dataset_labels.empty())) {
            throw validation_error("dataset selection needs both image and label paths");
        }
        if (!scenario.empty()) scenario_from_string(scenario);
        if (horizon < 1) throw validation_error("horizon must be >= 1");
        if (seeds.empty()) throw validation_error("at least one seed is required");
        if (test_contexts < 1) throw validation_error("test_contexts must be >= 1");
        if (topology_radius && !(*topology_radius > 0.0)) {
            throw validation_error("topology radius must be positive");
        }
        if (topology_radius && uses_dataset()) {
            throw validation_error("region recovery is only defined for scenario runs");
        }
        if (topology_radius && !scenario.empty() &&
            scenario_from_string(scenario) == ScenarioKind::manifold_curve && ambient_dim != 2) {
            throw validation_error("region recovery requires a 2-d scenario");
        }
        if (topology_grid < 2) throw validation_error("topology_grid must be >= 2");
        if (noise_sigma < 0.0) throw validation_error("noise_sigma must be nonnegative");
    }
};

namespace detail {

inline std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
    std::ostringstream os;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (i) os << ',';
        os << seeds[i];
    }
    return os.str();
}

inline std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) seeds.push_back(std::stoull(item));
    }
    return seeds;
}

}  // namespace detail

inline std::vector<std::pair<std::string, std::string>> to_kv(const ExperimentConfig& c) {
    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("version", std::string(kVersion));
    kv.emplace_back("scenario", c.scenario);
    kv.emplace_back("dataset_images", c.dataset_images);
    kv.emplace_back("dataset_labels", c.dataset_labels);
    kv.emplace_back("dataset_limit", std::to_string(c.dataset_limit));
    kv.emplace_back("method", to_string(c.method));
    kv.emplace_back("ambient_dim", std::to_string(c.ambient_dim));
    kv.emplace_back("intrinsic_dim", std::to_string(c.intrinsic_dim));
    kv.emplace_back("warmup", std::to_string(c.warmup));
    kv.emplace_back("width_scale", detail::format_double(c.width_scale));
    kv.emplace_back("delta", detail::format_double(c.delta));
    kv.emplace_back("horizon", std::to_string(c.horizon));
    kv.emplace_back("k", c.k ? std::to_string(*c.k) : "");
    kv.emplace_back("topology_radius",
                    c.topology_radius ? detail::format_double(*c.topology_radius) : "");
    kv.emplace_back("topology_grid", std::to_string(c.topology_grid));
    kv.emplace_back("noise_sigma", detail::format_double(c.noise_sigma));
    kv.emplace_back("l2_alpha", detail::format_double(c.l2_alpha));
    kv.emplace_back("linucb_confidence", detail::format_double(c.linucb_confidence));
    kv.emplace_back("test_contexts", std::to_string(c.test_contexts));
    kv.emplace_back("output_dir", c.output_dir);
    kv.emplace_back("seeds", detail::join_seeds(c.seeds));
    return kv;
}

inline void apply_kv(ExperimentConfig& c,
                     const std::vector<std::pair<std::string, std::string>>& kv) {
    for (const auto& [key, value] : kv) {
        if (key == "version") continue;  // informational echo
        else if (key == "scenario") c.scenario = value;
        else if (key == "dataset_images") c.dataset_images = value;
        else if (key == "dataset_labels") c.dataset_labels = value;
        else if (key == "dataset_limit") c.dataset_limit = std::stoull(value);
        else if (key == "method") c.method = method_from_string(value);
        else if (key == "ambient_dim") c.ambient_dim = std::stoi(value);
        else if (key == "intrinsic_dim") c.intrinsic_dim = std::stoi(value);
        else if (key == "warmup") c.warmup = std::stoi(value);
        else if (key == "width_scale") c.width_scale = std::stod(value);
        else if (key == "delta") c.delta = std::stod(value);
        else if (key == "horizon") c.horizon = std::stoll(value);
        else if (key == "k") c.k = value.empty() ? std::nullopt : std::optional<std::size_t>(std::stoull(value));
        else if (key == "topology_radius") c.topology_radius = value.empty() ? std::nullopt : std::optional<double>(std::stod(value));
        else if (key == "topology_grid") c.topology_grid = std::stoi(value);
        else if (key == "noise_sigma") c.noise_sigma = std::stod(value);
        else if (key == "l2_alpha") c.l2_alpha = std::stod(value);
        else if (key == "linucb_confidence") c.linucb_confidence = std::stod(value);
        else if (key == "test_contexts") c.test_contexts = std::stoll(value);
        else if (key == "output_dir") c.output_dir = value;
        else if (key == "seeds") c.seeds = detail::parse_seeds(value);
        else throw validation_error("unknown config key: " + key);
    }
}

inline ExperimentConfig config_from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw data_error("cannot open config file: " + path);
    ExperimentConfig c;
    apply_kv(c, read_config_kv(is));
    return c;
}

inline std::unique_ptr<Environment> make_environment(const ExperimentConfig& c,
                                                     std::uint64_t seed) {
    if (c.uses_dataset()) {
        return std::make_unique<ClassificationEnv>(
            load_idx_dataset(c.dataset_images, c.dataset_labels, seed, c.dataset_limit));
    }
    Scenario s;
    s.kind = scenario_from_string(c.scenario);
    s.noise_sigma = c.noise_sigma;
    s.rng_seed = seed;
    s.ambient_dim = c.ambient_dim > 0
                        ? c.ambient_dim
                        : (s.kind == ScenarioKind::manifold_curve ? 10 : 2);
    return std::make_unique<ScenarioEnv>(s);
}

inline BanditConfig bandit_config_for(const ExperimentConfig& c, const Environment& env,
                                      std::uint64_t seed) {
    BanditConfig b;
    b.num_arms = env.num_arms();
    b.context_dim = env.context_dim();
    b.intrinsic_dim = c.intrinsic_dim;
    b.warmup = c.warmup;
    b.width_scale = c.width_scale;
    b.delta = c.delta;
    b.horizon = c.horizon;
    b.rng_seed = seed;
    return b;
}

struct SeedRunResult {
    std::uint64_t seed = 0;
    ExperimentTrace trace;
    RegretCurve curve;
    std::shared_ptr<Policy> frozen;
    std::vector<MetricRow> rows;
};

// Fresh contexts from a stream the training run never touches.
inline std::vector<ContextPoint> fresh_test_contexts(const ExperimentConfig& c,
                                                     std::uint64_t seed, std::int64_t count) {
    auto env = make_environment(c, derive_seed(seed, "test-contexts"));
    std::vector<ContextPoint> out;
    out.reserve(count);
    for (std::int64_t i = 0; i < count; ++i) out.push_back(env->next_context());
    return out;
}

inline SeedRunResult run_single_seed(const ExperimentConfig& c, std::uint64_t seed) {
    auto env = make_environment(c, seed);
    const BanditConfig bandit = bandit_config_for(c, *env, seed);
    const std::string scen = c.scenario.empty() ? "dataset" : c.scenario;

    SeedRunResult out;
    out.seed = seed;
    switch (c.method) {
        case Method::knn_uniform: {
            auto res = uniform_sampling_run(*env, bandit, c.k);
            out.trace = std::move(res.trace);
            out.frozen = std::make_shared<KnnPolicy>(res.policy());
            break;
        }
        case Method::knn_ucb: {
            auto res = run_knn_ucb(*env, bandit, c.k);
            out.trace = std::move(res.trace);
            out.frozen = std::make_shared<KnnPolicy>(res.policy());
            break;
        }
        case Method::ridge_uniform: {
            auto res = run_ridge_uniform(*env, bandit, c.l2_alpha);
            out.trace = std::move(res.trace);
            out.frozen = std::make_shared<RidgePolicy>(res.policy());
            break;
        }
        case Method::linucb: {
            auto res = run_linucb(*env, bandit, c.l2_alpha, c.linucb_confidence);
            out.trace = std::move(res.trace);
            out.frozen = std::make_shared<RidgePolicy>(res.policy());
            break;
        }
    }
    out.curve = cumulative_regret(out.trace);

    const auto add = [&](const std::string& metric, double value) {
        out.rows.push_back(MetricRow{metric, scen, to_string(c.method), c.horizon, value, seed});
    };
    add("final_regret", out.curve.final_regret());
    add("avg_regret", out.curve.final_regret() / static_cast<double>(out.trace.size()));
    const ExponentFit fit = regret_exponent(out.curve);
    add("regret_exponent", fit.degenerate ? 0.0 : fit.slope);

    if (!c.uses_dataset()) {
        const auto test = fresh_test_contexts(c, seed, c.test_contexts);
        auto truth_env = make_environment(c, seed);
        add("top_arm_error", top_arm_error(*out.frozen, *truth_env, test));
        add("epsilon_gap", epsilon_optimality_gap(*out.frozen, *truth_env, test));
    }
    {
        auto eval_env = make_environment(c, derive_seed(seed, "test-pass"));
        add("test_regret", test_regret(*out.frozen, *eval_env, c.test_contexts));
    }
    return out;
}

// Runs one lambda per index on a small worker pool; rethrows the first
// failure after all workers join.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers =
        std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

struct RunOutputs {
    std::vector<SeedRunResult> seeds;
    std::vector<MetricRow> rows;
    std::filesystem::path directory;
};

// Executes the configured run for every seed and writes the report files:
// per-seed trace and regret-curve CSVs, one metrics CSV, per-arm region CSVs
// when a topology radius is configured, and a manifest that reproduces the
// run byte-for-byte when passed back as the config file.
inline RunOutputs run_experiment(const ExperimentConfig& config) {
    config.validate();
    const std::filesystem::path dir(config.output_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        throw data_error("cannot create output directory: " + dir.string());
    }

    RunOutputs out;
    out.directory = dir;
    out.seeds.resize(config.seeds.size());
    parallel_for(config.seeds.size(), [&](std::size_t i) {
        out.seeds[i] = run_single_seed(config, config.seeds[i]);
    });

    for (std::size_t i = 0; i < out.seeds.size(); ++i) {
        SeedRunResult& res = out.seeds[i];
        const std::string tag = "_seed" + std::to_string(res.seed);
        write_trace_csv(res.trace, (dir / ("trace" + tag + ".csv")).string());
        write_regret_curve_csv(res.curve, (dir / ("regret_curve" + tag + ".csv")).string());
        if (config.topology_radius) {
            std::vector<ContextPoint> grid;
            grid.reserve(static_cast<std::size_t>(config.topology_grid) * config.topology_grid);
            for (int gy = 0; gy < config.topology_grid; ++gy) {
                for (int gx = 0; gx < config.topology_grid; ++gx) {
                    grid.push_back(ContextPoint{(gx + 0.5) / config.topology_grid,
                                                (gy + 0.5) / config.topology_grid});
                }
            }
            for (int arm = 0; arm < res.frozen->num_arms(); ++arm) {
                const auto vertices = select_top_vertices(*res.frozen, grid, arm);
                const RegionEstimate regions =
                    connected_components(vertices, *config.topology_radius, arm);
                write_region_csv(regions, (dir / ("regions_arm" + std::to_string(arm) + tag +
                                                  ".csv"))
                                              .string());
                res.rows.push_back(MetricRow{"region_components_arm" + std::to_string(arm),
                                             config.scenario, to_string(config.method),
                                             config.horizon,
                                             static_cast<double>(regions.component_count()),
                                             res.seed});
            }
        }
        out.rows.insert(out.rows.end(), res.rows.begin(), res.rows.end());
    }
    write_metrics_csv(out.rows, (dir / "metrics.csv").string());
    {
        std::ofstream os(dir / "manifest.cfg");
        if (!os) throw data_error("cannot write manifest");
        write_config_kv(to_kv(config), os);
    }
    return out;
}

struct CompareReport {
    std::vector<MetricRow> rows_a, rows_b;
    int wins_a = 0;  // seeds where A's final regret is strictly lower
    int wins_b = 0;
    int ties = 0;
    std::filesystem::path directory;
};

// Paired comparison: both configs run with identical seed lists, hence
// identical context and noise streams, and the report counts per-seed
// regret wins.
inline CompareReport compare_experiments(ExperimentConfig a, ExperimentConfig b) {
    a.validate();
    b.validate();
    if (a.scenario != b.scenario || a.dataset_images != b.dataset_images) {
        throw validation_error("compare requires matching scenario or dataset");
    }
    if (a.horizon != b.horizon) throw validation_error("compare requires matching horizons");
    if (a.seeds != b.seeds) throw validation_error("compare requires matching seed lists");
    if (a.noise_sigma != b.noise_sigma) {
        throw validation_error("compare requires matching noise levels");
    }

    const std::filesystem::path dir(a.output_dir);
    std::filesystem::create_directories(dir);

    std::vector<SeedRunResult> ra(a.seeds.size()), rb(b.seeds.size());
    parallel_for(a.seeds.size() * 2, [&](std::size_t j) {
        const std::size_t i = j / 2;
        if (j % 2 == 0) {
            ra[i] = run_single_seed(a, a.seeds[i]);
        } else {
            rb[i] = run_single_seed(b, b.seeds[i]);
        }
    });

    CompareReport report;
    report.directory = dir;
    std::ofstream os(dir / "comparison.csv");
    if (!os) throw data_error("cannot write comparison report");
    os << "seed,metric,scenario,T," << to_string(a.method) << ',' << to_string(b.method)
       << ",winner\n";
    const std::string scen = a.scenario.empty() ? "dataset" : a.scenario;
    for (std::size_t i = 0; i < a.seeds.size(); ++i) {
        const double fa = ra[i].curve.final_regret();
        const double fb = rb[i].curve.final_regret();
        const char* winner = fa < fb ? to_string(a.method)
                                     : (fb < fa ? to_string(b.method) : "tie");
        if (fa < fb) {
            ++report.wins_a;
        } else if (fb < fa) {
            ++report.wins_b;
        } else {
            ++report.ties;
        }
        os << a.seeds[i] << ",final_regret," << scen << ',' << a.horizon << ','
           << detail::format_double(fa) << ',' << detail::format_double(fb) << ',' << winner
           << '\n';
        report.rows_a.insert(report.rows_a.end(), ra[i].rows.begin(), ra[i].rows.end());
        report.rows_b.insert(report.rows_b.end(), rb[i].rows.begin(), rb[i].rows.end());
    }
    write_metrics_csv(report.rows_a,
                      (dir / ("metrics_" + std::string(to_string(a.method)) + ".csv")).string());
    write_metrics_csv(report.rows_b,
                      (dir / ("metrics_" + std::string(to_string(b.method)) + ".csv")).string());
    return report;
}

}  // namespace knnbandit
