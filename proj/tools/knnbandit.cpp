// Command-line harness for the nonparametric contextual bandit library:
// runs experiments, paired method comparisons, top-arm region recovery, and
// dataset fetching.

#include "knnbandit/experiment.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitDataError = 2;
constexpr int kExitCheckFailed = 3;

std::string default_output_dir() {
    const char* env = std::getenv("KNNBANDIT_OUT");
    return env ? env : "out";
}

struct ConfigFlags {
    std::string config_file;
    std::string scenario;
    std::string dataset_images, dataset_labels;
    std::size_t dataset_limit = 0;
    std::string method;
    std::int64_t horizon = -1;
    int ambient_dim = -1;
    int intrinsic_dim = -1;
    int warmup = -1;
    double width_scale = -1.0;
    double delta = -1.0;
    std::int64_t k = -1;
    double topology_radius = -1.0;
    int topology_grid = -1;
    double noise_sigma = -1.0;
    double l2_alpha = -1.0;
    double linucb_confidence = -1.0;
    std::int64_t test_contexts = -1;
    std::string out_dir;
    std::vector<std::uint64_t> seeds;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f) {
    cmd->add_option("--config", f.config_file, "key=value config file (flags win)");
    cmd->add_option("--scenario", f.scenario,
                    "scenario: quintic, smiley, bullseye, manifold-curve");
    cmd->add_option("--dataset-images", f.dataset_images, "IDX image file");
    cmd->add_option("--dataset-labels", f.dataset_labels, "IDX label file");
    cmd->add_option("--dataset-limit", f.dataset_limit, "use only the first N items");
    cmd->add_option("--T,--horizon", f.horizon, "total number of steps");
    cmd->add_option("--ambient-dim", f.ambient_dim, "ambient context dimension");
    cmd->add_option("--intrinsic-dim,-d", f.intrinsic_dim,
                    "intrinsic dimension used by the k rule and widths");
    cmd->add_option("--M0,--warmup", f.warmup, "warmup pulls per arm");
    cmd->add_option("--M1,--width-scale", f.width_scale, "confidence width scale");
    cmd->add_option("--delta", f.delta, "confidence level");
    cmd->add_option("--k", f.k, "fixed neighbor count (default: the n^(2/(2+d)) rule)");
    cmd->add_option("--topology-R", f.topology_radius, "emit region CSVs at this graph radius");
    cmd->add_option("--topology-grid", f.topology_grid, "vertex grid side for region recovery");
    cmd->add_option("--noise-sigma", f.noise_sigma, "reward noise standard deviation");
    cmd->add_option("--l2-alpha", f.l2_alpha, "ridge regularization strength");
    cmd->add_option("--linucb-confidence", f.linucb_confidence, "LinUCB exploration coefficient");
    cmd->add_option("--test-contexts", f.test_contexts, "evaluation sample size");
    cmd->add_option("--out", f.out_dir, "output directory (or $KNNBANDIT_OUT)");
    cmd->add_option("--seed,--seeds", f.seeds, "seeds (repeatable or comma separated)")
        ->delimiter(',');
}

knnbandit::ExperimentConfig resolve_config(const ConfigFlags& f, bool need_method) {
    knnbandit::ExperimentConfig c;
    c.output_dir = default_output_dir();
    if (!f.config_file.empty()) c = knnbandit::config_from_file(f.config_file);
    if (!f.scenario.empty()) c.scenario = f.scenario;
    if (!f.dataset_images.empty()) c.dataset_images = f.dataset_images;
    if (!f.dataset_labels.empty()) c.dataset_labels = f.dataset_labels;
    if (f.dataset_limit > 0) c.dataset_limit = f.dataset_limit;
    if (need_method && !f.method.empty()) c.method = knnbandit::method_from_string(f.method);
    if (f.horizon >= 0) c.horizon = f.horizon;
    if (f.ambient_dim >= 0) c.ambient_dim = f.ambient_dim;
    if (f.intrinsic_dim >= 0) c.intrinsic_dim = f.intrinsic_dim;
    if (f.warmup >= 0) c.warmup = f.warmup;
    if (f.width_scale >= 0.0) c.width_scale = f.width_scale;
    if (f.delta >= 0.0) c.delta = f.delta;
    if (f.k >= 0) c.k = static_cast<std::size_t>(f.k);
    if (f.topology_radius >= 0.0) c.topology_radius = f.topology_radius;
    if (f.topology_grid >= 0) c.topology_grid = f.topology_grid;
    if (f.noise_sigma >= 0.0) c.noise_sigma = f.noise_sigma;
    if (f.l2_alpha >= 0.0) c.l2_alpha = f.l2_alpha;
    if (f.linucb_confidence >= 0.0) c.linucb_confidence = f.linucb_confidence;
    if (f.test_contexts >= 0) c.test_contexts = f.test_contexts;
    if (!f.out_dir.empty()) c.output_dir = f.out_dir;
    if (!f.seeds.empty()) c.seeds = f.seeds;
    return c;
}

int cmd_run(const ConfigFlags& flags, const std::string& method) {
    knnbandit::ExperimentConfig c = resolve_config(flags, false);
    if (!method.empty()) c.method = knnbandit::method_from_string(method);
    const auto outputs = knnbandit::run_experiment(c);
    std::cout << "wrote " << outputs.rows.size() << " metric rows to "
              << (outputs.directory / "metrics.csv").string() << "\n";
    for (const auto& seed_res : outputs.seeds) {
        std::cout << "  seed " << seed_res.seed
                  << ": final regret " << seed_res.curve.final_regret() << "\n";
    }
    return kExitOk;
}

int cmd_compare(const ConfigFlags& flags, const std::string& method_a,
                const std::string& method_b, bool check) {
    knnbandit::ExperimentConfig a = resolve_config(flags, false);
    a.method = knnbandit::method_from_string(method_a);
    knnbandit::ExperimentConfig b = a;
    b.method = knnbandit::method_from_string(method_b);
    const auto report = knnbandit::compare_experiments(a, b);
    std::cout << method_a << " wins " << report.wins_a << ", " << method_b << " wins "
              << report.wins_b << ", ties " << report.ties << " (report in "
              << (report.directory / "comparison.csv").string() << ")\n";
    if (check && report.wins_a <= report.wins_b) {
        std::cerr << "check failed: " << method_a << " did not win the majority of seeds\n";
        return kExitCheckFailed;
    }
    return kExitOk;
}

int cmd_topology(const ConfigFlags& flags, int arm_label) {
    knnbandit::ExperimentConfig c = resolve_config(flags, false);
    c.method = knnbandit::Method::knn_uniform;
    if (!c.topology_radius) {
        throw knnbandit::validation_error("topology requires --topology-R");
    }
    const auto outputs = knnbandit::run_experiment(c);
    // Arms are 0-indexed in file names and metric keys; printed labels are
    // 1-indexed.
    const std::string prefix = "region_components_arm";
    for (const auto& seed_res : outputs.seeds) {
        for (const auto& row : seed_res.rows) {
            if (row.metric.rfind(prefix, 0) != 0) continue;
            const int arm = std::stoi(row.metric.substr(prefix.size()));
            if (arm_label > 0 && arm != arm_label - 1) continue;
            std::cout << "seed " << seed_res.seed << " arm " << arm + 1 << ": "
                      << static_cast<int>(row.value) << " components\n";
        }
    }
    std::cout << "region CSVs in " << outputs.directory.string() << "\n";
    return kExitOk;
}

// The canonical MNIST files, gzipped IDX. Lengths are verified after
// inflation via the IDX headers.
int cmd_fetch(const std::string& name, const std::string& out_dir, std::string base_url) {
    if (name != "mnist") {
        throw knnbandit::validation_error("unknown dataset: " + name + " (supported: mnist)");
    }
    std::filesystem::create_directories(out_dir);
    std::string host = base_url;
    std::string prefix;
    if (host.rfind("http://", 0) == 0) host = host.substr(7);
    const auto slash = host.find('/');
    if (slash != std::string::npos) {
        prefix = host.substr(slash);
        host = host.substr(0, slash);
    }
    const char* files[] = {"train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                           "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"};
    httplib::Client client(host);
    client.set_follow_location(true);
    for (const char* file : files) {
        const std::string url = prefix + "/" + file + ".gz";
        std::cout << "fetching http://" << host << url << "\n";
        auto res = client.Get(url);
        if (!res || res->status != 200) {
            throw knnbandit::data_error("download failed for " + url +
                                        (res ? " (status " + std::to_string(res->status) + ")"
                                             : " (no response)"));
        }
        const std::vector<std::uint8_t> raw(res->body.begin(), res->body.end());
        const std::vector<std::uint8_t> bytes = knnbandit::gunzip(raw);
        const std::string path = out_dir + "/" + file;
        if (std::string(file).find("images") != std::string::npos) {
            knnbandit::write_idx_images(knnbandit::parse_idx_images(bytes, file), path);
        } else {
            knnbandit::write_idx_labels(knnbandit::parse_idx_labels(bytes, file), path);
        }
        std::cout << "  verified and wrote " << path << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"nonparametric contextual bandit experiment harness"};
    app.require_subcommand(1);

    ConfigFlags flags;
    std::string method, method_a, method_b;
    bool check = false;
    int arm = -1;
    std::string fetch_name = "mnist", fetch_out = "data/mnist";
    std::string fetch_url = "http://yann.lecun.com/exdb/mnist";

    CLI::App* run = app.add_subcommand("run", "run one method and write report files");
    add_config_flags(run, flags);
    run->add_option("--method", method, "knn-uniform, knn-ucb, ridge-uniform, linucb");

    CLI::App* compare = app.add_subcommand("compare", "paired comparison of two methods");
    add_config_flags(compare, flags);
    compare->add_option("--method-a", method_a, "first method")->required();
    compare->add_option("--method-b", method_b, "second method")->required();
    compare->add_flag("--check", check, "exit 3 unless method-a wins the majority of seeds");

    CLI::App* topology = app.add_subcommand("topology", "recover top-arm regions");
    add_config_flags(topology, flags);
    topology->add_option("--arm", arm, "report a single arm by 1-indexed label (default: all)");

    CLI::App* dataset = app.add_subcommand("dataset", "dataset utilities");
    CLI::App* fetch = dataset->add_subcommand("fetch", "download and verify a dataset");
    fetch->add_option("--name", fetch_name, "dataset name (mnist)");
    fetch->add_option("--out", fetch_out, "destination directory");
    fetch->add_option("--base-url", fetch_url, "mirror base URL (http)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(flags, method);
        if (compare->parsed()) return cmd_compare(flags, method_a, method_b, check);
        if (topology->parsed()) return cmd_topology(flags, arm);
        if (dataset->parsed() && fetch->parsed()) return cmd_fetch(fetch_name, fetch_out, fetch_url);
        std::cerr << "no subcommand given\n";
        return kExitConfigError;
    } catch (const knnbandit::validation_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const knnbandit::data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitDataError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDataError;
    }
}
