#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "knnbandit/common.hpp"

namespace knnbandit {

// A D-dimensional context vector. All entries finite, D >= 1.
struct ContextPoint {
    std::vector<double> coords;

    ContextPoint() = default;
    explicit ContextPoint(std::vector<double> c) : coords(std::move(c)) {}
    ContextPoint(std::initializer_list<double> c) : coords(c) {}

    int dim() const { return static_cast<int>(coords.size()); }
    double operator[](std::size_t i) const { return coords[i]; }
    double& operator[](std::size_t i) { return coords[i]; }
    bool operator==(const ContextPoint& o) const { return coords == o.coords; }

    void validate() const {
        if (coords.empty()) throw validation_error("context must have dimension >= 1");
        if (!all_finite(coords)) throw validation_error("context has non-finite coordinate");
    }
};

struct Observation {
    ContextPoint context;
    double reward = 0.0;
    std::int64_t time = 0;  // step index, nonnegative
};

// Per-arm store of (context, reward) pairs; backs that arm's regression.
struct ArmHistory {
    int arm = 0;
    std::vector<Observation> observations;

    std::size_t pull_count() const { return observations.size(); }
};

inline void append_observation(ArmHistory& history, Observation obs) {
    obs.context.validate();
    if (!std::isfinite(obs.reward)) throw validation_error("reward must be finite");
    if (obs.time < 0) throw validation_error("observation time must be nonnegative");
    if (!history.observations.empty()) {
        const Observation& last = history.observations.back();
        if (obs.context.dim() != last.context.dim()) {
            throw validation_error("context dimension mismatch: history has dim " +
                                   std::to_string(last.context.dim()) + ", observation has dim " +
                                   std::to_string(obs.context.dim()));
        }
        if (obs.time <= last.time) {
            throw validation_error("observation times must be strictly increasing");
        }
    }
    history.observations.push_back(std::move(obs));
}

// Policy parameters. Names follow the usual bandit conventions: K arms,
// ambient context dimension D, intrinsic dimension d <= D, warmup pulls M0
// per arm, confidence width scale M1, confidence level delta, horizon T.
struct BanditConfig {
    int num_arms = 2;            // K
    int context_dim = 2;         // D
    int intrinsic_dim = 0;       // d; 0 means "use context_dim"
    int warmup = 25;             // M0
    double width_scale = 1.0;    // M1
    double delta = 0.1;
    std::int64_t horizon = 10000;  // T
    std::uint64_t rng_seed = 1;

    int effective_intrinsic_dim() const {
        return intrinsic_dim > 0 ? intrinsic_dim : context_dim;
    }

    void validate() const {
        if (num_arms < 1) throw validation_error("num_arms must be >= 1");
        if (context_dim < 1) throw validation_error("context_dim must be >= 1");
        if (intrinsic_dim < 0 || effective_intrinsic_dim() > context_dim) {
            throw validation_error("intrinsic_dim must satisfy 1 <= d <= D");
        }
        if (warmup < 1) throw validation_error("warmup must be >= 1");
        if (!(width_scale > 0.0)) throw validation_error("width_scale must be positive");
        if (!(delta > 0.0 && delta < 1.0)) throw validation_error("delta must be in (0,1)");
        if (horizon < 1) throw validation_error("horizon must be >= 1");
        if (static_cast<std::int64_t>(warmup) * num_arms > horizon) {
            throw validation_error("warmup * num_arms must not exceed horizon");
        }
    }
};

struct TraceStep {
    ContextPoint context;
    int arm = 0;
    double reward = 0.0;      // realized (noisy) reward
    double mean_chosen = 0.0;  // true mean of the chosen arm at this context
    double mean_best = 0.0;    // true mean of the best arm at this context
};

// Time-ordered record of a run; row index is the step index t.
struct ExperimentTrace {
    std::vector<TraceStep> steps;

    void append(TraceStep step) {
        if (step.mean_best < step.mean_chosen) {
            throw validation_error("mean_best must be >= mean_chosen");
        }
        steps.push_back(std::move(step));
    }

    std::size_t size() const { return steps.size(); }
};

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

// Trace file format: header `t,context0,...,context{D-1},arm,reward,mean_chosen,mean_best`,
// one row per step. Doubles are written round-trippably.
inline void write_trace_csv(const ExperimentTrace& trace, std::ostream& os) {
    const int dim = trace.steps.empty() ? 0 : trace.steps.front().context.dim();
    os << "t";
    for (int j = 0; j < dim; ++j) os << ",context" << j;
    os << ",arm,reward,mean_chosen,mean_best\n";
    for (std::size_t t = 0; t < trace.steps.size(); ++t) {
        const TraceStep& s = trace.steps[t];
        os << t;
        for (int j = 0; j < dim; ++j) os << ',' << detail::format_double(s.context[j]);
        os << ',' << s.arm << ',' << detail::format_double(s.reward) << ','
           << detail::format_double(s.mean_chosen) << ',' << detail::format_double(s.mean_best)
           << '\n';
    }
}

inline void write_trace_csv(const ExperimentTrace& trace, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw data_error("cannot open trace file for writing: " + path);
    write_trace_csv(trace, os);
}

inline ExperimentTrace read_trace_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw data_error("trace file is empty");
    const auto header = detail::split_csv_line(line);
    if (header.size() < 5 || header.front() != "t") {
        throw data_error("trace file has unrecognized header");
    }
    const int dim = static_cast<int>(header.size()) - 5;
    ExperimentTrace trace;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) {
            throw data_error("trace row " + std::to_string(trace.size()) + " has " +
                             std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(header.size()));
        }
        TraceStep s;
        s.context.coords.resize(dim);
        for (int j = 0; j < dim; ++j) s.context[j] = std::stod(cells[1 + j]);
        s.arm = std::stoi(cells[1 + dim]);
        s.reward = std::stod(cells[2 + dim]);
        s.mean_chosen = std::stod(cells[3 + dim]);
        s.mean_best = std::stod(cells[4 + dim]);
        trace.append(std::move(s));
    }
    return trace;
}

inline ExperimentTrace read_trace_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw data_error("cannot open trace file: " + path);
    return read_trace_csv(is);
}

// History file format mirrors the trace layout without the mean columns:
// `arm` on the first line, then `t,context0,...,reward` rows.
inline void write_history_csv(const ArmHistory& history, std::ostream& os) {
    const int dim =
        history.observations.empty() ? 0 : history.observations.front().context.dim();
    os << "arm," << history.arm << "\nt";
    for (int j = 0; j < dim; ++j) os << ",context" << j;
    os << ",reward\n";
    for (const Observation& o : history.observations) {
        os << o.time;
        for (int j = 0; j < dim; ++j) os << ',' << detail::format_double(o.context[j]);
        os << ',' << detail::format_double(o.reward) << '\n';
    }
}

inline ArmHistory read_history_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw data_error("history file is empty");
    auto cells = detail::split_csv_line(line);
    if (cells.size() != 2 || cells[0] != "arm") {
        throw data_error("history file has unrecognized arm line");
    }
    ArmHistory history;
    history.arm = std::stoi(cells[1]);
    if (!std::getline(is, line)) throw data_error("history file lacks a header");
    const std::size_t columns = detail::split_csv_line(line).size();
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        cells = detail::split_csv_line(line);
        if (cells.size() != columns) throw data_error("history row has wrong cell count");
        Observation o;
        o.time = std::stoll(cells.front());
        o.context.coords.resize(columns - 2);
        for (std::size_t j = 0; j + 2 < columns; ++j) o.context[j] = std::stod(cells[1 + j]);
        o.reward = std::stod(cells[columns - 1]);
        append_observation(history, std::move(o));
    }
    return history;
}

// Flat key=value serialization for configs; '#' starts a comment line.
inline void write_config_kv(const std::vector<std::pair<std::string, std::string>>& kv,
                            std::ostream& os) {
    for (const auto& [k, v] : kv) os << k << '=' << v << '\n';
}

inline std::vector<std::pair<std::string, std::string>> read_config_kv(std::istream& is) {
    std::vector<std::pair<std::string, std::string>> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos || line[start] == '#') continue;
        std::size_t eq = line.find('=', start);
        if (eq == std::string::npos) {
            throw data_error("config line " + std::to_string(lineno) + " is not key=value: " + line);
        }
        std::string key = line.substr(start, eq - start);
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
        kv.emplace_back(key, line.substr(eq + 1));
    }
    return kv;
}

}  // namespace knnbandit
