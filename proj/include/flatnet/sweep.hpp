#pragma once

// Experiment configuration and the multi-seed sweep over the SGD controls.
// Runs are independent; results are collected in grid x seed order so the
// report does not depend on how many worker threads ran it.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "flatnet/data.hpp"
#include "flatnet/errors.hpp"
#include "flatnet/metrics.hpp"
#include "flatnet/net.hpp"
#include "flatnet/report.hpp"
#include "flatnet/train.hpp"

namespace flatnet {

struct CsvSource {
    std::string path;
    ColumnRef column;
};

/// How to build the windowed dataset of an experiment.
struct DatasetSpec {
    std::string kind = "noisy-sine";  ///< gaussian-noise | noisy-sine | csv
    std::size_t count = 101;
    double noise = 0.1;  ///< c of the noisy sine
    std::uint64_t seed = 1;
    std::vector<CsvSource> files;
    bool returns = false;
    std::size_t window = 5;
    double split = 0.7;
    bool normalize = false;

    std::vector<Series> load_series() const {
        std::vector<Series> s;
        if (kind == "gaussian-noise") {
            s.push_back(gen_gaussian_noise(count, seed));
        } else if (kind == "noisy-sine") {
            s.push_back(gen_noisy_sine(count, noise, seed));
        } else if (kind == "csv") {
            if (files.empty()) throw InvalidArgument("csv dataset needs at least one file");
            for (const auto& f : files) s.push_back(load_csv(f.path, f.column));
        } else {
            throw InvalidArgument("unknown dataset kind '" + kind + "'");
        }
        if (returns)
            for (auto& x : s) x = to_returns(x);
        return s;
    }

    WindowedDataset build() const {
        const auto s = load_series();
        return flatnet::window(std::span<const Series>(s), window, split, normalize);
    }
};

struct ExperimentConfig {
    DatasetSpec dataset;
    std::vector<std::size_t> hidden_widths{100};
    Activation activation = Activation::tanh;
    std::vector<double> learning_rates{0.05};
    std::vector<std::optional<std::size_t>> batch_sizes{std::nullopt};
    std::vector<std::size_t> iterations{1000};
    std::vector<std::uint64_t> seeds;
    LossKind loss = LossKind::mse;
    bool normalize_gradient = false;
    bool with_replacement = false;
    MetricToggles metrics{};
    std::string output_dir = "sweep-out";

    std::vector<GridPoint> grid() const {
        std::vector<GridPoint> g;
        for (double lr : learning_rates)
            for (const auto& m : batch_sizes)
                for (auto n : iterations) g.push_back({lr, m, n});
        return g;
    }

    void validate() const {
        if (learning_rates.empty() || batch_sizes.empty() || iterations.empty())
            throw InvalidArgument("experiment grid is empty");
        if (seeds.empty()) throw InvalidArgument("experiment needs at least one seed");
        for (double lr : learning_rates)
            if (!(lr > 0.0)) throw InvalidArgument("learning rates must be positive");
        for (auto n : iterations)
            if (n < 1) throw InvalidArgument("iteration counts must be >= 1");
        for (const auto& m : batch_sizes)
            if (m && *m < 1) throw InvalidArgument("batch sizes must be >= 1");
        for (const auto& f : dataset.files)
            if (!std::filesystem::exists(f.path)) throw IoError("dataset file '" + f.path + "' does not exist");
    }
};

inline constexpr std::size_t default_seed_count = 20;

namespace detail {

inline std::optional<std::size_t> parse_batch(const nlohmann::json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "full") return std::nullopt;
        throw InvalidArgument("batch size must be a positive integer or \"full\"");
    }
    return j.get<std::size_t>();
}

}  // namespace detail

/// Parses an experiment document. Relative CSV paths resolve against base_dir.
inline ExperimentConfig parse_experiment(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    ExperimentConfig c;
    try {
        const auto& d = j.at("dataset");
        auto& ds = c.dataset;
        ds.kind = d.at("kind").get<std::string>();
        ds.count = d.value("count", ds.count);
        ds.noise = d.value("c", ds.noise);
        ds.seed = d.value("seed", ds.seed);
        ds.returns = d.value("returns", ds.returns);
        ds.window = d.value("window", ds.window);
        ds.split = d.value("split", ds.split);
        ds.normalize = d.value("normalize", ds.normalize);
        if (d.contains("files"))
            for (const auto& f : d.at("files")) {
                std::filesystem::path p = f.at("path").get<std::string>();
                if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
                const auto& col = f.at("column");
                ColumnRef ref = col.is_string() ? ColumnRef(col.get<std::string>()) : ColumnRef(col.get<std::size_t>());
                ds.files.push_back({p.string(), ref});
            }

        if (j.contains("architecture")) {
            const auto& a = j.at("architecture");
            c.hidden_widths = a.value("hidden", c.hidden_widths);
            if (a.contains("activation")) c.activation = parse_activation(a.at("activation").get<std::string>());
        }
        const auto& g = j.at("grid");
        c.learning_rates = g.value("learning_rate", c.learning_rates);
        if (g.contains("batch_size")) {
            c.batch_sizes.clear();
            for (const auto& b : g.at("batch_size")) c.batch_sizes.push_back(detail::parse_batch(b));
        }
        c.iterations = g.value("iterations", c.iterations);

        if (j.contains("seeds")) {
            c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        } else {
            const auto n = j.value("seed_count", default_seed_count);
            for (std::size_t s = 0; s < n; ++s) c.seeds.push_back(s);
        }
        if (j.contains("loss")) c.loss = parse_loss(j.at("loss").get<std::string>());
        c.normalize_gradient = j.value("normalize_gradient", false);
        c.with_replacement = j.value("with_replacement", false);
        if (j.contains("metrics")) {
            const auto& m = j.at("metrics");
            c.metrics.input_hessian = m.value("input_hessian", c.metrics.input_hessian);
            c.metrics.weight_hessian = m.value("weight_hessian", c.metrics.weight_hessian);
            c.metrics.scaled_quadform = m.value("scaled_quadform", c.metrics.scaled_quadform);
            c.metrics.hit_rate = m.value("hit_rate", c.metrics.hit_rate);
        }
        c.output_dir = j.value("output_dir", c.output_dir);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("invalid experiment config: ") + e.what());
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_experiment(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open experiment config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("cannot parse experiment config '" + path + "': " + e.what());
    }
    return parse_experiment(j, std::filesystem::path(path).parent_path());
}

/// Seed of the SGD sampler for a run; decorrelated from the init seed.
inline std::uint64_t sampler_seed(std::uint64_t seed) { return seed ^ 0x9E3779B97F4A7C15ULL; }

/// One (grid point, seed) run: init, train, evaluate. Divergence and other
/// library errors become failed records.
inline RunRecord run_one(const ExperimentConfig& c, const WindowedDataset& data, const GridPoint& p,
                         std::uint64_t seed) {
    RunRecord r{p, seed, "ok", "", std::nullopt};
    try {
        const Architecture arch{data.input_width(), c.hidden_widths, c.activation};
        TrainConfig tc;
        tc.learning_rate = p.learning_rate;
        tc.batch_size = p.batch_size;
        tc.iterations = p.iterations;
        tc.loss = c.loss;
        tc.normalize_gradient = c.normalize_gradient;
        tc.with_replacement = c.with_replacement;
        tc.seed = sampler_seed(seed);
        const auto trace = sgd_train(init(arch, seed), data, tc);
        auto m = evaluate(trace.network, data, c.loss, c.metrics);
        m.seed = seed;
        m.learning_rate = p.learning_rate;
        m.batch_size = p.batch_size.value_or(0);
        m.iterations = p.iterations;
        r.metrics = std::move(m);
    } catch (const DivergenceError& e) {
        r.status = "diverged";
        r.message = e.what();
    } catch (const Error& e) {
        r.status = "error";
        r.message = e.what();
    }
    return r;
}

/// Runs every (grid point, seed) pair on `parallel` worker threads.
inline SweepReport run_sweep(const ExperimentConfig& c, std::size_t parallel = 1) {
    c.validate();
    const auto data = c.dataset.build();
    const auto grid = c.grid();
    struct Task {
        GridPoint point;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (const auto& p : grid)
        for (auto s : c.seeds) tasks.push_back({p, s});

    SweepReport rep;
    rep.layer_count = c.hidden_widths.size() + 1;
    rep.records.resize(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < tasks.size();)
            rep.records[i] = run_one(c, data, tasks[i].point, tasks[i].seed);
    };
    const std::size_t threads = std::clamp<std::size_t>(parallel, 1, tasks.size());
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (rep.ok_count() == 0) throw Error("all " + std::to_string(tasks.size()) + " sweep runs failed");
    return rep;
}

}  // namespace flatnet
