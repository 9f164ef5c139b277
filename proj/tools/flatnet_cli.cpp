// flatnet command-line front end: gen, train, sweep, probe, entropy, spectrum.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "flatnet/flatnet.hpp"

namespace fs = std::filesystem;
using namespace flatnet;

namespace {

// Dataset flags shared by train, probe and spectrum.
struct DataFlags {
    DatasetSpec spec;
    std::vector<std::string> csv_paths;
    std::vector<std::string> csv_columns;

    void attach(CLI::App* app) {
        app->add_option("--data", spec.kind, "Dataset kind")
            ->check(CLI::IsMember({"gaussian-noise", "noisy-sine", "csv"}))
            ->capture_default_str();
        app->add_option("--count", spec.count, "Generated series length")->capture_default_str();
        app->add_option("--c", spec.noise, "Noise coefficient of the noisy sine")->capture_default_str();
        app->add_option("--data-seed", spec.seed, "Seed of the generated series")->capture_default_str();
        app->add_option("--csv", csv_paths, "CSV file (repeat for several series; first is the target)");
        app->add_option("--column", csv_columns, "Column name, or 0-based index, per --csv file");
        app->add_flag("--returns", spec.returns, "Convert series to simple returns");
        app->add_option("--window", spec.window, "History length per series")->capture_default_str();
        app->add_option("--split", spec.split, "Training fraction")->capture_default_str();
        app->add_flag("--normalize", spec.normalize, "Standardize with training statistics");
    }

    DatasetSpec resolve() {
        if (!csv_paths.empty()) {
            spec.kind = "csv";
            if (csv_columns.size() != csv_paths.size())
                throw InvalidArgument("give one --column per --csv file");
            spec.files.clear();
            for (std::size_t i = 0; i < csv_paths.size(); ++i)
                spec.files.push_back({csv_paths[i], parse_column(csv_columns[i])});
        }
        return spec;
    }

    static ColumnRef parse_column(const std::string& s) {
        if (!s.empty() && s.find_first_not_of("0123456789") == std::string::npos) return ColumnRef(std::stoul(s));
        return ColumnRef(s);
    }
};

std::optional<std::size_t> parse_batch_flag(const std::string& s) {
    if (s == "full") return std::nullopt;
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
        v = std::stoul(s, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != s.size() || v == 0) throw InvalidArgument("batch size must be a positive integer or 'full', got '" + s + "'");
    return v;
}

std::string trace_csv(const TrainTrace& t) {
    const std::size_t layers = t.network.layer_count();
    std::ostringstream out;
    out << "iteration,train_loss,tr_hx,jac_fro,tr_hw_total";
    for (std::size_t l = 1; l <= layers; ++l) out << ",tr_hw_layer_" << l;
    out << '\n';
    for (const auto& r : t.records) {
        out << r.iteration << ',' << format_real(r.train_loss);
        if (r.snapshot) {
            const auto& s = *r.snapshot;
            out << ',' << detail::format_opt(s.tr_input_hessian) << ',' << format_real(s.jacobian_frobenius) << ','
                << detail::format_opt(s.tr_weight_hessian_total);
            for (std::size_t l = 0; l < layers; ++l)
                out << ',' << (l < s.tr_weight_hessian_per_layer.size() ? format_real(s.tr_weight_hessian_per_layer[l]) : "");
        } else {
            out << ",,,";
            for (std::size_t l = 0; l < layers; ++l) out << ',';
        }
        out << '\n';
    }
    return out.str();
}

nlohmann::json metrics_json(const MetricsReport& m) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json per_layer = nlohmann::json::array();
    for (const auto& v : m.tr_weight_hessian_per_layer) per_layer.push_back(opt(v));
    return {{"seed", m.seed},
            {"eta", m.learning_rate},
            {"batch", m.batch_size == 0 ? nlohmann::json("full") : nlohmann::json(m.batch_size)},
            {"iters", m.iterations},
            {"train_loss", m.train_loss},
            {"test_loss", m.test_loss},
            {"gap", m.gap},
            {"tr_hx", opt(m.tr_input_hessian)},
            {"jac_fro", m.jacobian_frobenius},
            {"tr_hw_total", opt(m.tr_weight_hessian_total)},
            {"tr_hw_layer", per_layer},
            {"scaled_quadform", opt(m.scaled_quadform)},
            {"hit_rate", opt(m.hit_rate)}};
}

int run_gen(const std::string& kind, std::size_t count, double c, std::uint64_t seed, const std::string& out) {
    const Series s = kind == "gaussian-noise" ? gen_gaussian_noise(count, seed) : gen_noisy_sine(count, c, seed);
    std::ostringstream text;
    text << "t,value\n";
    for (std::size_t i = 0; i < s.size(); ++i) text << i << ',' << format_real(s[i]) << '\n';
    if (out == "-")
        std::cout << text.str();
    else
        write_text(out, text.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flatnet: curvature and generalization experiments for small forecasting MLPs"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    // gen
    auto* gen = app.add_subcommand("gen", "Synthesize a series and write it as CSV (t,value)");
    std::string gen_kind = "noisy-sine", gen_out = "-";
    std::size_t gen_count = 101;
    double gen_c = 0.1;
    std::uint64_t gen_seed = 0;
    gen->add_option("--kind", gen_kind, "Series kind")
        ->check(CLI::IsMember({"gaussian-noise", "noisy-sine"}))
        ->capture_default_str();
    gen->add_option("--count", gen_count, "Number of points")->capture_default_str();
    gen->add_option("--c", gen_c, "Noise coefficient of the noisy sine")->capture_default_str();
    gen->add_option("--seed", gen_seed, "Random seed")->capture_default_str();
    gen->add_option("-o,--out", gen_out, "Output path, '-' for stdout")->capture_default_str();

    // train
    auto* train = app.add_subcommand("train", "Train one network; write trace.csv, metrics.json, network.json");
    DataFlags train_data;
    train_data.attach(train);
    std::vector<std::size_t> train_hidden{100};
    std::string train_act = "tanh", train_loss = "mse", train_batch = "full", train_out = "train-out";
    double train_lr = 0.05;
    std::size_t train_iters = 1000, train_snap = 0;
    std::uint64_t train_seed = 0;
    bool train_norm_grad = false, train_replace = false, train_hit = false;
    train->add_option("--hidden", train_hidden, "Hidden layer widths")->capture_default_str();
    train->add_option("--activation", train_act, "tanh, relu or linear")->capture_default_str();
    train->add_option("--loss", train_loss, "mse or mae")->capture_default_str();
    train->add_option("--lr", train_lr, "Learning rate")->capture_default_str();
    train->add_option("--batch", train_batch, "Batch size or 'full'")->capture_default_str();
    train->add_option("--iterations", train_iters, "SGD iterations")->capture_default_str();
    train->add_option("--snapshot-every", train_snap, "Curvature snapshot interval (0: none)")->capture_default_str();
    train->add_option("--seed", train_seed, "Initialization seed (the sampler seed is derived from it)")
        ->capture_default_str();
    train->add_flag("--normalize-gradient", train_norm_grad, "Use g/|g| as the update direction");
    train->add_flag("--with-replacement", train_replace, "Sample batches with replacement");
    train->add_flag("--hit-rate", train_hit, "Also report the test hit rate");
    train->add_option("-o,--out-dir", train_out, "Output directory")->capture_default_str();

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Run an experiment config over its grid and seeds");
    std::string sweep_config, sweep_out;
    std::size_t sweep_parallel = 1;
    std::optional<std::uint64_t> sweep_seed;
    std::string sweep_x = "tr_hx", sweep_y = "test_loss";
    sweep->add_option("config", sweep_config, "Experiment config (JSON)")->required();
    sweep->add_option("--parallel", sweep_parallel, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    sweep->add_option("--seed", sweep_seed, "First seed; replaces the config seeds with seed, seed+1, ...");
    sweep->add_option("-o,--out-dir", sweep_out, "Output directory (overrides the config)");
    sweep->add_option("--plot-x", sweep_x, "Scatter x column")->capture_default_str();
    sweep->add_option("--plot-y", sweep_y, "Scatter y column")->capture_default_str();

    // probe
    auto* probe = app.add_subcommand("probe", "Input-noise robustness probe on a saved network");
    DataFlags probe_data;
    probe_data.attach(probe);
    std::string probe_net, probe_loss = "mse", probe_slice = "train";
    double probe_alpha = 0.01;
    bool probe_rel = false;
    std::size_t probe_draws = 1000;
    std::uint64_t probe_seed = 0;
    probe->add_option("--network", probe_net, "Network JSON")->required();
    probe->add_option("--alpha", probe_alpha, "Noise amplitude")->capture_default_str();
    probe->add_flag("--relative", probe_rel, "Scale --alpha by the input standard deviation of the slice");
    probe->add_option("--draws", probe_draws, "Monte-Carlo draws per point")->capture_default_str();
    probe->add_option("--seed", probe_seed, "Noise seed")->capture_default_str();
    probe->add_option("--loss", probe_loss, "mse or mae")->capture_default_str();
    probe->add_option("--slice", probe_slice, "train or test")
        ->check(CLI::IsMember({"train", "test"}))
        ->capture_default_str();

    // entropy
    auto* entropy = app.add_subcommand("entropy", "Expected Hessian entropy and its three terms");
    double e_lambda = 0.0, e_rho = 0.5, e_sigma = 1.0, e_level = 0.0;
    std::size_t e_layers = 0;
    std::string e_arch;
    std::uint64_t e_seed = 0;
    auto* lambda_opt = entropy->add_option("--lambda", e_lambda, "Lambda (> 1)");
    auto* layers_opt = entropy->add_option("--layers", e_layers, "Layer count L (>= 2)");
    auto* arch_opt = entropy->add_option("--arch", e_arch, "Widths n0,n1,...,nL; derives Lambda and L");
    arch_opt->excludes(lambda_opt)->excludes(layers_opt);
    entropy->add_option("--rho", e_rho, "Path activation probability in (0,1)")->capture_default_str();
    entropy->add_option("--sigma", e_sigma, "Scale sigma")->capture_default_str();
    entropy->add_option("--loss-level", e_level, "Loss level E")->capture_default_str();
    entropy->add_option("--seed", e_seed, "Unused; the computation is deterministic");

    // spectrum
    auto* spec = app.add_subcommand("spectrum", "Full weight-Hessian eigenvalues of a saved small network");
    DataFlags spec_data;
    spec_data.attach(spec);
    std::string spec_net, spec_loss = "mse";
    double spec_tol = -1.0;
    std::size_t spec_cap = default_weight_hessian_cap;
    std::uint64_t spec_seed = 0;
    spec->add_option("--network", spec_net, "Network JSON")->required();
    spec->add_option("--tol", spec_tol, "Index tolerance (negative: default)")->capture_default_str();
    spec->add_option("--cap", spec_cap, "Largest parameter count accepted")->capture_default_str();
    spec->add_option("--loss", spec_loss, "mse or mae")->capture_default_str();
    spec->add_option("--seed", spec_seed, "Unused; the computation is deterministic");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "flatnet: " << e.what() << '\n';
        return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
    }

    try {
        if (*gen) return run_gen(gen_kind, gen_count, gen_c, gen_seed, gen_out);

        if (*train) {
            const auto data = train_data.resolve().build();
            const Architecture arch{data.input_width(), train_hidden, parse_activation(train_act)};
            TrainConfig tc;
            tc.learning_rate = train_lr;
            tc.batch_size = parse_batch_flag(train_batch);
            tc.iterations = train_iters;
            tc.loss = parse_loss(train_loss);
            tc.normalize_gradient = train_norm_grad;
            tc.with_replacement = train_replace;
            tc.seed = sampler_seed(train_seed);
            if (train_snap > 0) tc.snapshot_every = train_snap;
            const auto trace = sgd_train(init(arch, train_seed), data, tc);
            MetricToggles toggles;
            toggles.hit_rate = train_hit;
            auto m = evaluate(trace.network, data, tc.loss, toggles);
            m.seed = train_seed;
            m.learning_rate = train_lr;
            m.batch_size = tc.batch_size.value_or(0);
            m.iterations = train_iters;
            fs::create_directories(train_out);
            write_text((fs::path(train_out) / "trace.csv").string(), trace_csv(trace));
            write_text((fs::path(train_out) / "metrics.json").string(), metrics_json(m).dump(2) + "\n");
            save_network(trace.network, (fs::path(train_out) / "network.json").string());
            std::cout << "train_loss " << format_real(m.train_loss) << "\ntest_loss " << format_real(m.test_loss)
                      << "\nwrote " << train_out << '\n';
            return 0;
        }

        if (*sweep) {
            auto cfg = load_experiment(sweep_config);
            if (sweep_seed) {
                const auto n = cfg.seeds.size();
                cfg.seeds.clear();
                for (std::size_t i = 0; i < n; ++i) cfg.seeds.push_back(*sweep_seed + i);
            }
            if (!sweep_out.empty()) cfg.output_dir = sweep_out;
            const auto rep = run_sweep(cfg, sweep_parallel);
            const fs::path dir = cfg.output_dir;
            fs::create_directories(dir);
            emit_csv(rep, (dir / "sweep.csv").string());
            emit_json(rep, (dir / "sweep.json").string());
            write_text((dir / "summary.csv").string(), aggregate_csv(aggregate(rep)));
            write_text((dir / "correlations.json").string(), correlation_summary(rep).dump(2) + "\n");
            std::string plot_note;
            try {
                emit_scatter(rep, sweep_x, sweep_y, (dir / (sweep_x + "_vs_" + sweep_y + ".svg")).string());
            } catch (const InvalidArgument& e) {
                plot_note = std::string(" (no plot: ") + e.what() + ")";
            }
            std::cout << rep.ok_count() << " runs ok, " << rep.failure_count() << " failed; wrote " << dir.string()
                      << plot_note << '\n';
            return 0;
        }

        if (*probe) {
            const auto data = probe_data.resolve().build();
            const auto net = load_network(probe_net);
            const auto slice = probe_slice == "train" ? data.train() : data.test();
            const double alpha = probe_rel ? probe_alpha * input_std(slice) : probe_alpha;
            const auto p = noise_robustness_probe(net, slice, parse_loss(probe_loss), alpha, probe_draws, probe_seed);
            std::cout << "alpha " << format_real(p.amplitude) << "\ndraws " << p.draws << "\ndelta_hat "
                      << format_real(p.delta_hat) << "\ntrace_prediction " << format_real(p.trace_prediction)
                      << "\nrelative_gap " << format_real(p.relative_gap) << '\n';
            return 0;
        }

        if (*entropy) {
            EntropyParams p;
            if (!e_arch.empty()) {
                std::vector<std::size_t> w;
                std::stringstream ss(e_arch);
                for (std::string tok; std::getline(ss, tok, ',');) w.push_back(std::stoul(tok));
                if (w.size() < 2 || w.back() != 1) throw InvalidArgument("--arch needs n0,...,1 with a width-1 output");
                const Architecture arch{w.front(), std::vector<std::size_t>(w.begin() + 1, w.end() - 1),
                                        Activation::tanh};
                p.lambda = lambda_from_arch(arch);
                p.layers = arch.layer_count();
            } else {
                if (lambda_opt->count() == 0 || layers_opt->count() == 0)
                    throw InvalidArgument("give --lambda and --layers, or --arch");
                p.lambda = e_lambda;
                p.layers = e_layers;
            }
            p.rho = e_rho;
            p.sigma = e_sigma;
            p.loss_level = e_level;
            const auto b = expected_entropy(p);
            std::cout << "lambda " << format_real(p.lambda) << "\nlayers " << p.layers << "\nt_star "
                      << format_real(b.t_star) << "\nrho_term " << format_real(b.rho_term) << "\nlog_term "
                      << format_real(b.log_term) << "\nintegral_term " << format_real(b.integral_term)
                      << "\nintegral " << format_real(b.integral) << "\nintegral_error " << format_real(b.integral_error)
                      << "\nentropy " << format_real(b.total) << '\n';
            return 0;
        }

        if (*spec) {
            const auto data = spec_data.resolve().build();
            const auto net = load_network(spec_net);
            const auto h = full_weight_hessian(net, Batch(data.train()), parse_loss(spec_loss), spec_cap);
            const auto r = spectrum(h.matrix, spec_tol);
            std::cout << "dimension " << r.eigenvalues.size() << "\nindex " << r.index << "\ntolerance "
                      << format_real(r.tolerance) << "\nsweeps " << r.sweeps << "\nasymmetry "
                      << format_real(h.asymmetry) << "\neigenvalues";
            for (double e : r.eigenvalues) std::cout << ' ' << format_real(e);
            std::cout << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "flatnet: error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
