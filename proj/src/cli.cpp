#include "rdsa/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "rdsa/error.hpp"
#include "rdsa/fingerprint.hpp"
#include "rdsa/model.hpp"
#include "rdsa/pipeline.hpp"
#include "rdsa/rng.hpp"

namespace rdsa::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// stage tags for the global --seed override, one per configurable stream
constexpr std::uint64_t kSeedSynthetic = 1;
constexpr std::uint64_t kSeedSplit = 2;
constexpr std::uint64_t kSeedModel = 3;
constexpr std::uint64_t kSeedRun = 4;

struct CommonOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::size_t workers = 1;
    std::string reuse_model;
};

[[noreturn]] void config_error(const std::string& msg) {
    throw Error(ErrorKind::config, ErrorCode::bad_config, msg);
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* context) {
    if (!j.is_object()) config_error(std::string(context) + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* a) { return key == a; }) == allowed.end())
            config_error("unknown key '" + key + "' in " + context);
    }
}

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::config, ErrorCode::io_failure, "cannot open config " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        config_error("config is not valid JSON: " + std::string(e.what()));
    }
}

Matrix parse_correlation(const json& j, std::size_t f) {
    if (j.is_string()) {
        if (j.get<std::string>() == "identity") return identity_correlation(f);
        config_error("correlation string must be \"identity\"");
    }
    if (j.is_object()) {
        check_keys(j, {"kind", "rho"}, "dataset.correlation");
        if (j.at("kind").get<std::string>() != "equicorrelated")
            config_error("correlation.kind must be \"equicorrelated\"");
        return equicorrelation(f, j.at("rho").get<double>());
    }
    if (j.is_array()) {
        if (j.size() != f) config_error("correlation matrix must have f rows");
        Matrix m(f, f);
        for (std::size_t r = 0; r < f; ++r) {
            const auto& row = j.at(r);
            if (!row.is_array() || row.size() != f)
                config_error("correlation matrix rows must have f entries");
            for (std::size_t c = 0; c < f; ++c) m(r, c) = row.at(c).get<double>();
        }
        return m;
    }
    config_error("correlation must be \"identity\", an equicorrelated spec, or a matrix");
}

DataSpec parse_data_spec(const json& root, const std::optional<std::uint64_t>& seed_override) {
    if (!root.contains("dataset")) config_error("config needs a \"dataset\" section");
    const json& dj = root.at("dataset");

    DataSpec spec;
    const std::string type = dj.value("type", "");
    if (type == "csv") {
        check_keys(dj, {"type", "path", "label_column"}, "dataset");
        CsvSource src;
        src.path = dj.at("path").get<std::string>();
        src.label_column = dj.at("label_column").get<std::string>();
        spec.source = std::move(src);
    } else if (type == "synthetic") {
        check_keys(dj, {"type", "n", "f", "k", "correlation", "class_shift", "seed"}, "dataset");
        SyntheticSource src;
        src.n = dj.at("n").get<std::size_t>();
        src.f = dj.at("f").get<std::size_t>();
        src.k = dj.value("k", 2);
        src.correlation = dj.contains("correlation") ? parse_correlation(dj.at("correlation"), src.f)
                                                     : identity_correlation(src.f);
        if (dj.contains("class_shift")) {
            const json& cs = dj.at("class_shift");
            if (cs.is_number()) {
                src.class_shift.assign(src.f, cs.get<double>());
            } else {
                src.class_shift = cs.get<std::vector<double>>();
            }
        } else {
            src.class_shift.assign(src.f, 1.0);
        }
        src.seed = dj.value("seed", std::uint64_t{0});
        if (seed_override) src.seed = derive_seed(*seed_override, kSeedSynthetic);
        spec.source = std::move(src);
    } else {
        config_error("dataset.type must be \"csv\" or \"synthetic\"");
    }

    if (root.contains("split")) {
        const json& sj = root.at("split");
        check_keys(sj, {"train", "validation", "seed"}, "split");
        spec.train_fraction = sj.value("train", 0.6);
        spec.validation_fraction = sj.value("validation", 0.2);
        spec.split_seed = sj.value("seed", std::uint64_t{0});
    }
    if (seed_override) spec.split_seed = derive_seed(*seed_override, kSeedSplit);

    if (root.contains("preprocess")) {
        const json& pj = root.at("preprocess");
        check_keys(pj, {"zscore", "continuity_threshold"}, "preprocess");
        spec.zscore = pj.value("zscore", true);
        spec.continuity_threshold = pj.value("continuity_threshold", std::size_t{20});
    }
    return spec;
}

ModelConfig parse_model(const json& root, const std::optional<std::uint64_t>& seed_override) {
    if (!root.contains("model")) config_error("config needs a \"model\" section");
    ModelConfig cfg = model_config_from_json(root.at("model"));
    if (seed_override) cfg.init_seed = derive_seed(*seed_override, kSeedModel);
    return cfg;
}

BinningMode parse_binning(const std::string& s) {
    if (s == "equal_width") return BinningMode::equal_width;
    if (s == "equal_population") return BinningMode::equal_population;
    config_error("binning must be \"equal_width\" or \"equal_population\"");
}

void check_top_level(const json& root, std::initializer_list<const char*> extra) {
    std::vector<const char*> allowed = {"dataset", "split", "preprocess", "model"};
    allowed.insert(allowed.end(), extra.begin(), extra.end());
    for (const auto& [key, value] : root.items()) {
        (void)value;
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* a) { return key == a; }) == allowed.end())
            config_error("unknown top-level key '" + key + "'");
    }
}

AttackSweepSpec parse_attack_spec(const json& root, const CommonOptions& opts) {
    check_top_level(root, {"attack", "augment"});
    AttackSweepSpec spec;
    spec.data = parse_data_spec(root, opts.seed);
    spec.model = parse_model(root, opts.seed);

    if (!root.contains("attack")) config_error("config needs an \"attack\" section");
    const json& aj = root.at("attack");
    check_keys(aj,
               {"n_vars_grid", "max_attempts", "bins", "binning", "runs", "seed", "scope",
                "reselect_vars_per_attempt", "persist_adversaries"},
               "attack");
    spec.n_vars_grid = aj.at("n_vars_grid").get<std::vector<std::size_t>>();
    spec.max_attempts = aj.value("max_attempts", std::size_t{100});
    spec.bins = aj.value("bins", std::size_t{1000});
    spec.binning = parse_binning(aj.value("binning", "equal_width"));
    spec.runs = aj.value("runs", std::size_t{10});
    spec.seed_base = aj.value("seed", std::uint64_t{0});
    if (opts.seed) spec.seed_base = derive_seed(*opts.seed, kSeedRun);
    if (aj.contains("scope")) spec.scope_override = aj.at("scope").get<std::vector<std::size_t>>();
    spec.reselect_vars_per_attempt = aj.value("reselect_vars_per_attempt", false);
    const std::string persist = aj.value("persist_adversaries", "first_run");
    if (persist == "none")
        spec.persist_adversaries = PersistAdversaries::none;
    else if (persist == "first_run")
        spec.persist_adversaries = PersistAdversaries::first_run;
    else if (persist == "all")
        spec.persist_adversaries = PersistAdversaries::all;
    else
        config_error("persist_adversaries must be none, first_run or all");

    spec.workers = opts.workers;
    if (!opts.reuse_model.empty()) spec.reuse_checkpoint = fs::path(opts.reuse_model);
    spec.model.validate();
    return spec;
}

AugmentationSpec parse_augment_spec(const json& root, const CommonOptions& opts) {
    check_top_level(root, {"attack", "augment"});
    AugmentationSpec spec;
    spec.data = parse_data_spec(root, opts.seed);
    spec.model = parse_model(root, opts.seed);

    if (!root.contains("augment")) config_error("config needs an \"augment\" section");
    const json& aj = root.at("augment");
    check_keys(aj,
               {"reduction_fraction", "target_size", "strategies", "repetitions", "seed", "scope"},
               "augment");
    if (aj.contains("reduction_fraction"))
        spec.reduction_fraction = aj.at("reduction_fraction").get<double>();
    if (aj.contains("target_size")) spec.target_size = aj.at("target_size").get<std::size_t>();
    spec.repetitions = aj.value("repetitions", std::size_t{50});
    spec.seed_base = aj.value("seed", std::uint64_t{42});
    if (opts.seed) spec.seed_base = derive_seed(*opts.seed, kSeedRun);
    if (aj.contains("scope")) spec.scope_override = aj.at("scope").get<std::vector<std::size_t>>();

    if (!aj.contains("strategies")) config_error("augment needs a \"strategies\" list");
    for (const json& sj : aj.at("strategies")) {
        const std::string kind = sj.value("kind", "");
        if (kind == "none") {
            check_keys(sj, {"kind"}, "strategy");
            spec.strategies.emplace_back(NoAugmentation{});
        } else if (kind == "rdsa") {
            check_keys(sj, {"kind", "n_vars", "max_attempts", "bins", "binning",
                            "reselect_vars_per_attempt"},
                       "strategy");
            RdsaStrategy s;
            s.n_vars = sj.at("n_vars").get<std::size_t>();
            s.max_attempts = sj.value("max_attempts", std::size_t{100});
            s.bins = sj.value("bins", std::size_t{1000});
            s.binning = parse_binning(sj.value("binning", "equal_width"));
            s.reselect_vars_per_attempt = sj.value("reselect_vars_per_attempt", false);
            spec.strategies.emplace_back(s);
        } else if (kind == "gradient") {
            check_keys(sj, {"kind", "epsilon", "steps", "clip"}, "strategy");
            GradientStrategy s;
            s.cfg.epsilon = sj.at("epsilon").get<double>();
            s.cfg.steps = sj.value("steps", std::size_t{100});
            if (sj.contains("clip")) {
                check_keys(sj.at("clip"), {"lo", "hi"}, "strategy.clip");
                s.cfg.clip = {sj.at("clip").at("lo").get<std::vector<double>>(),
                              sj.at("clip").at("hi").get<std::vector<double>>()};
            }
            spec.strategies.emplace_back(s);
        } else {
            config_error("strategy.kind must be none, rdsa or gradient");
        }
    }
    spec.workers = opts.workers;
    spec.model.validate();
    return spec;
}

fs::path require_out_dir(const CommonOptions& opts) {
    if (opts.out_dir.empty()) config_error("--out DIR is required for this command");
    return fs::path(opts.out_dir);
}

int cmd_train(const CommonOptions& opts) {
    const json root = load_config(opts.config_path);
    check_top_level(root, {"attack", "augment"});
    const DataSpec data_spec = parse_data_spec(root, opts.seed);
    const ModelConfig model_cfg = parse_model(root, opts.seed);
    const fs::path out = require_out_dir(opts);

    PreparedData data = prepare_data(data_spec);
    if (model_cfg.input_dim != data.splits.train.num_features())
        config_error("model input_dim does not match the dataset feature count");

    Classifier model(model_cfg);
    TrainingLog log;
    try {
        log = model.train(data.splits.train, data.splits.validation);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::non_finite_loss) std::cerr << "training diverged: " << e.what() << '\n';
        throw;
    }

    fs::create_directories(out);
    model.save(out / "checkpoint.rdsa");
    std::ofstream(out / "training_log.json") << to_json(log).dump(2) << '\n';
    json snapshot = root;
    std::ofstream(out / "config.json") << snapshot.dump(2) << '\n';
    std::cout << "checkpoint: " << (out / "checkpoint.rdsa").string() << '\n';
    return 0;
}

int cmd_attack(const CommonOptions& opts) {
    const json root = load_config(opts.config_path);
    AttackSweepSpec spec = parse_attack_spec(root, opts);
    spec.out_dir = require_out_dir(opts);
    if (spec.reuse_checkpoint && !fs::exists(*spec.reuse_checkpoint))
        throw Error(ErrorKind::data, ErrorCode::io_failure,
                    "checkpoint not found: " + spec.reuse_checkpoint->string());
    fs::create_directories(*spec.out_dir);
    const SweepResult result = run_attack_pipeline(spec);
    std::cout << "attack sweep finished: " << result.cells.size() << " cells, aggregate at "
              << (*spec.out_dir / "aggregate.csv").string() << '\n';
    return 0;
}

int cmd_augment(const CommonOptions& opts) {
    const json root = load_config(opts.config_path);
    AugmentationSpec spec = parse_augment_spec(root, opts);
    spec.out_dir = require_out_dir(opts);
    fs::create_directories(*spec.out_dir);
    const AugmentationResult result = run_augmentation_pipeline(spec);
    std::cout << "augmentation finished: " << result.cells.size() << " strategies, aggregate at "
              << (*spec.out_dir / "aggregate.csv").string() << '\n';
    return 0;
}

int cmd_synth(const CommonOptions& opts) {
    const json root = load_config(opts.config_path);
    check_top_level(root, {"attack", "augment"});
    const DataSpec spec = parse_data_spec(root, opts.seed);
    if (!std::holds_alternative<SyntheticSource>(spec.source))
        config_error("synth requires dataset.type == \"synthetic\"");
    const fs::path out = require_out_dir(opts);

    const auto& syn = std::get<SyntheticSource>(spec.source);
    const Dataset d =
        synthesize_correlated(syn.n, syn.f, syn.k, syn.correlation, syn.class_shift, syn.seed);
    fs::create_directories(out);
    write_csv(d, out / "data.csv");
    std::ofstream(out / "config.json") << root.dump(2) << '\n';
    std::cout << "wrote " << (out / "data.csv").string() << " (" << d.size() << " rows)\n";
    return 0;
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::data, ErrorCode::missing_run_artifacts,
                    "missing run artifact: " + path.string());
    return json::parse(in);
}

int cmd_report(const std::string& run_dir_arg, const std::string& out_arg) {
    const fs::path run_dir(run_dir_arg);
    const fs::path out = out_arg.empty() ? run_dir : fs::path(out_arg);
    if (!fs::exists(run_dir / "config.json"))
        throw Error(ErrorKind::data, ErrorCode::missing_run_artifacts,
                    "no config.json in " + run_dir.string());
    const json config = read_json_file(run_dir / "config.json");
    const std::string kind = config.value("kind", "");

    std::string aggregate_csv;
    std::string markdown = "# Run report\n\n";
    if (kind == "attack") {
        SweepResult result;
        for (const std::size_t g : config.at("n_vars_grid").get<std::vector<std::size_t>>()) {
            SweepCell cell;
            cell.n_vars = g;
            for (std::size_t run = 0;; ++run) {
                const fs::path mpath = run_dir / "runs" / ("nvars_" + std::to_string(g)) /
                                       ("run_" + std::to_string(run)) / "metrics.json";
                if (!fs::exists(mpath)) break;
                cell.per_run.push_back(metrics_report_from_json(read_json_file(mpath).at("metrics")));
            }
            if (cell.per_run.empty())
                throw Error(ErrorKind::data, ErrorCode::missing_run_artifacts,
                            "no per-run metrics for n_vars " + std::to_string(g));
            std::tie(cell.mean, cell.rms) = aggregate(cell.per_run);
            result.cells.push_back(std::move(cell));
        }
        aggregate_csv = render_attack_aggregate_csv(result);
        markdown += "Attack sweep over n_vars.\n\n";
        markdown += "| n_vars | FR | sigma(FR) | mean feature change | mean JSD | corr diff |\n";
        markdown += "|---|---|---|---|---|---|\n";
        for (const SweepCell& cell : result.cells) {
            char line[256];
            std::snprintf(line, sizeof(line), "| %zu | %.4f | %.4f | %.4f | %.4f | %.4f |\n",
                          cell.n_vars, cell.mean.fooling_ratio, cell.rms.fooling_ratio,
                          cell.mean.mean_feature_change, cell.mean.mean_jsd,
                          cell.mean.correlation_diff);
            markdown += line;
        }
    } else if (kind == "augment") {
        AugmentationResult result;
        std::size_t repetitions = config.value("repetitions", std::size_t{0});
        for (const json& sj : config.at("strategies")) {
            StrategyCell cell;
            if (sj.at("kind") == "none") {
                cell.name = "none";
            } else if (sj.at("kind") == "rdsa") {
                cell.name = "rdsa_nv" + std::to_string(sj.at("n_vars").get<std::size_t>());
            } else {
                GradientStrategy g;
                g.cfg.epsilon = sj.at("epsilon").get<double>();
                g.cfg.steps = sj.value("steps", std::size_t{100});
                cell.name = strategy_name(AugmentationStrategy{g});
            }
            for (std::size_t rep = 0;; ++rep) {
                const fs::path mpath =
                    run_dir / "reps" / ("rep_" + std::to_string(rep)) / cell.name / "metrics.json";
                if (!fs::exists(mpath)) break;
                cell.per_rep.push_back(metrics_report_from_json(read_json_file(mpath).at("metrics")));
            }
            if (cell.per_rep.empty())
                throw Error(ErrorKind::data, ErrorCode::missing_run_artifacts,
                            "no per-repetition metrics for strategy " + cell.name);
            if (repetitions == 0) repetitions = cell.per_rep.size();
            std::tie(cell.mean, cell.rms) = aggregate(cell.per_rep);
            result.cells.push_back(std::move(cell));
        }
        aggregate_csv = render_augment_aggregate_csv(result, repetitions);
        markdown += "Data augmentation comparison (baseline strategy: none).\n\n";
        markdown += "| strategy | AUROC | RMS(AUROC) | accuracy | RMS(accuracy) |\n";
        markdown += "|---|---|---|---|---|\n";
        for (const StrategyCell& cell : result.cells) {
            char line[256];
            std::snprintf(line, sizeof(line), "| %s | %.4f | %.4f | %.4f | %.4f |\n",
                          cell.name.c_str(), cell.mean.auroc, cell.rms.auroc, cell.mean.accuracy,
                          cell.rms.accuracy);
            markdown += line;
        }
    } else {
        throw Error(ErrorKind::data, ErrorCode::missing_run_artifacts,
                    "config.json in " + run_dir.string() + " has no recognizable kind");
    }

    fs::create_directories(out);
    std::ofstream(out / "aggregate_report.csv") << aggregate_csv;
    std::ofstream(out / "report.md") << markdown;
    std::cout << "report written to " << (out / "report.md").string() << '\n';
    return 0;
}

int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::config: return 2;
        case ErrorKind::data: return 3;
        case ErrorKind::training: return 4;
        case ErrorKind::pipeline: return 5;
        case ErrorKind::logic: return 1;
    }
    return 1;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Random Distribution Shuffle Attack toolkit"};
    app.require_subcommand(1);

    CommonOptions opts;
    std::string report_dir;
    std::string report_out;

    auto add_common = [&](CLI::App* cmd, bool with_reuse = false) {
        cmd->add_option("--config", opts.config_path, "run configuration (JSON)")
            ->required()
            ->check(CLI::ExistingFile);
        cmd->add_option("--out", opts.out_dir, "output directory");
        cmd->add_option("--seed", opts.seed, "override all stage seeds");
        cmd->add_option("--workers", opts.workers, "worker threads for the attack stage");
        if (with_reuse)
            cmd->add_option("--reuse-model", opts.reuse_model,
                            "skip training and load this checkpoint");
    };

    CLI::App* train = app.add_subcommand("train", "train a classifier and save a checkpoint");
    add_common(train);
    CLI::App* attack = app.add_subcommand("attack", "run the attack-evaluation sweep");
    add_common(attack, true);
    CLI::App* augment = app.add_subcommand("augment", "run the adversarial-training comparison");
    add_common(augment);
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset CSV");
    add_common(synth);
    CLI::App* report = app.add_subcommand("report", "regenerate tables from a finished run");
    report->add_option("run_dir", report_dir, "run directory")->required();
    report->add_option("--out", report_out, "where to write the report (default: run_dir)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (train->parsed()) return cmd_train(opts);
        if (attack->parsed()) return cmd_attack(opts);
        if (augment->parsed()) return cmd_augment(opts);
        if (synth->parsed()) return cmd_synth(opts);
        if (report->parsed()) return cmd_report(report_dir, report_out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace rdsa::cli
