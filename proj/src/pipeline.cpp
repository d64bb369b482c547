#include "rdsa/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "rdsa/error.hpp"
#include "rdsa/fingerprint.hpp"
#include "rdsa/kernels.hpp"
#include "rdsa/rng.hpp"

namespace rdsa {

namespace {

constexpr std::uint64_t kModelSalt = 0x4d4f44454c;   // per-repetition init seeds
constexpr std::uint64_t kAttackSalt = 0x414454434b;  // per-strategy attack seeds

template <typename Fn>
auto with_stage(const char* stage, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.kind(), e.code(), std::string(stage) + " stage: " + e.what());
    }
}

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::data, ErrorCode::io_failure, "cannot write " + path.string());
    out << content;
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
    write_text(path, j.dump(2) + "\n");
}

Matrix select_columns(const Matrix& m, std::span<const std::size_t> cols) {
    Matrix out(m.rows(), cols.size());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c) out(r, c) = m(r, cols[c]);
    return out;
}

MetricsReport attack_run_metrics(const Dataset& clean_test, const AttackSetResult& result,
                                 const HistogramSet& hists, std::span<const std::size_t> scope,
                                 const CorrelationMatrix& clean_corr,
                                 const CorrelationMatrix& clean_corr_scope, double model_accuracy,
                                 double model_auroc) {
    MetricsReport r;
    r.accuracy = model_accuracy;
    r.auroc = model_auroc;
    r.attacked = static_cast<double>(result.outcomes.size());
    std::size_t successes = 0;
    for (const AttackOutcome& o : result.outcomes) successes += o.succeeded ? 1 : 0;
    r.successes = static_cast<double>(successes);
    r.fooling_ratio = result.outcomes.empty() ? 0.0 : fooling_ratio(result.outcomes);

    r.per_feature_jsd.assign(scope.size(), 0.0);
    if (successes > 0) {
        const std::size_t f = clean_test.num_features();
        Matrix advs(successes, f);
        Matrix origs(successes, f);
        std::size_t row = 0;
        for (const AttackOutcome& o : result.outcomes) {
            if (!o.succeeded) continue;
            std::copy(o.adversary->begin(), o.adversary->end(), advs.row(row).begin());
            std::copy(o.original.begin(), o.original.end(), origs.row(row).begin());
            ++row;
        }
        r.mean_feature_change = mean_feature_change(origs, advs);
        for (std::size_t i = 0; i < scope.size(); ++i)
            r.per_feature_jsd[i] = jsd_between(hists.at(scope[i]), advs.column(scope[i]));
        r.mean_jsd = kernels::sum(r.per_feature_jsd.data(), r.per_feature_jsd.size()) /
                     static_cast<double>(scope.size());
        if (successes >= 2) {
            r.correlation_diff = correlation_diff(clean_corr, correlation_matrix(advs));
            r.correlation_diff_scope =
                correlation_diff(clean_corr_scope, correlation_matrix(select_columns(advs, scope)));
        }
    }
    return r;
}

}  // namespace

std::string render_attack_aggregate_csv(const SweepResult& result) {
    std::string csv =
        "n_vars,runs,fr_mean,fr_std,cf_mean,cf_rms,jsd_mean,jsd_rms,cc_mean,cc_rms,"
        "cc_scope_mean,cc_scope_rms,accuracy,auroc,attacked,successes_mean\n";
    for (const SweepCell& cell : result.cells) {
        csv += std::to_string(cell.n_vars) + ',' + std::to_string(cell.per_run.size()) + ',' +
               fmt_g(cell.mean.fooling_ratio) + ',' + fmt_g(cell.rms.fooling_ratio) + ',' +
               fmt_g(cell.mean.mean_feature_change) + ',' + fmt_g(cell.rms.mean_feature_change) +
               ',' + fmt_g(cell.mean.mean_jsd) + ',' + fmt_g(cell.rms.mean_jsd) + ',' +
               fmt_g(cell.mean.correlation_diff) + ',' + fmt_g(cell.rms.correlation_diff) + ',' +
               fmt_g(cell.mean.correlation_diff_scope) + ',' +
               fmt_g(cell.rms.correlation_diff_scope) + ',' + fmt_g(cell.mean.accuracy) + ',' +
               fmt_g(cell.mean.auroc) + ',' + fmt_g(cell.mean.attacked) + ',' +
               fmt_g(cell.mean.successes) + '\n';
    }
    return csv;
}

namespace {

void append_tidy_rows(std::string& csv, const std::string& cell_id, std::size_t run,
                      const MetricsReport& r) {
    const std::pair<const char*, double> metrics[] = {
        {"fooling_ratio", r.fooling_ratio},
        {"mean_feature_change", r.mean_feature_change},
        {"mean_jsd", r.mean_jsd},
        {"correlation_diff", r.correlation_diff},
        {"correlation_diff_scope", r.correlation_diff_scope},
        {"accuracy", r.accuracy},
        {"auroc", r.auroc},
        {"attacked", r.attacked},
        {"successes", r.successes},
    };
    for (const auto& [name, value] : metrics)
        csv += cell_id + ',' + std::to_string(run) + ',' + name + ',' + fmt_g(value) + '\n';
}

}  // namespace

PreparedData prepare_data(const DataSpec& spec) {
    Dataset full = with_stage("load", [&] {
        if (const auto* csv = std::get_if<CsvSource>(&spec.source))
            return load_csv(csv->path, csv->label_column);
        const auto& syn = std::get<SyntheticSource>(spec.source);
        return synthesize_correlated(syn.n, syn.f, syn.k, syn.correlation, syn.class_shift,
                                     syn.seed);
    });
    full.meta = detect_continuous(full, spec.continuity_threshold);

    SplitBundle splits = with_stage("split", [&] {
        return split_dataset(full, spec.train_fraction, spec.validation_fraction, spec.split_seed);
    });

    PreparedData prepared;
    if (spec.zscore) {
        const Dataset train_raw = std::move(splits.train);
        auto [train_n, stats] = zscore_normalize(train_raw, train_raw);
        prepared.stats = std::move(stats);
        prepared.splits.train = std::move(train_n);
        prepared.splits.validation = zscore_normalize(splits.validation, train_raw).first;
        prepared.splits.test = zscore_normalize(splits.test, train_raw).first;
    } else {
        prepared.splits = std::move(splits);
        const std::size_t f = prepared.splits.train.num_features();
        prepared.stats.mean.assign(f, 0.0);
        prepared.stats.stddev.assign(f, 0.0);
        prepared.stats.applied.assign(f, false);
    }
    prepared.continuous = prepared.splits.train.continuous_indices();
    prepared.train_fingerprint = dataset_fingerprint(prepared.splits.train);
    prepared.test_fingerprint = dataset_fingerprint(prepared.splits.test);
    return prepared;
}

std::pair<MetricsReport, MetricsReport> aggregate(std::span<const MetricsReport> reports) {
    if (reports.empty())
        throw Error(ErrorKind::logic, ErrorCode::empty_list, "cannot aggregate zero reports");
    const double n = static_cast<double>(reports.size());
    const std::size_t jsd_len = reports.front().per_feature_jsd.size();
    for (const MetricsReport& r : reports)
        if (r.per_feature_jsd.size() != jsd_len)
            throw Error(ErrorKind::logic, ErrorCode::shape_mismatch,
                        "per-feature JSD vectors differ in length across reports");

    using Field = double MetricsReport::*;
    constexpr Field fields[] = {
        &MetricsReport::fooling_ratio,   &MetricsReport::mean_feature_change,
        &MetricsReport::mean_jsd,        &MetricsReport::correlation_diff,
        &MetricsReport::correlation_diff_scope, &MetricsReport::accuracy,
        &MetricsReport::auroc,           &MetricsReport::attacked,
        &MetricsReport::successes,
    };

    // identical values aggregate to (value, 0) exactly, no roundoff residue
    auto mean_rms = [n](auto&& get) {
        double total = 0.0;
        bool all_equal = true;
        const double first = get(0);
        for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
            total += get(i);
            all_equal = all_equal && get(i) == first;
        }
        if (all_equal) return std::pair<double, double>{first, 0.0};
        const double mu = total / n;
        double ss = 0.0;
        for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
            const double d = get(i) - mu;
            ss += d * d;
        }
        return std::pair<double, double>{mu, std::sqrt(ss / n)};
    };

    MetricsReport mean, rms;
    for (Field f : fields)
        std::tie(mean.*f, rms.*f) = mean_rms([&](std::size_t i) { return reports[i].*f; });
    mean.per_feature_jsd.assign(jsd_len, 0.0);
    rms.per_feature_jsd.assign(jsd_len, 0.0);
    for (std::size_t i = 0; i < jsd_len; ++i)
        std::tie(mean.per_feature_jsd[i], rms.per_feature_jsd[i]) =
            mean_rms([&](std::size_t r) { return reports[r].per_feature_jsd[i]; });
    mean.fr_std = rms.fooling_ratio;
    return {mean, rms};
}

std::pair<double, double> evaluate_model(const Classifier& model, const Dataset& d) {
    const std::size_t n = d.size();
    const std::size_t k = static_cast<std::size_t>(model.num_classes());
    Matrix proba(n, k);
    std::vector<int> preds(n);
    for (std::size_t r = 0; r < n; ++r) {
        const auto p = model.predict_proba(d.features.row(r));
        std::copy(p.begin(), p.end(), proba.row(r).begin());
        if (model.config().loss == Loss::binary_cross_entropy) {
            preds[r] = p[1] >= 0.5 ? 1 : 0;
        } else {
            std::size_t best = 0;
            for (std::size_t c = 1; c < k; ++c)
                if (p[c] > p[best]) best = c;
            preds[r] = static_cast<int>(best);
        }
    }
    const double acc = accuracy(preds, d.labels);
    const double roc =
        k == 2 ? auroc(proba.column(1), d.labels) : auroc_macro_ovr(proba, d.labels);
    return {acc, roc};
}

SweepResult run_attack_pipeline(const AttackSweepSpec& spec) {
    spec.model.validate();
    if (spec.n_vars_grid.empty())
        throw Error(ErrorKind::config, ErrorCode::bad_config, "n_vars grid is empty");
    if (spec.runs < 1)
        throw Error(ErrorKind::config, ErrorCode::bad_config, "need at least one run");

    PreparedData data = prepare_data(spec.data);
    const Dataset& test = data.splits.test;

    std::vector<std::size_t> scope =
        spec.scope_override ? *spec.scope_override : data.continuous;
    if (scope.empty())
        throw Error(ErrorKind::config, ErrorCode::scope_mismatch,
                    "no continuous features to shuffle");
    for (std::size_t g : spec.n_vars_grid)
        if (g > scope.size())
            throw Error(ErrorKind::config, ErrorCode::too_many_vars,
                        "grid value " + std::to_string(g) + " exceeds shuffle scope size " +
                            std::to_string(scope.size()));
    if (spec.model.input_dim != test.num_features())
        throw Error(ErrorKind::config, ErrorCode::invalid_architecture,
                    "model input_dim does not match the dataset feature count");

    Classifier model = spec.reuse_checkpoint
                           ? with_stage("load-model", [&] { return Classifier::load(*spec.reuse_checkpoint); })
                           : Classifier(spec.model);
    SweepResult result;
    if (!spec.reuse_checkpoint)
        result.training_log = with_stage(
            "train", [&] { return model.train(data.splits.train, data.splits.validation); });

    const HistogramSet hists = with_stage("histograms", [&] {
        return build_histograms(test, scope, spec.bins, spec.binning, "test");
    });
    const auto [model_acc, model_auroc] = evaluate_model(model, test);
    const CorrelationMatrix clean_corr = correlation_matrix(test.features);
    const CorrelationMatrix clean_corr_scope =
        correlation_matrix(select_columns(test.features, scope));

    const bool persist = spec.out_dir.has_value();
    std::filesystem::path out;
    if (persist) {
        out = *spec.out_dir;
        std::filesystem::create_directories(out / "runs");
        write_json_file(out / "config.json", to_json(spec));
        model.save(out / "checkpoint.rdsa");
        write_json_file(out / "training_log.json", to_json(result.training_log));
        write_json_file(out / "histograms.json", to_json(hists));
    }

    result.test_fingerprint_before = data.test_fingerprint;
    std::string tidy = "n_vars,run,metric,value\n";
    for (std::size_t g : spec.n_vars_grid) {
        SweepCell cell;
        cell.n_vars = g;
        for (std::size_t run = 0; run < spec.runs; ++run) {
            AttackConfig cfg;
            cfg.n_vars = g;
            cfg.max_attempts = spec.max_attempts;
            cfg.shuffle_scope = scope;
            cfg.seed = derive_seed(derive_seed(spec.seed_base, g), run);
            cfg.reselect_vars_per_attempt = spec.reselect_vars_per_attempt;

            const AttackSetResult attack = with_stage("attack", [&] {
                return rdsa_attack_set(test, model, hists, cfg, spec.workers);
            });
            MetricsReport report = attack_run_metrics(test, attack, hists, scope, clean_corr,
                                                      clean_corr_scope, model_acc, model_auroc);
            append_tidy_rows(tidy, std::to_string(g), run, report);

            if (persist) {
                const auto run_dir =
                    out / "runs" / ("nvars_" + std::to_string(g)) / ("run_" + std::to_string(run));
                std::filesystem::create_directories(run_dir);
                nlohmann::json meta{{"n_vars", g},
                                    {"run", run},
                                    {"seed", cfg.seed},
                                    {"metrics", to_json(report)}};
                write_json_file(run_dir / "metrics.json", meta);
                const bool keep_adv = spec.persist_adversaries == PersistAdversaries::all ||
                                      (spec.persist_adversaries == PersistAdversaries::first_run &&
                                       run == 0);
                if (keep_adv) write_adversarial_csv(attack, test, run_dir / "adversaries.csv");
            }
            cell.per_run.push_back(std::move(report));
        }
        std::tie(cell.mean, cell.rms) = aggregate(cell.per_run);
        result.cells.push_back(std::move(cell));
    }

    result.test_fingerprint_after = dataset_fingerprint(test);
    if (result.test_fingerprint_after != result.test_fingerprint_before)
        throw Error(ErrorKind::pipeline, ErrorCode::shape_mismatch,
                    "test split changed during the attack pipeline");

    if (persist) {
        write_text(out / "aggregate.csv", render_attack_aggregate_csv(result));
        write_text(out / "sweep_tidy.csv", tidy);
        std::filesystem::create_directories(out / "plots");
        std::string fr = "n_vars,fr_mean,fr_std\n";
        std::string jsd = "n_vars,jsd_mean,jsd_rms\n";
        std::string cc = "n_vars,cc_mean,cc_rms\n";
        for (const SweepCell& cell : result.cells) {
            fr += std::to_string(cell.n_vars) + ',' + fmt_g(cell.mean.fooling_ratio) + ',' +
                  fmt_g(cell.rms.fooling_ratio) + '\n';
            jsd += std::to_string(cell.n_vars) + ',' + fmt_g(cell.mean.mean_jsd) + ',' +
                   fmt_g(cell.rms.mean_jsd) + '\n';
            cc += std::to_string(cell.n_vars) + ',' + fmt_g(cell.mean.correlation_diff) + ',' +
                  fmt_g(cell.rms.correlation_diff) + '\n';
        }
        write_text(out / "plots" / "fr_vs_nvars.csv", fr);
        write_text(out / "plots" / "jsd_vs_nvars.csv", jsd);
        write_text(out / "plots" / "corr_diff_vs_nvars.csv", cc);
        write_json_file(out / "hashes.json",
                        {{"test_before", result.test_fingerprint_before},
                         {"test_after", result.test_fingerprint_after},
                         {"train", data.train_fingerprint},
                         {"checkpoint", file_fingerprint(out / "checkpoint.rdsa")}});
    }
    return result;
}

std::string strategy_name(const AugmentationStrategy& s) {
    if (std::holds_alternative<NoAugmentation>(s)) return "none";
    if (const auto* r = std::get_if<RdsaStrategy>(&s))
        return "rdsa_nv" + std::to_string(r->n_vars);
    const auto& g = std::get<GradientStrategy>(s);
    return "grad_e" + fmt_g(g.cfg.epsilon) + "_s" + std::to_string(g.cfg.steps);
}

namespace {

// One adversary per reduced-set row. Failed attacks are retried with fresh
// variable selections for up to three rounds; whatever still resists keeps
// its final shuffled vector; inputs the model already misclassified get a
// single shuffle pass. Every vector carries the row's true label.
struct GeneratedAdversaries {
    Matrix features;
    double fooling_ratio = 0.0;
    std::size_t attacked = 0;
    std::size_t successes = 0;
};

GeneratedAdversaries generate_rdsa_adversaries(const Dataset& reduced, const Classifier& model,
                                               const HistogramSet& hists,
                                               std::span<const std::size_t> scope,
                                               const RdsaStrategy& strategy,
                                               std::uint64_t attack_seed, std::size_t workers) {
    AttackConfig cfg;
    cfg.n_vars = strategy.n_vars;
    cfg.max_attempts = strategy.max_attempts;
    cfg.shuffle_scope.assign(scope.begin(), scope.end());
    cfg.seed = attack_seed;
    cfg.reselect_vars_per_attempt = strategy.reselect_vars_per_attempt;

    const AttackSetResult first = rdsa_attack_set(reduced, model, hists, cfg, workers);

    const std::size_t n = reduced.size();
    const std::size_t f = reduced.num_features();
    std::vector<std::optional<std::vector<double>>> slot(n);

    GeneratedAdversaries gen;
    gen.attacked = first.outcomes.size();
    std::vector<AttackOutcome> pending;
    for (const AttackOutcome& o : first.outcomes) {
        if (o.succeeded) {
            slot[o.row] = *o.adversary;
            ++gen.successes;
        } else {
            pending.push_back(o);
        }
    }
    gen.fooling_ratio = gen.attacked == 0
                            ? 0.0
                            : static_cast<double>(gen.successes) / static_cast<double>(gen.attacked);

    for (std::size_t round = 1; round <= 3 && !pending.empty(); ++round) {
        std::vector<AttackOutcome> still;
        for (const AttackOutcome& o : pending) {
            Rng rng(derive_seed(attack_seed, 1000003 * round + o.row));
            AttackOutcome retry =
                rdsa_attack_one(reduced.features.row(o.row), o.original_label, model, hists, cfg, rng);
            retry.row = o.row;
            if (retry.succeeded) {
                slot[o.row] = *retry.adversary;
            } else {
                still.push_back(std::move(retry));
            }
        }
        pending = std::move(still);
    }
    for (const AttackOutcome& o : pending) slot[o.row] = *o.last_attempt;

    for (std::size_t row : first.skipped_rows) {
        Rng rng(derive_seed(attack_seed, 7000003 + row));
        const auto vars = select_shuffle_vars(cfg.shuffle_scope, cfg.n_vars, rng);
        auto src = reduced.features.row(row);
        std::vector<double> vec(src.begin(), src.end());
        for (std::size_t v : vars) vec[v] = sample_value(hists.at(v), rng);
        slot[row] = std::move(vec);
    }

    gen.features = Matrix(n, f);
    for (std::size_t r = 0; r < n; ++r) {
        if (!slot[r])
            throw Error(ErrorKind::pipeline, ErrorCode::insufficient_adversaries,
                        "no adversary generated for reduced-set row " + std::to_string(r));
        std::copy(slot[r]->begin(), slot[r]->end(), gen.features.row(r).begin());
    }
    return gen;
}

GeneratedAdversaries generate_gradient_adversaries(const Dataset& reduced, const Classifier& model,
                                                   const GradientAttackConfig& cfg,
                                                   std::size_t workers) {
    const AttackSetResult first = gradient_attack_set(reduced, model, cfg, workers);
    const std::size_t n = reduced.size();
    const std::size_t f = reduced.num_features();
    std::vector<std::optional<std::vector<double>>> slot(n);

    GeneratedAdversaries gen;
    gen.attacked = first.outcomes.size();
    for (const AttackOutcome& o : first.outcomes) {
        if (o.succeeded) {
            slot[o.row] = *o.adversary;
            ++gen.successes;
        } else {
            slot[o.row] = *o.last_attempt;
        }
    }
    gen.fooling_ratio = gen.attacked == 0
                            ? 0.0
                            : static_cast<double>(gen.successes) / static_cast<double>(gen.attacked);

    // already-misclassified inputs get one signed-gradient step
    for (std::size_t row : first.skipped_rows) {
        auto src = reduced.features.row(row);
        std::vector<double> vec(src.begin(), src.end());
        const auto grad = model.input_gradient(vec, reduced.labels[row]);
        for (std::size_t j = 0; j < vec.size(); ++j) {
            const double s = grad[j] > 0.0 ? 1.0 : (grad[j] < 0.0 ? -1.0 : 0.0);
            vec[j] += cfg.epsilon * s;
            if (cfg.clip) vec[j] = std::clamp(vec[j], cfg.clip->first[j], cfg.clip->second[j]);
        }
        slot[row] = std::move(vec);
    }

    gen.features = Matrix(n, f);
    for (std::size_t r = 0; r < n; ++r) {
        if (!slot[r])
            throw Error(ErrorKind::pipeline, ErrorCode::insufficient_adversaries,
                        "no adversary generated for reduced-set row " + std::to_string(r));
        std::copy(slot[r]->begin(), slot[r]->end(), gen.features.row(r).begin());
    }
    return gen;
}

}  // namespace

std::string render_augment_aggregate_csv(const AugmentationResult& result,
                                         std::size_t repetitions) {
    std::string csv =
        "strategy,repetitions,auroc_mean,auroc_rms,accuracy_mean,accuracy_rms,fr_mean,fr_rms\n";
    for (const StrategyCell& cell : result.cells) {
        csv += cell.name + ',' + std::to_string(repetitions) + ',' + fmt_g(cell.mean.auroc) + ',' +
               fmt_g(cell.rms.auroc) + ',' + fmt_g(cell.mean.accuracy) + ',' +
               fmt_g(cell.rms.accuracy) + ',' + fmt_g(cell.mean.fooling_ratio) + ',' +
               fmt_g(cell.rms.fooling_ratio) + '\n';
    }
    return csv;
}

AugmentationResult run_augmentation_pipeline(const AugmentationSpec& spec) {
    spec.model.validate();
    if (spec.strategies.empty())
        throw Error(ErrorKind::config, ErrorCode::bad_config, "no augmentation strategies given");
    if (spec.repetitions < 1)
        throw Error(ErrorKind::config, ErrorCode::bad_config, "need at least one repetition");
    if (spec.reduction_fraction.has_value() == spec.target_size.has_value())
        throw Error(ErrorKind::config, ErrorCode::bad_config,
                    "specify exactly one of reduction_fraction and target_size");

    PreparedData data = prepare_data(spec.data);
    const Dataset& train = data.splits.train;
    const Dataset& test = data.splits.test;

    std::vector<std::size_t> scope =
        spec.scope_override ? *spec.scope_override : data.continuous;
    for (const AugmentationStrategy& s : spec.strategies) {
        if (const auto* r = std::get_if<RdsaStrategy>(&s)) {
            if (scope.empty())
                throw Error(ErrorKind::config, ErrorCode::scope_mismatch,
                            "no continuous features to shuffle");
            if (r->n_vars > scope.size())
                throw Error(ErrorKind::config, ErrorCode::too_many_vars,
                            "strategy n_vars " + std::to_string(r->n_vars) +
                                " exceeds shuffle scope size " + std::to_string(scope.size()));
        }
    }
    if (spec.model.input_dim != train.num_features())
        throw Error(ErrorKind::config, ErrorCode::invalid_architecture,
                    "model input_dim does not match the dataset feature count");

    double fraction = 0.0;
    if (spec.reduction_fraction) {
        fraction = *spec.reduction_fraction;
    } else {
        if (*spec.target_size < 1 || *spec.target_size > train.size())
            throw Error(ErrorKind::config, ErrorCode::bad_config,
                        "target_size must lie in [1, training size]");
        fraction = static_cast<double>(*spec.target_size) / static_cast<double>(train.size());
    }

    const bool persist = spec.out_dir.has_value();
    std::filesystem::path out;
    if (persist) {
        out = *spec.out_dir;
        std::filesystem::create_directories(out / "reps");
        write_json_file(out / "config.json", to_json(spec));
    }

    AugmentationResult result;
    result.test_fingerprint_before = data.test_fingerprint;
    result.cells.resize(spec.strategies.size());
    for (std::size_t si = 0; si < spec.strategies.size(); ++si)
        result.cells[si].name = strategy_name(spec.strategies[si]);

    for (std::size_t rep = 0; rep < spec.repetitions; ++rep) {
        const std::uint64_t rep_seed = derive_seed(spec.seed_base, rep);
        const Dataset reduced = with_stage("subsample", [&] {
            return subsample(train, fraction, rep_seed);
        });

        ModelConfig starved_cfg = spec.model;
        starved_cfg.init_seed = derive_seed(rep_seed, kModelSalt);
        Classifier starved(starved_cfg);
        with_stage("train-starved", [&] {
            return starved.train(reduced, data.splits.validation);
        });
        const auto [base_acc, base_auroc] = evaluate_model(starved, test);

        for (std::size_t si = 0; si < spec.strategies.size(); ++si) {
            const AugmentationStrategy& strategy = spec.strategies[si];
            MetricsReport report;
            std::optional<Dataset> augmented;

            if (std::holds_alternative<NoAugmentation>(strategy)) {
                report.accuracy = base_acc;
                report.auroc = base_auroc;
            } else {
                const std::uint64_t attack_seed =
                    derive_seed(derive_seed(rep_seed, kAttackSalt), si);
                GeneratedAdversaries gen = with_stage("generate", [&] {
                    if (const auto* r = std::get_if<RdsaStrategy>(&strategy)) {
                        const HistogramSet hists = build_histograms(reduced, scope, r->bins,
                                                                    r->binning, "reduced-train");
                        return generate_rdsa_adversaries(reduced, starved, hists, scope, *r,
                                                         attack_seed, spec.workers);
                    }
                    const auto& g = std::get<GradientStrategy>(strategy);
                    return generate_gradient_adversaries(reduced, starved, g.cfg, spec.workers);
                });

                Dataset aug;
                aug.meta = reduced.meta;
                aug.num_classes = reduced.num_classes;
                aug.features = Matrix(2 * reduced.size(), reduced.num_features());
                aug.labels.resize(2 * reduced.size());
                for (std::size_t r = 0; r < reduced.size(); ++r) {
                    auto src = reduced.features.row(r);
                    std::copy(src.begin(), src.end(), aug.features.row(r).begin());
                    aug.labels[r] = reduced.labels[r];
                    auto adv = gen.features.row(r);
                    std::copy(adv.begin(), adv.end(),
                              aug.features.row(reduced.size() + r).begin());
                    // adversaries keep the true label of their source row
                    aug.labels[reduced.size() + r] = reduced.labels[r];
                }
                if (aug.size() != 2 * reduced.size())
                    throw Error(ErrorKind::pipeline, ErrorCode::insufficient_adversaries,
                                "augmented set does not double the reduced set");

                Classifier retrained = starved;
                retrained.reset();
                with_stage("retrain", [&] {
                    return retrained.train(aug, data.splits.validation);
                });
                const auto [acc, roc] = evaluate_model(retrained, test);
                report.accuracy = acc;
                report.auroc = roc;
                report.fooling_ratio = gen.fooling_ratio;
                report.attacked = static_cast<double>(gen.attacked);
                report.successes = static_cast<double>(gen.successes);
                augmented = std::move(aug);
            }

            if (persist) {
                const auto rep_dir = out / "reps" / ("rep_" + std::to_string(rep)) /
                                     result.cells[si].name;
                std::filesystem::create_directories(rep_dir);
                nlohmann::json meta{{"rep", rep},
                                    {"strategy", result.cells[si].name},
                                    {"seed", rep_seed},
                                    {"reduced_size", reduced.size()},
                                    {"metrics", to_json(report)}};
                write_json_file(rep_dir / "metrics.json", meta);
                if (rep == 0 && augmented) write_csv(*augmented, rep_dir / "augmented.csv");
            }
            result.cells[si].per_rep.push_back(std::move(report));
        }
    }

    for (StrategyCell& cell : result.cells)
        std::tie(cell.mean, cell.rms) = aggregate(cell.per_rep);

    result.test_fingerprint_after = dataset_fingerprint(test);
    if (result.test_fingerprint_after != result.test_fingerprint_before)
        throw Error(ErrorKind::pipeline, ErrorCode::shape_mismatch,
                    "test split changed during the augmentation pipeline");

    if (persist) {
        write_text(out / "aggregate.csv", render_augment_aggregate_csv(result, spec.repetitions));
        write_json_file(out / "hashes.json",
                        {{"test_before", result.test_fingerprint_before},
                         {"test_after", result.test_fingerprint_after},
                         {"train", data.train_fingerprint}});
    }
    return result;
}

nlohmann::json to_json(const DataSpec& spec) {
    nlohmann::json source;
    if (const auto* csv = std::get_if<CsvSource>(&spec.source)) {
        source = {{"type", "csv"}, {"path", csv->path.string()}, {"label_column", csv->label_column}};
    } else {
        const auto& syn = std::get<SyntheticSource>(spec.source);
        nlohmann::json corr = nlohmann::json::array();
        for (std::size_t r = 0; r < syn.correlation.rows(); ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t c = 0; c < syn.correlation.cols(); ++c)
                row.push_back(syn.correlation(r, c));
            corr.push_back(row);
        }
        source = {{"type", "synthetic"}, {"n", syn.n},           {"f", syn.f},
                  {"k", syn.k},          {"correlation", corr},  {"class_shift", syn.class_shift},
                  {"seed", syn.seed}};
    }
    return {{"source", source},
            {"train_fraction", spec.train_fraction},
            {"validation_fraction", spec.validation_fraction},
            {"split_seed", spec.split_seed},
            {"zscore", spec.zscore},
            {"continuity_threshold", spec.continuity_threshold}};
}

nlohmann::json to_json(const AttackSweepSpec& spec) {
    nlohmann::json j{{"kind", "attack"},
                     {"data", to_json(spec.data)},
                     {"model", to_json(spec.model)},
                     {"n_vars_grid", spec.n_vars_grid},
                     {"max_attempts", spec.max_attempts},
                     {"bins", spec.bins},
                     {"binning", spec.binning == BinningMode::equal_width ? "equal_width"
                                                                          : "equal_population"},
                     {"runs", spec.runs},
                     {"seed_base", spec.seed_base},
                     {"reselect_vars_per_attempt", spec.reselect_vars_per_attempt}};
    if (spec.scope_override) j["scope"] = *spec.scope_override;
    return j;
}

nlohmann::json to_json(const AugmentationSpec& spec) {
    nlohmann::json strategies = nlohmann::json::array();
    for (const AugmentationStrategy& s : spec.strategies) {
        if (std::holds_alternative<NoAugmentation>(s)) {
            strategies.push_back({{"kind", "none"}});
        } else if (const auto* r = std::get_if<RdsaStrategy>(&s)) {
            strategies.push_back({{"kind", "rdsa"},
                                  {"n_vars", r->n_vars},
                                  {"max_attempts", r->max_attempts},
                                  {"bins", r->bins},
                                  {"binning", r->binning == BinningMode::equal_width
                                                  ? "equal_width"
                                                  : "equal_population"},
                                  {"reselect_vars_per_attempt", r->reselect_vars_per_attempt}});
        } else {
            const auto& g = std::get<GradientStrategy>(s);
            nlohmann::json gj{{"kind", "gradient"},
                              {"epsilon", g.cfg.epsilon},
                              {"steps", g.cfg.steps}};
            if (g.cfg.clip) gj["clip"] = {{"lo", g.cfg.clip->first}, {"hi", g.cfg.clip->second}};
            strategies.push_back(gj);
        }
    }
    nlohmann::json j{{"kind", "augment"},
                     {"data", to_json(spec.data)},
                     {"model", to_json(spec.model)},
                     {"strategies", strategies},
                     {"repetitions", spec.repetitions},
                     {"seed_base", spec.seed_base}};
    if (spec.reduction_fraction) j["reduction_fraction"] = *spec.reduction_fraction;
    if (spec.target_size) j["target_size"] = *spec.target_size;
    if (spec.scope_override) j["scope"] = *spec.scope_override;
    return j;
}

}  // namespace rdsa
