#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rdsa/error.hpp"
#include "rdsa/fingerprint.hpp"
#include "rdsa/pipeline.hpp"

using namespace rdsa;
namespace fs = std::filesystem;

namespace {

DataSpec small_synthetic(std::size_t n = 1500) {
    SyntheticSource src;
    src.n = n;
    src.f = 4;
    src.k = 2;
    src.correlation = equicorrelation(4, 0.5);
    src.class_shift = {1.5, 1.5, 1.5, 1.5};
    src.seed = 5;

    DataSpec spec;
    spec.source = src;
    spec.train_fraction = 0.6;
    spec.validation_fraction = 0.2;
    spec.split_seed = 3;
    return spec;
}

ModelConfig small_model() {
    ModelConfig cfg;
    cfg.input_dim = 4;
    cfg.layers = {{8, Activation::relu}, {2, Activation::softmax}};
    cfg.loss = Loss::categorical_cross_entropy;
    cfg.learning_rate = 0.01;
    cfg.batch_size = 64;
    cfg.epochs = 10;
    cfg.init_seed = 7;
    return cfg;
}

AttackSweepSpec small_sweep(const fs::path& out) {
    AttackSweepSpec spec;
    spec.data = small_synthetic();
    spec.model = small_model();
    spec.n_vars_grid = {1, 4};
    spec.max_attempts = 20;
    spec.bins = 32;
    spec.runs = 3;
    spec.seed_base = 11;
    spec.out_dir = out;
    return spec;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("prepare_data: continuous detection, z-scoring, fingerprints") {
    const PreparedData data = prepare_data(small_synthetic());
    CHECK(data.splits.train.size() == 900);
    CHECK(data.splits.validation.size() == 300);
    CHECK(data.splits.test.size() == 300);
    CHECK(data.continuous.size() == 4);  // all synthetic features are continuous

    // train split is z-scored with its own statistics
    for (std::size_t j = 0; j < 4; ++j) {
        double mean = 0.0;
        for (std::size_t r = 0; r < data.splits.train.size(); ++r)
            mean += data.splits.train.features(r, j);
        mean /= static_cast<double>(data.splits.train.size());
        CHECK(std::fabs(mean) < 1e-9);
    }
    CHECK_FALSE(data.test_fingerprint.empty());
    CHECK(data.test_fingerprint != data.train_fingerprint);
    CHECK(data.test_fingerprint == dataset_fingerprint(data.splits.test));
}

TEST_CASE("aggregate: mean and RMS about the mean") {
    MetricsReport a, b;
    a.fooling_ratio = 0.7;
    a.auroc = 0.9;
    a.per_feature_jsd = {0.1, 0.3};
    b.fooling_ratio = 0.9;
    b.auroc = 0.7;
    b.per_feature_jsd = {0.3, 0.3};
    const std::vector<MetricsReport> reports{a, b};
    const auto [mean, rms] = aggregate(reports);
    CHECK(mean.fooling_ratio == doctest::Approx(0.8));
    CHECK(rms.fooling_ratio == doctest::Approx(0.1));
    CHECK(mean.fr_std == doctest::Approx(0.1));  // FR uncertainty = RMS over runs
    CHECK(mean.auroc == doctest::Approx(0.8));
    CHECK(mean.per_feature_jsd[0] == doctest::Approx(0.2));
    CHECK(rms.per_feature_jsd[0] == doctest::Approx(0.1));
    CHECK(rms.per_feature_jsd[1] == doctest::Approx(0.0));

    const std::vector<MetricsReport> one{a};
    const auto [m1, r1] = aggregate(one);
    CHECK(m1.fooling_ratio == 0.7);
    CHECK(r1.fooling_ratio == 0.0);

    const std::vector<MetricsReport> same{a, a, a};
    const auto [m3, r3] = aggregate(same);
    CHECK(m3.fooling_ratio == doctest::Approx(0.7));
    CHECK(r3.fooling_ratio == 0.0);

    try {
        static_cast<void>(aggregate(std::vector<MetricsReport>{}));
        FAIL("expected EmptyList");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::empty_list);
    }
}

TEST_CASE("attack pipeline: stages, artifacts, and sanity of the metric suite") {
    const fs::path out = fresh_dir("rdsa_sweep");
    const SweepResult result = run_attack_pipeline(small_sweep(out));

    REQUIRE(result.cells.size() == 2);
    CHECK(result.cells[0].n_vars == 1);
    CHECK(result.cells[1].n_vars == 4);
    for (const SweepCell& cell : result.cells) {
        REQUIRE(cell.per_run.size() == 3);
        for (const MetricsReport& r : cell.per_run) {
            CHECK(r.fooling_ratio >= 0.0);
            CHECK(r.fooling_ratio <= 1.0);
            CHECK(r.accuracy > 0.8);  // shifted classes are separable
            CHECK(r.auroc > 0.8);
            CHECK(r.attacked > 200);  // most of the 300 test rows were attacked
        }
    }
    // shuffling all four features flips more than shuffling one
    CHECK(result.cells[1].mean.fooling_ratio >= result.cells[0].mean.fooling_ratio);
    CHECK(result.cells[1].mean.mean_feature_change > result.cells[0].mean.mean_feature_change);

    CHECK(result.test_fingerprint_before == result.test_fingerprint_after);

    for (const char* file :
         {"config.json", "checkpoint.rdsa", "training_log.json", "histograms.json",
          "aggregate.csv", "sweep_tidy.csv", "hashes.json", "plots/fr_vs_nvars.csv",
          "plots/jsd_vs_nvars.csv", "plots/corr_diff_vs_nvars.csv",
          "runs/nvars_1/run_0/metrics.json", "runs/nvars_1/run_0/adversaries.csv",
          "runs/nvars_4/run_2/metrics.json"}) {
        CHECK_MESSAGE(fs::exists(out / file), file);
    }
    // default policy persists adversaries for the first run only
    CHECK_FALSE(fs::exists(out / "runs/nvars_1/run_1/adversaries.csv"));
}

TEST_CASE("attack pipeline: reruns and worker counts are byte-identical") {
    const fs::path out1 = fresh_dir("rdsa_sweep_a");
    const fs::path out2 = fresh_dir("rdsa_sweep_b");
    const fs::path out3 = fresh_dir("rdsa_sweep_c");

    AttackSweepSpec spec1 = small_sweep(out1);
    spec1.runs = 2;
    AttackSweepSpec spec2 = small_sweep(out2);
    spec2.runs = 2;
    AttackSweepSpec spec3 = small_sweep(out3);
    spec3.runs = 2;
    spec3.workers = 4;

    run_attack_pipeline(spec1);
    run_attack_pipeline(spec2);
    run_attack_pipeline(spec3);

    const std::string agg1 = slurp(out1 / "aggregate.csv");
    CHECK(agg1 == slurp(out2 / "aggregate.csv"));
    CHECK(agg1 == slurp(out3 / "aggregate.csv"));
    CHECK(slurp(out1 / "sweep_tidy.csv") == slurp(out3 / "sweep_tidy.csv"));
    CHECK(slurp(out1 / "runs/nvars_1/run_0/adversaries.csv") ==
          slurp(out3 / "runs/nvars_1/run_0/adversaries.csv"));
}

TEST_CASE("attack pipeline: oversized grid fails before any training") {
    AttackSweepSpec spec = small_sweep(fresh_dir("rdsa_sweep_bad"));
    spec.n_vars_grid = {1, 9};  // scope has 4 features
    try {
        static_cast<void>(run_attack_pipeline(spec));
        FAIL("expected TooManyVars");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::too_many_vars);
        CHECK(e.kind() == ErrorKind::config);
    }
    // fail-fast: no model checkpoint was written
    CHECK_FALSE(fs::exists(*spec.out_dir / "checkpoint.rdsa"));
}

TEST_CASE("attack pipeline: reuse of a persisted checkpoint") {
    const fs::path out1 = fresh_dir("rdsa_sweep_src");
    AttackSweepSpec spec = small_sweep(out1);
    spec.runs = 1;
    run_attack_pipeline(spec);

    const fs::path out2 = fresh_dir("rdsa_sweep_reuse");
    AttackSweepSpec reuse = small_sweep(out2);
    reuse.runs = 1;
    reuse.reuse_checkpoint = out1 / "checkpoint.rdsa";
    const SweepResult r = run_attack_pipeline(reuse);
    CHECK(slurp(out1 / "aggregate.csv") == slurp(out2 / "aggregate.csv"));
    CHECK(r.training_log.epochs.empty());  // no retraining happened
}

TEST_CASE("augmentation pipeline: doubling, lineage, untouched test split") {
    const fs::path out = fresh_dir("rdsa_aug");
    AugmentationSpec spec;
    spec.data = small_synthetic(1200);
    spec.model = small_model();
    spec.reduction_fraction = 0.1;
    RdsaStrategy rdsa_strategy;
    rdsa_strategy.n_vars = 4;
    rdsa_strategy.max_attempts = 30;
    rdsa_strategy.bins = 32;
    GradientStrategy grad;
    grad.cfg.epsilon = 0.1;
    grad.cfg.steps = 25;
    spec.strategies = {NoAugmentation{}, rdsa_strategy, grad};
    spec.repetitions = 3;
    spec.seed_base = 42;
    spec.out_dir = out;

    const AugmentationResult result = run_augmentation_pipeline(spec);
    REQUIRE(result.cells.size() == 3);
    CHECK(result.cells[0].name == "none");
    CHECK(result.cells[1].name == "rdsa_nv4");
    CHECK(result.cells[2].name == "grad_e0.1_s25");
    for (const StrategyCell& cell : result.cells) {
        REQUIRE(cell.per_rep.size() == 3);
        for (const MetricsReport& r : cell.per_rep) {
            CHECK(r.auroc > 0.5);
            CHECK(r.accuracy > 0.5);
        }
    }
    CHECK(result.test_fingerprint_before == result.test_fingerprint_after);

    // augmented set of repetition 0 doubles the reduced size (72 = 2 * 0.1*720)
    const std::string aug_csv = slurp(out / "reps/rep_0/rdsa_nv4/augmented.csv");
    const std::size_t rows = static_cast<std::size_t>(
        std::count(aug_csv.begin(), aug_csv.end(), '\n'));
    CHECK(rows == 2 * 72 + 1);  // header included

    CHECK(fs::exists(out / "aggregate.csv"));
    CHECK(fs::exists(out / "hashes.json"));
    CHECK(fs::exists(out / "reps/rep_2/none/metrics.json"));
}

TEST_CASE("augmentation pipeline: repetition seed lineage reproduces exactly") {
    AugmentationSpec spec;
    spec.data = small_synthetic(800);
    spec.model = small_model();
    spec.target_size = 50;
    RdsaStrategy strategy;
    strategy.n_vars = 2;
    strategy.max_attempts = 15;
    strategy.bins = 16;
    spec.strategies = {strategy};
    spec.repetitions = 2;
    spec.seed_base = 42;

    const AugmentationResult a = run_augmentation_pipeline(spec);
    const AugmentationResult b = run_augmentation_pipeline(spec);
    REQUIRE(a.cells.size() == 1);
    for (std::size_t rep = 0; rep < 2; ++rep) {
        CHECK(a.cells[0].per_rep[rep].auroc == b.cells[0].per_rep[rep].auroc);
        CHECK(a.cells[0].per_rep[rep].accuracy == b.cells[0].per_rep[rep].accuracy);
        CHECK(a.cells[0].per_rep[rep].fooling_ratio == b.cells[0].per_rep[rep].fooling_ratio);
    }

    // a single-repetition run reproduces repetition 0 of the two-rep run
    AugmentationSpec single = spec;
    single.repetitions = 1;
    const AugmentationResult c = run_augmentation_pipeline(single);
    CHECK(c.cells[0].per_rep[0].auroc == a.cells[0].per_rep[0].auroc);
}

TEST_CASE("augmentation pipeline: config validation") {
    AugmentationSpec spec;
    spec.data = small_synthetic(800);
    spec.model = small_model();
    spec.strategies = {NoAugmentation{}};
    spec.repetitions = 1;
    // neither fraction nor target size
    CHECK_THROWS_AS(static_cast<void>(run_augmentation_pipeline(spec)), Error);

    spec.reduction_fraction = 0.1;
    spec.target_size = 50;  // both set
    CHECK_THROWS_AS(static_cast<void>(run_augmentation_pipeline(spec)), Error);

    spec.target_size.reset();
    RdsaStrategy oversized;
    oversized.n_vars = 99;
    spec.strategies = {oversized};
    try {
        static_cast<void>(run_augmentation_pipeline(spec));
        FAIL("expected TooManyVars");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::too_many_vars);
    }
}
