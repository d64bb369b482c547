#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rdsa/dataset.hpp"
#include "rdsa/matrix.hpp"

#include "json.hpp"

namespace rdsa {

enum class Activation { relu, sigmoid, softmax, linear };
enum class Optimizer { adam, nadam };
enum class Loss { binary_cross_entropy, categorical_cross_entropy };

struct LayerSpec {
    std::size_t width = 1;
    Activation activation = Activation::relu;
    bool batch_norm = false;  // batch-normalization stage after the activation

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ModelConfig {
    std::size_t input_dim = 0;
    std::vector<LayerSpec> layers;
    Optimizer optimizer = Optimizer::adam;
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t epochs = 1;
    Loss loss = Loss::categorical_cross_entropy;
    std::uint64_t init_seed = 0;

    // Throws Error(config, invalid_architecture) when the architecture is
    // inconsistent (softmax anywhere but the output, sigmoid output with
    // width != 1, loss/output mismatch, batch norm on the output layer, ...).
    void validate() const;

    // Trainable parameters: sum of in*out + out per dense layer plus
    // 2*width per batch-normalization stage.
    std::size_t parameter_count() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct EpochStats {
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainingLog {
    std::vector<EpochStats> epochs;
};

// Feed-forward classifier with analytic backpropagation. Weight layout is a
// single flat parameter vector with per-layer offsets (the same layout the
// checkpoint format stores). predict/predict_proba/input_gradient are
// read-only and safe to call concurrently; train and reset are not.
class Classifier {
public:
    explicit Classifier(ModelConfig config);

    const ModelConfig& config() const { return config_; }
    bool is_trained() const { return trained_; }
    int num_classes() const;

    std::size_t parameter_count() const { return params_.size(); }
    std::span<const double> parameters() const { return params_; }
    // Mutable view of the trainable parameters; exists for finite-difference
    // verification and tests.
    std::span<double> parameters_mutable() { return params_; }

    // Mini-batch training with the configured optimizer. Deterministic for a
    // given init_seed (epoch shuffling uses a stream derived from it).
    // Throws Error(training, non_finite_loss) when the loss diverges.
    TrainingLog train(const Dataset& train_set, const Dataset& val_set);

    int predict(std::span<const double> x) const;
    // Per-class probabilities of size num_classes(); a sigmoid output p maps
    // to {1-p, p}.
    std::vector<double> predict_proba(std::span<const double> x) const;

    // d loss(f(x), label) / d x via backpropagation (inference mode).
    std::vector<double> input_gradient(std::span<const double> x, int label) const;

    // Mean loss over a batch. training_mode selects batch statistics for
    // batch-norm stages; running statistics are never modified here.
    double batch_loss(const Matrix& x, std::span<const int> labels, bool training_mode) const;

    // Flat gradient of batch_loss(x, labels, training_mode=true) with respect
    // to all trainable parameters. Shares the exact code path train() uses.
    std::vector<double> parameter_gradients(const Matrix& x, std::span<const int> labels) const;

    // Re-initializes all parameters from init_seed; equivalent to a freshly
    // constructed Classifier(config()).
    void reset();

    void save(const std::filesystem::path& path) const;
    static Classifier load(const std::filesystem::path& path);

private:
    struct LayerPlan {
        std::size_t in = 0, out = 0;
        Activation act = Activation::relu;
        bool bn = false;
        std::size_t w_off = 0, b_off = 0;
        std::size_t gamma_off = 0, beta_off = 0;  // in params_
        std::size_t rmean_off = 0, rvar_off = 0;  // in state_
    };

    struct ForwardCache;

    void build_plans();
    void init_parameters();
    void forward_batch(const Matrix& x, bool training_mode, ForwardCache& cache) const;
    void update_running_stats(const ForwardCache& cache);
    double loss_from_cache(const ForwardCache& cache, std::span<const int> labels) const;
    std::vector<double> backward_batch(const ForwardCache& cache, std::span<const int> labels,
                                       bool training_mode, std::vector<double>* input_grads) const;
    void check_input(std::span<const double> x) const;

    ModelConfig config_;
    std::vector<LayerPlan> plans_;
    std::vector<double> params_;  // trainable: W, b, gamma, beta
    std::vector<double> state_;   // batch-norm running mean / variance
    bool trained_ = false;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainingLog& log);

std::string to_string(Activation a);
std::string to_string(Optimizer o);
std::string to_string(Loss l);
Activation activation_from_string(const std::string& s);
Optimizer optimizer_from_string(const std::string& s);
Loss loss_from_string(const std::string& s);

}  // namespace rdsa
