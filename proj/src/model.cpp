#include "rdsa/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "rdsa/error.hpp"
#include "rdsa/kernels.hpp"
#include "rdsa/rng.hpp"

namespace rdsa {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kBnMomentum = 0.99;
constexpr double kBnEps = 1e-3;
constexpr double kProbClamp = 1e-12;

constexpr std::uint64_t kInitSalt = 0x494e4954;
constexpr std::uint64_t kShuffleSalt = 0x53485546;

constexpr char kCheckpointMagic[] = "RDSACKPT1\n";
constexpr std::size_t kMagicLen = sizeof(kCheckpointMagic) - 1;

[[noreturn]] void architecture_error(const std::string& msg) {
    throw Error(ErrorKind::config, ErrorCode::invalid_architecture, msg);
}

void apply_activation(Activation act, std::span<const double> z, std::span<double> out) {
    switch (act) {
        case Activation::relu:
            for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] > 0.0 ? z[i] : 0.0;
            break;
        case Activation::sigmoid:
            for (std::size_t i = 0; i < z.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-z[i]));
            break;
        case Activation::linear:
            std::copy(z.begin(), z.end(), out.begin());
            break;
        case Activation::softmax: {
            double mx = z[0];
            for (double v : z) mx = std::max(mx, v);
            double total = 0.0;
            for (std::size_t i = 0; i < z.size(); ++i) {
                out[i] = std::exp(z[i] - mx);
                total += out[i];
            }
            for (std::size_t i = 0; i < z.size(); ++i) out[i] /= total;
            break;
        }
    }
}

// derivative of the activation given pre-activation z and activation a;
// softmax is always fused with the loss and never goes through here
double activation_grad(Activation act, double z, double a) {
    switch (act) {
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::sigmoid: return a * (1.0 - a);
        case Activation::linear: return 1.0;
        case Activation::softmax: break;
    }
    throw Error(ErrorKind::logic, ErrorCode::invalid_architecture,
                "softmax gradient must be fused with the loss");
}

void write_doubles_le(std::ofstream& out, std::span<const double> values) {
    for (double v : values) {
        std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
        unsigned char bytes[8];
        for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
        out.write(reinterpret_cast<const char*>(bytes), 8);
    }
}

void read_doubles_le(std::ifstream& in, std::span<double> values) {
    for (double& v : values) {
        unsigned char bytes[8];
        in.read(reinterpret_cast<char*>(bytes), 8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
        v = std::bit_cast<double>(bits);
    }
}

}  // namespace

struct Classifier::ForwardCache {
    const Matrix* input = nullptr;
    bool training_mode = false;
    std::vector<Matrix> z;      // pre-activations
    std::vector<Matrix> a;      // activations (pre batch-norm)
    std::vector<Matrix> y;      // layer outputs
    std::vector<Matrix> xhat;   // normalized activations (bn layers only)
    std::vector<std::vector<double>> bn_mean, bn_var, bn_inv_std;
};

void ModelConfig::validate() const {
    if (input_dim < 1) architecture_error("input_dim must be >= 1");
    if (layers.empty()) architecture_error("at least one layer is required");
    if (!(learning_rate > 0.0)) architecture_error("learning_rate must be > 0");
    if (batch_size < 1) architecture_error("batch_size must be >= 1");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].width < 1) architecture_error("layer width must be >= 1");
        if (layers[i].activation == Activation::softmax && i + 1 != layers.size())
            architecture_error("softmax is only allowed on the output layer");
    }
    const LayerSpec& out = layers.back();
    if (out.batch_norm) architecture_error("batch norm is not supported on the output layer");
    if (loss == Loss::binary_cross_entropy) {
        if (out.activation != Activation::sigmoid || out.width != 1)
            architecture_error("binary cross-entropy requires a sigmoid output of width 1");
    } else {
        if (out.activation != Activation::softmax || out.width < 2)
            architecture_error("categorical cross-entropy requires a softmax output of width >= 2");
    }
}

std::size_t ModelConfig::parameter_count() const {
    std::size_t count = 0;
    std::size_t fan_in = input_dim;
    for (const LayerSpec& l : layers) {
        count += fan_in * l.width + l.width;
        if (l.batch_norm) count += 2 * l.width;
        fan_in = l.width;
    }
    return count;
}

Classifier::Classifier(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
    build_plans();
    init_parameters();
}

void Classifier::build_plans() {
    plans_.clear();
    std::size_t p_off = 0, s_off = 0;
    std::size_t fan_in = config_.input_dim;
    for (const LayerSpec& spec : config_.layers) {
        LayerPlan plan;
        plan.in = fan_in;
        plan.out = spec.width;
        plan.act = spec.activation;
        plan.bn = spec.batch_norm;
        plan.w_off = p_off;
        p_off += plan.in * plan.out;
        plan.b_off = p_off;
        p_off += plan.out;
        if (plan.bn) {
            plan.gamma_off = p_off;
            p_off += plan.out;
            plan.beta_off = p_off;
            p_off += plan.out;
            plan.rmean_off = s_off;
            s_off += plan.out;
            plan.rvar_off = s_off;
            s_off += plan.out;
        }
        plans_.push_back(plan);
        fan_in = spec.width;
    }
    params_.assign(p_off, 0.0);
    state_.assign(s_off, 0.0);
}

void Classifier::init_parameters() {
    Rng rng(derive_seed(config_.init_seed, kInitSalt));
    for (const LayerPlan& plan : plans_) {
        const double limit = std::sqrt(6.0 / static_cast<double>(plan.in + plan.out));
        for (std::size_t i = 0; i < plan.in * plan.out; ++i)
            params_[plan.w_off + i] = rng.uniform(-limit, limit);
        for (std::size_t i = 0; i < plan.out; ++i) params_[plan.b_off + i] = 0.0;
        if (plan.bn) {
            for (std::size_t i = 0; i < plan.out; ++i) {
                params_[plan.gamma_off + i] = 1.0;
                params_[plan.beta_off + i] = 0.0;
                state_[plan.rmean_off + i] = 0.0;
                state_[plan.rvar_off + i] = 1.0;
            }
        }
    }
    trained_ = false;
}

int Classifier::num_classes() const {
    return config_.loss == Loss::binary_cross_entropy
               ? 2
               : static_cast<int>(config_.layers.back().width);
}

void Classifier::check_input(std::span<const double> x) const {
    if (x.size() != config_.input_dim)
        throw Error(ErrorKind::logic, ErrorCode::dimension_mismatch,
                    "input has " + std::to_string(x.size()) + " features, model expects " +
                        std::to_string(config_.input_dim));
}

void Classifier::forward_batch(const Matrix& x, bool training_mode, ForwardCache& cache) const {
    const std::size_t batch = x.rows();
    const std::size_t layer_count = plans_.size();
    cache.input = &x;
    cache.training_mode = training_mode;
    cache.z.assign(layer_count, {});
    cache.a.assign(layer_count, {});
    cache.y.assign(layer_count, {});
    cache.xhat.assign(layer_count, {});
    cache.bn_mean.assign(layer_count, {});
    cache.bn_var.assign(layer_count, {});
    cache.bn_inv_std.assign(layer_count, {});

    const Matrix* cur = &x;
    for (std::size_t l = 0; l < layer_count; ++l) {
        const LayerPlan& plan = plans_[l];
        cache.z[l] = Matrix(batch, plan.out);
        cache.a[l] = Matrix(batch, plan.out);
        for (std::size_t b = 0; b < batch; ++b) {
            kernels::matvec(params_.data() + plan.w_off, plan.out, plan.in, cur->row(b).data(),
                            params_.data() + plan.b_off, cache.z[l].row(b).data());
            apply_activation(plan.act, cache.z[l].row(b), cache.a[l].row(b));
        }
        if (plan.bn) {
            auto& mean = cache.bn_mean[l];
            auto& var = cache.bn_var[l];
            auto& inv_std = cache.bn_inv_std[l];
            mean.assign(plan.out, 0.0);
            var.assign(plan.out, 0.0);
            inv_std.assign(plan.out, 0.0);
            if (training_mode) {
                for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t j = 0; j < plan.out; ++j) mean[j] += cache.a[l](b, j);
                for (std::size_t j = 0; j < plan.out; ++j) mean[j] /= static_cast<double>(batch);
                for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t j = 0; j < plan.out; ++j) {
                        const double d = cache.a[l](b, j) - mean[j];
                        var[j] += d * d;
                    }
                for (std::size_t j = 0; j < plan.out; ++j) var[j] /= static_cast<double>(batch);
            } else {
                for (std::size_t j = 0; j < plan.out; ++j) {
                    mean[j] = state_[plan.rmean_off + j];
                    var[j] = state_[plan.rvar_off + j];
                }
            }
            for (std::size_t j = 0; j < plan.out; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + kBnEps);
            cache.xhat[l] = Matrix(batch, plan.out);
            cache.y[l] = Matrix(batch, plan.out);
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t j = 0; j < plan.out; ++j) {
                    const double xh = (cache.a[l](b, j) - mean[j]) * inv_std[j];
                    cache.xhat[l](b, j) = xh;
                    cache.y[l](b, j) = params_[plan.gamma_off + j] * xh + params_[plan.beta_off + j];
                }
        } else {
            cache.y[l] = cache.a[l];
        }
        cur = &cache.y[l];
    }
}

void Classifier::update_running_stats(const ForwardCache& cache) {
    for (std::size_t l = 0; l < plans_.size(); ++l) {
        const LayerPlan& plan = plans_[l];
        if (!plan.bn) continue;
        for (std::size_t j = 0; j < plan.out; ++j) {
            state_[plan.rmean_off + j] =
                kBnMomentum * state_[plan.rmean_off + j] + (1.0 - kBnMomentum) * cache.bn_mean[l][j];
            state_[plan.rvar_off + j] =
                kBnMomentum * state_[plan.rvar_off + j] + (1.0 - kBnMomentum) * cache.bn_var[l][j];
        }
    }
}

double Classifier::loss_from_cache(const ForwardCache& cache, std::span<const int> labels) const {
    const Matrix& out = cache.y.back();
    const std::size_t batch = out.rows();
    double total = 0.0;
    if (config_.loss == Loss::categorical_cross_entropy) {
        for (std::size_t b = 0; b < batch; ++b) {
            const double p = std::max(out(b, static_cast<std::size_t>(labels[b])), kProbClamp);
            total -= std::log(p);
        }
    } else {
        for (std::size_t b = 0; b < batch; ++b) {
            const double p = std::clamp(out(b, 0), kProbClamp, 1.0 - kProbClamp);
            total -= labels[b] == 1 ? std::log(p) : std::log(1.0 - p);
        }
    }
    return total / static_cast<double>(batch);
}

std::vector<double> Classifier::backward_batch(const ForwardCache& cache,
                                               std::span<const int> labels, bool training_mode,
                                               std::vector<double>* input_grads) const {
    const std::size_t batch = cache.y.back().rows();
    const double inv_batch = 1.0 / static_cast<double>(batch);
    std::vector<double> grads(params_.size(), 0.0);

    // fused loss + output activation: dL/dz = p - onehot(y), averaged
    const std::size_t out_width = plans_.back().out;
    Matrix delta(batch, out_width);
    const Matrix& probs = cache.y.back();
    if (config_.loss == Loss::categorical_cross_entropy) {
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t k = 0; k < out_width; ++k)
                delta(b, k) =
                    (probs(b, k) - (static_cast<std::size_t>(labels[b]) == k ? 1.0 : 0.0)) *
                    inv_batch;
    } else {
        for (std::size_t b = 0; b < batch; ++b)
            delta(b, 0) = (probs(b, 0) - static_cast<double>(labels[b])) * inv_batch;
    }

    for (std::size_t li = plans_.size(); li-- > 0;) {
        const LayerPlan& plan = plans_[li];
        const Matrix& layer_input = li == 0 ? *cache.input : cache.y[li - 1];

        // delta currently holds dL/dz for this layer
        for (std::size_t b = 0; b < batch; ++b) {
            kernels::rank1_accum(grads.data() + plan.w_off, plan.out, plan.in,
                                 delta.row(b).data(), layer_input.row(b).data());
            kernels::axpy(1.0, delta.row(b), {grads.data() + plan.b_off, plan.out});
        }

        if (li == 0) {
            if (input_grads) {
                input_grads->assign(plan.in, 0.0);
                std::vector<double> dx(plan.in);
                for (std::size_t b = 0; b < batch; ++b) {
                    kernels::matvec_t(params_.data() + plan.w_off, plan.out, plan.in,
                                      delta.row(b).data(), dx.data());
                    kernels::axpy(1.0, dx, *input_grads);
                }
            }
            break;
        }

        // propagate to the previous layer's output
        const LayerPlan& prev = plans_[li - 1];
        Matrix dy(batch, plan.in);
        for (std::size_t b = 0; b < batch; ++b)
            kernels::matvec_t(params_.data() + plan.w_off, plan.out, plan.in, delta.row(b).data(),
                              dy.row(b).data());

        Matrix da(batch, prev.out);
        if (prev.bn) {
            const auto& inv_std = cache.bn_inv_std[li - 1];
            std::vector<double> dgamma(prev.out, 0.0), dbeta(prev.out, 0.0);
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t j = 0; j < prev.out; ++j) {
                    dgamma[j] += dy(b, j) * cache.xhat[li - 1](b, j);
                    dbeta[j] += dy(b, j);
                }
            for (std::size_t j = 0; j < prev.out; ++j) {
                grads[prev.gamma_off + j] += dgamma[j];
                grads[prev.beta_off + j] += dbeta[j];
            }
            if (training_mode) {
                // batch statistics participate in the forward pass, so their
                // dependence on every sample shows up here
                for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t j = 0; j < prev.out; ++j) {
                        const double g = params_[prev.gamma_off + j] * inv_std[j];
                        da(b, j) = g * (dy(b, j) - dbeta[j] * inv_batch -
                                        cache.xhat[li - 1](b, j) * dgamma[j] * inv_batch);
                    }
            } else {
                for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t j = 0; j < prev.out; ++j)
                        da(b, j) = dy(b, j) * params_[prev.gamma_off + j] * inv_std[j];
            }
        } else {
            da = std::move(dy);
        }

        delta = Matrix(batch, prev.out);
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t j = 0; j < prev.out; ++j)
                delta(b, j) =
                    da(b, j) * activation_grad(prev.act, cache.z[li - 1](b, j), cache.a[li - 1](b, j));
    }
    return grads;
}

double Classifier::batch_loss(const Matrix& x, std::span<const int> labels,
                              bool training_mode) const {
    if (x.cols() != config_.input_dim || x.rows() != labels.size())
        throw Error(ErrorKind::logic, ErrorCode::dimension_mismatch,
                    "batch shape does not match model input");
    ForwardCache cache;
    forward_batch(x, training_mode, cache);
    return loss_from_cache(cache, labels);
}

std::vector<double> Classifier::parameter_gradients(const Matrix& x,
                                                    std::span<const int> labels) const {
    if (x.cols() != config_.input_dim || x.rows() != labels.size())
        throw Error(ErrorKind::logic, ErrorCode::dimension_mismatch,
                    "batch shape does not match model input");
    ForwardCache cache;
    forward_batch(x, /*training_mode=*/true, cache);
    return backward_batch(cache, labels, /*training_mode=*/true, nullptr);
}

TrainingLog Classifier::train(const Dataset& train_set, const Dataset& val_set) {
    if (train_set.num_features() != config_.input_dim)
        throw Error(ErrorKind::data, ErrorCode::dimension_mismatch,
                    "training data feature count does not match model input_dim");
    if (!val_set.labels.empty() && val_set.num_features() != config_.input_dim)
        throw Error(ErrorKind::data, ErrorCode::dimension_mismatch,
                    "validation data feature count does not match model input_dim");
    const int k = num_classes();
    for (int label : train_set.labels)
        if (label >= k)
            throw Error(ErrorKind::data, ErrorCode::dimension_mismatch,
                        "training label exceeds model class count");

    const std::size_t n = train_set.size();
    std::vector<double> m(params_.size(), 0.0), v(params_.size(), 0.0);
    std::size_t step = 0;
    Rng shuffle_rng(derive_seed(config_.init_seed, kShuffleSalt));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    TrainingLog log;
    for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(shuffle_rng.below(n - i));
            std::swap(order[i], order[j]);
        }
        for (std::size_t start = 0; start < n; start += config_.batch_size) {
            const std::size_t count = std::min(config_.batch_size, n - start);
            Matrix x(count, config_.input_dim);
            std::vector<int> labels(count);
            for (std::size_t b = 0; b < count; ++b) {
                auto src = train_set.features.row(order[start + b]);
                std::copy(src.begin(), src.end(), x.row(b).begin());
                labels[b] = train_set.labels[order[start + b]];
            }
            ForwardCache cache;
            forward_batch(x, /*training_mode=*/true, cache);
            const double loss = loss_from_cache(cache, labels);
            if (!std::isfinite(loss))
                throw Error(ErrorKind::training, ErrorCode::non_finite_loss,
                            "non-finite training loss in epoch " + std::to_string(epoch));
            const std::vector<double> grads =
                backward_batch(cache, labels, /*training_mode=*/true, nullptr);
            update_running_stats(cache);

            ++step;
            const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
            if (config_.optimizer == Optimizer::adam)
                kernels::adam_step(params_.data(), m.data(), v.data(), grads.data(),
                                   params_.size(), config_.learning_rate, kAdamBeta1, kAdamBeta2,
                                   kAdamEps, bc1, bc2);
            else
                kernels::nadam_step(params_.data(), m.data(), v.data(), grads.data(),
                                    params_.size(), config_.learning_rate, kAdamBeta1, kAdamBeta2,
                                    kAdamEps, bc1, bc2);
        }

        EpochStats stats;
        auto eval = [this](const Dataset& d, double& loss_out, double& acc_out) {
            if (d.labels.empty()) {
                loss_out = 0.0;
                acc_out = 0.0;
                return;
            }
            double total = 0.0;
            std::size_t correct = 0;
            for (std::size_t r = 0; r < d.size(); ++r) {
                const auto proba = predict_proba(d.features.row(r));
                const int label = d.labels[r];
                if (config_.loss == Loss::categorical_cross_entropy) {
                    total -= std::log(std::max(proba[static_cast<std::size_t>(label)], kProbClamp));
                } else {
                    const double p = std::clamp(proba[1], kProbClamp, 1.0 - kProbClamp);
                    total -= label == 1 ? std::log(p) : std::log(1.0 - p);
                }
                int best = 0;
                for (std::size_t c = 1; c < proba.size(); ++c)
                    if (proba[c] > proba[best]) best = static_cast<int>(c);
                if (config_.loss == Loss::binary_cross_entropy) best = proba[1] >= 0.5 ? 1 : 0;
                if (best == label) ++correct;
            }
            loss_out = total / static_cast<double>(d.size());
            acc_out = static_cast<double>(correct) / static_cast<double>(d.size());
        };
        eval(train_set, stats.train_loss, stats.train_accuracy);
        eval(val_set, stats.val_loss, stats.val_accuracy);
        log.epochs.push_back(stats);
    }

    for (double p : params_)
        if (!std::isfinite(p))
            throw Error(ErrorKind::training, ErrorCode::non_finite_loss,
                        "training produced non-finite weights");
    trained_ = true;
    return log;
}

std::vector<double> Classifier::predict_proba(std::span<const double> x) const {
    check_input(x);
    std::vector<double> cur(x.begin(), x.end());
    std::vector<double> next;
    for (const LayerPlan& plan : plans_) {
        next.assign(plan.out, 0.0);
        kernels::matvec(params_.data() + plan.w_off, plan.out, plan.in, cur.data(),
                        params_.data() + plan.b_off, next.data());
        apply_activation(plan.act, next, next);
        if (plan.bn) {
            for (std::size_t j = 0; j < plan.out; ++j) {
                const double inv_std = 1.0 / std::sqrt(state_[plan.rvar_off + j] + kBnEps);
                next[j] = params_[plan.gamma_off + j] * (next[j] - state_[plan.rmean_off + j]) *
                              inv_std +
                          params_[plan.beta_off + j];
            }
        }
        cur.swap(next);
    }
    if (config_.loss == Loss::binary_cross_entropy) return {1.0 - cur[0], cur[0]};
    return cur;
}

int Classifier::predict(std::span<const double> x) const {
    const auto proba = predict_proba(x);
    if (config_.loss == Loss::binary_cross_entropy) return proba[1] >= 0.5 ? 1 : 0;
    std::size_t best = 0;
    for (std::size_t c = 1; c < proba.size(); ++c)
        if (proba[c] > proba[best]) best = c;  // ties break to the lowest class index
    return static_cast<int>(best);
}

std::vector<double> Classifier::input_gradient(std::span<const double> x, int label) const {
    check_input(x);
    if (label < 0 || label >= num_classes())
        throw Error(ErrorKind::logic, ErrorCode::dimension_mismatch, "label out of range");

    const std::size_t layer_count = plans_.size();
    std::vector<std::vector<double>> zs(layer_count), as(layer_count), ys(layer_count);
    std::vector<double> cur(x.begin(), x.end());
    for (std::size_t l = 0; l < layer_count; ++l) {
        const LayerPlan& plan = plans_[l];
        zs[l].assign(plan.out, 0.0);
        kernels::matvec(params_.data() + plan.w_off, plan.out, plan.in, cur.data(),
                        params_.data() + plan.b_off, zs[l].data());
        as[l].assign(plan.out, 0.0);
        apply_activation(plan.act, zs[l], as[l]);
        ys[l] = as[l];
        if (plan.bn) {
            for (std::size_t j = 0; j < plan.out; ++j) {
                const double inv_std = 1.0 / std::sqrt(state_[plan.rvar_off + j] + kBnEps);
                ys[l][j] = params_[plan.gamma_off + j] * (as[l][j] - state_[plan.rmean_off + j]) *
                               inv_std +
                           params_[plan.beta_off + j];
            }
        }
        cur = ys[l];
    }

    // output delta, loss fused with the output activation
    std::vector<double> delta;
    if (config_.loss == Loss::categorical_cross_entropy) {
        delta = ys.back();
        delta[static_cast<std::size_t>(label)] -= 1.0;
    } else {
        delta = {ys.back()[0] - static_cast<double>(label)};
    }

    std::vector<double> dx;
    for (std::size_t li = layer_count; li-- > 0;) {
        const LayerPlan& plan = plans_[li];
        dx.assign(plan.in, 0.0);
        kernels::matvec_t(params_.data() + plan.w_off, plan.out, plan.in, delta.data(), dx.data());
        if (li == 0) break;
        const LayerPlan& prev = plans_[li - 1];
        delta.assign(prev.out, 0.0);
        for (std::size_t j = 0; j < prev.out; ++j) {
            double g = dx[j];
            if (prev.bn) {
                const double inv_std = 1.0 / std::sqrt(state_[prev.rvar_off + j] + kBnEps);
                g *= params_[prev.gamma_off + j] * inv_std;
            }
            delta[j] = g * activation_grad(prev.act, zs[li - 1][j], as[li - 1][j]);
        }
    }
    return dx;
}

void Classifier::reset() {
    init_parameters();
}

void Classifier::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::data, ErrorCode::io_failure, "cannot write " + path.string());

    nlohmann::json header;
    header["format"] = 1;
    header["config"] = to_json(config_);
    header["trained"] = trained_;
    header["param_count"] = params_.size();
    header["state_count"] = state_.size();
    nlohmann::json offsets = nlohmann::json::array();
    for (const LayerPlan& plan : plans_) {
        nlohmann::json o{{"w", plan.w_off}, {"b", plan.b_off}};
        if (plan.bn) {
            o["gamma"] = plan.gamma_off;
            o["beta"] = plan.beta_off;
            o["running_mean"] = plan.rmean_off;
            o["running_var"] = plan.rvar_off;
        }
        offsets.push_back(o);
    }
    header["layer_offsets"] = offsets;
    const std::string header_str = header.dump();

    out.write(kCheckpointMagic, static_cast<std::streamsize>(kMagicLen));
    std::uint64_t len = header_str.size();
    unsigned char len_bytes[8];
    for (int i = 0; i < 8; ++i) len_bytes[i] = static_cast<unsigned char>((len >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(len_bytes), 8);
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    write_doubles_le(out, params_);
    write_doubles_le(out, state_);
    if (!out) throw Error(ErrorKind::data, ErrorCode::io_failure, "failed writing " + path.string());
}

Classifier Classifier::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::data, ErrorCode::io_failure, "cannot open " + path.string());

    char magic[kMagicLen];
    in.read(magic, static_cast<std::streamsize>(kMagicLen));
    if (!in || std::memcmp(magic, kCheckpointMagic, kMagicLen) != 0)
        throw Error(ErrorKind::data, ErrorCode::io_failure,
                    path.string() + " is not a model checkpoint");

    unsigned char len_bytes[8];
    in.read(reinterpret_cast<char*>(len_bytes), 8);
    std::uint64_t len = 0;
    for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(len_bytes[i]) << (8 * i);
    std::string header_str(len, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(len));
    if (!in) throw Error(ErrorKind::data, ErrorCode::io_failure, "truncated checkpoint header");

    nlohmann::json header = nlohmann::json::parse(header_str);
    Classifier c(model_config_from_json(header.at("config")));
    const auto param_count = header.at("param_count").get<std::size_t>();
    const auto state_count = header.at("state_count").get<std::size_t>();
    if (param_count != c.params_.size() || state_count != c.state_.size())
        throw Error(ErrorKind::data, ErrorCode::io_failure,
                    "checkpoint parameter block does not match its config");
    read_doubles_le(in, c.params_);
    read_doubles_le(in, c.state_);
    if (!in) throw Error(ErrorKind::data, ErrorCode::io_failure, "truncated checkpoint body");
    c.trained_ = header.at("trained").get<bool>();
    return c;
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::softmax: return "softmax";
        case Activation::linear: return "linear";
    }
    return "?";
}

std::string to_string(Optimizer o) {
    return o == Optimizer::adam ? "adam" : "nadam";
}

std::string to_string(Loss l) {
    return l == Loss::binary_cross_entropy ? "binary_cross_entropy" : "categorical_cross_entropy";
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "softmax") return Activation::softmax;
    if (s == "linear") return Activation::linear;
    throw Error(ErrorKind::config, ErrorCode::bad_config, "unknown activation: " + s);
}

Optimizer optimizer_from_string(const std::string& s) {
    if (s == "adam") return Optimizer::adam;
    if (s == "nadam") return Optimizer::nadam;
    throw Error(ErrorKind::config, ErrorCode::bad_config, "unknown optimizer: " + s);
}

Loss loss_from_string(const std::string& s) {
    if (s == "binary_cross_entropy") return Loss::binary_cross_entropy;
    if (s == "categorical_cross_entropy") return Loss::categorical_cross_entropy;
    throw Error(ErrorKind::config, ErrorCode::bad_config, "unknown loss: " + s);
}

nlohmann::json to_json(const ModelConfig& c) {
    nlohmann::json layers = nlohmann::json::array();
    for (const LayerSpec& l : c.layers) {
        nlohmann::json lj{{"width", l.width}, {"activation", to_string(l.activation)}};
        if (l.batch_norm) lj["batch_norm"] = true;
        layers.push_back(lj);
    }
    return {{"input_dim", c.input_dim},
            {"layers", layers},
            {"optimizer", to_string(c.optimizer)},
            {"learning_rate", c.learning_rate},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"loss", to_string(c.loss)},
            {"init_seed", c.init_seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    static const char* allowed[] = {"input_dim", "layers",     "optimizer", "learning_rate",
                                    "batch_size", "epochs",    "loss",      "init_seed"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool known = false;
        for (const char* a : allowed) known = known || key == a;
        if (!known)
            throw Error(ErrorKind::config, ErrorCode::bad_config,
                        "unknown key in model config: " + key);
    }
    ModelConfig c;
    c.input_dim = j.at("input_dim").get<std::size_t>();
    for (const auto& lj : j.at("layers")) {
        for (const auto& [key, value] : lj.items()) {
            (void)value;
            if (key != "width" && key != "activation" && key != "batch_norm")
                throw Error(ErrorKind::config, ErrorCode::bad_config,
                            "unknown key in layer spec: " + key);
        }
        LayerSpec l;
        l.width = lj.at("width").get<std::size_t>();
        l.activation = activation_from_string(lj.at("activation").get<std::string>());
        l.batch_norm = lj.value("batch_norm", false);
        c.layers.push_back(l);
    }
    c.optimizer = optimizer_from_string(j.value("optimizer", "adam"));
    c.learning_rate = j.value("learning_rate", 1e-3);
    c.batch_size = j.value("batch_size", std::size_t{32});
    c.epochs = j.value("epochs", std::size_t{1});
    c.loss = loss_from_string(j.value("loss", "categorical_cross_entropy"));
    c.init_seed = j.value("init_seed", std::uint64_t{0});
    c.validate();
    return c;
}

nlohmann::json to_json(const TrainingLog& log) {
    nlohmann::json epochs = nlohmann::json::array();
    for (const EpochStats& e : log.epochs)
        epochs.push_back({{"train_loss", e.train_loss},
                          {"train_accuracy", e.train_accuracy},
                          {"val_loss", e.val_loss},
                          {"val_accuracy", e.val_accuracy}});
    return {{"epochs", epochs}};
}

}  // namespace rdsa
