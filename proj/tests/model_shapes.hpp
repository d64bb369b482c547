#pragma once

// The six reference architectures used across tests: dense stacks with the
// published widths, batch-norm stages where the original networks carry
// them, and the documented optimizer settings.

#include <cstdint>

#include "rdsa/model.hpp"

namespace shapes {

using rdsa::Activation;
using rdsa::LayerSpec;
using rdsa::Loss;
using rdsa::ModelConfig;
using rdsa::Optimizer;

inline ModelConfig vbf(std::uint64_t seed = 0) {
    ModelConfig c;
    c.input_dim = 8;
    c.layers = {{8, Activation::relu},
                {8, Activation::relu},
                {4, Activation::relu},
                {4, Activation::relu},
                {2, Activation::softmax}};
    c.optimizer = Optimizer::nadam;
    c.learning_rate = 0.001;
    c.batch_size = 300;
    c.epochs = 200;
    c.loss = Loss::categorical_cross_entropy;
    c.init_seed = seed;
    return c;
}

inline ModelConfig topodnn(std::uint64_t seed = 0) {
    ModelConfig c;
    c.input_dim = 87;
    c.layers = {{300, Activation::relu, true},
                {102, Activation::relu, true},
                {12, Activation::relu, true},
                {6, Activation::relu, true},
                {1, Activation::sigmoid}};
    c.optimizer = Optimizer::adam;
    c.learning_rate = 0.00005;
    c.batch_size = 200;
    c.epochs = 100;
    c.loss = Loss::binary_cross_entropy;
    c.init_seed = seed;
    return c;
}

inline ModelConfig rain(std::uint64_t seed = 0) {
    ModelConfig c;
    c.input_dim = 21;
    c.layers = {{21, Activation::relu}, {21, Activation::relu}, {12, Activation::relu},
                {12, Activation::relu}, {4, Activation::relu},  {4, Activation::relu},
                {1, Activation::sigmoid}};
    c.optimizer = Optimizer::adam;
    c.learning_rate = 0.0001;
    c.batch_size = 200;
    c.epochs = 150;
    c.loss = Loss::binary_cross_entropy;
    c.init_seed = seed;
    return c;
}

inline ModelConfig mnist784(std::uint64_t seed = 0) {
    ModelConfig c;
    c.input_dim = 784;
    c.layers = {{128, Activation::relu},
                {64, Activation::relu},
                {32, Activation::relu},
                {16, Activation::relu},
                {10, Activation::softmax}};
    c.optimizer = Optimizer::adam;
    c.learning_rate = 0.000003;
    c.batch_size = 200;
    c.epochs = 100;
    c.loss = Loss::categorical_cross_entropy;
    c.init_seed = seed;
    return c;
}

inline ModelConfig har(std::uint64_t seed = 0) {
    ModelConfig c;
    c.input_dim = 561;
    c.layers = {{128, Activation::relu},
                {64, Activation::relu},
                {32, Activation::relu},
                {16, Activation::relu},
                {6, Activation::softmax}};
    c.optimizer = Optimizer::adam;
    c.learning_rate = 0.00003;
    c.batch_size = 200;
    c.epochs = 100;
    c.loss = Loss::categorical_cross_entropy;
    c.init_seed = seed;
    return c;
}

inline ModelConfig mimic(std::uint64_t seed = 0) {
    ModelConfig c;
    c.input_dim = 153;
    c.layers = {{153, Activation::relu}, {153, Activation::relu}, {64, Activation::relu},
                {64, Activation::relu},  {32, Activation::relu},  {32, Activation::relu},
                {16, Activation::relu},  {16, Activation::relu},  {1, Activation::sigmoid}};
    c.optimizer = Optimizer::adam;
    c.learning_rate = 0.000003;
    c.batch_size = 200;
    c.epochs = 100;
    c.loss = Loss::binary_cross_entropy;
    c.init_seed = seed;
    return c;
}

// Same stacks with smooth hidden activations, for finite-difference checks.
inline ModelConfig smoothed(ModelConfig c) {
    for (auto& layer : c.layers)
        if (layer.activation == Activation::relu) layer.activation = Activation::sigmoid;
    return c;
}

}  // namespace shapes
