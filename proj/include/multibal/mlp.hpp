#pragma once

#include "multibal/matrix.hpp"
#include "multibal/rng.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace multibal {

enum class Activation { relu, tanh, identity };

const char *to_string(Activation a);
Activation activation_from_string(const std::string &name);

struct DenseLayer {
    Matrix weight;  // out x in
    Vector bias;    // out
    Activation activation = Activation::identity;

    int input_dim() const { return static_cast<int>(weight.cols()); }
    int output_dim() const { return static_cast<int>(weight.rows()); }
};

struct MlpParams {
    std::vector<DenseLayer> layers;

    int input_dim() const;
    int output_dim() const;
    std::size_t parameter_count() const;
    std::vector<int> layer_dims() const;

    /// dims = {in, h1, ..., out}. Hidden layers use `hidden`, the last one `output`.
    /// Weights are U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
    static MlpParams init(std::span<const int> dims, Activation hidden, Activation output, RngStream &rng);
    static MlpParams zeros(std::span<const int> dims, Activation hidden, Activation output);
};

/// Everything backprop needs: the input to every layer and its pre-activation.
struct MlpCache {
    std::vector<Matrix> inputs;
    std::vector<Matrix> pre_activations;
};

struct MlpGrads {
    std::vector<Matrix> weight;
    std::vector<Vector> bias;
    Matrix input;  // dL/dX

    static MlpGrads zeros_like(const MlpParams &params);
    void add(const MlpGrads &other);
};

std::pair<Matrix, MlpCache> mlp_forward(const MlpParams &params, const Matrix &x);

/// Output only; no cache.
Matrix mlp_apply(const MlpParams &params, const Matrix &x);

MlpGrads mlp_backward(const MlpParams &params, const MlpCache &cache, const Matrix &grad_output);

// Flat views used by the optimizer and the finite-difference harness.
// Order: layer by layer, weight (row-major) then bias.
void append_flat(const MlpParams &params, std::vector<double> &out);
std::size_t load_flat(MlpParams &params, std::span<const double> flat, std::size_t offset);
void append_flat(const MlpGrads &grads, std::vector<double> &out);

}  // namespace multibal
