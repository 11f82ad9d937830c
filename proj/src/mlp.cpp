#include "multibal/mlp.hpp"

#include "multibal/errors.hpp"

#include <cmath>

namespace multibal {

const char *to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::identity: return "identity";
    }
    return "identity";
}

Activation activation_from_string(const std::string &name) {
    if (name == "relu") { return Activation::relu; }
    if (name == "tanh") { return Activation::tanh; }
    if (name == "identity") { return Activation::identity; }
    throw Error(ErrorKind::config, "unknown activation '" + name + "'");
}

int MlpParams::input_dim() const {
    return layers.empty() ? 0 : layers.front().input_dim();
}

int MlpParams::output_dim() const {
    return layers.empty() ? 0 : layers.back().output_dim();
}

std::size_t MlpParams::parameter_count() const {
    std::size_t count = 0;
    for (const auto &layer : layers) {
        count += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
    }
    return count;
}

std::vector<int> MlpParams::layer_dims() const {
    std::vector<int> dims;
    if (layers.empty()) { return dims; }
    dims.push_back(input_dim());
    for (const auto &layer : layers) { dims.push_back(layer.output_dim()); }
    return dims;
}

MlpParams MlpParams::zeros(std::span<const int> dims, Activation hidden, Activation output) {
    require(dims.size() >= 2, ErrorKind::shape, "MlpParams: need at least input and output dims");
    MlpParams params;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        require(dims[l] > 0 && dims[l + 1] > 0, ErrorKind::shape, "MlpParams: layer dims must be positive");
        DenseLayer layer;
        layer.weight = Matrix::Zero(dims[l + 1], dims[l]);
        layer.bias = Vector::Zero(dims[l + 1]);
        layer.activation = (l + 2 == dims.size()) ? output : hidden;
        params.layers.push_back(std::move(layer));
    }
    return params;
}

MlpParams MlpParams::init(std::span<const int> dims, Activation hidden, Activation output, RngStream &rng) {
    MlpParams params = zeros(dims, hidden, output);
    for (auto &layer : params.layers) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.input_dim()));
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
            layer.weight.data()[i] = rng.uniform(-bound, bound);
        }
    }
    return params;
}

namespace {

void apply_activation(Activation a, Matrix &m) {
    switch (a) {
        case Activation::relu: m = m.cwiseMax(0.0); break;
        case Activation::tanh: m = m.array().tanh().matrix(); break;
        case Activation::identity: break;
    }
}

// grad *= activation'(pre), in place.
void apply_activation_derivative(Activation a, const Matrix &pre, Matrix &grad) {
    switch (a) {
        case Activation::relu: grad = (pre.array() > 0.0).select(grad, 0.0); break;
        case Activation::tanh: grad = grad.cwiseProduct((1.0 - pre.array().tanh().square()).matrix()); break;
        case Activation::identity: break;
    }
}

}  // namespace

std::pair<Matrix, MlpCache> mlp_forward(const MlpParams &params, const Matrix &x) {
    require(!params.layers.empty(), ErrorKind::shape, "mlp_forward: empty network");
    require(x.cols() == params.input_dim(), ErrorKind::shape,
            "mlp_forward: input has " + std::to_string(x.cols()) + " columns, network expects " +
                std::to_string(params.input_dim()));
    MlpCache cache;
    cache.inputs.reserve(params.layers.size());
    cache.pre_activations.reserve(params.layers.size());
    Matrix current = x;
    for (const auto &layer : params.layers) {
        Matrix pre = current * layer.weight.transpose();
        pre.rowwise() += layer.bias.transpose();
        cache.inputs.push_back(std::move(current));
        current = pre;
        apply_activation(layer.activation, current);
        cache.pre_activations.push_back(std::move(pre));
    }
    return {std::move(current), std::move(cache)};
}

Matrix mlp_apply(const MlpParams &params, const Matrix &x) {
    require(!params.layers.empty(), ErrorKind::shape, "mlp_apply: empty network");
    require(x.cols() == params.input_dim(), ErrorKind::shape, "mlp_apply: input dimension mismatch");
    Matrix current = x;
    for (const auto &layer : params.layers) {
        Matrix pre = current * layer.weight.transpose();
        pre.rowwise() += layer.bias.transpose();
        apply_activation(layer.activation, pre);
        current = std::move(pre);
    }
    return current;
}

MlpGrads mlp_backward(const MlpParams &params, const MlpCache &cache, const Matrix &grad_output) {
    const std::size_t depth = params.layers.size();
    require(cache.inputs.size() == depth && cache.pre_activations.size() == depth, ErrorKind::shape,
            "mlp_backward: cache does not match network depth");
    require(grad_output.rows() == cache.pre_activations.back().rows() &&
                grad_output.cols() == params.output_dim(),
            ErrorKind::shape, "mlp_backward: grad_output shape " + shape_string(grad_output) + " does not match");
    MlpGrads grads;
    grads.weight.resize(depth);
    grads.bias.resize(depth);
    Matrix delta = grad_output;
    for (std::size_t l = depth; l-- > 0;) {
        const DenseLayer &layer = params.layers[l];
        require(cache.pre_activations[l].cols() == layer.output_dim() &&
                    cache.inputs[l].cols() == layer.input_dim(),
                ErrorKind::shape, "mlp_backward: stale cache");
        apply_activation_derivative(layer.activation, cache.pre_activations[l], delta);
        grads.weight[l] = delta.transpose() * cache.inputs[l];
        grads.bias[l] = delta.colwise().sum().transpose();
        delta = delta * layer.weight;
    }
    grads.input = std::move(delta);
    return grads;
}

MlpGrads MlpGrads::zeros_like(const MlpParams &params) {
    MlpGrads g;
    for (const auto &layer : params.layers) {
        g.weight.push_back(Matrix::Zero(layer.weight.rows(), layer.weight.cols()));
        g.bias.push_back(Vector::Zero(layer.bias.size()));
    }
    return g;
}

void MlpGrads::add(const MlpGrads &other) {
    require(other.weight.size() == weight.size(), ErrorKind::shape, "MlpGrads::add: depth mismatch");
    for (std::size_t l = 0; l < weight.size(); ++l) {
        weight[l] += other.weight[l];
        bias[l] += other.bias[l];
    }
}

void append_flat(const MlpParams &params, std::vector<double> &out) {
    for (const auto &layer : params.layers) {
        out.insert(out.end(), layer.weight.data(), layer.weight.data() + layer.weight.size());
        out.insert(out.end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
    }
}

std::size_t load_flat(MlpParams &params, std::span<const double> flat, std::size_t offset) {
    for (auto &layer : params.layers) {
        const auto w = static_cast<std::size_t>(layer.weight.size());
        const auto b = static_cast<std::size_t>(layer.bias.size());
        require(offset + w + b <= flat.size(), ErrorKind::shape, "load_flat: flat vector too short");
        std::copy_n(flat.data() + offset, w, layer.weight.data());
        offset += w;
        std::copy_n(flat.data() + offset, b, layer.bias.data());
        offset += b;
    }
    return offset;
}

void append_flat(const MlpGrads &grads, std::vector<double> &out) {
    for (std::size_t l = 0; l < grads.weight.size(); ++l) {
        out.insert(out.end(), grads.weight[l].data(), grads.weight[l].data() + grads.weight[l].size());
        out.insert(out.end(), grads.bias[l].data(), grads.bias[l].data() + grads.bias[l].size());
    }
}

}  // namespace multibal
