#include "gnsp/encoder.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace gnsp {

namespace {

constexpr double kGeluCoeff = 0.044715;
const double kSqrtTwoOverPi = std::sqrt(2.0 / std::numbers::pi);
constexpr double kDegenerateNorm = 1e-12;

double activate(Activation act, double x) { return act == Activation::Gelu ? gelu(x) : x; }

double activate_derivative(Activation act, double x) {
    return act == Activation::Gelu ? gelu_derivative(x) : 1.0;
}

}  // namespace

double gelu(double x) {
    const double inner = kSqrtTwoOverPi * (x + kGeluCoeff * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(inner));
}

double gelu_derivative(double x) {
    const double inner = kSqrtTwoOverPi * (x + kGeluCoeff * x * x * x);
    const double t = std::tanh(inner);
    const double d_inner = kSqrtTwoOverPi * (1.0 + 3.0 * kGeluCoeff * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * d_inner;
}

void EncoderStack::set_trainable(bool trainable) {
    for (auto& layer : layers) layer.trainable = trainable;
}

void validate(const EncoderStack& stack) {
    if (stack.layers.empty()) throw ValueError("encoder stack has no layers");
    for (std::size_t k = 0; k < stack.layers.size(); ++k) {
        const auto& layer = stack.layers[k];
        if (layer.bias.size() != layer.d_out()) {
            throw DimensionError("layer " + std::to_string(k) + ": bias length " +
                                 std::to_string(layer.bias.size()) + " != d_out " +
                                 std::to_string(layer.d_out()));
        }
        if (k + 1 < stack.layers.size() && layer.d_out() != stack.layers[k + 1].d_in()) {
            throw DimensionError("layer " + std::to_string(k) + " outputs " +
                                 std::to_string(layer.d_out()) + " but layer " +
                                 std::to_string(k + 1) + " expects " +
                                 std::to_string(stack.layers[k + 1].d_in()));
        }
        if (!layer.weight.allFinite()) {
            throw ValueError("layer " + std::to_string(k) + " has non-finite weights");
        }
    }
    if (stack.layers.back().activation != Activation::Identity) {
        throw ValueError("final encoder layer must use the identity activation");
    }
}

Gradients Gradients::zeros_like(const EncoderStack& stack) {
    Gradients g;
    g.d_weight.reserve(stack.layers.size());
    for (const auto& layer : stack.layers) {
        g.d_weight.push_back(Matrix::Zero(layer.d_in(), layer.d_out()));
    }
    return g;
}

Gradients& Gradients::operator+=(const Gradients& other) {
    if (other.d_weight.size() != d_weight.size()) {
        throw DimensionError("gradient layer counts differ");
    }
    for (std::size_t k = 0; k < d_weight.size(); ++k) {
        if (d_weight[k].rows() != other.d_weight[k].rows() ||
            d_weight[k].cols() != other.d_weight[k].cols()) {
            throw DimensionError("gradient shapes differ at layer " + std::to_string(k) + ": " +
                                 shape_of(d_weight[k]) + " vs " + shape_of(other.d_weight[k]));
        }
        d_weight[k] += other.d_weight[k];
    }
    return *this;
}

Gradients& Gradients::operator*=(double factor) {
    for (auto& g : d_weight) g *= factor;
    return *this;
}

EncoderStack init_stack(const std::vector<Eigen::Index>& dims, Activation hidden,
                        std::uint64_t seed) {
    if (dims.size() < 2) throw ValueError("init_stack needs at least one layer (two sizes)");
    for (auto d : dims) {
        if (d < 1) throw ValueError("init_stack: layer sizes must be >= 1");
    }
    std::mt19937_64 rng(seed);
    EncoderStack stack;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        const Eigen::Index d_in = dims[k];
        const Eigen::Index d_out = dims[k + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(d_in + d_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        EncoderLayer layer;
        layer.weight.resize(d_in, d_out);
        for (Eigen::Index i = 0; i < d_in; ++i)
            for (Eigen::Index j = 0; j < d_out; ++j) layer.weight(i, j) = dist(rng);
        layer.bias = Vector::Zero(d_out);
        layer.activation = k + 2 == dims.size() ? Activation::Identity : hidden;
        layer.trainable = true;
        stack.layers.push_back(std::move(layer));
    }
    return stack;
}

Matrix apply_layer(const EncoderLayer& layer, const Matrix& input) {
    Matrix out = matmul(input, layer.weight);
    out.rowwise() += layer.bias.transpose();
    if (layer.activation != Activation::Identity) {
        out = out.unaryExpr([&layer](double x) { return activate(layer.activation, x); });
    }
    return out;
}

ForwardResult forward(const EncoderStack& stack, const Matrix& batch, bool capture) {
    if (stack.layers.empty()) throw ValueError("forward: empty encoder stack");
    if (batch.cols() != stack.input_dim()) {
        throw DimensionError("forward: batch is " + shape_of(batch) + " but the first layer expects " +
                             std::to_string(stack.input_dim()) + " columns");
    }
    ForwardResult result;
    if (capture) result.trace.emplace();
    Matrix x = batch;
    for (const auto& layer : stack.layers) {
        Matrix pre = matmul(x, layer.weight);
        pre.rowwise() += layer.bias.transpose();
        Matrix next = layer.activation == Activation::Identity
                          ? pre
                          : Matrix(pre.unaryExpr(
                                [&layer](double v) { return activate(layer.activation, v); }));
        if (capture) {
            result.trace->layer_inputs.push_back(std::move(x));
            result.trace->preactivations.push_back(std::move(pre));
        }
        x = std::move(next);
    }
    if (capture) result.trace->pre_norm_output = x;
    result.embeddings = stack.normalize_output ? l2_normalize_rows(x, kDegenerateNorm) : x;
    return result;
}

Gradients backward(const EncoderStack& stack, const ForwardTrace& trace,
                   const Matrix& d_embeddings) {
    const std::size_t depth = stack.layers.size();
    if (trace.layer_inputs.size() != depth || trace.preactivations.size() != depth) {
        throw DimensionError("backward: trace has " + std::to_string(trace.layer_inputs.size()) +
                             " layers, stack has " + std::to_string(depth));
    }
    if (d_embeddings.rows() != trace.pre_norm_output.rows() ||
        d_embeddings.cols() != trace.pre_norm_output.cols()) {
        throw DimensionError("backward: upstream gradient " + shape_of(d_embeddings) +
                             " does not match embeddings " + shape_of(trace.pre_norm_output));
    }
    for (std::size_t k = 0; k < depth; ++k) {
        const auto& layer = stack.layers[k];
        if (trace.layer_inputs[k].cols() != layer.d_in() ||
            trace.preactivations[k].cols() != layer.d_out()) {
            throw DimensionError("backward: trace does not match layer " + std::to_string(k));
        }
    }

    Matrix upstream = d_embeddings;
    if (stack.normalize_output) {
        // d/dx (x/|x|) = (I - u u^T)/|x|
        const Matrix& raw = trace.pre_norm_output;
        for (Eigen::Index i = 0; i < raw.rows(); ++i) {
            const double norm = raw.row(i).norm();
            if (norm < kDegenerateNorm) {
                upstream.row(i).setZero();
                continue;
            }
            const RowVector u = raw.row(i) / norm;
            const double along = upstream.row(i).dot(u);
            upstream.row(i) = (upstream.row(i) - along * u) / norm;
        }
    }

    Gradients grads = Gradients::zeros_like(stack);
    for (std::size_t k = depth; k-- > 0;) {
        const auto& layer = stack.layers[k];
        Matrix d_pre = upstream;
        if (layer.activation != Activation::Identity) {
            d_pre.array() *= trace.preactivations[k]
                                 .unaryExpr([&layer](double v) {
                                     return activate_derivative(layer.activation, v);
                                 })
                                 .array();
        }
        if (layer.trainable) {
            grads.d_weight[k].noalias() = trace.layer_inputs[k].transpose() * d_pre;
        }
        if (k > 0) upstream = matmul(d_pre, layer.weight.transpose());
    }
    return grads;
}

Gradients finite_diff_grad(EncoderStack& stack,
                           const std::function<double(const EncoderStack&)>& loss_fn,
                           double epsilon) {
    if (!(epsilon > 0.0)) throw ValueError("finite_diff_grad: epsilon must be positive");
    Gradients grads = Gradients::zeros_like(stack);
    for (std::size_t k = 0; k < stack.layers.size(); ++k) {
        if (!stack.layers[k].trainable) continue;
        Matrix& w = stack.layers[k].weight;
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            for (Eigen::Index j = 0; j < w.cols(); ++j) {
                const double original = w(i, j);
                w(i, j) = original + epsilon;
                const double plus = loss_fn(stack);
                w(i, j) = original - epsilon;
                const double minus = loss_fn(stack);
                w(i, j) = original;
                grads.d_weight[k](i, j) = (plus - minus) / (2.0 * epsilon);
            }
        }
    }
    return grads;
}

Matrix DualEncoder::embed_images(const Matrix& images) const {
    return forward(image_encoder, images, false).embeddings;
}

Matrix DualEncoder::embed_texts(const Matrix& texts) const {
    return forward(text_encoder, texts, false).embeddings;
}

void validate(const DualEncoder& model) {
    validate(model.image_encoder);
    validate(model.text_encoder);
    if (model.image_encoder.output_dim() != model.text_encoder.output_dim()) {
        throw DimensionError("image and text encoders produce different embedding widths (" +
                             std::to_string(model.image_encoder.output_dim()) + " vs " +
                             std::to_string(model.text_encoder.output_dim()) + ")");
    }
    if (!(model.temperature > 0.0)) throw ValueError("temperature must be positive");
}

}  // namespace gnsp
