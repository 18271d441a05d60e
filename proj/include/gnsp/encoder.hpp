#ifndef GNSP_ENCODER_HPP
#define GNSP_ENCODER_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "gnsp/linalg.hpp"

namespace gnsp {

enum class Activation { Gelu, Identity };

// tanh-approximated GELU and its exact derivative.
double gelu(double x);
double gelu_derivative(double x);

struct EncoderLayer {
    Matrix weight;  // d_in x d_out
    Vector bias;    // d_out, frozen after init
    Activation activation = Activation::Identity;
    bool trainable = true;

    Eigen::Index d_in() const { return weight.rows(); }
    Eigen::Index d_out() const { return weight.cols(); }
};

struct EncoderStack {
    std::vector<EncoderLayer> layers;
    bool normalize_output = true;

    std::size_t depth() const { return layers.size(); }
    Eigen::Index input_dim() const { return layers.front().d_in(); }
    Eigen::Index output_dim() const { return layers.back().d_out(); }
    void set_trainable(bool trainable);
};

// Throws DimensionError / ValueError when the layer chain is malformed.
void validate(const EncoderStack& stack);

struct ForwardTrace {
    std::vector<Matrix> layer_inputs;    // X_l, batch x d_in
    std::vector<Matrix> preactivations;  // O_l = X_l W_l + b_l
    Matrix pre_norm_output;
};

struct ForwardResult {
    Matrix embeddings;
    std::optional<ForwardTrace> trace;
};

struct Gradients {
    std::vector<Matrix> d_weight;  // one per layer, zero for frozen layers

    static Gradients zeros_like(const EncoderStack& stack);
    Gradients& operator+=(const Gradients& other);
    Gradients& operator*=(double factor);
};

// dims = {d_0, d_1, ..., d_L}. Hidden layers use `hidden`, the final layer is
// always Identity. Glorot-uniform weights, zero biases.
EncoderStack init_stack(const std::vector<Eigen::Index>& dims, Activation hidden,
                        std::uint64_t seed);

ForwardResult forward(const EncoderStack& stack, const Matrix& batch, bool capture);

Matrix apply_layer(const EncoderLayer& layer, const Matrix& input);

Gradients backward(const EncoderStack& stack, const ForwardTrace& trace,
                   const Matrix& d_embeddings);

// Central differences over every trainable weight entry; weights are restored
// bit-exactly afterwards.
Gradients finite_diff_grad(EncoderStack& stack,
                           const std::function<double(const EncoderStack&)>& loss_fn,
                           double epsilon);

// CLIP-like pair of towers. The text tower is frozen; the temperature is fixed.
struct DualEncoder {
    EncoderStack image_encoder;
    EncoderStack text_encoder;
    double temperature = 0.07;

    Matrix embed_images(const Matrix& images) const;
    Matrix embed_texts(const Matrix& texts) const;
};

void validate(const DualEncoder& model);

}  // namespace gnsp

#endif  // GNSP_ENCODER_HPP
