#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gaitpred/matrix.hpp"
#include "gaitpred/rng.hpp"

namespace gaitpred {

// A named trainable tensor and its accumulated gradient.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;

    Parameter() = default;
    Parameter(std::string n, std::size_t rows, std::size_t cols)
        : name(std::move(n)), value(rows, cols), grad(rows, cols) {}
};

// Uniform(-l, l) with l = sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Matrix& m, std::size_t fan_in, std::size_t fan_out, SplitMix64& rng);

// Every layer maps a sequence (rows = time steps) to a sequence. forward()
// caches what backward() needs, so a forward/backward pair must not be
// interleaved with another forward on the same instance. backward() adds
// into the parameter gradients and returns the gradient w.r.t. the input.
class Layer {
public:
    virtual ~Layer() = default;

    virtual std::string kind() const = 0;
    virtual Matrix forward(const Matrix& input) = 0;
    virtual Matrix backward(const Matrix& grad_output) = 0;
    virtual std::vector<Parameter*> parameters() = 0;
    virtual std::unique_ptr<Layer> clone() const = 0;
    // Dropout masks are only drawn in training mode.
    virtual void set_training(bool) {}

    std::vector<const Parameter*> parameters() const;
    void zero_grad();
    std::size_t parameter_count() const;
};

// y = W x + b applied to every row; no activation.
class Dense final : public Layer {
public:
    Dense(std::size_t in, std::size_t out);
    Dense(std::size_t in, std::size_t out, SplitMix64& rng);

    std::string kind() const override { return "dense"; }
    Matrix forward(const Matrix& input) override;
    Matrix backward(const Matrix& grad_output) override;
    std::vector<Parameter*> parameters() override { return {&w_, &b_}; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }

    Parameter& weight() { return w_; }
    Parameter& bias() { return b_; }

private:
    Parameter w_;  // out x in
    Parameter b_;  // 1 x out
    Matrix input_;
};

// Dropout applied inside a recurrent layer: `input` masks x_t, `recurrent`
// masks h_{t-1} in the recurrence. One mask per sequence, inverted scaling.
struct DropoutConfig {
    double input = 0.0;
    double recurrent = 0.0;
    std::uint64_t seed = 0;

    bool active() const { return input > 0 || recurrent > 0; }
};

// h_t = tanh(W_x x_t + W_h h_{t-1} + b)
class SimpleRnn final : public Layer {
public:
    SimpleRnn(std::size_t in, std::size_t hidden, bool return_sequences);
    SimpleRnn(std::size_t in, std::size_t hidden, bool return_sequences, SplitMix64& rng);

    std::string kind() const override { return "rnn"; }
    Matrix forward(const Matrix& input) override;
    Matrix forward(const Matrix& input, const Matrix& h0);
    Matrix backward(const Matrix& grad_output) override;
    std::vector<Parameter*> parameters() override { return {&wx_, &wh_, &b_}; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<SimpleRnn>(*this); }
    void set_training(bool training) override { training_ = training; }

    void set_dropout(const DropoutConfig& cfg);
    std::size_t hidden() const { return hidden_; }
    // Gradient w.r.t. h0 from the last backward().
    const Matrix& initial_state_grad() const { return dh0_; }

private:
    std::size_t in_, hidden_;
    bool return_sequences_;
    Parameter wx_, wh_, b_;
    DropoutConfig dropout_;
    SplitMix64 dropout_rng_{0};
    bool training_ = false;

    Matrix x_;       // T x in, masked
    Matrix h_;       // (T+1) x hidden, row 0 = h0
    Matrix mask_x_;  // 1 x in
    Matrix mask_h_;  // 1 x hidden
    Matrix dh0_;
};

// Gate blocks are packed in the order input, forget, cell, output:
// rows [0,h) of W_x / W_h / b belong to the input gate, [h,2h) to the
// forget gate, and so on.
//   i,f,o = sigmoid(.), g = tanh(.), c_t = f*c_{t-1} + i*g, h_t = o*tanh(c_t)
class Lstm final : public Layer {
public:
    Lstm(std::size_t in, std::size_t hidden, bool return_sequences);
    // Glorot weights, zero biases, forget-gate bias 1.
    Lstm(std::size_t in, std::size_t hidden, bool return_sequences, SplitMix64& rng);

    std::string kind() const override { return "lstm"; }
    Matrix forward(const Matrix& input) override;
    Matrix forward(const Matrix& input, const Matrix& h0, const Matrix& c0);
    Matrix backward(const Matrix& grad_output) override;
    std::vector<Parameter*> parameters() override { return {&wx_, &wh_, &b_}; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Lstm>(*this); }
    void set_training(bool training) override { training_ = training; }

    void set_dropout(const DropoutConfig& cfg);
    std::size_t hidden() const { return hidden_; }
    bool return_sequences() const { return return_sequences_; }
    // Cell state after the last step of the last forward().
    Matrix final_cell() const;
    // Full hidden trajectory (T x hidden) of the last forward().
    Matrix hidden_sequence() const;
    const Matrix& initial_state_grad() const { return dh0_; }
    const Matrix& initial_cell_grad() const { return dc0_; }

    Parameter& input_weights() { return wx_; }
    Parameter& recurrent_weights() { return wh_; }
    Parameter& bias() { return b_; }

private:
    std::size_t in_, hidden_;
    bool return_sequences_;
    Parameter wx_;  // 4h x in
    Parameter wh_;  // 4h x h
    Parameter b_;   // 1 x 4h
    DropoutConfig dropout_;
    SplitMix64 dropout_rng_{0};
    bool training_ = false;

    Matrix x_;       // T x in (masked)
    Matrix gates_;   // T x 4h, post-activation
    Matrix c_;       // (T+1) x h
    Matrix h_;       // (T+1) x h
    Matrix tanh_c_;  // T x h
    Matrix mask_x_, mask_h_;
    Matrix dh0_, dc0_;
};

// Two LSTMs, the second reading the sequence reversed. With
// return_sequences, step t of the output is [fwd h_t, bwd h'_t] where the
// backward outputs are re-reversed into input order (width 2h). Without it,
// the output is the pair of final states [fwd h_{T-1}, bwd state after
// consuming x_0].
class BiLstm final : public Layer {
public:
    BiLstm(std::size_t in, std::size_t hidden, bool return_sequences);
    BiLstm(std::size_t in, std::size_t hidden, bool return_sequences, SplitMix64& rng);
    BiLstm(Lstm forward_dir, Lstm backward_dir, bool return_sequences);

    std::string kind() const override { return "bilstm"; }
    Matrix forward(const Matrix& input) override;
    Matrix backward(const Matrix& grad_output) override;
    std::vector<Parameter*> parameters() override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<BiLstm>(*this); }
    void set_training(bool training) override;

    void set_dropout(const DropoutConfig& cfg);
    Lstm& forward_direction() { return fwd_; }
    Lstm& backward_direction() { return bwd_; }

private:
    Lstm fwd_, bwd_;
    bool return_sequences_;
    std::size_t steps_ = 0;
};

// Valid (unpadded) 1-D convolution over time: L x in -> (L-k+1) x filters.
// Kernel row f holds the k*in weights of filter f, laid out as
// [j * in + c] for tap j and input channel c.
class Conv1d final : public Layer {
public:
    enum class Activation { Relu, None };

    Conv1d(std::size_t in_channels, std::size_t filters, std::size_t kernel,
           Activation activation = Activation::Relu);
    Conv1d(std::size_t in_channels, std::size_t filters, std::size_t kernel,
           Activation activation, SplitMix64& rng);

    std::string kind() const override { return "conv1d"; }
    Matrix forward(const Matrix& input) override;
    Matrix backward(const Matrix& grad_output) override;
    std::vector<Parameter*> parameters() override { return {&kernel_, &b_}; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv1d>(*this); }

    std::size_t kernel_size() const { return k_; }
    std::size_t output_length(std::size_t input_length) const;
    Parameter& kernel() { return kernel_; }
    Parameter& bias() { return b_; }

private:
    std::size_t in_, filters_, k_;
    Activation activation_;
    Parameter kernel_;  // filters x (k*in)
    Parameter b_;       // 1 x filters
    Matrix input_;
    Matrix output_;  // post-activation
};

}  // namespace gaitpred
