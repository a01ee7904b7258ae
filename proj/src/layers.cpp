#include "gaitpred/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gaitpred {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

double sigmoid(double z) {
    if (z >= 0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

Matrix draw_mask(std::size_t n, double rate, SplitMix64& rng) {
    Matrix m(1, n, 1.0);
    if (rate <= 0) return m;
    const double keep = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < n; ++i) m[i] = rng.uniform() >= rate ? keep : 0.0;
    return m;
}

void check_rate(double rate) {
    require(rate >= 0 && rate < 1, "dropout rate must be in [0, 1)");
}

}  // namespace

void glorot_uniform(Matrix& m, std::size_t fan_in, std::size_t fan_out, SplitMix64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform(-limit, limit);
}

std::vector<const Parameter*> Layer::parameters() const {
    auto ps = const_cast<Layer*>(this)->parameters();
    return {ps.begin(), ps.end()};
}

void Layer::zero_grad() {
    for (auto* p : parameters()) p->grad.set_zero();
}

std::size_t Layer::parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += p->value.size();
    return n;
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(std::size_t in, std::size_t out) : w_("W", out, in), b_("b", 1, out) {
    require(in > 0 && out > 0, "Dense: dimensions must be positive");
}

Dense::Dense(std::size_t in, std::size_t out, SplitMix64& rng) : Dense(in, out) {
    glorot_uniform(w_.value, in, out, rng);
}

Matrix Dense::forward(const Matrix& input) {
    require(input.cols() == w_.value.cols(),
            "Dense: input width " + std::to_string(input.cols()) + " != " +
                std::to_string(w_.value.cols()));
    input_ = input;
    const std::size_t out = w_.value.rows();
    Matrix y(input.rows(), out);
    for (std::size_t r = 0; r < input.rows(); ++r) {
        auto yr = y.row(r);
        std::copy(b_.value.values().begin(), b_.value.values().end(), yr.begin());
        gemv_acc(w_.value, input.row(r), yr);
    }
    return y;
}

Matrix Dense::backward(const Matrix& grad_output) {
    require(grad_output.rows() == input_.rows() && grad_output.cols() == w_.value.rows(),
            "Dense: gradient shape mismatch");
    Matrix dx(input_.rows(), input_.cols());
    for (std::size_t r = 0; r < input_.rows(); ++r) {
        const auto g = grad_output.row(r);
        outer_acc(g, input_.row(r), w_.grad);
        for (std::size_t o = 0; o < g.size(); ++o) b_.grad[o] += g[o];
        gemv_t_acc(w_.value, g, dx.row(r));
    }
    return dx;
}

// ---------------------------------------------------------------------------
// SimpleRnn

SimpleRnn::SimpleRnn(std::size_t in, std::size_t hidden, bool return_sequences)
    : in_(in),
      hidden_(hidden),
      return_sequences_(return_sequences),
      wx_("W_x", hidden, in),
      wh_("W_h", hidden, hidden),
      b_("b", 1, hidden) {
    require(in > 0 && hidden > 0, "SimpleRnn: dimensions must be positive");
}

SimpleRnn::SimpleRnn(std::size_t in, std::size_t hidden, bool return_sequences, SplitMix64& rng)
    : SimpleRnn(in, hidden, return_sequences) {
    glorot_uniform(wx_.value, in, hidden, rng);
    glorot_uniform(wh_.value, hidden, hidden, rng);
}

void SimpleRnn::set_dropout(const DropoutConfig& cfg) {
    check_rate(cfg.input);
    check_rate(cfg.recurrent);
    dropout_ = cfg;
    dropout_rng_ = SplitMix64(cfg.seed);
}

Matrix SimpleRnn::forward(const Matrix& input) { return forward(input, Matrix(1, hidden_)); }

Matrix SimpleRnn::forward(const Matrix& input, const Matrix& h0) {
    require(input.rows() >= 1, "SimpleRnn: empty sequence");
    require(input.cols() == in_, "SimpleRnn: input width " + std::to_string(input.cols()) +
                                     " != " + std::to_string(in_));
    require(h0.size() == hidden_, "SimpleRnn: h0 size mismatch");
    const std::size_t steps = input.rows();
    const bool drop = training_ && dropout_.active();
    mask_x_ = drop ? draw_mask(in_, dropout_.input, dropout_rng_) : Matrix(1, in_, 1.0);
    mask_h_ = drop ? draw_mask(hidden_, dropout_.recurrent, dropout_rng_) : Matrix(1, hidden_, 1.0);

    x_ = input;
    if (drop) {
        for (std::size_t t = 0; t < steps; ++t)
            for (std::size_t c = 0; c < in_; ++c) x_(t, c) *= mask_x_[c];
    }
    h_ = Matrix(steps + 1, hidden_);
    std::copy(h0.values().begin(), h0.values().end(), h_.row(0).begin());

    std::vector<double> hprev(hidden_);
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t j = 0; j < hidden_; ++j) hprev[j] = h_(t, j) * mask_h_[j];
        auto z = h_.row(t + 1);
        std::copy(b_.value.values().begin(), b_.value.values().end(), z.begin());
        gemv_acc(wx_.value, x_.row(t), z);
        gemv_acc(wh_.value, hprev, z);
        for (double& v : z) v = std::tanh(v);
    }
    return return_sequences_ ? h_.slice_rows(1, steps + 1) : h_.slice_rows(steps, steps + 1);
}

Matrix SimpleRnn::backward(const Matrix& grad_output) {
    const std::size_t steps = x_.rows();
    require(grad_output.cols() == hidden_ &&
                grad_output.rows() == (return_sequences_ ? steps : std::size_t{1}),
            "SimpleRnn: gradient shape mismatch");
    Matrix dx(steps, in_);
    std::vector<double> dh_next(hidden_, 0.0), dz(hidden_), hprev(hidden_), tmp(hidden_);
    for (std::size_t t = steps; t-- > 0;) {
        for (std::size_t j = 0; j < hidden_; ++j) {
            double dh = dh_next[j];
            if (return_sequences_) dh += grad_output(t, j);
            else if (t == steps - 1) dh += grad_output(0, j);
            const double h = h_(t + 1, j);
            dz[j] = dh * (1.0 - h * h);
            hprev[j] = h_(t, j) * mask_h_[j];
        }
        outer_acc(dz, x_.row(t), wx_.grad);
        outer_acc(dz, hprev, wh_.grad);
        for (std::size_t j = 0; j < hidden_; ++j) b_.grad[j] += dz[j];
        auto dxt = dx.row(t);
        gemv_t_acc(wx_.value, dz, dxt);
        for (std::size_t c = 0; c < in_; ++c) dxt[c] *= mask_x_[c];
        std::fill(tmp.begin(), tmp.end(), 0.0);
        gemv_t_acc(wh_.value, dz, tmp);
        for (std::size_t j = 0; j < hidden_; ++j) dh_next[j] = tmp[j] * mask_h_[j];
    }
    dh0_ = Matrix(1, hidden_, dh_next);
    return dx;
}

// ---------------------------------------------------------------------------
// Lstm

Lstm::Lstm(std::size_t in, std::size_t hidden, bool return_sequences)
    : in_(in),
      hidden_(hidden),
      return_sequences_(return_sequences),
      wx_("W_x", 4 * hidden, in),
      wh_("W_h", 4 * hidden, hidden),
      b_("b", 1, 4 * hidden) {
    require(in > 0 && hidden > 0, "Lstm: dimensions must be positive");
}

Lstm::Lstm(std::size_t in, std::size_t hidden, bool return_sequences, SplitMix64& rng)
    : Lstm(in, hidden, return_sequences) {
    glorot_uniform(wx_.value, in, 4 * hidden, rng);
    glorot_uniform(wh_.value, hidden, 4 * hidden, rng);
    for (std::size_t j = 0; j < hidden; ++j) b_.value[hidden + j] = 1.0;
}

void Lstm::set_dropout(const DropoutConfig& cfg) {
    check_rate(cfg.input);
    check_rate(cfg.recurrent);
    dropout_ = cfg;
    dropout_rng_ = SplitMix64(cfg.seed);
}

Matrix Lstm::forward(const Matrix& input) {
    return forward(input, Matrix(1, hidden_), Matrix(1, hidden_));
}

Matrix Lstm::forward(const Matrix& input, const Matrix& h0, const Matrix& c0) {
    require(input.rows() >= 1, "Lstm: empty sequence");
    require(input.cols() == in_,
            "Lstm: input width " + std::to_string(input.cols()) + " != " + std::to_string(in_));
    require(h0.size() == hidden_ && c0.size() == hidden_, "Lstm: initial state size mismatch");
    const std::size_t steps = input.rows();
    const std::size_t h = hidden_;
    const bool drop = training_ && dropout_.active();
    mask_x_ = drop ? draw_mask(in_, dropout_.input, dropout_rng_) : Matrix(1, in_, 1.0);
    mask_h_ = drop ? draw_mask(h, dropout_.recurrent, dropout_rng_) : Matrix(1, h, 1.0);

    x_ = input;
    if (drop) {
        for (std::size_t t = 0; t < steps; ++t)
            for (std::size_t c = 0; c < in_; ++c) x_(t, c) *= mask_x_[c];
    }
    gates_ = Matrix(steps, 4 * h);
    c_ = Matrix(steps + 1, h);
    h_ = Matrix(steps + 1, h);
    tanh_c_ = Matrix(steps, h);
    std::copy(h0.values().begin(), h0.values().end(), h_.row(0).begin());
    std::copy(c0.values().begin(), c0.values().end(), c_.row(0).begin());

    std::vector<double> hprev(h);
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t j = 0; j < h; ++j) hprev[j] = h_(t, j) * mask_h_[j];
        auto z = gates_.row(t);
        std::copy(b_.value.values().begin(), b_.value.values().end(), z.begin());
        gemv_acc(wx_.value, x_.row(t), z);
        gemv_acc(wh_.value, hprev, z);
        for (std::size_t j = 0; j < h; ++j) {
            const double i = sigmoid(z[j]);
            const double f = sigmoid(z[h + j]);
            const double g = std::tanh(z[2 * h + j]);
            const double o = sigmoid(z[3 * h + j]);
            z[j] = i;
            z[h + j] = f;
            z[2 * h + j] = g;
            z[3 * h + j] = o;
            const double c = f * c_(t, j) + i * g;
            c_(t + 1, j) = c;
            const double tc = std::tanh(c);
            tanh_c_(t, j) = tc;
            h_(t + 1, j) = o * tc;
        }
    }
    return return_sequences_ ? h_.slice_rows(1, steps + 1) : h_.slice_rows(steps, steps + 1);
}

Matrix Lstm::final_cell() const { return c_.slice_rows(c_.rows() - 1, c_.rows()); }

Matrix Lstm::hidden_sequence() const { return h_.slice_rows(1, h_.rows()); }

Matrix Lstm::backward(const Matrix& grad_output) {
    const std::size_t steps = x_.rows();
    const std::size_t h = hidden_;
    require(grad_output.cols() == h &&
                grad_output.rows() == (return_sequences_ ? steps : std::size_t{1}),
            "Lstm: gradient shape mismatch");
    Matrix dx(steps, in_);
    std::vector<double> dh_next(h, 0.0), dc_next(h, 0.0), dz(4 * h), hprev(h), tmp(h);
    for (std::size_t t = steps; t-- > 0;) {
        const auto gate = gates_.row(t);
        for (std::size_t j = 0; j < h; ++j) {
            double dh = dh_next[j];
            if (return_sequences_) dh += grad_output(t, j);
            else if (t == steps - 1) dh += grad_output(0, j);
            const double i = gate[j], f = gate[h + j], g = gate[2 * h + j], o = gate[3 * h + j];
            const double tc = tanh_c_(t, j);
            const double d_o = dh * tc;
            const double dc = dh * o * (1.0 - tc * tc) + dc_next[j];
            dz[j] = dc * g * i * (1.0 - i);
            dz[h + j] = dc * c_(t, j) * f * (1.0 - f);
            dz[2 * h + j] = dc * i * (1.0 - g * g);
            dz[3 * h + j] = d_o * o * (1.0 - o);
            dc_next[j] = dc * f;
            hprev[j] = h_(t, j) * mask_h_[j];
        }
        outer_acc(dz, x_.row(t), wx_.grad);
        outer_acc(dz, hprev, wh_.grad);
        for (std::size_t k = 0; k < 4 * h; ++k) b_.grad[k] += dz[k];
        auto dxt = dx.row(t);
        gemv_t_acc(wx_.value, dz, dxt);
        for (std::size_t c = 0; c < in_; ++c) dxt[c] *= mask_x_[c];
        std::fill(tmp.begin(), tmp.end(), 0.0);
        gemv_t_acc(wh_.value, dz, tmp);
        for (std::size_t j = 0; j < h; ++j) dh_next[j] = tmp[j] * mask_h_[j];
    }
    dh0_ = Matrix(1, h, dh_next);
    dc0_ = Matrix(1, h, dc_next);
    return dx;
}

// ---------------------------------------------------------------------------
// BiLstm

namespace {

void prefix_names(Lstm& l, const std::string& prefix) {
    for (auto* p : l.parameters()) {
        if (p->name.rfind(prefix, 0) != 0) p->name = prefix + p->name;
    }
}

}  // namespace

BiLstm::BiLstm(std::size_t in, std::size_t hidden, bool return_sequences)
    : fwd_(in, hidden, true), bwd_(in, hidden, true), return_sequences_(return_sequences) {
    prefix_names(fwd_, "fwd.");
    prefix_names(bwd_, "bwd.");
}

BiLstm::BiLstm(std::size_t in, std::size_t hidden, bool return_sequences, SplitMix64& rng)
    : fwd_(in, hidden, true, rng), bwd_(in, hidden, true, rng),
      return_sequences_(return_sequences) {
    prefix_names(fwd_, "fwd.");
    prefix_names(bwd_, "bwd.");
}

BiLstm::BiLstm(Lstm forward_dir, Lstm backward_dir, bool return_sequences)
    : fwd_(std::move(forward_dir)), bwd_(std::move(backward_dir)),
      return_sequences_(return_sequences) {
    require(fwd_.hidden() == bwd_.hidden(), "BiLstm: direction hidden sizes differ");
    require(fwd_.return_sequences() && bwd_.return_sequences(),
            "BiLstm: directions must return sequences");
    prefix_names(fwd_, "fwd.");
    prefix_names(bwd_, "bwd.");
}

std::vector<Parameter*> BiLstm::parameters() {
    auto ps = fwd_.parameters();
    for (auto* p : bwd_.parameters()) ps.push_back(p);
    return ps;
}

void BiLstm::set_training(bool training) {
    fwd_.set_training(training);
    bwd_.set_training(training);
}

void BiLstm::set_dropout(const DropoutConfig& cfg) {
    fwd_.set_dropout(cfg);
    DropoutConfig back = cfg;
    back.seed = cfg.seed ^ 0x5bd1e995ULL;
    bwd_.set_dropout(back);
}

Matrix BiLstm::forward(const Matrix& input) {
    steps_ = input.rows();
    const std::size_t h = fwd_.hidden();
    const Matrix hf = fwd_.forward(input);
    const Matrix hb = bwd_.forward(input.reversed_rows());
    if (!return_sequences_) {
        Matrix out(1, 2 * h);
        std::copy_n(hf.row(steps_ - 1).begin(), h, out.data());
        std::copy_n(hb.row(steps_ - 1).begin(), h, out.data() + h);
        return out;
    }
    Matrix out(steps_, 2 * h);
    for (std::size_t t = 0; t < steps_; ++t) {
        std::copy_n(hf.row(t).begin(), h, out.row(t).begin());
        std::copy_n(hb.row(steps_ - 1 - t).begin(), h, out.row(t).begin() + static_cast<std::ptrdiff_t>(h));
    }
    return out;
}

Matrix BiLstm::backward(const Matrix& grad_output) {
    const std::size_t h = fwd_.hidden();
    require(grad_output.cols() == 2 * h &&
                grad_output.rows() == (return_sequences_ ? steps_ : std::size_t{1}),
            "BiLstm: gradient shape mismatch");
    Matrix dhf(steps_, h), dhb(steps_, h);
    if (return_sequences_) {
        for (std::size_t t = 0; t < steps_; ++t) {
            for (std::size_t j = 0; j < h; ++j) {
                dhf(t, j) = grad_output(t, j);
                dhb(steps_ - 1 - t, j) = grad_output(t, h + j);
            }
        }
    } else {
        for (std::size_t j = 0; j < h; ++j) {
            dhf(steps_ - 1, j) = grad_output(0, j);
            dhb(steps_ - 1, j) = grad_output(0, h + j);
        }
    }
    Matrix dx = fwd_.backward(dhf);
    const Matrix dxb = bwd_.backward(dhb).reversed_rows();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dxb[i];
    return dx;
}

// ---------------------------------------------------------------------------
// Conv1d

Conv1d::Conv1d(std::size_t in_channels, std::size_t filters, std::size_t kernel,
               Activation activation)
    : in_(in_channels),
      filters_(filters),
      k_(kernel),
      activation_(activation),
      kernel_("kernel", filters, kernel * in_channels),
      b_("b", 1, filters) {
    require(in_channels > 0 && filters > 0 && kernel > 0, "Conv1d: dimensions must be positive");
}

Conv1d::Conv1d(std::size_t in_channels, std::size_t filters, std::size_t kernel,
               Activation activation, SplitMix64& rng)
    : Conv1d(in_channels, filters, kernel, activation) {
    glorot_uniform(kernel_.value, kernel * in_channels, kernel * filters, rng);
}

std::size_t Conv1d::output_length(std::size_t input_length) const {
    if (input_length < k_) {
        throw std::invalid_argument("Conv1d: input length " + std::to_string(input_length) +
                                    " shorter than kernel " + std::to_string(k_));
    }
    return input_length - k_ + 1;
}

Matrix Conv1d::forward(const Matrix& input) {
    require(input.cols() == in_, "Conv1d: input has " + std::to_string(input.cols()) +
                                     " channels, expected " + std::to_string(in_));
    const std::size_t out_len = output_length(input.rows());
    input_ = input;
    Matrix y(out_len, filters_);
    const std::size_t span_len = k_ * in_;
    for (std::size_t t = 0; t < out_len; ++t) {
        const std::span<const double> window(input.data() + t * in_, span_len);
        for (std::size_t f = 0; f < filters_; ++f) {
            double z = b_.value[f] + dot(kernel_.value.row(f), window);
            if (activation_ == Activation::Relu && z < 0) z = 0;
            y(t, f) = z;
        }
    }
    output_ = y;
    return y;
}

Matrix Conv1d::backward(const Matrix& grad_output) {
    require(grad_output.same_shape(output_), "Conv1d: gradient shape mismatch");
    Matrix dx(input_.rows(), in_);
    const std::size_t span_len = k_ * in_;
    std::vector<double> dz(filters_);
    for (std::size_t t = 0; t < output_.rows(); ++t) {
        for (std::size_t f = 0; f < filters_; ++f) {
            double g = grad_output(t, f);
            if (activation_ == Activation::Relu && output_(t, f) <= 0) g = 0;
            dz[f] = g;
            b_.grad[f] += g;
        }
        const std::span<const double> window(input_.data() + t * in_, span_len);
        outer_acc(dz, window, kernel_.grad);
        gemv_t_acc(kernel_.value, dz, std::span<double>(dx.data() + t * in_, span_len));
    }
    return dx;
}

}  // namespace gaitpred
