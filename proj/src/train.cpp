#include "gaitpred/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "gaitpred/csv_io.hpp"
#include "gaitpred/rng.hpp"

namespace gaitpred {

std::string to_string(LossKind kind) { return kind == LossKind::MAE ? "mae" : "mse"; }

std::optional<LossKind> parse_loss_kind(std::string_view name) {
    if (name == "mae") return LossKind::MAE;
    if (name == "mse") return LossKind::MSE;
    return std::nullopt;
}

std::string to_string(OptimizerKind kind) {
    return kind == OptimizerKind::Adam ? "adam" : "rmsprop";
}

std::optional<OptimizerKind> parse_optimizer_kind(std::string_view name) {
    if (name == "adam") return OptimizerKind::Adam;
    if (name == "rmsprop") return OptimizerKind::RmsProp;
    return std::nullopt;
}

LossResult loss_value_and_grad(LossKind kind, const Matrix& y_true, const Matrix& y_pred) {
    if (!y_true.same_shape(y_pred)) throw std::invalid_argument("loss: shape mismatch");
    if (y_true.empty()) throw std::invalid_argument("loss: empty input");
    const double n = static_cast<double>(y_true.size());
    LossResult r;
    r.grad = Matrix(y_true.rows(), y_true.cols());
    double acc = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double d = y_pred[i] - y_true[i];
        if (kind == LossKind::MAE) {
            acc += std::abs(d);
            r.grad[i] = d > 0 ? 1.0 / n : (d < 0 ? -1.0 / n : 0.0);
        } else {
            acc += d * d;
            r.grad[i] = 2.0 * d / n;
        }
    }
    r.value = acc / n;
    return r;
}

// ---------------------------------------------------------------------------
// Optimizers

void OptimizerConfig::validate() const {
    if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be > 0");
    if (!(epsilon > 0)) throw std::invalid_argument("epsilon must be > 0");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) {
        throw std::invalid_argument("Adam betas must be in [0, 1)");
    }
    if (!(rho >= 0 && rho < 1)) throw std::invalid_argument("RMSprop rho must be in [0, 1)");
}

void Optimizer::check_shapes(std::span<Parameter* const> params,
                             const std::vector<Matrix>& state) const {
    if (state.size() != params.size()) {
        throw std::invalid_argument("optimizer: parameter list changed between steps");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i]->grad.same_shape(params[i]->value) ||
            !state[i].same_shape(params[i]->value)) {
            throw std::invalid_argument("optimizer: shape mismatch for parameter " +
                                        params[i]->name);
        }
    }
}

Adam::Adam(double lr, double beta1, double beta2, double epsilon)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
    OptimizerConfig{OptimizerKind::Adam, lr, beta1, beta2, 0.9, epsilon}.validate();
}

void Adam::step(std::span<Parameter* const> params) {
    if (m_.empty()) {
        for (auto* p : params) {
            m_.emplace_back(p->value.rows(), p->value.cols());
            v_.emplace_back(p->value.rows(), p->value.cols());
        }
    }
    check_shapes(params, m_);
    ++steps_;
    const double t = static_cast<double>(steps_);
    const double c1 = 1.0 - std::pow(beta1_, t);
    const double c2 = 1.0 - std::pow(beta2_, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& value = params[k]->value;
        const auto& grad = params[k]->grad;
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double g = grad[i];
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            value[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
        }
    }
}

RmsProp::RmsProp(double lr, double rho, double epsilon) : lr_(lr), rho_(rho), eps_(epsilon) {
    OptimizerConfig{OptimizerKind::RmsProp, lr, 0.9, 0.999, rho, epsilon}.validate();
}

void RmsProp::step(std::span<Parameter* const> params) {
    if (s_.empty()) {
        for (auto* p : params) s_.emplace_back(p->value.rows(), p->value.cols());
    }
    check_shapes(params, s_);
    ++steps_;
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& value = params[k]->value;
        const auto& grad = params[k]->grad;
        auto& s = s_[k];
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double g = grad[i];
            s[i] = rho_ * s[i] + (1.0 - rho_) * g * g;
            value[i] -= lr_ * g / (std::sqrt(s[i]) + eps_);
        }
    }
}

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& config) {
    config.validate();
    if (config.kind == OptimizerKind::Adam) {
        return std::make_unique<Adam>(config.learning_rate, config.beta1, config.beta2,
                                      config.epsilon);
    }
    return std::make_unique<RmsProp>(config.learning_rate, config.rho, config.epsilon);
}

// ---------------------------------------------------------------------------
// Training loop

void TrainConfig::validate() const {
    optimizer.validate();
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
}

double accumulate_batch_gradient(Model& model, const WindowedDataset& data,
                                 std::span<const std::size_t> batch, LossKind loss) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    model.zero_grad();
    const double scale = 1.0 / static_cast<double>(batch.size());
    double total = 0;
    for (std::size_t idx : batch) {
        const auto& pair = data.pairs.at(idx);
        const Matrix y = model.forward(pair.x);
        LossResult r = loss_value_and_grad(loss, pair.y, y);
        for (std::size_t i = 0; i < r.grad.size(); ++i) r.grad[i] *= scale;
        model.backward(r.grad);
        total += r.value;
    }
    return total * scale;
}

double evaluate_loss(Model& model, const WindowedDataset& data, LossKind loss) {
    if (data.empty()) throw std::invalid_argument("evaluate_loss: empty dataset");
    double total = 0;
    for (const auto& pair : data.pairs) {
        total += loss_value_and_grad(loss, pair.y, model.predict(pair.x)).value;
    }
    return total / static_cast<double>(data.size());
}

TrainHistory fit(Model& model, const WindowedDataset& train, const WindowedDataset& val,
                 const TrainConfig& config) {
    config.validate();
    if (train.empty()) throw std::invalid_argument("fit: empty training set");
    if (val.empty()) throw std::invalid_argument("fit: empty validation set");
    if (train.w_in != model.spec().w_in || train.w_out != model.spec().w_out) {
        throw std::invalid_argument("fit: dataset windows do not match the model");
    }

    auto optimizer = make_optimizer(config.optimizer);
    auto params = model.parameters();
    SplitMix64 rng(derive_seed(config.seed, {0x73687566ULL}));
    std::vector<std::size_t> order(train.size());
    TrainHistory history;

    const auto start = std::chrono::steady_clock::now();
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        if (config.shuffle) {
            for (std::size_t i = order.size(); i > 1; --i) {
                std::swap(order[i - 1], order[rng.below(i)]);
            }
        }
        model.set_training(true);
        double epoch_loss = 0;
        std::size_t batch_no = 0;
        for (std::size_t b = 0; b < order.size(); b += config.batch_size, ++batch_no) {
            const std::size_t e = std::min(order.size(), b + config.batch_size);
            const std::span<const std::size_t> batch(order.data() + b, e - b);
            const double loss = accumulate_batch_gradient(model, train, batch, config.loss);
            if (!std::isfinite(loss)) throw DivergenceError(epoch, batch_no);
            optimizer->step(params);
            epoch_loss += loss * static_cast<double>(batch.size());
        }
        model.set_training(false);
        history.train_loss.push_back(epoch_loss / static_cast<double>(train.size()));
        const double vl = evaluate_loss(model, val, config.loss);
        if (!std::isfinite(vl)) throw DivergenceError(epoch, batch_no);
        history.val_loss.push_back(vl);
    }
    history.train_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    history.optimizer_steps = optimizer->steps_taken();
    return history;
}

std::string history_csv(const TrainHistory& history) {
    std::string s = "epoch,train_loss,val_loss\n";
    for (std::size_t i = 0; i < history.train_loss.size(); ++i) {
        s += std::to_string(i + 1) + "," + format_double(history.train_loss[i]) + "," +
             format_double(history.val_loss[i]) + "\n";
    }
    return s;
}

}  // namespace gaitpred
