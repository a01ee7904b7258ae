#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gaitpred/gait_data.hpp"
#include "gaitpred/layers.hpp"
#include "gaitpred/matrix.hpp"
#include "gaitpred/models.hpp"

namespace gaitpred {

enum class LossKind { MAE, MSE };

std::string to_string(LossKind kind);
std::optional<LossKind> parse_loss_kind(std::string_view name);

struct LossResult {
    double value = 0.0;
    Matrix grad;  // dL/dY_pred, same shape as the inputs
};

// MAE = mean|yhat - y| with subgradient sign(yhat - y)/N (0 at ties);
// MSE = mean (yhat - y)^2 with gradient 2 (yhat - y)/N.
LossResult loss_value_and_grad(LossKind kind, const Matrix& y_true, const Matrix& y_pred);

enum class OptimizerKind { Adam, RmsProp };

std::string to_string(OptimizerKind kind);
std::optional<OptimizerKind> parse_optimizer_kind(std::string_view name);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double rho = 0.9;
    double epsilon = 1e-8;

    void validate() const;
};

// Per-parameter state lives inside the optimizer and is created on the first
// step, shaped like the parameters it was given.
class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual void step(std::span<Parameter* const> params) = 0;
    std::uint64_t steps_taken() const { return steps_; }

protected:
    void check_shapes(std::span<Parameter* const> params, const std::vector<Matrix>& state) const;
    std::uint64_t steps_ = 0;
};

class Adam final : public Optimizer {
public:
    Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);
    void step(std::span<Parameter* const> params) override;

    const std::vector<Matrix>& first_moments() const { return m_; }
    const std::vector<Matrix>& second_moments() const { return v_; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::vector<Matrix> m_, v_;
};

// s <- rho s + (1 - rho) g^2;  theta <- theta - lr g / (sqrt(s) + eps)
class RmsProp final : public Optimizer {
public:
    RmsProp(double lr, double rho = 0.9, double epsilon = 1e-8);
    void step(std::span<Parameter* const> params) override;

    const std::vector<Matrix>& accumulators() const { return s_; }

private:
    double lr_, rho_, eps_;
    std::vector<Matrix> s_;
};

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& config);

struct TrainConfig {
    LossKind loss = LossKind::MSE;
    OptimizerConfig optimizer;
    int epochs = 40;
    std::size_t batch_size = 32;
    bool shuffle = true;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainHistory {
    std::vector<double> train_loss;  // mean loss over the epoch's batches
    std::vector<double> val_loss;    // after the epoch, inference mode
    double train_seconds = 0.0;
    std::uint64_t optimizer_steps = 0;
};

// Thrown when a loss turns non-finite.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(int epoch, std::size_t batch)
        : std::runtime_error("training diverged (non-finite loss) at epoch " +
                             std::to_string(epoch) + ", batch " + std::to_string(batch)),
          epoch_(epoch), batch_(batch) {}
    int epoch() const { return epoch_; }
    std::size_t batch() const { return batch_; }

private:
    int epoch_;
    std::size_t batch_;
};

// Zeroes gradients, then accumulates the gradient of the batch's mean loss
// (the mean of per-example gradients). Returns the mean loss.
double accumulate_batch_gradient(Model& model, const WindowedDataset& data,
                                 std::span<const std::size_t> batch, LossKind loss);

// Mean loss over a dataset in inference mode.
double evaluate_loss(Model& model, const WindowedDataset& data, LossKind loss);

// Fixed-epoch mini-batch training; no early stopping. Deterministic for a
// fixed config seed.
TrainHistory fit(Model& model, const WindowedDataset& train, const WindowedDataset& val,
                 const TrainConfig& config);

// `epoch,train_loss,val_loss`
std::string history_csv(const TrainHistory& history);

}  // namespace gaitpred
