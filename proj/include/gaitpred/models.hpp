#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gaitpred/gait_data.hpp"
#include "gaitpred/layers.hpp"
#include "gaitpred/matrix.hpp"

namespace gaitpred {

enum class ModelKind { SimpleRnn, Lstm2, BiLstm2, CnnRnn };

inline constexpr ModelKind kAllModelKinds[] = {ModelKind::SimpleRnn, ModelKind::Lstm2,
                                               ModelKind::BiLstm2, ModelKind::CnnRnn};

// CLI / report names: simple, lstm, bilstm, cnnrnn.
std::string to_string(ModelKind kind);
std::optional<ModelKind> parse_model_kind(std::string_view name);
bool is_recurrent_only(ModelKind kind);

struct ModelSpec {
    ModelKind kind = ModelKind::SimpleRnn;
    std::size_t w_in = 5;
    std::size_t w_out = 1;
    std::size_t hidden = 20;
    std::size_t conv_filters = 20;
    std::size_t conv_kernel = 3;
    bool dropout_enabled = false;

    // Throws std::invalid_argument; CnnRnn needs w_in >= 2*(kernel-1)+1.
    void validate() const;
    std::size_t head_width() const { return kChannels * w_out; }
};

// Anything that maps one input window (w_in x 6) to a prediction (w_out x 6).
class WindowPredictor {
public:
    virtual ~WindowPredictor() = default;
    virtual std::string name() const = 0;
    virtual std::size_t w_in() const = 0;
    virtual std::size_t w_out() const = 0;
    virtual Matrix predict(const Matrix& window) = 0;
};

// Layer stack plus a linear dense head of width 6 * w_out.
//   SimpleRnn: rnn(final state) -> dense
//   Lstm2:     lstm(sequence) -> lstm(final state) -> dense
//   BiLstm2:   bilstm(sequence) -> bilstm(final states, 2h) -> dense
//   CnnRnn:    conv1d(20, k=3) -> conv1d(20, k=3) -> lstm(final state) -> dense
class Model final : public WindowPredictor {
public:
    static Model build(const ModelSpec& spec, std::uint64_t seed);

    Model(const Model& other);
    Model& operator=(const Model& other);
    Model(Model&&) noexcept = default;
    Model& operator=(Model&&) noexcept = default;

    // X: w_in x 6 -> w_out x 6 (row = step, column = sensor).
    Matrix forward(const Matrix& x);
    // dL/dY (w_out x 6) -> dL/dX; adds into parameter gradients.
    Matrix backward(const Matrix& grad_output);
    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    void zero_grad();
    void set_training(bool training);

    std::size_t parameter_count() const;
    const ModelSpec& spec() const { return spec_; }
    Dense& head();
    std::size_t layer_count() const { return layers_.size(); }
    const Layer& layer(std::size_t i) const { return *layers_.at(i); }

    // Sequence length entering each layer followed by the length leaving the
    // last sequence layer (1 once a layer reduces to a final state).
    std::vector<std::size_t> trace_lengths();

    std::string name() const override { return to_string(spec_.kind); }
    std::size_t w_in() const override { return spec_.w_in; }
    std::size_t w_out() const override { return spec_.w_out; }
    // Inference-mode forward.
    Matrix predict(const Matrix& window) override;

private:
    explicit Model(ModelSpec spec) : spec_(spec) {}

    ModelSpec spec_;
    std::vector<std::unique_ptr<Layer>> layers_;
    bool training_ = false;
};

// Repeats the last observed frame w_out times.
class PersistenceBaseline final : public WindowPredictor {
public:
    PersistenceBaseline(std::size_t w_in, std::size_t w_out) : w_in_(w_in), w_out_(w_out) {}
    std::string name() const override { return "persistence"; }
    std::size_t w_in() const override { return w_in_; }
    std::size_t w_out() const override { return w_out_; }
    Matrix predict(const Matrix& window) override;

private:
    std::size_t w_in_, w_out_;
};

enum class StitchMode {
    // Windows at s = 0, w_out, 2 w_out, ... plus one right-aligned final
    // window; every step in [w_in, T) is predicted exactly once.
    Tile,
    // Stride-1 windows; each step's predictions are averaged.
    OverlapAverage,
};

std::string to_string(StitchMode mode);
std::optional<StitchMode> parse_stitch_mode(std::string_view name);

struct PredictedSeries {
    Matrix values;                // T x 6, zero where invalid
    std::vector<std::uint8_t> valid;  // 1 where a prediction exists
    std::size_t windows = 0;
    double seconds = 0.0;

    std::size_t valid_count() const;
};

// Whole-trial prediction from measured inputs (never fed back).
PredictedSeries predict_trial(WindowPredictor& predictor, const Matrix& values,
                              StitchMode mode = StitchMode::Tile);

// `t,fsr8_pred,...,fsr13_pred,valid`; invalid rows leave the values empty.
std::string predicted_series_csv(const PredictedSeries& series);

// Binary model file, little-endian:
//   "GAITMODL" | u32 version | u32 kind | u64 w_in, w_out, hidden, filters,
//   kernel | u8 dropout | u64 n_params | n_params x (u32 name_len, name,
//   u64 rows, u64 cols, rows*cols f64)
// Values round-trip bit for bit.
inline constexpr std::uint32_t kModelFormatVersion = 1;
void save_model(const Model& model, std::ostream& out);
Model load_model(std::istream& in);
void save_model_file(const Model& model, const std::filesystem::path& path);
Model load_model_file(const std::filesystem::path& path);

}  // namespace gaitpred
