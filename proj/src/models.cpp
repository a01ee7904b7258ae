#include "gaitpred/models.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "gaitpred/csv_io.hpp"
#include "gaitpred/rng.hpp"

namespace gaitpred {

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::SimpleRnn: return "simple";
        case ModelKind::Lstm2: return "lstm";
        case ModelKind::BiLstm2: return "bilstm";
        case ModelKind::CnnRnn: return "cnnrnn";
    }
    return "unknown";
}

std::optional<ModelKind> parse_model_kind(std::string_view name) {
    for (auto k : kAllModelKinds) {
        if (to_string(k) == name) return k;
    }
    return std::nullopt;
}

bool is_recurrent_only(ModelKind kind) { return kind != ModelKind::CnnRnn; }

void ModelSpec::validate() const {
    if (w_in == 0 || w_out == 0) throw std::invalid_argument("ModelSpec: window sizes must be >= 1");
    if (hidden == 0) throw std::invalid_argument("ModelSpec: hidden must be >= 1");
    if (kind == ModelKind::CnnRnn) {
        if (conv_filters == 0 || conv_kernel == 0) {
            throw std::invalid_argument("ModelSpec: conv filters and kernel must be >= 1");
        }
        const std::size_t min_in = 2 * (conv_kernel - 1) + 1;
        if (w_in < min_in) {
            throw std::invalid_argument("ModelSpec: cnnrnn needs w_in >= " + std::to_string(min_in) +
                                        " (got " + std::to_string(w_in) + ")");
        }
    }
}

// ---------------------------------------------------------------------------
// Model

Model Model::build(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    Model m(spec);
    SplitMix64 rng(derive_seed(seed, {0x6d6f64656cULL}));
    const std::size_t h = spec.hidden;
    const std::uint64_t drop_seed = derive_seed(seed, {0x64726f70ULL});
    std::size_t head_in = h;

    switch (spec.kind) {
        case ModelKind::SimpleRnn: {
            auto rnn = std::make_unique<SimpleRnn>(kChannels, h, false, rng);
            if (spec.dropout_enabled) rnn->set_dropout({0.0, 0.5, drop_seed});
            m.layers_.push_back(std::move(rnn));
            break;
        }
        case ModelKind::Lstm2: {
            auto first = std::make_unique<Lstm>(kChannels, h, true, rng);
            if (spec.dropout_enabled) first->set_dropout({0.0, 0.5, drop_seed});
            m.layers_.push_back(std::move(first));
            m.layers_.push_back(std::make_unique<Lstm>(h, h, false, rng));
            break;
        }
        case ModelKind::BiLstm2: {
            auto first = std::make_unique<BiLstm>(kChannels, h, true, rng);
            if (spec.dropout_enabled) first->set_dropout({0.0, 0.5, drop_seed});
            m.layers_.push_back(std::move(first));
            m.layers_.push_back(std::make_unique<BiLstm>(2 * h, h, false, rng));
            head_in = 2 * h;
            break;
        }
        case ModelKind::CnnRnn: {
            m.layers_.push_back(std::make_unique<Conv1d>(kChannels, spec.conv_filters,
                                                         spec.conv_kernel,
                                                         Conv1d::Activation::Relu, rng));
            m.layers_.push_back(std::make_unique<Conv1d>(spec.conv_filters, spec.conv_filters,
                                                         spec.conv_kernel,
                                                         Conv1d::Activation::Relu, rng));
            auto lstm = std::make_unique<Lstm>(spec.conv_filters, h, false, rng);
            if (spec.dropout_enabled) lstm->set_dropout({0.1, 0.5, drop_seed});
            m.layers_.push_back(std::move(lstm));
            break;
        }
    }
    m.layers_.push_back(std::make_unique<Dense>(head_in, spec.head_width(), rng));
    return m;
}

Model::Model(const Model& other) : spec_(other.spec_), training_(other.training_) {
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Model& Model::operator=(const Model& other) {
    if (this != &other) {
        Model copy(other);
        *this = std::move(copy);
    }
    return *this;
}

Matrix Model::forward(const Matrix& x) {
    if (x.rows() != spec_.w_in || x.cols() != kChannels) {
        throw std::invalid_argument("Model::forward: expected " + std::to_string(spec_.w_in) +
                                    "x6 input, got " + std::to_string(x.rows()) + "x" +
                                    std::to_string(x.cols()));
    }
    Matrix a = x;
    for (auto& l : layers_) a = l->forward(a);
    return a.reshaped(spec_.w_out, kChannels);
}

Matrix Model::backward(const Matrix& grad_output) {
    if (grad_output.rows() != spec_.w_out || grad_output.cols() != kChannels) {
        throw std::invalid_argument("Model::backward: gradient must be w_out x 6");
    }
    Matrix g = grad_output.reshaped(1, spec_.head_width());
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
}

std::vector<Parameter*> Model::parameters() {
    std::vector<Parameter*> out;
    for (auto& l : layers_) {
        for (auto* p : l->parameters()) out.push_back(p);
    }
    return out;
}

std::vector<const Parameter*> Model::parameters() const {
    auto ps = const_cast<Model*>(this)->parameters();
    return {ps.begin(), ps.end()};
}

void Model::zero_grad() {
    for (auto& l : layers_) l->zero_grad();
}

void Model::set_training(bool training) {
    training_ = training;
    for (auto& l : layers_) l->set_training(training);
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l->parameter_count();
    return n;
}

Dense& Model::head() { return static_cast<Dense&>(*layers_.back()); }

std::vector<std::size_t> Model::trace_lengths() {
    std::vector<std::size_t> lengths;
    Matrix a(spec_.w_in, kChannels, 0.0);
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
        lengths.push_back(a.rows());
        a = layers_[i]->forward(a);
    }
    lengths.push_back(a.rows());
    return lengths;
}

Matrix Model::predict(const Matrix& window) {
    const bool was_training = training_;
    if (was_training) set_training(false);
    Matrix y = forward(window);
    if (was_training) set_training(true);
    return y;
}

Matrix PersistenceBaseline::predict(const Matrix& window) {
    if (window.rows() != w_in_ || window.cols() != kChannels) {
        throw std::invalid_argument("PersistenceBaseline: bad window shape");
    }
    Matrix y(w_out_, kChannels);
    const auto last = window.row(w_in_ - 1);
    for (std::size_t r = 0; r < w_out_; ++r) std::copy(last.begin(), last.end(), y.row(r).begin());
    return y;
}

// ---------------------------------------------------------------------------
// Whole-trial prediction

std::string to_string(StitchMode mode) {
    return mode == StitchMode::Tile ? "tile" : "average";
}

std::optional<StitchMode> parse_stitch_mode(std::string_view name) {
    if (name == "tile") return StitchMode::Tile;
    if (name == "average") return StitchMode::OverlapAverage;
    return std::nullopt;
}

std::size_t PredictedSeries::valid_count() const {
    return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

PredictedSeries predict_trial(WindowPredictor& predictor, const Matrix& values, StitchMode mode) {
    const std::size_t w_in = predictor.w_in();
    const std::size_t w_out = predictor.w_out();
    const std::size_t n = values.rows();
    if (n < w_in + w_out) {
        throw std::invalid_argument("predict_trial: trial of length " + std::to_string(n) +
                                    " shorter than w_in + w_out = " +
                                    std::to_string(w_in + w_out));
    }
    if (values.cols() != kChannels) throw std::invalid_argument("predict_trial: 6 channels");

    PredictedSeries out;
    out.values = Matrix(n, kChannels);
    out.valid.assign(n, 0);
    const auto start = std::chrono::steady_clock::now();

    auto window_at = [&](std::size_t s) { return values.slice_rows(s, s + w_in); };

    if (mode == StitchMode::Tile) {
        std::size_t s = 0;
        for (; s + w_in + w_out <= n; s += w_out) {
            const Matrix y = predictor.predict(window_at(s));
            for (std::size_t r = 0; r < w_out; ++r) {
                std::copy(y.row(r).begin(), y.row(r).end(), out.values.row(s + w_in + r).begin());
                out.valid[s + w_in + r] = 1;
            }
            ++out.windows;
        }
        if (s + w_in < n) {
            // Right-aligned final window; keep only the steps not yet filled.
            const std::size_t last = n - w_in - w_out;
            const Matrix y = predictor.predict(window_at(last));
            for (std::size_t r = 0; r < w_out; ++r) {
                const std::size_t t = last + w_in + r;
                if (out.valid[t]) continue;
                std::copy(y.row(r).begin(), y.row(r).end(), out.values.row(t).begin());
                out.valid[t] = 1;
            }
            ++out.windows;
        }
    } else {
        std::vector<double> counts(n, 0.0);
        for (std::size_t s = 0; s + w_in + w_out <= n; ++s) {
            const Matrix y = predictor.predict(window_at(s));
            for (std::size_t r = 0; r < w_out; ++r) {
                const std::size_t t = s + w_in + r;
                for (std::size_t c = 0; c < kChannels; ++c) out.values(t, c) += y(r, c);
                counts[t] += 1.0;
            }
            ++out.windows;
        }
        for (std::size_t t = 0; t < n; ++t) {
            if (counts[t] == 0) continue;
            for (std::size_t c = 0; c < kChannels; ++c) out.values(t, c) /= counts[t];
            out.valid[t] = 1;
        }
    }
    out.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

std::string predicted_series_csv(const PredictedSeries& series) {
    std::string s = "t";
    for (const auto& label : kChannelLabels) s += "," + label + "_pred";
    s += ",valid\n";
    for (std::size_t t = 0; t < series.values.rows(); ++t) {
        s += std::to_string(t);
        for (std::size_t c = 0; c < kChannels; ++c) {
            s += ",";
            if (series.valid[t]) s += format_double(series.values(t, c));
        }
        s += series.valid[t] ? ",1\n" : ",0\n";
    }
    return s;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kMagic[8] = {'G', 'A', 'I', 'T', 'M', 'O', 'D', 'L'};

static_assert(std::endian::native == std::endian::little,
              "model files are written in host order, which must be little-endian");

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::runtime_error("model file truncated");
    return v;
}

}  // namespace

void save_model(const Model& model, std::ostream& out) {
    const auto& s = model.spec();
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kModelFormatVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.kind));
    put<std::uint64_t>(out, s.w_in);
    put<std::uint64_t>(out, s.w_out);
    put<std::uint64_t>(out, s.hidden);
    put<std::uint64_t>(out, s.conv_filters);
    put<std::uint64_t>(out, s.conv_kernel);
    put<std::uint8_t>(out, s.dropout_enabled ? 1 : 0);
    const auto params = model.parameters();
    put<std::uint64_t>(out, params.size());
    for (const auto* p : params) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        put<std::uint64_t>(out, p->value.rows());
        put<std::uint64_t>(out, p->value.cols());
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("failed to write model");
}

Model load_model(std::istream& in) {
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
        throw std::runtime_error("not a model file (bad magic)");
    }
    const auto version = get<std::uint32_t>(in);
    if (version != kModelFormatVersion) {
        throw std::runtime_error("unsupported model format version " + std::to_string(version));
    }
    ModelSpec spec;
    const auto kind = get<std::uint32_t>(in);
    if (kind > static_cast<std::uint32_t>(ModelKind::CnnRnn)) {
        throw std::runtime_error("unknown model kind in file");
    }
    spec.kind = static_cast<ModelKind>(kind);
    spec.w_in = get<std::uint64_t>(in);
    spec.w_out = get<std::uint64_t>(in);
    spec.hidden = get<std::uint64_t>(in);
    spec.conv_filters = get<std::uint64_t>(in);
    spec.conv_kernel = get<std::uint64_t>(in);
    spec.dropout_enabled = get<std::uint8_t>(in) != 0;

    Model model = Model::build(spec, 0);
    auto params = model.parameters();
    const auto count = get<std::uint64_t>(in);
    if (count != params.size()) throw std::runtime_error("model file parameter count mismatch");
    for (auto* p : params) {
        const auto len = get<std::uint32_t>(in);
        std::string name(len, '\0');
        in.read(name.data(), len);
        const auto rows = get<std::uint64_t>(in);
        const auto cols = get<std::uint64_t>(in);
        if (name != p->name || rows != p->value.rows() || cols != p->value.cols()) {
            throw std::runtime_error("model file parameter '" + name + "' does not match spec");
        }
        in.read(reinterpret_cast<char*>(p->value.data()),
                static_cast<std::streamsize>(p->value.size() * sizeof(double)));
        if (!in) throw std::runtime_error("model file truncated");
    }
    return model;
}

void save_model_file(const Model& model, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    save_model(model, out);
}

Model load_model_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return load_model(in);
}

}  // namespace gaitpred
