#include "gaitpred/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <tuple>

#include "gaitpred/csv_io.hpp"

namespace gaitpred {

namespace {

bool row_valid(std::span<const std::uint8_t> mask, std::size_t r) {
    return mask.empty() || mask[r] != 0;
}

double sorted_sum(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double s = 0;
    for (double x : v) s += x;
    return s;
}

std::string metadata_lines(std::span<const std::pair<std::string, std::string>> metadata) {
    std::string s;
    for (const auto& [k, v] : metadata) s += "# " + k + "=" + v + "\n";
    return s;
}

}  // namespace

MetricsRecord compute_metrics(const Matrix& y_true, const Matrix& y_pred,
                              std::span<const std::uint8_t> row_mask) {
    if (!y_true.same_shape(y_pred)) throw std::invalid_argument("compute_metrics: shape mismatch");
    if (!row_mask.empty() && row_mask.size() != y_true.rows()) {
        throw std::invalid_argument("compute_metrics: mask length must equal row count");
    }
    double abs_sum = 0, sq_sum = 0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < y_true.rows(); ++r) {
        if (!row_valid(row_mask, r)) continue;
        for (std::size_t c = 0; c < y_true.cols(); ++c) {
            const double d = y_pred(r, c) - y_true(r, c);
            abs_sum += std::abs(d);
            sq_sum += d * d;
            ++n;
        }
    }
    if (n == 0) throw std::invalid_argument("compute_metrics: no valid elements");
    MetricsRecord rec;
    rec.n = n;
    rec.mae = abs_sum / static_cast<double>(n);
    rec.mse = sq_sum / static_cast<double>(n);
    rec.rmse = std::sqrt(rec.mse);
    return rec;
}

SummedSeries summed_series(const Matrix& values, std::span<const std::uint8_t> row_mask) {
    if (!row_mask.empty() && row_mask.size() != values.rows()) {
        throw std::invalid_argument("summed_series: mask length must equal row count");
    }
    SummedSeries s;
    s.sum.resize(values.rows(), 0.0);
    s.valid.resize(values.rows(), 0);
    for (std::size_t r = 0; r < values.rows(); ++r) {
        if (!row_valid(row_mask, r)) continue;
        double acc = 0;
        for (double v : values.row(r)) acc += v;
        s.sum[r] = acc;
        s.valid[r] = 1;
    }
    return s;
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median of empty set");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

ReportTable aggregate(std::span<const MetricsRecord> records) {
    if (records.empty()) throw std::invalid_argument("aggregate: no records");
    using Key = std::tuple<std::size_t, std::size_t, std::string>;
    struct Acc {
        std::vector<double> mae, mse, rmse;
    };
    std::map<Key, Acc> groups;
    for (const auto& r : records) {
        auto& a = groups[{r.context.w_in, r.context.w_out, r.context.model}];
        a.mae.push_back(r.mae);
        a.mse.push_back(r.mse);
        a.rmse.push_back(r.rmse);
    }

    ReportTable table;
    for (const auto& [key, acc] : groups) {
        ReportRow row;
        row.w_in = std::get<0>(key);
        row.w_out = std::get<1>(key);
        row.model = std::get<2>(key);
        const double n = static_cast<double>(acc.rmse.size());
        row.mean_mae = sorted_sum(acc.mae) / n;
        row.mean_mse = sorted_sum(acc.mse) / n;
        row.mean_rmse = sorted_sum(acc.rmse) / n;
        row.median_rmse = median(acc.rmse);
        row.n = acc.rmse.size();
        table.rows.push_back(row);
    }

    // Rank inside each window configuration by mean RMSE, ties by name.
    for (std::size_t i = 0; i < table.rows.size();) {
        std::size_t j = i;
        while (j < table.rows.size() && table.rows[j].w_in == table.rows[i].w_in &&
               table.rows[j].w_out == table.rows[i].w_out) {
            ++j;
        }
        std::vector<std::size_t> idx;
        for (std::size_t k = i; k < j; ++k) idx.push_back(k);
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            const auto& ra = table.rows[a];
            const auto& rb = table.rows[b];
            if (ra.mean_rmse != rb.mean_rmse) return ra.mean_rmse < rb.mean_rmse;
            return ra.model < rb.model;
        });
        for (std::size_t k = 0; k < idx.size(); ++k) table.rows[idx[k]].rank = k + 1;
        i = j;
    }
    return table;
}

std::string report_csv(const ReportTable& table,
                       std::span<const std::pair<std::string, std::string>> metadata) {
    std::string s = metadata_lines(metadata);
    s += "model,w_in,w_out,mean_mae,mean_mse,mean_rmse,median_rmse,n,rank\n";
    for (const auto& r : table.rows) {
        s += r.model + "," + std::to_string(r.w_in) + "," + std::to_string(r.w_out) + "," +
             format_double(r.mean_mae) + "," + format_double(r.mean_mse) + "," +
             format_double(r.mean_rmse) + "," + format_double(r.median_rmse) + "," +
             std::to_string(r.n) + "," + std::to_string(r.rank) + "\n";
    }
    return s;
}

std::string records_csv(std::span<const MetricsRecord> records,
                        std::span<const std::pair<std::string, std::string>> metadata) {
    std::string s = metadata_lines(metadata);
    s += "participant,trial,model,w_in,w_out,mae,mse,rmse,n\n";
    for (const auto& r : records) {
        const auto& c = r.context;
        s += c.participant + "," + c.trial + "," + c.model + "," + std::to_string(c.w_in) + "," +
             std::to_string(c.w_out) + "," + format_double(r.mae) + "," + format_double(r.mse) +
             "," + format_double(r.rmse) + "," + std::to_string(r.n) + "\n";
    }
    return s;
}

std::string plot_csv(const SummedSeries& truth, const SummedSeries& predicted) {
    if (truth.size() != predicted.size()) {
        throw std::invalid_argument("emit_plot: series lengths differ (" +
                                    std::to_string(truth.size()) + " vs " +
                                    std::to_string(predicted.size()) + ")");
    }
    std::string s = "t,true_sum,pred_sum\n";
    for (std::size_t t = 0; t < truth.size(); ++t) {
        s += std::to_string(t) + ",";
        if (truth.valid[t]) s += format_double(truth.sum[t]);
        s += ",";
        if (predicted.valid[t]) s += format_double(predicted.sum[t]);
        s += "\n";
    }
    return s;
}

std::string plot_svg(const SummedSeries& truth, const SummedSeries& predicted,
                     const std::string& title) {
    if (truth.size() != predicted.size()) {
        throw std::invalid_argument("emit_plot: series lengths differ");
    }
    constexpr double width = 1000, height = 360, margin = 40;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto* s : {&truth, &predicted}) {
        for (std::size_t t = 0; t < s->size(); ++t) {
            if (!s->valid[t]) continue;
            lo = std::min(lo, s->sum[t]);
            hi = std::max(hi, s->sum[t]);
        }
    }
    if (!(hi > lo)) {
        lo = std::isfinite(lo) ? lo - 1 : 0;
        hi = lo + 2;
    }
    const double n = std::max<double>(1, static_cast<double>(truth.size()) - 1);
    auto x = [&](std::size_t t) { return margin + (width - 2 * margin) * static_cast<double>(t) / n; };
    auto y = [&](double v) { return height - margin - (height - 2 * margin) * (v - lo) / (hi - lo); };

    auto polylines = [&](const SummedSeries& s, const char* colour) {
        std::string out;
        std::string pts;
        auto flush = [&]() {
            if (!pts.empty()) {
                out += "<polyline fill=\"none\" stroke=\"" + std::string(colour) +
                       "\" stroke-width=\"1.2\" points=\"" + pts + "\"/>\n";
                pts.clear();
            }
        };
        for (std::size_t t = 0; t < s.size(); ++t) {
            if (!s.valid[t]) {
                flush();
                continue;
            }
            pts += format_fixed(x(t), 2) + "," + format_fixed(y(s.sum[t]), 2) + " ";
        }
        flush();
        return out;
    };

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"1000\" height=\"360\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"40\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" + title +
           "  (blue: true sum, orange: predicted sum)</text>\n";
    svg += polylines(truth, "#1f77b4");
    svg += polylines(predicted, "#ff7f0e");
    svg += "</svg>\n";
    return svg;
}

void emit_plot(const SummedSeries& truth, const SummedSeries& predicted,
               const std::filesystem::path& stem, const std::string& title) {
    auto csv = stem;
    csv += ".csv";
    auto svg = stem;
    svg += ".svg";
    write_text_file(csv, plot_csv(truth, predicted));
    write_text_file(svg, plot_svg(truth, predicted, title));
}

}  // namespace gaitpred
