#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gaitpred/matrix.hpp"

namespace gaitpred {

struct MetricsContext {
    std::string participant;
    std::string trial;
    std::string model;
    std::size_t w_in = 0;
    std::size_t w_out = 0;
};

struct MetricsRecord {
    double mae = 0.0;
    double mse = 0.0;
    double rmse = 0.0;
    std::size_t n = 0;  // scored values (valid steps x channels)
    MetricsContext context;
};

// MAE, MSE and RMSE over every channel of every valid row. `row_mask` has
// one entry per row (non-zero = scored); an empty mask scores all rows.
MetricsRecord compute_metrics(const Matrix& y_true, const Matrix& y_pred,
                              std::span<const std::uint8_t> row_mask = {});

struct SummedSeries {
    std::vector<double> sum;
    std::vector<std::uint8_t> valid;

    std::size_t size() const { return sum.size(); }
};

// Per-step sum over the channels; steps with mask 0 are marked absent.
SummedSeries summed_series(const Matrix& values, std::span<const std::uint8_t> row_mask = {});

struct ReportRow {
    std::string model;
    std::size_t w_in = 0;
    std::size_t w_out = 0;
    double mean_mae = 0.0;
    double mean_mse = 0.0;
    double mean_rmse = 0.0;
    double median_rmse = 0.0;
    std::size_t n = 0;  // records aggregated
    std::size_t rank = 0;  // 1 = lowest mean RMSE within its (w_in, w_out) group

    bool best() const { return rank == 1; }
};

struct ReportTable {
    std::vector<ReportRow> rows;  // sorted by (w_in, w_out, model)
};

double median(std::vector<double> values);

// Groups records by (model, w_in, w_out). Sums are taken over sorted values,
// so the result does not depend on record order.
ReportTable aggregate(std::span<const MetricsRecord> records);

// `model,w_in,w_out,mean_mae,mean_mse,mean_rmse,median_rmse,n,rank`, preceded
// by one `# key=value` line per metadata entry.
std::string report_csv(const ReportTable& table,
                       std::span<const std::pair<std::string, std::string>> metadata = {});

// Per-record listing with context columns.
std::string records_csv(std::span<const MetricsRecord> records,
                        std::span<const std::pair<std::string, std::string>> metadata = {});

// `t,true_sum,pred_sum`; a column is left empty where that series is absent.
std::string plot_csv(const SummedSeries& truth, const SummedSeries& predicted);
std::string plot_svg(const SummedSeries& truth, const SummedSeries& predicted,
                     const std::string& title = {});
// Writes <stem>.csv and <stem>.svg.
void emit_plot(const SummedSeries& truth, const SummedSeries& predicted,
               const std::filesystem::path& stem, const std::string& title = {});

}  // namespace gaitpred
