#include "gaitpred/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gaitpred {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw std::invalid_argument("Matrix: data length " + std::to_string(data_.size()) +
                                    " does not match " + std::to_string(rows) + "x" +
                                    std::to_string(cols));
    }
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Matrix Matrix::reshaped(std::size_t rows, std::size_t cols) const {
    return Matrix(rows, cols, data_);
}

Matrix Matrix::slice_rows(std::size_t begin, std::size_t end) const {
    if (begin > end || end > rows_) {
        throw std::out_of_range("Matrix::slice_rows: bad range");
    }
    return Matrix(end - begin, cols_,
                  std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(begin * cols_),
                                      data_.begin() + static_cast<std::ptrdiff_t>(end * cols_)));
}

Matrix Matrix::reversed_rows() const {
    Matrix out(rows_, cols_);
    for (std::size_t r = 0; r < rows_; ++r) {
        std::copy_n(data_.data() + r * cols_, cols_, out.data() + (rows_ - 1 - r) * cols_);
    }
    return out;
}

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void gemv_acc(const Matrix& w, std::span<const double> x, std::span<double> y) {
    const std::size_t in = w.cols();
    for (std::size_t r = 0; r < w.rows(); ++r) {
        const double* wr = w.data() + r * in;
        double acc = 0.0;
        for (std::size_t c = 0; c < in; ++c) acc += wr[c] * x[c];
        y[r] += acc;
    }
}

void gemv_t_acc(const Matrix& w, std::span<const double> x, std::span<double> y) {
    const std::size_t in = w.cols();
    for (std::size_t r = 0; r < w.rows(); ++r) {
        const double xr = x[r];
        if (xr == 0.0) continue;
        const double* wr = w.data() + r * in;
        for (std::size_t c = 0; c < in; ++c) y[c] += wr[c] * xr;
    }
}

void outer_acc(std::span<const double> a, std::span<const double> b, Matrix& g) {
    const std::size_t n = b.size();
    for (std::size_t r = 0; r < a.size(); ++r) {
        const double ar = a[r];
        if (ar == 0.0) continue;
        double* gr = g.data() + r * n;
        for (std::size_t c = 0; c < n; ++c) gr[c] += ar * b[c];
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

}  // namespace gaitpred
