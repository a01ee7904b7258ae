#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gaitpred {

// Dense row-major matrix of doubles. Sequences are stored one time step per
// row, so a T x C sequence is a Matrix(T, C).
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    void fill(double v);
    void set_zero() { fill(0.0); }

    // Same data, new shape. Throws if rows*cols differs.
    Matrix reshaped(std::size_t rows, std::size_t cols) const;
    // Rows [begin, end).
    Matrix slice_rows(std::size_t begin, std::size_t end) const;
    // Rows in reverse order.
    Matrix reversed_rows() const;

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    bool all_finite() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Small kernels shared by the layers. `w` is out x in, row-major.

// y += W x
void gemv_acc(const Matrix& w, std::span<const double> x, std::span<double> y);
// y += W^T x
void gemv_t_acc(const Matrix& w, std::span<const double> x, std::span<double> y);
// G += a b^T   (G is a.size() x b.size())
void outer_acc(std::span<const double> a, std::span<const double> b, Matrix& g);

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace gaitpred
