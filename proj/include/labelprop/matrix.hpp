#pragma once

// Row-major dense double matrix plus the handful of products the Hopfield
// math needs. Inner loops go through the dispatchable kernels.

#include <cstddef>
#include <span>
#include <vector>

namespace labelprop {

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }
    std::span<const double> row_span(std::size_t i) const {
        return {row(i), cols_};
    }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    bool operator==(const Matrix&) const = default;

    bool all_finite() const;

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

// C = A * B         (r x k) * (k x c)
Matrix matmul(const Matrix& a, const Matrix& b);
// C = A * B^T       (r x k) * (c x k)
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// C = A^T * B       (k x r) * (k x c)
Matrix matmul_tn(const Matrix& a, const Matrix& b);

// y += alpha * x, elementwise over equally shaped matrices.
void add_scaled(Matrix& y, const Matrix& x, double alpha);

// In-place numerically stable softmax of one length-n row.
void softmax_row(double* x, std::size_t n);

double l2_norm(std::span<const double> v);
// v / ||v||; throws std::invalid_argument on (near-)zero norm.
std::vector<double> l2_normalized(std::span<const double> v);
double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace labelprop
