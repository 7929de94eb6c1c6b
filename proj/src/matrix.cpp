#include "labelprop/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "labelprop/kernels.hpp"

namespace labelprop {

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: shape mismatch");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t l = 0; l < a.cols(); ++l) {
            kern::axpy(a(i, l), b.row(l), c.row(i), b.cols());
        }
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: shape mismatch");
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.rows(); ++j) {
            c(i, j) = kern::dot(a.row(i), b.row(j), a.cols());
        }
    }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw std::invalid_argument("matmul_tn: shape mismatch");
    Matrix c(a.cols(), b.cols());
    for (std::size_t l = 0; l < a.rows(); ++l) {
        for (std::size_t i = 0; i < a.cols(); ++i) {
            kern::axpy(a(l, i), b.row(l), c.row(i), b.cols());
        }
    }
    return c;
}

void add_scaled(Matrix& y, const Matrix& x, double alpha) {
    if (y.rows() != x.rows() || y.cols() != x.cols()) {
        throw std::invalid_argument("add_scaled: shape mismatch");
    }
    kern::axpy(alpha, x.data(), y.data(), x.size());
}

void softmax_row(double* x, std::size_t n) {
    double mx = x[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, x[i]);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::exp(x[i] - mx);
    const double total = kern::sum(x, n);
    kern::scale(x, 1.0 / total, n);
}

double l2_norm(std::span<const double> v) {
    return std::sqrt(kern::dot(v.data(), v.data(), v.size()));
}

std::vector<double> l2_normalized(std::span<const double> v) {
    const double n = l2_norm(v);
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw std::invalid_argument("cannot normalize zero-norm vector");
    }
    std::vector<double> out(v.begin(), v.end());
    kern::scale(out.data(), 1.0 / n, out.size());
    return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine: length mismatch");
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (!(na > 0.0) || !(nb > 0.0)) {
        throw std::invalid_argument("cosine: zero-norm input");
    }
    return kern::dot(a.data(), b.data(), a.size()) / (na * nb);
}

}  // namespace labelprop
