#pragma once

#include <cstddef>
#include <vector>

namespace canbnn {

// Row-major dense matrix of doubles; deliberately minimal.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    void resize(std::size_t r, std::size_t c) {
        rows = r;
        cols = c;
        data.assign(r * c, 0.0);
    }

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }
    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// out[r][o] = sum_k a[r][k] * w[o][k] + bias[o]; bias may be null.
void linear_forward(const Matrix& a, const Matrix& w, const double* bias, Matrix& out);

// d_in[r][k] += sum_o d_out[r][o] * w[o][k]   (d_in must be pre-zeroed)
void linear_backward_input(const Matrix& d_out, const Matrix& w, Matrix& d_in);

// d_w[o][k] += sum_r d_out[r][o] * a[r][k]    (d_w must be pre-zeroed)
void linear_backward_weights(const Matrix& d_out, const Matrix& a, Matrix& d_w);

// Unrolled dot product with a fixed summation order (deterministic).
double dot(const double* x, const double* y, std::size_t n);

}  // namespace canbnn
