#include "canbnn/dense.hpp"

namespace canbnn {

double dot(const double* x, const double* y, std::size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += x[i] * y[i];
        s1 += x[i + 1] * y[i + 1];
        s2 += x[i + 2] * y[i + 2];
        s3 += x[i + 3] * y[i + 3];
    }
    for (; i < n; ++i) s0 += x[i] * y[i];
    return (s0 + s1) + (s2 + s3);
}

void linear_forward(const Matrix& a, const Matrix& w, const double* bias, Matrix& out) {
    out.resize(a.rows, w.rows);
    const std::size_t k = a.cols;
    for (std::size_t r = 0; r < a.rows; ++r) {
        const double* ar = a.row(r);
        double* or_ = out.row(r);
        for (std::size_t o = 0; o < w.rows; ++o)
            or_[o] = dot(ar, w.row(o), k) + (bias ? bias[o] : 0.0);
    }
}

void linear_backward_input(const Matrix& d_out, const Matrix& w, Matrix& d_in) {
    const std::size_t k = w.cols;
    for (std::size_t r = 0; r < d_out.rows; ++r) {
        const double* dr = d_out.row(r);
        double* di = d_in.row(r);
        for (std::size_t o = 0; o < d_out.cols; ++o) {
            const double g = dr[o];
            if (g == 0.0) continue;
            const double* wo = w.row(o);
            for (std::size_t j = 0; j < k; ++j) di[j] += g * wo[j];
        }
    }
}

void linear_backward_weights(const Matrix& d_out, const Matrix& a, Matrix& d_w) {
    const std::size_t k = a.cols;
    for (std::size_t r = 0; r < d_out.rows; ++r) {
        const double* dr = d_out.row(r);
        const double* ar = a.row(r);
        for (std::size_t o = 0; o < d_out.cols; ++o) {
            const double g = dr[o];
            if (g == 0.0) continue;
            double* wo = d_w.row(o);
            for (std::size_t j = 0; j < k; ++j) wo[j] += g * ar[j];
        }
    }
}

}  // namespace canbnn
