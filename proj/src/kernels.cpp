#include "battkit/kernels.hpp"

#include "battkit/parallel.hpp"

#include <cassert>
#include <cstddef>

namespace battkit::kernels {

namespace {

inline std::size_t op_rows(const Matrix& m, Op op) {
    return op == Op::None ? m.rows : m.cols;
}
inline std::size_t op_cols(const Matrix& m, Op op) {
    return op == Op::None ? m.cols : m.rows;
}
inline double op_at(const Matrix& m, Op op, std::size_t r, std::size_t c) {
    return op == Op::None ? m(r, c) : m(c, r);
}

inline void gemm_row(const Matrix& a, Op op_a, const Matrix& b, Op op_b,
                     Matrix& c, bool accumulate, std::size_t i) {
    const std::size_t k_dim = op_cols(a, op_a);
    const std::size_t n = c.cols;
    double* out = c.row(i);
    if (!accumulate) {
        for (std::size_t j = 0; j < n; ++j) out[j] = 0.0;
    }
    if (op_a == Op::None && op_b == Op::None) {
        // cache-friendly ikj order
        const double* arow = a.row(i);
        for (std::size_t k = 0; k < k_dim; ++k) {
            const double aik = arow[k];
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < n; ++j) out[j] += aik * brow[j];
        }
    } else if (op_a == Op::None && op_b == Op::Transpose) {
        const double* arow = a.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < k_dim; ++k) acc += arow[k] * brow[k];
            out[j] += acc;
        }
    } else {
        for (std::size_t k = 0; k < k_dim; ++k) {
            const double aik = op_at(a, op_a, i, k);
            for (std::size_t j = 0; j < n; ++j) out[j] += aik * op_at(b, op_b, k, j);
        }
    }
}

} // namespace

void gemm_serial(const Matrix& a, Op op_a, const Matrix& b, Op op_b,
                 Matrix& c, bool accumulate) {
    const std::size_t m = op_rows(a, op_a);
    const std::size_t n = op_cols(b, op_b);
    assert(op_cols(a, op_a) == op_rows(b, op_b));
    if (c.rows != m || c.cols != n) c = Matrix(m, n);
    for (std::size_t i = 0; i < m; ++i) gemm_row(a, op_a, b, op_b, c, accumulate, i);
}

void gemm_parallel(const Matrix& a, Op op_a, const Matrix& b, Op op_b,
                   Matrix& c, bool accumulate) {
    const std::size_t m = op_rows(a, op_a);
    const std::size_t n = op_cols(b, op_b);
    assert(op_cols(a, op_a) == op_rows(b, op_b));
    if (c.rows != m || c.cols != n) c = Matrix(m, n);
    const int nt = par::effective_threads();
#pragma omp parallel for schedule(static) num_threads(nt)
    for (long long i = 0; i < (long long)m; ++i)
        gemm_row(a, op_a, b, op_b, c, accumulate, (std::size_t)i);
}

void gemm(const Matrix& a, Op op_a, const Matrix& b, Op op_b,
          Matrix& c, bool accumulate) {
    if (par::parallel_enabled() && op_rows(a, op_a) >= 16)
        gemm_parallel(a, op_a, b, op_b, c, accumulate);
    else
        gemm_serial(a, op_a, b, op_b, c, accumulate);
}

void add_row_bias_serial(Matrix& m, const std::vector<double>& bias) {
    assert(bias.size() == m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        double* row = m.row(i);
        for (std::size_t j = 0; j < m.cols; ++j) row[j] += bias[j];
    }
}

void add_row_bias_parallel(Matrix& m, const std::vector<double>& bias) {
    assert(bias.size() == m.cols);
    const int nt = par::effective_threads();
#pragma omp parallel for schedule(static) num_threads(nt)
    for (long long i = 0; i < (long long)m.rows; ++i) {
        double* row = m.row((std::size_t)i);
        for (std::size_t j = 0; j < m.cols; ++j) row[j] += bias[j];
    }
}

void add_row_bias(Matrix& m, const std::vector<double>& bias) {
    if (par::parallel_enabled() && m.rows >= 64)
        add_row_bias_parallel(m, bias);
    else
        add_row_bias_serial(m, bias);
}

void leaky_relu_serial(Matrix& m, double slope) {
    for (double& x : m.v)
        if (x < 0.0) x *= slope;
}

void leaky_relu_parallel(Matrix& m, double slope) {
    const int nt = par::effective_threads();
#pragma omp parallel for schedule(static) num_threads(nt)
    for (long long i = 0; i < (long long)m.v.size(); ++i)
        if (m.v[(std::size_t)i] < 0.0) m.v[(std::size_t)i] *= slope;
}

void leaky_relu(Matrix& m, double slope) {
    if (par::parallel_enabled() && m.v.size() >= 4096)
        leaky_relu_parallel(m, slope);
    else
        leaky_relu_serial(m, slope);
}

} // namespace battkit::kernels
