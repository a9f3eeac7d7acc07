#pragma once

#include "battkit/matrix.hpp"

namespace battkit::kernels {

// General matrix product C = op(A) * op(B), optionally accumulating into C.
// Each kernel exists twice: a serial reference and an OpenMP version that
// parallelizes over output rows. The OpenMP version keeps the per-element
// summation order identical to the serial one, so results are bitwise equal
// for any thread count.
enum class Op { None, Transpose };

void gemm_serial(const Matrix& a, Op op_a, const Matrix& b, Op op_b,
                 Matrix& c, bool accumulate = false);
void gemm_parallel(const Matrix& a, Op op_a, const Matrix& b, Op op_b,
                   Matrix& c, bool accumulate = false);
// Dispatches on battkit::par::parallel_enabled().
void gemm(const Matrix& a, Op op_a, const Matrix& b, Op op_b,
          Matrix& c, bool accumulate = false);

// y[r] += bias broadcast over rows
void add_row_bias_serial(Matrix& m, const std::vector<double>& bias);
void add_row_bias_parallel(Matrix& m, const std::vector<double>& bias);
void add_row_bias(Matrix& m, const std::vector<double>& bias);

// In-place leaky ReLU and its derivative mask (1 or slope per element).
void leaky_relu_serial(Matrix& m, double slope);
void leaky_relu_parallel(Matrix& m, double slope);
void leaky_relu(Matrix& m, double slope);

} // namespace battkit::kernels
