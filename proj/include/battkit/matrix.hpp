#pragma once

#include <cstddef>
#include <vector>

namespace battkit {

// Dense row-major matrix of doubles. Deliberately minimal: the numeric
// heavy lifting lives in kernels.hpp.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), v(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return v[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return v[r * cols + c]; }

    double* row(std::size_t r) { return v.data() + r * cols; }
    const double* row(std::size_t r) const { return v.data() + r * cols; }

    std::size_t size() const { return v.size(); }
    bool empty() const { return v.empty(); }
};

} // namespace battkit
