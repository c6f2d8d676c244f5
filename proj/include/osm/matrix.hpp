#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "osm/errors.hpp"

namespace osm {

// Dense row-major 2-D matrix of 64-bit reals. The only tensor shape in this
// codebase is (batch x features); there is no N-D support on purpose.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    static Matrix zeros(int r, int c) { return Matrix(r, c); }

    static Matrix full(int r, int c, double v) {
        Matrix m(r, c);
        for (auto& x : m.a) x = v;
        return m;
    }

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows_init) {
        Matrix m(static_cast<int>(rows_init.size()),
                 rows_init.size() ? static_cast<int>(rows_init.begin()->size()) : 0);
        int i = 0;
        for (const auto& r : rows_init) {
            int j = 0;
            for (double v : r) m(i, j++) = v;
            ++i;
        }
        return m;
    }

    double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

    double* data() { return a.data(); }
    const double* data() const { return a.data(); }
    double* row_ptr(int i) { return a.data() + static_cast<size_t>(i) * cols; }
    const double* row_ptr(int i) const { return a.data() + static_cast<size_t>(i) * cols; }
    size_t size() const { return a.size(); }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    void fill(double v) {
        for (auto& x : a) x = v;
    }

    std::string shape_str() const {
        return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
    }
};

inline bool bitwise_equal(const Matrix& x, const Matrix& y) {
    return x.same_shape(y) && x.a == y.a;
}

inline void require_same_shape(const Matrix& x, const Matrix& y, const char* op) {
    if (!x.same_shape(y))
        throw ContractError(std::string(op) + ": shape mismatch " + x.shape_str() + " vs " +
                            y.shape_str());
}

}  // namespace osm
