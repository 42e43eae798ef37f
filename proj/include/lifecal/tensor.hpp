#pragma once

#include <array>
#include <cassert>
#include <cstddef>
#include <vector>

namespace lifecal {

// Dense row-major matrix of doubles. Scalars are 1x1, row vectors 1xn.
// Everything in this project is rank <= 2.
struct Tensor {
    std::array<std::size_t, 2> shape{0, 0};
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
        : shape{rows, cols}, data(rows * cols, fill) {}

    static Tensor scalar(double v) {
        Tensor t(1, 1);
        t.data[0] = v;
        return t;
    }

    std::size_t rows() const { return shape[0]; }
    std::size_t cols() const { return shape[1]; }
    std::size_t numel() const { return data.size(); }

    double& operator()(std::size_t i, std::size_t j) {
        assert(i < rows() && j < cols());
        return data[i * cols() + j];
    }
    double operator()(std::size_t i, std::size_t j) const {
        assert(i < rows() && j < cols());
        return data[i * cols() + j];
    }

    double* row(std::size_t i) { return data.data() + i * cols(); }
    const double* row(std::size_t i) const { return data.data() + i * cols(); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

// C += A * B
inline void matmul_acc(const Tensor& a, const Tensor& b, Tensor& c) {
    assert(a.cols() == b.rows() && c.rows() == a.rows() && c.cols() == b.cols());
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a.row(i);
        double* ci = c.row(i);
        for (std::size_t l = 0; l < k; ++l) {
            const double av = ai[l];
            if (av == 0.0) continue;
            const double* bl = b.row(l);
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bl[j];
        }
    }
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    Tensor c(a.rows(), b.cols());
    matmul_acc(a, b, c);
    return c;
}

// C += A^T * B  (A is m x r, B is m x n, C is r x n)
inline void matmul_at_acc(const Tensor& a, const Tensor& b, Tensor& c) {
    assert(a.rows() == b.rows() && c.rows() == a.cols() && c.cols() == b.cols());
    const std::size_t m = a.rows(), r = a.cols(), n = b.cols();
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a.row(i);
        const double* bi = b.row(i);
        for (std::size_t l = 0; l < r; ++l) {
            const double av = ai[l];
            if (av == 0.0) continue;
            double* cl = c.row(l);
            for (std::size_t j = 0; j < n; ++j) cl[j] += av * bi[j];
        }
    }
}

// C += A * B^T  (A is m x k, B is n x k, C is m x n)
inline void matmul_bt_acc(const Tensor& a, const Tensor& b, Tensor& c) {
    assert(a.cols() == b.cols() && c.rows() == a.rows() && c.cols() == b.rows());
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a.row(i);
        double* ci = c.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b.row(j);
            double s = 0.0;
            for (std::size_t l = 0; l < k; ++l) s += ai[l] * bj[l];
            ci[j] += s;
        }
    }
}

} // namespace lifecal
