#include "bico/kernels.hpp"

namespace bico::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

void hadamard_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = a[i] * b[i];
    }
}

void complex_mul_scalar(const double* a, const double* b, double* out, std::size_t half) {
    const double* a_im = a + half;
    const double* b_im = b + half;
    double* out_im = out + half;
    for (std::size_t k = 0; k < half; ++k) {
        const double re = a[k] * b[k] - a_im[k] * b_im[k];
        const double im = a[k] * b_im[k] + a_im[k] * b[k];
        out[k] = re;
        out_im[k] = im;
    }
}

void complex_mul_conj_acc_scalar(const double* g, const double* b, double* acc, std::size_t half) {
    const double* g_im = g + half;
    const double* b_im = b + half;
    double* acc_im = acc + half;
    for (std::size_t k = 0; k < half; ++k) {
        acc[k] += g[k] * b[k] + g_im[k] * b_im[k];
        acc_im[k] += g_im[k] * b[k] - g[k] * b_im[k];
    }
}

void gemv_scalar(const double* w, const double* x, const double* bias, double* y,
                 std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double v = dot_scalar(w + r * cols, x, cols);
        y[r] = bias ? v + bias[r] : v;
    }
}

void gemv_t_acc_scalar(const double* w, const double* g, double* acc, std::size_t rows,
                       std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        axpy_scalar(g[r], w + r * cols, acc, cols);
    }
}

void ger_acc_scalar(const double* g, const double* x, double* w, std::size_t rows,
                    std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        axpy_scalar(g[r], x, w + r * cols, cols);
    }
}

constexpr KernelTable kScalar{
    "scalar",
    dot_scalar,
    axpy_scalar,
    hadamard_scalar,
    complex_mul_scalar,
    complex_mul_conj_acc_scalar,
    gemv_scalar,
    gemv_t_acc_scalar,
    ger_acc_scalar,
};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace bico::kernels
