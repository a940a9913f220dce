#pragma once

// Data-parallel inner loops used by the autodiff tape and inference code.
//
// Every kernel has a scalar reference implementation. On x86-64 an AVX2/FMA
// variant is compiled into its own translation unit and chosen at runtime
// when the CPU supports it. Set BICO_KERNELS=scalar (or avx2) to force a
// variant; the choice is fixed for the lifetime of the process.

#include <cstddef>
#include <span>
#include <string_view>

namespace bico::kernels {

struct KernelTable {
    const char* name;

    double (*dot)(const double* a, const double* b, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // out = a * b (element-wise)
    void (*hadamard)(const double* a, const double* b, double* out, std::size_t n);
    // Complex vectors stored as [re(0..half) | im(0..half)].
    void (*complex_mul)(const double* a, const double* b, double* out, std::size_t half);
    // acc += g * conj(b), the adjoint of complex_mul with respect to a.
    void (*complex_mul_conj_acc)(const double* g, const double* b, double* acc, std::size_t half);
    // y = W x (+ bias when non-null); W is rows x cols row-major.
    void (*gemv)(const double* w, const double* x, const double* bias, double* y,
                 std::size_t rows, std::size_t cols);
    // acc += W^T g
    void (*gemv_t_acc)(const double* w, const double* g, double* acc, std::size_t rows,
                       std::size_t cols);
    // W += g x^T
    void (*ger_acc)(const double* g, const double* x, double* w, std::size_t rows,
                    std::size_t cols);
};

const KernelTable& scalar_table();

// nullptr when the variant was not compiled in or the CPU lacks AVX2+FMA.
const KernelTable* avx2_table();

// The table selected for this process.
const KernelTable& active();

// Convenience wrappers over active().
double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

}  // namespace bico::kernels
