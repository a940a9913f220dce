// Compiled with -mavx2 -mfma. Nothing here may run before dispatch.cpp has
// confirmed CPU support.

#include "bico/kernels.hpp"

#include <immintrin.h>

namespace bico::kernels {
namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    const __m128d sh = _mm_unpackhi_pd(s, s);
    return _mm_cvtsd_f64(_mm_add_sd(s, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

void hadamard_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) {
        out[i] = a[i] * b[i];
    }
}

void complex_mul_avx2(const double* a, const double* b, double* out, std::size_t half) {
    const double* a_im = a + half;
    const double* b_im = b + half;
    double* out_im = out + half;
    std::size_t k = 0;
    for (; k + 4 <= half; k += 4) {
        const __m256d ar = _mm256_loadu_pd(a + k);
        const __m256d ai = _mm256_loadu_pd(a_im + k);
        const __m256d br = _mm256_loadu_pd(b + k);
        const __m256d bi = _mm256_loadu_pd(b_im + k);
        const __m256d re = _mm256_fmsub_pd(ar, br, _mm256_mul_pd(ai, bi));
        const __m256d im = _mm256_fmadd_pd(ar, bi, _mm256_mul_pd(ai, br));
        _mm256_storeu_pd(out + k, re);
        _mm256_storeu_pd(out_im + k, im);
    }
    for (; k < half; ++k) {
        const double re = a[k] * b[k] - a_im[k] * b_im[k];
        const double im = a[k] * b_im[k] + a_im[k] * b[k];
        out[k] = re;
        out_im[k] = im;
    }
}

void complex_mul_conj_acc_avx2(const double* g, const double* b, double* acc, std::size_t half) {
    const double* g_im = g + half;
    const double* b_im = b + half;
    double* acc_im = acc + half;
    std::size_t k = 0;
    for (; k + 4 <= half; k += 4) {
        const __m256d gr = _mm256_loadu_pd(g + k);
        const __m256d gi = _mm256_loadu_pd(g_im + k);
        const __m256d br = _mm256_loadu_pd(b + k);
        const __m256d bi = _mm256_loadu_pd(b_im + k);
        const __m256d re = _mm256_fmadd_pd(gr, br, _mm256_mul_pd(gi, bi));
        const __m256d im = _mm256_fmsub_pd(gi, br, _mm256_mul_pd(gr, bi));
        _mm256_storeu_pd(acc + k, _mm256_add_pd(_mm256_loadu_pd(acc + k), re));
        _mm256_storeu_pd(acc_im + k, _mm256_add_pd(_mm256_loadu_pd(acc_im + k), im));
    }
    for (; k < half; ++k) {
        acc[k] += g[k] * b[k] + g_im[k] * b_im[k];
        acc_im[k] += g_im[k] * b[k] - g[k] * b_im[k];
    }
}

void gemv_avx2(const double* w, const double* x, const double* bias, double* y,
               std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double v = dot_avx2(w + r * cols, x, cols);
        y[r] = bias ? v + bias[r] : v;
    }
}

void gemv_t_acc_avx2(const double* w, const double* g, double* acc, std::size_t rows,
                     std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        axpy_avx2(g[r], w + r * cols, acc, cols);
    }
}

void ger_acc_avx2(const double* g, const double* x, double* w, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        axpy_avx2(g[r], x, w + r * cols, cols);
    }
}

}  // namespace

extern const KernelTable kAvx2Table;
const KernelTable kAvx2Table{
    "avx2",
    dot_avx2,
    axpy_avx2,
    hadamard_avx2,
    complex_mul_avx2,
    complex_mul_conj_acc_avx2,
    gemv_avx2,
    gemv_t_acc_avx2,
    ger_acc_avx2,
};

}  // namespace bico::kernels
