#include "bico/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace bico::kernels {

#if defined(BICO_HAS_AVX2)
extern const KernelTable kAvx2Table;
#endif

const KernelTable* avx2_table() {
#if defined(BICO_HAS_AVX2)
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return supported ? &kAvx2Table : nullptr;
#else
    return nullptr;
#endif
}

namespace {

const KernelTable& select_table() {
    const char* forced = std::getenv("BICO_KERNELS");
    if (forced != nullptr && *forced != '\0') {
        const std::string name(forced);
        if (name == "scalar") {
            return scalar_table();
        }
        if (name == "avx2") {
            if (const KernelTable* t = avx2_table()) {
                return *t;
            }
            throw std::runtime_error("BICO_KERNELS=avx2 requested but AVX2/FMA is unavailable");
        }
        throw std::runtime_error("unknown BICO_KERNELS value: " + name);
    }
    if (const KernelTable* t = avx2_table()) {
        return *t;
    }
    return scalar_table();
}

}  // namespace

const KernelTable& active() {
    static const KernelTable& table = select_table();
    return table;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("dot: length mismatch");
    }
    return active().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("axpy: length mismatch");
    }
    active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace bico::kernels
