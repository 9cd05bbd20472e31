#include "qudit_qkd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace qkd::kernels {

namespace {

Isa probe() {
#if defined(QKD_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
    __builtin_cpu_init();
    if (__builtin_cpu_supports("avx2"))
        return Isa::Avx2;
#endif
    return Isa::Scalar;
}

Isa initial() {
    const char* env = std::getenv("QKD_SIMD");
    if (env && std::strcmp(env, "scalar") == 0)
        return Isa::Scalar;
    return probe();
}

std::atomic<Isa>& current() {
    static std::atomic<Isa> isa{initial()};
    return isa;
}

}  // namespace

const char* isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

Isa detected_isa() {
    static const Isa isa = probe();
    return isa;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
    current().store(isa == Isa::Avx2 && detected_isa() != Isa::Avx2 ? Isa::Scalar : isa, std::memory_order_relaxed);
}

SliceResult f_slice(const SliceParams& p, std::span<const double> e_c) {
#ifdef QKD_HAVE_AVX2
    if (active_isa() == Isa::Avx2)
        return avx2::f_slice(p, e_c);
#endif
    return scalar::f_slice(p, e_c);
}

std::uint64_t count_mismatches(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
#ifdef QKD_HAVE_AVX2
    if (active_isa() == Isa::Avx2)
        return avx2::count_mismatches(a, b);
#endif
    return scalar::count_mismatches(a, b);
}

}  // namespace qkd::kernels
