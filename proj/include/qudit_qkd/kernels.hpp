#pragma once

// Data-parallel inner loops with a scalar reference and an AVX2 variant.
// The variant is chosen once at runtime from CPUID; QKD_SIMD=scalar in the
// environment forces the reference path.

#include <cstddef>
#include <cstdint>
#include <span>

namespace qkd::kernels {

enum class Isa { Scalar, Avx2 };

const char* isa_name(Isa isa);
Isa detected_isa();
Isa active_isa();
/// Overrides the dispatch choice; requesting Avx2 on a CPU without it keeps
/// the scalar path.
void force_isa(Isa isa);

/// Constants of the tolerance function for one (e_b, e_11, N) slice.
struct SliceParams {
    double e_b = 0;
    double e_11 = 0;
    double order = 4;
    /// Points with region LHS >= 1/2 - guard are treated as outside.
    double guard = 1e-9;
};

struct SliceResult {
    std::uint64_t in_region = 0;
    std::uint64_t nonpositive = 0;
    double min_f = 0;
    /// First index attaining min_f among in-region points; SIZE_MAX if none.
    std::size_t argmin = static_cast<std::size_t>(-1);
};

/// Evaluates f(e_b, e_c, e_11) = [1 - e_b e_c - N(1-e_c)/(N-2) + 2 e_11]^2
/// - e_b(1-e_b) e_c^2 over the e_c samples, restricted to points of the
/// region e_b e_c + (N-1)(1-e_c)/(N-2) < 1/2.
SliceResult f_slice(const SliceParams& p, std::span<const double> e_c);

/// Number of positions where two 0/1 byte strings differ.
std::uint64_t count_mismatches(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

namespace scalar {
SliceResult f_slice(const SliceParams& p, std::span<const double> e_c);
std::uint64_t count_mismatches(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);
}  // namespace scalar

namespace avx2 {
SliceResult f_slice(const SliceParams& p, std::span<const double> e_c);
std::uint64_t count_mismatches(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);
}  // namespace avx2

}  // namespace qkd::kernels
