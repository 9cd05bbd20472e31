#include "qudit_qkd/kernels.hpp"

#include <limits>

namespace qkd::kernels::scalar {

SliceResult f_slice(const SliceParams& p, std::span<const double> e_c) {
    const double c_n = p.order / (p.order - 2);
    const double c_n1 = (p.order - 1) / (p.order - 2);
    const double q = p.e_b * (1 - p.e_b);
    const double base = 1 + 2 * p.e_11;
    const double bound = 0.5 - p.guard;

    SliceResult r;
    r.min_f = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < e_c.size(); ++i) {
        const double c = e_c[i];
        const double rest = 1 - c;
        const double lhs = p.e_b * c + c_n1 * rest;
        if (!(lhs < bound))
            continue;
        const double t = (base - p.e_b * c) - c_n * rest;
        const double f = t * t - (q * c) * c;
        ++r.in_region;
        r.nonpositive += f <= 0;
        if (f < r.min_f) {
            r.min_f = f;
            r.argmin = i;
        }
    }
    return r;
}

std::uint64_t count_mismatches(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    std::uint64_t n = 0;
    const std::size_t len = a.size() < b.size() ? a.size() : b.size();
    for (std::size_t i = 0; i < len; ++i)
        n += a[i] != b[i];
    return n;
}

}  // namespace qkd::kernels::scalar
