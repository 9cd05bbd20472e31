#include "qudit_qkd/kernels.hpp"

#include <immintrin.h>

#include <bit>
#include <limits>

namespace qkd::kernels::avx2 {

SliceResult f_slice(const SliceParams& p, std::span<const double> e_c) {
    const double c_n = p.order / (p.order - 2);
    const double c_n1 = (p.order - 1) / (p.order - 2);
    const double q = p.e_b * (1 - p.e_b);
    const double base = 1 + 2 * p.e_11;
    const double bound = 0.5 - p.guard;

    const __m256d v_one = _mm256_set1_pd(1.0);
    const __m256d v_zero = _mm256_setzero_pd();
    const __m256d v_eb = _mm256_set1_pd(p.e_b);
    const __m256d v_cn = _mm256_set1_pd(c_n);
    const __m256d v_cn1 = _mm256_set1_pd(c_n1);
    const __m256d v_q = _mm256_set1_pd(q);
    const __m256d v_base = _mm256_set1_pd(base);
    const __m256d v_bound = _mm256_set1_pd(bound);
    const __m256d v_inf = _mm256_set1_pd(std::numeric_limits<double>::infinity());

    __m256d best = v_inf;
    __m256d best_idx = _mm256_set1_pd(-1.0);
    __m256d idx = _mm256_setr_pd(0, 1, 2, 3);
    const __m256d step = _mm256_set1_pd(4.0);
    __m256i in_region = _mm256_setzero_si256();
    __m256i nonpos = _mm256_setzero_si256();

    const std::size_t n = e_c.size();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d c = _mm256_loadu_pd(e_c.data() + i);
        const __m256d rest = _mm256_sub_pd(v_one, c);
        const __m256d lhs = _mm256_add_pd(_mm256_mul_pd(v_eb, c), _mm256_mul_pd(v_cn1, rest));
        const __m256d inside = _mm256_cmp_pd(lhs, v_bound, _CMP_LT_OQ);
        const __m256d t = _mm256_sub_pd(_mm256_sub_pd(v_base, _mm256_mul_pd(v_eb, c)), _mm256_mul_pd(v_cn, rest));
        const __m256d f = _mm256_sub_pd(_mm256_mul_pd(t, t), _mm256_mul_pd(_mm256_mul_pd(v_q, c), c));

        // Masks are all-ones (-1 as int64) in selected lanes.
        in_region = _mm256_sub_epi64(in_region, _mm256_castpd_si256(inside));
        const __m256d le = _mm256_and_pd(inside, _mm256_cmp_pd(f, v_zero, _CMP_LE_OQ));
        nonpos = _mm256_sub_epi64(nonpos, _mm256_castpd_si256(le));
        const __m256d better = _mm256_and_pd(inside, _mm256_cmp_pd(f, best, _CMP_LT_OQ));
        best = _mm256_blendv_pd(best, f, better);
        best_idx = _mm256_blendv_pd(best_idx, idx, better);
        idx = _mm256_add_pd(idx, step);
    }

    alignas(32) double lane_best[4];
    alignas(32) double lane_idx[4];
    alignas(32) std::uint64_t lane_in[4];
    alignas(32) std::uint64_t lane_np[4];
    _mm256_store_pd(lane_best, best);
    _mm256_store_pd(lane_idx, best_idx);
    _mm256_store_si256(reinterpret_cast<__m256i*>(lane_in), in_region);
    _mm256_store_si256(reinterpret_cast<__m256i*>(lane_np), nonpos);

    SliceResult r;
    r.min_f = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 4; ++k) {
        r.in_region += lane_in[k];
        r.nonpositive += lane_np[k];
        if (lane_idx[k] < 0)
            continue;
        const auto li = static_cast<std::size_t>(lane_idx[k]);
        if (lane_best[k] < r.min_f || (lane_best[k] == r.min_f && li < r.argmin)) {
            r.min_f = lane_best[k];
            r.argmin = li;
        }
    }
    // Tail uses the reference loop; its indices follow every vector index.
    const auto tail = scalar::f_slice(p, e_c.subspan(i));
    r.in_region += tail.in_region;
    r.nonpositive += tail.nonpositive;
    if (tail.in_region && tail.min_f < r.min_f) {
        r.min_f = tail.min_f;
        r.argmin = i + tail.argmin;
    }
    return r;
}

std::uint64_t count_mismatches(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    const std::size_t n = a.size() < b.size() ? a.size() : b.size();
    std::uint64_t diff = 0;
    std::size_t i = 0;
    for (; i + 32 <= n; i += 32) {
        const __m256i x = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a.data() + i));
        const __m256i y = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b.data() + i));
        const auto eq = static_cast<std::uint32_t>(_mm256_movemask_epi8(_mm256_cmpeq_epi8(x, y)));
        diff += 32 - std::popcount(eq);
    }
    return diff + scalar::count_mismatches(a.subspan(i, n - i), b.subspan(i, n - i));
}

}  // namespace qkd::kernels::avx2
