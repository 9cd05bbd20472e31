#include "doctest.h"
#include "gen.hpp"

#include "qudit_qkd/kernels.hpp"

#include <cstring>

using namespace qkd;
namespace k = qkd::kernels;

namespace {

bool same(const k::SliceResult& a, const k::SliceResult& b) {
    return a.in_region == b.in_region && a.nonpositive == b.nonpositive && a.argmin == b.argmin &&
           std::memcmp(&a.min_f, &b.min_f, sizeof(double)) == 0;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("avx2 slice kernel is bit-identical to the scalar reference") {
    if (k::detected_isa() != k::Isa::Avx2) {
        MESSAGE("AVX2 not available; equivalence test skipped");
        return;
    }
    Stream s = gen::stream(71);
    for (int it = 0; it < 3000; ++it) {
        const std::size_t len = uniform_below(s, 67);
        std::vector<double> ec(len);
        for (double& x : ec)
            x = uniform_below(s, 4) == 0 ? static_cast<double>(uniform_below(s, 11)) / 10 : uniform_unit(s);
        k::SliceParams p;
        p.e_b = uniform_below(s, 5) == 0 ? 0.5 : uniform_unit(s) * 0.6;
        p.e_11 = uniform_below(s, 2) ? 0 : uniform_unit(s) * 0.1;
        p.order = static_cast<double>(1u << gen::degree(s));
        const auto a = k::scalar::f_slice(p, ec);
        const auto b = k::avx2::f_slice(p, ec);
        CHECK_MESSAGE(same(a, b), "len=" << len << " e_b=" << p.e_b);
    }
}

TEST_CASE("avx2 mismatch counter equals the scalar reference") {
    if (k::detected_isa() != k::Isa::Avx2) {
        MESSAGE("AVX2 not available; equivalence test skipped");
        return;
    }
    Stream s = gen::stream(72);
    for (int it = 0; it < 2000; ++it) {
        const std::size_t len = uniform_below(s, 300);
        const auto a = gen::bits(s, len);
        auto b = a;
        for (auto& x : b)
            if (uniform_below(s, 5) == 0)
                x ^= 1;
        CHECK(k::scalar::count_mismatches(a, b) == k::avx2::count_mismatches(a, b));
    }
}

TEST_CASE("scalar kernels against direct loops") {
    const std::vector<std::uint8_t> a = {0, 1, 1, 0, 1}, b = {1, 1, 0, 0, 1};
    CHECK(k::scalar::count_mismatches(a, b) == 2);
    const std::vector<double> ec = {1.0, 0.9, 0.5};
    k::SliceParams p;
    p.e_b = 0.1;
    const auto r = k::scalar::f_slice(p, ec);
    // region lhs: 0.1, 0.09 + 0.15 = 0.24, 0.05 + 0.75
    CHECK(r.in_region == 2);
    CHECK(r.nonpositive == 0);
    const double f0 = 0.9 * 0.9 - 0.09, f1 = std::pow(1 - 0.09 - 4 * 0.1 / 2, 2) - 0.09 * 0.81;
    CHECK(r.min_f == doctest::Approx(std::min(f0, f1)));
    CHECK(r.argmin == (f0 <= f1 ? 0u : 1u));
    const auto empty = k::scalar::f_slice(p, std::span<const double>{});
    CHECK(empty.in_region == 0);
    CHECK(empty.argmin == static_cast<std::size_t>(-1));
}

TEST_CASE("dispatch honours the override") {
    const k::Isa before = k::active_isa();
    k::force_isa(k::Isa::Scalar);
    CHECK(k::active_isa() == k::Isa::Scalar);
    k::force_isa(k::Isa::Avx2);
    CHECK(k::active_isa() == k::detected_isa());
    k::force_isa(before);
    CHECK(std::string(k::isa_name(k::Isa::Scalar)) == "scalar");
}

}
