#include "qudit_qkd/distill.hpp"

#include "qudit_qkd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace qkd {

void DistillParams::validate() const {
    if (r == 0 || r % 2 == 0)
        throw UsageError("r: block size must be an odd integer >= 1");
    if (!(z_budget > 0 && z_budget < css_target))
        throw UsageError("z_budget: must satisfy 0 < z_budget < css_target");
    if (!(margin > 0))
        throw UsageError("margin: must be positive");
    if (r_max % 2 == 0)
        throw UsageError("r_max: must be odd");
}

std::vector<std::uint8_t> LabeledKey::bob() const {
    std::vector<std::uint8_t> b(alice.size());
    for (std::size_t i = 0; i < b.size(); ++i)
        b[i] = alice[i] ^ z[i];
    return b;
}

LabeledKey LabeledKey::generate(const ErrorMatrix& m, std::size_t length, Stream& rng) {
    LabeledKey key;
    key.alice.resize(length);
    key.x.resize(length);
    key.z.resize(length);
    const double c_i = m.p_i;
    const double c_x = c_i + m.p_x;
    const double c_y = c_x + m.p_y;
    for (std::size_t i = 0; i < length; ++i) {
        key.alice[i] = static_cast<std::uint8_t>(uniform_below(rng, 2));
        const double u = uniform_unit(rng);
        if (u < c_i) {
        } else if (u < c_x) {
            key.x[i] = 1;
        } else if (u < c_y) {
            key.x[i] = 1;
            key.z[i] = 1;
        } else {
            key.z[i] = 1;
        }
    }
    return key;
}

LabeledKey LabeledKey::from_keys(std::span<const std::uint8_t> alice, std::span<const std::uint8_t> bob) {
    if (alice.size() != bob.size())
        throw UsageError("keys differ in length");
    LabeledKey key;
    key.alice.assign(alice.begin(), alice.end());
    key.x.assign(alice.size(), 0);
    key.z.resize(alice.size());
    for (std::size_t i = 0; i < alice.size(); ++i)
        key.z[i] = alice[i] ^ bob[i];
    return key;
}

namespace {

// x^(2^k) by k squarings; exponent 1 when k = 0.
double pow2k(double x, unsigned k) {
    for (unsigned i = 0; i < k; ++i)
        x *= x;
    return x;
}

}  // namespace

RecursionTerms recursion_terms(const ErrorMatrix& m, unsigned k) {
    const double s1 = m.p_i + m.p_x;
    const double s2 = m.p_y + m.p_z;
    const double scale = std::max(s1, s2);
    if (!(scale > 0))
        throw DomainError("ep_recursion: degenerate matrix (A + C = 0)");
    return {pow2k(s1 / scale, k), pow2k((m.p_i - m.p_x) / scale, k), pow2k(s2 / scale, k),
            pow2k((m.p_y - m.p_z) / scale, k)};
}

ErrorMatrix ep_recursion(const ErrorMatrix& m, unsigned k) {
    if (k == 0)
        return m;
    const auto t = recursion_terms(m, k);
    const double norm = 2 * (t.a + t.c);
    if (!(norm > 0))
        throw DomainError("ep_recursion: degenerate matrix (A + C = 0)");
    ErrorMatrix out;
    out.p_i = (t.a + t.b) / norm;
    out.p_z = (t.c + t.d) / norm;
    out.p_x = (t.a - t.b) / norm;
    out.p_y = (t.c - t.d) / norm;
    return out;
}

double binomial_upper_tail(unsigned r, double p) {
    if (p <= 0)
        return 0;
    if (p >= 1)
        return 1;
    const double lp = std::log(p);
    const double lq = std::log1p(-p);
    const double lr = std::lgamma(r + 1.0);
    double sum = 0;
    for (unsigned j = r / 2 + 1; j <= r; ++j)
        sum += std::exp(lr - std::lgamma(j + 1.0) - std::lgamma(r - j + 1.0) + j * lp + (r - j) * lq);
    return std::min(1.0, sum);
}

BlockFailure majority_stage(const ErrorMatrix& m, unsigned r) {
    if (r == 0 || r % 2 == 0)
        throw UsageError("majority_stage: r must be odd");
    const double px = m.p_x + m.p_y;
    const double pz = m.p_z + m.p_y;
    BlockFailure f;
    f.x_fail = binomial_upper_tail(r, px);
    const double base = 1 - 2 * pz;
    // (1 - (1 - 2p)^r) / 2 without cancellation for small p.
    f.z_fail = base > 0 ? -std::expm1(r * std::log1p(-2 * pz)) / 2 : (1 - std::pow(base, r)) / 2;
    return f;
}

bool check_secure_condition(const ErrorMatrix& m) {
    const double lhs = (m.p_i - m.p_x) * (m.p_i - m.p_x);
    return lhs > (m.p_i + m.p_x) * (m.p_y + m.p_z);
}

Selection select_params(const ErrorMatrix& m, const DistillParams& budget) {
    if (!m.valid(1e-9))
        throw UsageError("select_params: error matrix entries must be nonnegative and sum to 1");
    Selection sel;
    sel.params = budget;
    if (m.p_x + m.p_y == 0 && m.p_y + m.p_z == 0) {
        sel.feasible = true;
        sel.within_budget = true;
        sel.params.k = 0;
        sel.params.r = 1;
        sel.after_parity = m;
        sel.trace.push_back({0, m, 1, std::numeric_limits<double>::infinity(),
                             std::numeric_limits<double>::infinity(), true});
        return sel;
    }
    for (unsigned k = 0; k <= budget.k_max; ++k) {
        RoundMargins rm;
        rm.k = k;
        rm.matrix = ep_recursion(m, k);
        const auto t = recursion_terms(m, k);
        const double zsum = rm.matrix.p_y + rm.matrix.p_z;
        double r = budget.r_max;
        if (zsum > 0)
            r = std::min<double>(budget.r_max, std::floor(budget.z_budget / zsum));
        auto ri = static_cast<unsigned>(r);
        if (ri % 2 == 0)
            ri = ri == 0 ? 0 : ri - 1;
        rm.r = ri;
        const double gap = 0.5 - rm.matrix.p_x - rm.matrix.p_y;
        rm.hoeffding = 2.0 * ri * gap * gap;
        const double css_den = 400 * t.c * (t.a + t.c);
        const double bd = (t.b + t.d) * (t.b + t.d);
        rm.css_ratio = css_den > 0 ? bd / css_den : std::numeric_limits<double>::infinity();
        rm.feasible = ri >= 1 && gap > 0 && rm.hoeffding >= budget.margin && rm.css_ratio >= budget.margin;
        sel.trace.push_back(rm);
        if (rm.feasible) {
            sel.feasible = true;
            sel.params.k = k;
            sel.params.r = ri;
            sel.after_parity = rm.matrix;
            sel.residual = majority_stage(rm.matrix, ri);
            sel.within_budget = sel.residual.x_fail + sel.residual.z_fail <= budget.css_target;
            return sel;
        }
    }
    return sel;
}

std::uint64_t parity_round_seed(std::uint64_t master, unsigned round) {
    return derive_seed(master, StreamTag::Distill, round);
}

std::uint64_t block_seed(std::uint64_t master) { return derive_seed(master, StreamTag::Distill, 0xB10C); }

std::vector<std::uint32_t> seeded_permutation(std::size_t length, std::uint64_t seed) {
    std::vector<std::uint32_t> perm(length);
    std::iota(perm.begin(), perm.end(), 0u);
    Stream s(seed);
    for (std::size_t i = length; i > 1; --i)
        std::swap(perm[i - 1], perm[uniform_below(s, i)]);
    return perm;
}

std::vector<std::uint8_t> pair_parities(std::span<const std::uint8_t> bits, std::span<const std::uint32_t> perm) {
    std::vector<std::uint8_t> out(perm.size() / 2);
    for (std::size_t t = 0; t < out.size(); ++t)
        out[t] = bits[perm[2 * t]] ^ bits[perm[2 * t + 1]];
    return out;
}

std::vector<std::uint8_t> keep_agreeing(std::span<const std::uint8_t> bits, std::span<const std::uint32_t> perm,
                                        std::span<const std::uint8_t> mine, std::span<const std::uint8_t> theirs) {
    if (mine.size() != theirs.size() || mine.size() != perm.size() / 2)
        throw UsageError("parity lists do not match the pairing");
    std::vector<std::uint8_t> out;
    out.reserve(mine.size());
    for (std::size_t t = 0; t < mine.size(); ++t) {
        if (mine[t] == theirs[t])
            out.push_back(bits[perm[2 * t]]);
    }
    return out;
}

std::vector<std::uint8_t> block_parities(std::span<const std::uint8_t> bits, std::span<const std::uint32_t> perm,
                                         unsigned r) {
    std::vector<std::uint8_t> out(perm.size() / r);
    for (std::size_t b = 0; b < out.size(); ++b) {
        std::uint8_t p = 0;
        for (unsigned j = 0; j < r; ++j)
            p ^= bits[perm[b * r + j]];
        out[b] = p;
    }
    return out;
}

LabelTally tally_labels(std::span<const std::uint8_t> x, std::span<const std::uint8_t> z) {
    LabelTally t{};
    for (std::size_t i = 0; i < x.size(); ++i) {
        // I, X, Y, Z
        const int idx = x[i] ? (z[i] ? 2 : 1) : (z[i] ? 3 : 0);
        ++t[idx];
    }
    return t;
}

DistillOutcome simulate_distillation(const LabeledKey& key, const DistillParams& params, std::uint64_t seed) {
    params.validate();
    const double needed = std::ldexp(1.0, static_cast<int>(params.k)) * params.r;
    if (static_cast<double>(key.size()) < needed)
        throw UsageError("insufficient key length: " + std::to_string(key.size()) + " < required minimum " +
                         std::to_string(static_cast<std::uint64_t>(needed)));

    DistillOutcome out;
    std::vector<std::uint8_t> alice = key.alice;
    std::vector<std::uint8_t> bob = key.bob();
    std::vector<std::uint8_t> x = key.x;
    std::vector<std::uint8_t> z = key.z;
    out.length_after_round.push_back(alice.size());

    for (unsigned round = 0; round < params.k; ++round) {
        const auto perm = seeded_permutation(alice.size(), parity_round_seed(seed, round));
        const auto pa = pair_parities(alice, perm);
        const auto pb = pair_parities(bob, perm);
        std::vector<std::uint8_t> nx, nz;
        nx.reserve(pa.size());
        nz.reserve(pa.size());
        for (std::size_t t = 0; t < pa.size(); ++t) {
            if (pa[t] != pb[t])
                continue;
            const auto i = perm[2 * t];
            const auto j = perm[2 * t + 1];
            nx.push_back(x[i] ^ x[j]);
            nz.push_back(z[i]);
        }
        alice = keep_agreeing(alice, perm, pa, pb);
        bob = keep_agreeing(bob, perm, pb, pa);
        x = std::move(nx);
        z = std::move(nz);
        out.length_after_round.push_back(alice.size());
    }
    out.after_parity = tally_labels(x, z);

    if (params.r > 1) {
        const auto perm = seeded_permutation(alice.size(), block_seed(seed));
        alice = block_parities(alice, perm, params.r);
        bob = block_parities(bob, perm, params.r);
        std::vector<std::uint8_t> nx(alice.size()), nz(alice.size());
        for (std::size_t b = 0; b < alice.size(); ++b) {
            unsigned ones = 0;
            std::uint8_t zp = 0;
            for (unsigned j = 0; j < params.r; ++j) {
                const auto pos = perm[b * params.r + j];
                ones += x[pos];
                zp ^= z[pos];
            }
            nx[b] = ones > params.r / 2;
            nz[b] = zp;
        }
        x = std::move(nx);
        z = std::move(nz);
    }
    out.final_labels = tally_labels(x, z);
    out.disagreements = kernels::count_mismatches(alice, bob);
    out.disagreement_rate = alice.empty() ? 0.0 : static_cast<double>(out.disagreements) / alice.size();
    out.alice = std::move(alice);
    out.bob = std::move(bob);
    return out;
}

std::vector<std::uint8_t> placeholder_hash(std::span<const std::uint8_t> bits, double fraction, std::uint64_t seed) {
    if (!(fraction > 0 && fraction <= 1))
        throw UsageError("hash output fraction must lie in (0, 1]");
    const std::size_t n = bits.size();
    const auto m = static_cast<std::size_t>(std::floor(fraction * n));
    if (m == 0)
        return {};
    Stream s(derive_seed(seed, StreamTag::Hash, 0));
    // T[i][j] = diag[i - j + n - 1]
    std::vector<std::uint8_t> diag(n + m - 1);
    for (auto& d : diag)
        d = static_cast<std::uint8_t>(uniform_below(s, 2));
    std::vector<std::uint8_t> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::uint8_t acc = 0;
        for (std::size_t j = 0; j < n; ++j)
            acc ^= diag[i + n - 1 - j] & bits[j];
        out[i] = acc;
    }
    return out;
}

}  // namespace qkd
