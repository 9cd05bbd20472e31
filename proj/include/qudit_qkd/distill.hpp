#pragma once

// Two-way post-processing: k rounds of parity comparison (advantage
// distillation) followed by r-bit parity blocks, the closed-form recursion
// for the error matrix, parameter selection and a bit-level simulation on
// Pauli-labelled keys.

#include "qudit_qkd/analysis.hpp"
#include "qudit_qkd/rng.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qkd {

struct DistillParams {
    unsigned k = 0;
    /// Odd block size.
    unsigned r = 1;
    /// Residual quantum error the final (abstract) CSS stage can absorb.
    double css_target = 0.01;
    /// Share of css_target reserved for Z-type errors after the block stage.
    double z_budget = 0.005;
    /// Numeric stand-in for "much greater than" in both feasibility tests.
    double margin = 10;
    unsigned k_max = 30;
    unsigned r_max = 99999;

    void validate() const;
};

/// Per position: Alice's bit and the Pauli label (x, z). Bob's bit is
/// alice ^ z.
struct LabeledKey {
    std::vector<std::uint8_t> alice;
    std::vector<std::uint8_t> x;
    std::vector<std::uint8_t> z;

    std::size_t size() const { return alice.size(); }
    std::vector<std::uint8_t> bob() const;

    /// i.i.d. labels drawn from the matrix, uniform Alice bits.
    static LabeledKey generate(const ErrorMatrix& m, std::size_t length, Stream& rng);
    /// Labels from a pair of raw keys; x is unobservable and set to 0.
    static LabeledKey from_keys(std::span<const std::uint8_t> alice, std::span<const std::uint8_t> bob);
};

/// Normalized A, B, C, D of the k-round recursion. All four are divided by
/// max(p_I + p_x, p_y + p_z)^(2^k) so large k does not underflow; every
/// quantity built from them is homogeneous.
struct RecursionTerms {
    double a = 0, b = 0, c = 0, d = 0;
};

RecursionTerms recursion_terms(const ErrorMatrix& m, unsigned k);

/// Error matrix after k parity rounds:
/// (p_I, p_z, p_x, p_y) = ((A+B), (C+D), (A-B), (C-D)) / (2(A+C)).
ErrorMatrix ep_recursion(const ErrorMatrix& m, unsigned k);

struct BlockFailure {
    /// Majority of r X-components wrong.
    double x_fail = 0;
    /// Parity of r Z-components wrong.
    double z_fail = 0;
};

BlockFailure majority_stage(const ErrorMatrix& m, unsigned r);

/// P(Binomial(r, p) > r/2) by summing every term in log space.
double binomial_upper_tail(unsigned r, double p);

/// (p_I - p_x)^2 > (p_I + p_x)(p_y + p_z), strict.
bool check_secure_condition(const ErrorMatrix& m);

struct RoundMargins {
    unsigned k = 0;
    ErrorMatrix matrix;
    unsigned r = 0;  // 0 when the Z budget cannot fit a single bit
    double hoeffding = 0;  // 2r(1/2 - p_x - p_y)^2
    double css_ratio = 0;  // (B+D)^2 / (400 C (A+C)); +inf when C = 0
    bool feasible = false;
};

struct Selection {
    bool feasible = false;
    DistillParams params;
    ErrorMatrix after_parity;
    BlockFailure residual;
    /// residual.x_fail + residual.z_fail <= css_target
    bool within_budget = false;
    std::vector<RoundMargins> trace;
};

/// Smallest k whose largest odd r <= z_budget / (p_y + p_z) passes both
/// margin tests; infeasible if none up to k_max.
Selection select_params(const ErrorMatrix& m, const DistillParams& budget);

// Shared single-party steps. Both parties derive identical permutations from
// the announced seeds, so these are used verbatim by the networked roles.

std::uint64_t parity_round_seed(std::uint64_t master, unsigned round);
std::uint64_t block_seed(std::uint64_t master);

std::vector<std::uint32_t> seeded_permutation(std::size_t length, std::uint64_t seed);
/// Parity of positions (perm[2t], perm[2t+1]) for each full pair t.
std::vector<std::uint8_t> pair_parities(std::span<const std::uint8_t> bits, std::span<const std::uint32_t> perm);
/// Keeps bits[perm[2t]] for every pair whose two parities agree.
std::vector<std::uint8_t> keep_agreeing(std::span<const std::uint8_t> bits, std::span<const std::uint32_t> perm,
                                        std::span<const std::uint8_t> mine, std::span<const std::uint8_t> theirs);
/// Parity of each full block of r consecutive positions in permutation order.
std::vector<std::uint8_t> block_parities(std::span<const std::uint8_t> bits, std::span<const std::uint32_t> perm,
                                         unsigned r);

/// Labels tallied as counts of I, X, Y, Z.
using LabelTally = std::array<std::uint64_t, 4>;
LabelTally tally_labels(std::span<const std::uint8_t> x, std::span<const std::uint8_t> z);

struct DistillOutcome {
    std::vector<std::uint8_t> alice;
    std::vector<std::uint8_t> bob;
    std::vector<std::size_t> length_after_round;  // index 0 = input length
    LabelTally after_parity{};
    LabelTally final_labels{};
    std::uint64_t disagreements = 0;
    double disagreement_rate = 0;
};

/// k parity rounds then r-blocks, on the labels. Throws UsageError if the key
/// is shorter than 2^k * r.
DistillOutcome simulate_distillation(const LabeledKey& key, const DistillParams& params, std::uint64_t seed);

/// Non-cryptographic placeholder for the final CSS stage: a seeded random
/// binary Toeplitz matrix compressing the key to floor(fraction * length) bits.
std::vector<std::uint8_t> placeholder_hash(std::span<const std::uint8_t> bits, double fraction, std::uint64_t seed);

}  // namespace qkd
