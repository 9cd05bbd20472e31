#pragma once

// Sign-exact algebra of the transmitted states. Every reachable amplitude is
// +-1/sqrt(2) or +-1 up to a global phase, so kets are stored as index/sign
// lists and all measurement probabilities are integer multiples of 1/4.

#include "qudit_qkd/field.hpp"
#include "qudit_qkd/rational.hpp"
#include "qudit_qkd/rng.hpp"

#include <array>
#include <bitset>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qkd {

/// Unordered pair {first, second} of distinct elements plus the sign bit s of
/// (|first> + (-1)^s |second>)/sqrt2. Canonical: first < second.
struct PairState {
    Elem first = 0;
    Elem second = 1;
    std::uint8_t sign = 0;

    static PairState make(Elem i, Elem j, std::uint8_t s);
    bool same_pair(const PairState& o) const { return first == o.first && second == o.second; }
    bool contains(Elem x) const { return x == first || x == second; }
};

struct KetTerm {
    Elem index = 0;
    std::int8_t sign = 1;

    bool operator==(const KetTerm&) const = default;
};

/// Equal-weight superposition of one or two basis kets with +-1 amplitudes.
/// Canonical form: indices ascending, first sign +1.
class SparseKet {
public:
    SparseKet() = default;
    static SparseKet basis(Elem index);
    static SparseKet from_pair(const PairState& p);
    /// Builds and canonicalizes; throws UsageError on duplicate indices or
    /// size outside [1, 2].
    static SparseKet from_terms(std::span<const KetTerm> terms);

    std::size_t size() const { return size_; }
    std::span<const KetTerm> terms() const { return {terms_.data(), size_}; }
    /// Amplitude sign at `index` (0 if outside the support).
    int sign_at(Elem index) const;

    /// Wire form: per term a big-endian u16 index then one sign byte
    /// (0x00 for +, 0x01 for -).
    std::vector<std::uint8_t> serialize() const;
    static SparseKet deserialize(std::span<const std::uint8_t> bytes, unsigned order);

    std::string str() const;

    bool operator==(const SparseKet&) const = default;

private:
    void canonicalize();

    std::array<KetTerm, 2> terms_{};
    std::size_t size_ = 0;
};

struct BellIndex {
    Elem a = 0;
    std::uint8_t l = 0;

    bool operator==(const BellIndex&) const = default;
};

/// |b> -> (-1)^{f(b)} |b> for f: GF(N) -> {0,1} stored as an N-bit mask.
class DiagonalPhase {
public:
    DiagonalPhase() = default;
    explicit DiagonalPhase(std::bitset<256> mask) : mask_(mask) {}

    static DiagonalPhase zero() { return {}; }
    /// Z of the norm map: f(b) = N(b).
    static DiagonalPhase norm_phase(unsigned order);
    /// Parses an N-bit hex mask, bit b = f(b). Throws if bits >= N are set.
    static DiagonalPhase from_hex(std::string_view hex, unsigned order);

    unsigned operator()(Elem b) const { return mask_[b] ? 1u : 0u; }
    const std::bitset<256>& mask() const { return mask_; }
    std::string hex(unsigned order) const;

    bool operator==(const DiagonalPhase&) const = default;

private:
    std::bitset<256> mask_;
};

enum class Outcome : std::uint8_t { Plus = 0, Minus = 1, Outside = 2 };

const char* outcome_name(Outcome o);

/// Born-rule probabilities in units of 1/4; plus + minus + outside == 4.
struct OutcomeQuarters {
    int plus = 0;
    int minus = 0;
    int outside = 0;

    Rational plus_probability() const { return Rational(plus, 4); }
    Rational minus_probability() const { return Rational(minus, 4); }
    Rational outside_probability() const { return Rational(outside, 4); }
};

/// L_{lambda,beta}|a> = |lambda a + beta>.
SparseKet apply_L(const GaloisField& f, Elem lambda, Elem beta, const SparseKet& ket);
SparseKet apply_L_inverse(const GaloisField& f, Elem lambda, Elem beta, const SparseKet& ket);

/// X_a composed after the diagonal phase: |b> -> (-1)^{phase(b)} |b + a>.
SparseKet apply_error(const GaloisField& f, Elem shift, const DiagonalPhase& phase, const SparseKet& ket);

/// Image of |Psi_{b,kappa}> under (I (x) L^{-1} X_a Z^l L), up to global phase.
BellIndex conjugate_bell(const GaloisField& f, Elem lambda, Elem beta, Elem a, unsigned l, Elem b, unsigned kappa);

/// Same with Z^l replaced by an arbitrary diagonal phase: the kappa flip is
/// phase(lambda b + beta) + phase(lambda (b+1) + beta).
BellIndex conjugate_bell(const GaloisField& f, Elem lambda, Elem beta, Elem a, const DiagonalPhase& phase, Elem b,
                         unsigned kappa);

/// Projective measurement {P+, P-, I - P+ - P-} for the pair {i', j'}, with
/// |+-> = (|i'> +- |j'>)/sqrt2 in canonical (ascending) order.
OutcomeQuarters probabilities(const SparseKet& ket, const PairState& basis);
Outcome measure(const SparseKet& ket, const PairState& basis, Stream& rng);

}  // namespace qkd
