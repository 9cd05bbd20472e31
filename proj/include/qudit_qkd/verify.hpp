#pragma once

// Independent brute-force checks: field axioms against carry-less polynomial
// multiplication, and the Bell-index conjugation rule against explicit
// 2N x 2N integer matrices built from the field tables.

#include "qudit_qkd/field.hpp"
#include "qudit_qkd/qstates.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qkd {

struct CheckTally {
    std::uint64_t total = 0;
    std::uint64_t passed = 0;
    std::vector<std::string> failures;  // first few, human readable

    bool ok() const { return total == passed; }
    void record(bool good, const std::string& what);
};

/// Associativity, commutativity, distributivity, identities, inverses and
/// agreement of mul with poly_mulmod over every element (pair, triple).
CheckTally verify_field_axioms(const GaloisField& f);

/// Dense integer matrix over the 2N-dimensional space |nu, c>, nu in {0, 1},
/// indexed nu * N + c.
using IntMatrix = std::vector<std::vector<int>>;
using IntVector = std::vector<int>;

/// I (x) (L^{-1} X_a D L) with D = diag((-1)^phase(c)).
IntMatrix conjugation_matrix(const GaloisField& f, Elem lambda, Elem beta, Elem a, const DiagonalPhase& phase);

/// Unnormalized |Psi_{b,kappa}> = |0,b> + (-1)^kappa |1,b+1>.
IntVector bell_vector(const GaloisField& f, Elem b, unsigned kappa);

/// Matrix image of |Psi_{b,kappa}> compared with +-|Psi_{result}>.
bool conjugation_matches(const GaloisField& f, Elem lambda, Elem beta, Elem a, unsigned l, Elem b, unsigned kappa);

/// Every (lambda != 0, beta, a, l, b, kappa) with b over all of GF(N):
/// 3*4*4*2*4*2 = 768 tuples for n = 2.
CheckTally verify_conjugation_exhaustive(const GaloisField& f);

/// Uniformly random tuples.
CheckTally verify_conjugation_random(const GaloisField& f, std::uint64_t count, std::uint64_t seed);

}  // namespace qkd
