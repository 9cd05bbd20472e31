#pragma once

// Exact arithmetic in GF(2^n), 2 <= n <= 8, polynomial basis.

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qkd {

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

using Elem = std::uint16_t;

inline constexpr int kMinDegree = 2;
inline constexpr int kMaxDegree = 8;

/// True iff the polynomial `mask` (bit i = coefficient of x^i) is irreducible
/// over GF(2). Exhaustive trial division by every polynomial of degree
/// 1..deg/2.
bool is_irreducible(unsigned mask);

/// Smallest irreducible mask of degree n.
unsigned default_modulus(int n);

/// Carry-less product of two polynomials reduced by `modulus`; used both by
/// the table builder and as an independent oracle in tests.
unsigned poly_mulmod(unsigned x, unsigned y, unsigned modulus);

/// GF(2^n) with full multiplication and inverse tables. Immutable after
/// construction.
class GaloisField {
public:
    explicit GaloisField(int n, std::optional<unsigned> modulus = std::nullopt);

    int degree() const { return n_; }
    unsigned order() const { return order_; }
    unsigned modulus() const { return modulus_; }

    Elem add(Elem x, Elem y) const { return static_cast<Elem>(x ^ y); }
    Elem mul(Elem x, Elem y) const { return mul_[x * order_ + y]; }
    Elem inv(Elem x) const;
    Elem pow(Elem x, unsigned e) const;
    Elem div(Elem x, Elem y) const { return mul(x, inv(y)); }

    /// N(b) = b^(N-1): 0 at 0, 1 elsewhere.
    static unsigned norm(Elem b) { return b != 0 ? 1u : 0u; }

    bool contains(unsigned v) const { return v < order_; }
    std::string modulus_hex() const;

    bool operator==(const GaloisField& o) const { return n_ == o.n_ && modulus_ == o.modulus_; }

private:
    int n_;
    unsigned order_;
    unsigned modulus_;
    std::vector<Elem> mul_;
    std::vector<Elem> inv_;
};

using FieldPtr = std::shared_ptr<const GaloisField>;

FieldPtr make_field(int n, std::optional<unsigned> modulus = std::nullopt);

/// Checked value type: an element tied to its field. Mixing fields throws.
class FieldElement {
public:
    FieldElement(FieldPtr field, unsigned value);

    Elem value() const { return value_; }
    const FieldPtr& field() const { return field_; }

    FieldElement operator+(const FieldElement& o) const;
    FieldElement operator*(const FieldElement& o) const;
    FieldElement inv() const;
    FieldElement pow(unsigned e) const;
    unsigned norm() const { return GaloisField::norm(value_); }

    bool operator==(const FieldElement& o) const { return value_ == o.value_ && *field_ == *o.field_; }

private:
    void check_same(const FieldElement& o) const;

    FieldPtr field_;
    Elem value_;
};

}  // namespace qkd
