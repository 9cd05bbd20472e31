#include "qudit_qkd/field.hpp"

#include <bit>
#include <cstdio>

namespace qkd {

namespace {

int poly_degree(unsigned p) { return p == 0 ? -1 : std::bit_width(p) - 1; }

unsigned poly_mod(unsigned a, unsigned m) {
    const int dm = poly_degree(m);
    for (int d = poly_degree(a); d >= dm; d = poly_degree(a))
        a ^= m << (d - dm);
    return a;
}

}  // namespace

bool is_irreducible(unsigned mask) {
    const int deg = poly_degree(mask);
    if (deg < 1)
        return false;
    for (unsigned d = 2; poly_degree(d) <= deg / 2; ++d) {
        if (poly_mod(mask, d) == 0)
            return false;
    }
    return true;
}

unsigned default_modulus(int n) {
    if (n < kMinDegree || n > kMaxDegree)
        throw UsageError("field degree must be in [2, 8], got " + std::to_string(n));
    for (unsigned m = 1u << n; m < (2u << n); ++m) {
        if (is_irreducible(m))
            return m;
    }
    throw DomainError("no irreducible polynomial found");  // unreachable
}

unsigned poly_mulmod(unsigned x, unsigned y, unsigned modulus) {
    unsigned acc = 0;
    for (int i = 0; y >> i; ++i) {
        if ((y >> i) & 1u)
            acc ^= x << i;
    }
    return poly_mod(acc, modulus);
}

GaloisField::GaloisField(int n, std::optional<unsigned> modulus) : n_(n), order_(1u << n) {
    if (n < kMinDegree || n > kMaxDegree)
        throw UsageError("field degree must be in [2, 8], got " + std::to_string(n));
    modulus_ = modulus.value_or(default_modulus(n));
    if (poly_degree(modulus_) != n)
        throw UsageError("modulus " + modulus_hex() + " does not have degree " + std::to_string(n));
    if (!is_irreducible(modulus_))
        throw UsageError("modulus " + modulus_hex() + " is reducible");

    mul_.resize(static_cast<std::size_t>(order_) * order_);
    inv_.assign(order_, 0);
    for (unsigned x = 0; x < order_; ++x) {
        for (unsigned y = 0; y < order_; ++y) {
            const auto p = static_cast<Elem>(poly_mulmod(x, y, modulus_));
            mul_[x * order_ + y] = p;
            if (p == 1)
                inv_[x] = static_cast<Elem>(y);
        }
    }
}

Elem GaloisField::inv(Elem x) const {
    if (x == 0)
        throw DomainError("inverse of zero");
    return inv_[x];
}

Elem GaloisField::pow(Elem x, unsigned e) const {
    Elem result = 1;
    Elem base = x;
    while (e) {
        if (e & 1u)
            result = mul(result, base);
        base = mul(base, base);
        e >>= 1;
    }
    return result;
}

std::string GaloisField::modulus_hex() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%X", modulus_);
    return buf;
}

FieldPtr make_field(int n, std::optional<unsigned> modulus) {
    return std::make_shared<const GaloisField>(n, modulus);
}

FieldElement::FieldElement(FieldPtr field, unsigned value) : field_(std::move(field)) {
    if (!field_)
        throw UsageError("null field");
    if (!field_->contains(value))
        throw UsageError("value " + std::to_string(value) + " outside GF(" + std::to_string(field_->order()) + ")");
    value_ = static_cast<Elem>(value);
}

void FieldElement::check_same(const FieldElement& o) const {
    if (!(*field_ == *o.field_))
        throw UsageError("field elements belong to different fields");
}

FieldElement FieldElement::operator+(const FieldElement& o) const {
    check_same(o);
    return {field_, field_->add(value_, o.value_)};
}

FieldElement FieldElement::operator*(const FieldElement& o) const {
    check_same(o);
    return {field_, field_->mul(value_, o.value_)};
}

FieldElement FieldElement::inv() const { return {field_, field_->inv(value_)}; }

FieldElement FieldElement::pow(unsigned e) const { return {field_, field_->pow(value_, e)}; }

}  // namespace qkd
