#include "qudit_qkd/qstates.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace qkd {

PairState PairState::make(Elem i, Elem j, std::uint8_t s) {
    if (i == j)
        throw UsageError("pair state needs distinct indices");
    if (s > 1)
        throw UsageError("sign bit must be 0 or 1");
    return PairState{std::min(i, j), std::max(i, j), s};
}

SparseKet SparseKet::basis(Elem index) {
    SparseKet k;
    k.terms_[0] = {index, 1};
    k.size_ = 1;
    return k;
}

SparseKet SparseKet::from_pair(const PairState& p) {
    const KetTerm t[2] = {{p.first, 1}, {p.second, static_cast<std::int8_t>(p.sign ? -1 : 1)}};
    return from_terms(t);
}

SparseKet SparseKet::from_terms(std::span<const KetTerm> terms) {
    if (terms.empty() || terms.size() > 2)
        throw UsageError("sparse ket must have 1 or 2 terms");
    if (terms.size() == 2 && terms[0].index == terms[1].index)
        throw UsageError("sparse ket indices must be distinct");
    SparseKet k;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (terms[i].sign != 1 && terms[i].sign != -1)
            throw UsageError("sparse ket sign must be +1 or -1");
        k.terms_[i] = terms[i];
    }
    k.size_ = terms.size();
    k.canonicalize();
    return k;
}

void SparseKet::canonicalize() {
    if (size_ == 2 && terms_[1].index < terms_[0].index)
        std::swap(terms_[0], terms_[1]);
    if (terms_[0].sign < 0) {
        for (std::size_t i = 0; i < size_; ++i)
            terms_[i].sign = static_cast<std::int8_t>(-terms_[i].sign);
    }
}

int SparseKet::sign_at(Elem index) const {
    for (std::size_t i = 0; i < size_; ++i) {
        if (terms_[i].index == index)
            return terms_[i].sign;
    }
    return 0;
}

std::vector<std::uint8_t> SparseKet::serialize() const {
    std::vector<std::uint8_t> out;
    out.reserve(3 * size_);
    for (const auto& t : terms()) {
        out.push_back(static_cast<std::uint8_t>(t.index >> 8));
        out.push_back(static_cast<std::uint8_t>(t.index & 0xFF));
        out.push_back(t.sign < 0 ? 1 : 0);
    }
    return out;
}

SparseKet SparseKet::deserialize(std::span<const std::uint8_t> bytes, unsigned order) {
    if (bytes.size() != 3 && bytes.size() != 6)
        throw UsageError("serialized ket must hold 1 or 2 terms");
    KetTerm t[2];
    const std::size_t n = bytes.size() / 3;
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned idx = (unsigned(bytes[3 * i]) << 8) | bytes[3 * i + 1];
        if (idx >= order)
            throw UsageError("ket index out of range");
        if (bytes[3 * i + 2] > 1)
            throw UsageError("ket sign byte must be 0 or 1");
        t[i] = {static_cast<Elem>(idx), static_cast<std::int8_t>(bytes[3 * i + 2] ? -1 : 1)};
    }
    auto k = from_terms(std::span<const KetTerm>(t, n));
    // The wire carries canonical kets only.
    if (!std::equal(k.terms().begin(), k.terms().end(), t))
        throw UsageError("serialized ket not in canonical form");
    return k;
}

std::string SparseKet::str() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < size_; ++i) {
        if (i)
            os << (terms_[i].sign > 0 ? " + " : " - ");
        os << '|' << terms_[i].index << '>';
    }
    return os.str();
}

DiagonalPhase DiagonalPhase::norm_phase(unsigned order) {
    std::bitset<256> m;
    for (unsigned b = 1; b < order; ++b)
        m.set(b);
    return DiagonalPhase(m);
}

DiagonalPhase DiagonalPhase::from_hex(std::string_view hex, unsigned order) {
    if (hex.starts_with("0x") || hex.starts_with("0X"))
        hex.remove_prefix(2);
    if (hex.empty())
        throw UsageError("empty phase mask");
    std::bitset<256> m;
    unsigned bit = 0;
    for (auto it = hex.rbegin(); it != hex.rend(); ++it, bit += 4) {
        const int c = std::tolower(static_cast<unsigned char>(*it));
        int v;
        if (c >= '0' && c <= '9')
            v = c - '0';
        else if (c >= 'a' && c <= 'f')
            v = c - 'a' + 10;
        else
            throw UsageError("bad hex digit in phase mask '" + std::string(hex) + "'");
        for (int k = 0; k < 4; ++k) {
            if ((v >> k) & 1) {
                if (bit + k >= order)
                    throw UsageError("phase mask '" + std::string(hex) + "' has bits beyond N");
                m.set(bit + k);
            }
        }
    }
    return DiagonalPhase(m);
}

std::string DiagonalPhase::hex(unsigned order) const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s;
    for (unsigned base = 0; base < order; base += 4) {
        int v = 0;
        for (unsigned k = 0; k < 4 && base + k < order; ++k)
            v |= mask_[base + k] << k;
        s.push_back(digits[v]);
    }
    while (s.size() > 1 && s.back() == '0')
        s.pop_back();
    std::reverse(s.begin(), s.end());
    return "0x" + s;
}

const char* outcome_name(Outcome o) {
    switch (o) {
    case Outcome::Plus: return "plus";
    case Outcome::Minus: return "minus";
    case Outcome::Outside: return "outside";
    }
    return "?";
}

SparseKet apply_L(const GaloisField& f, Elem lambda, Elem beta, const SparseKet& ket) {
    if (lambda == 0)
        throw DomainError("L_{lambda,beta} needs lambda != 0");
    KetTerm t[2];
    std::size_t n = 0;
    for (const auto& term : ket.terms())
        t[n++] = {f.add(f.mul(lambda, term.index), beta), term.sign};
    return SparseKet::from_terms(std::span<const KetTerm>(t, n));
}

SparseKet apply_L_inverse(const GaloisField& f, Elem lambda, Elem beta, const SparseKet& ket) {
    const Elem li = f.inv(lambda);
    return apply_L(f, li, f.mul(li, beta), ket);
}

SparseKet apply_error(const GaloisField& f, Elem shift, const DiagonalPhase& phase, const SparseKet& ket) {
    KetTerm t[2];
    std::size_t n = 0;
    for (const auto& term : ket.terms()) {
        const auto s = static_cast<std::int8_t>(phase(term.index) ? -term.sign : term.sign);
        t[n++] = {f.add(term.index, shift), s};
    }
    return SparseKet::from_terms(std::span<const KetTerm>(t, n));
}

BellIndex conjugate_bell(const GaloisField& f, Elem lambda, Elem beta, Elem a, unsigned l, Elem b, unsigned kappa) {
    if (lambda == 0)
        throw DomainError("conjugation needs lambda != 0");
    unsigned flip = 0;
    if (l) {
        const Elem lo = f.add(f.mul(lambda, b), beta);
        const Elem hi = f.add(f.mul(lambda, f.add(b, 1)), beta);
        flip = GaloisField::norm(lo) ^ GaloisField::norm(hi);
    }
    return {f.add(b, f.mul(f.inv(lambda), a)), static_cast<std::uint8_t>((kappa ^ flip) & 1u)};
}

BellIndex conjugate_bell(const GaloisField& f, Elem lambda, Elem beta, Elem a, const DiagonalPhase& phase, Elem b,
                         unsigned kappa) {
    if (lambda == 0)
        throw DomainError("conjugation needs lambda != 0");
    const Elem lo = f.add(f.mul(lambda, b), beta);
    const Elem hi = f.add(f.mul(lambda, f.add(b, 1)), beta);
    const unsigned flip = phase(lo) ^ phase(hi);
    return {f.add(b, f.mul(f.inv(lambda), a)), static_cast<std::uint8_t>((kappa ^ flip) & 1u)};
}

OutcomeQuarters probabilities(const SparseKet& ket, const PairState& basis) {
    const int lo = ket.sign_at(basis.first);
    const int hi = ket.sign_at(basis.second);
    // |<+-|psi>|^2 = (lo +- hi)^2 / (2 len); in quarters multiply by 4.
    const int scale = ket.size() == 1 ? 2 : 1;
    OutcomeQuarters q;
    q.plus = (lo + hi) * (lo + hi) * scale;
    q.minus = (lo - hi) * (lo - hi) * scale;
    q.outside = 4 - q.plus - q.minus;
    return q;
}

Outcome measure(const SparseKet& ket, const PairState& basis, Stream& rng) {
    const auto q = probabilities(ket, basis);
    const auto draw = static_cast<int>(uniform_below(rng, 4));
    if (draw < q.plus)
        return Outcome::Plus;
    if (draw < q.plus + q.minus)
        return Outcome::Minus;
    return Outcome::Outside;
}

}  // namespace qkd
