#include "qudit_qkd/verify.hpp"

#include "qudit_qkd/rng.hpp"

#include <sstream>

namespace qkd {

namespace {

constexpr std::size_t kMaxFailures = 8;

IntMatrix multiply(const IntMatrix& x, const IntMatrix& y) {
    const std::size_t n = x.size();
    IntMatrix out(n, IntVector(n, 0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) {
            if (x[i][k] == 0)
                continue;
            for (std::size_t j = 0; j < n; ++j)
                out[i][j] += x[i][k] * y[k][j];
        }
    return out;
}

IntVector mat_vec(const IntMatrix& m, const IntVector& v) {
    IntVector out(v.size(), 0);
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j)
            out[i] += m[i][j] * v[j];
    return out;
}

std::string tuple_text(Elem lambda, Elem beta, Elem a, unsigned l, Elem b, unsigned kappa) {
    std::ostringstream os;
    os << "(lambda=" << lambda << ", beta=" << beta << ", a=" << a << ", l=" << l << ", b=" << b
       << ", kappa=" << kappa << ")";
    return os.str();
}

}  // namespace

void CheckTally::record(bool good, const std::string& what) {
    ++total;
    if (good)
        ++passed;
    else if (failures.size() < kMaxFailures)
        failures.push_back(what);
}

CheckTally verify_field_axioms(const GaloisField& f) {
    CheckTally t;
    const unsigned order = f.order();
    for (unsigned x = 0; x < order; ++x) {
        const Elem ex = static_cast<Elem>(x);
        t.record(f.add(ex, 0) == ex && f.mul(ex, 1) == ex && f.mul(ex, 0) == 0 && f.add(ex, ex) == 0,
                 "identity laws at " + std::to_string(x));
        if (x != 0)
            t.record(f.mul(ex, f.inv(ex)) == 1, "inverse at " + std::to_string(x));
        t.record(GaloisField::norm(ex) == (f.pow(ex, order - 1) == 1 ? 1u : 0u), "norm at " + std::to_string(x));
        for (unsigned y = 0; y < order; ++y) {
            const Elem ey = static_cast<Elem>(y);
            t.record(f.mul(ex, ey) == poly_mulmod(x, y, f.modulus()) && f.mul(ex, ey) == f.mul(ey, ex),
                     "product " + std::to_string(x) + "*" + std::to_string(y));
            bool assoc = true;
            for (unsigned z = 0; z < order && assoc; ++z) {
                const Elem ez = static_cast<Elem>(z);
                assoc = f.mul(f.mul(ex, ey), ez) == f.mul(ex, f.mul(ey, ez)) &&
                        f.mul(ex, f.add(ey, ez)) == f.add(f.mul(ex, ey), f.mul(ex, ez));
            }
            t.record(assoc, "associativity/distributivity at " + std::to_string(x) + "," + std::to_string(y));
        }
    }
    return t;
}

IntMatrix conjugation_matrix(const GaloisField& f, Elem lambda, Elem beta, Elem a, const DiagonalPhase& phase) {
    if (lambda == 0)
        throw DomainError("lambda must be nonzero");
    const unsigned order = f.order();
    IntMatrix l(order, IntVector(order, 0)), x(order, IntVector(order, 0)), d(order, IntVector(order, 0));
    for (unsigned c = 0; c < order; ++c) {
        const Elem ec = static_cast<Elem>(c);
        l[f.add(f.mul(lambda, ec), beta)][c] = 1;
        x[f.add(ec, a)][c] = 1;
        d[c][c] = phase(ec) ? -1 : 1;
    }
    IntMatrix l_inv(order, IntVector(order, 0));  // permutation: inverse = transpose
    for (unsigned i = 0; i < order; ++i)
        for (unsigned j = 0; j < order; ++j)
            l_inv[i][j] = l[j][i];
    const IntMatrix u = multiply(l_inv, multiply(x, multiply(d, l)));
    IntMatrix full(2 * order, IntVector(2 * order, 0));
    for (unsigned nu = 0; nu < 2; ++nu)
        for (unsigned i = 0; i < order; ++i)
            for (unsigned j = 0; j < order; ++j)
                full[nu * order + i][nu * order + j] = u[i][j];
    return full;
}

IntVector bell_vector(const GaloisField& f, Elem b, unsigned kappa) {
    const unsigned order = f.order();
    IntVector v(2 * order, 0);
    v[b] = 1;
    v[order + f.add(b, 1)] = kappa ? -1 : 1;
    return v;
}

bool conjugation_matches(const GaloisField& f, Elem lambda, Elem beta, Elem a, unsigned l, Elem b, unsigned kappa) {
    const DiagonalPhase phase = l ? DiagonalPhase::norm_phase(f.order()) : DiagonalPhase::zero();
    const IntVector image = mat_vec(conjugation_matrix(f, lambda, beta, a, phase), bell_vector(f, b, kappa));
    const BellIndex got = conjugate_bell(f, lambda, beta, a, l, b, kappa);
    const IntVector expected = bell_vector(f, got.a, got.l);
    bool plus = true, minus = true;
    for (std::size_t i = 0; i < image.size(); ++i) {
        plus = plus && image[i] == expected[i];
        minus = minus && image[i] == -expected[i];
    }
    return plus || minus;
}

CheckTally verify_conjugation_exhaustive(const GaloisField& f) {
    CheckTally t;
    const unsigned order = f.order();
    for (unsigned lambda = 1; lambda < order; ++lambda)
        for (unsigned beta = 0; beta < order; ++beta)
            for (unsigned a = 0; a < order; ++a)
                for (unsigned l = 0; l < 2; ++l)
                    for (unsigned b = 0; b < order; ++b)
                        for (unsigned kappa = 0; kappa < 2; ++kappa) {
                            const auto el = static_cast<Elem>(lambda), eb = static_cast<Elem>(beta),
                                       ea = static_cast<Elem>(a), ebb = static_cast<Elem>(b);
                            t.record(conjugation_matches(f, el, eb, ea, l, ebb, kappa),
                                     tuple_text(el, eb, ea, l, ebb, kappa));
                        }
    return t;
}

CheckTally verify_conjugation_random(const GaloisField& f, std::uint64_t count, std::uint64_t seed) {
    CheckTally t;
    Stream s(derive_seed(seed, StreamTag::Labels, 0xC0));
    const unsigned order = f.order();
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto lambda = static_cast<Elem>(1 + uniform_below(s, order - 1));
        const auto beta = static_cast<Elem>(uniform_below(s, order));
        const auto a = static_cast<Elem>(uniform_below(s, order));
        const auto l = static_cast<unsigned>(uniform_below(s, 2));
        const auto b = static_cast<Elem>(uniform_below(s, order));
        const auto kappa = static_cast<unsigned>(uniform_below(s, 2));
        t.record(conjugation_matches(f, lambda, beta, a, l, b, kappa), tuple_text(lambda, beta, a, l, b, kappa));
    }
    return t;
}

}  // namespace qkd
