#include "qudit_qkd/analysis.hpp"

#include <cmath>
#include <cstdint>

namespace qkd {

Rational BellDistribution::total() const {
    Rational t = 0;
    for (const auto& x : e_)
        t += x;
    return t;
}

bool BellDistribution::nonnegative() const {
    for (const auto& x : e_) {
        if (x < 0)
            return false;
    }
    return true;
}

bool BellDistribution::sum_rule_holds() const {
    const Rational ref = (*this)(1, 0) + (*this)(1, 1);
    for (Elem a = 2; a < order_; ++a) {
        if ((*this)(a, 0) + (*this)(a, 1) != ref)
            return false;
    }
    return true;
}

namespace {

struct Accumulated {
    BellDistribution e;
    Rational unitary_weight = 0;
    Rational intercept_weight = 0;
};

// Terms with equal probability are batched into one integer count table
// before the exact division; full_dephase has 2^N equal-weight terms.
Accumulated accumulate(const ChannelModel& model, bool allow_intercept) {
    const GaloisField& f = model.field();
    const unsigned order = f.order();
    const std::int64_t grid = std::int64_t(order) * (order - 1);

    Accumulated acc{BellDistribution(order)};
    std::vector<std::int64_t> counts(2 * order, 0);
    Rational batch_p = -1;

    auto flush = [&] {
        if (batch_p < 0)
            return;
        for (unsigned k = 0; k < 2 * order; ++k) {
            if (counts[k])
                acc.e(static_cast<Elem>(k / 2), k % 2) += batch_p * Rational(counts[k], grid);
            counts[k] = 0;
        }
        batch_p = -1;
    };

    for (const auto& term : model.terms()) {
        if (std::holds_alternative<InterceptResend>(term.action)) {
            if (!allow_intercept)
                throw UnsupportedModel("bell_distribution: intercept-resend is not a unitary term; use intercept_distribution");
            acc.intercept_weight += term.probability;
            continue;
        }
        acc.unitary_weight += term.probability;
        if (std::holds_alternative<IndependentDephase>(term.action)) {
            // Relative sign of the two support indices is a fair coin.
            acc.e(0, 0) += term.probability / 2;
            acc.e(0, 1) += term.probability / 2;
            continue;
        }
        const auto& u = std::get<UnitaryAction>(term.action);
        if (term.probability != batch_p)
            flush();
        batch_p = term.probability;
        for (unsigned lambda = 1; lambda < order; ++lambda) {
            const Elem shifted = f.mul(f.inv(static_cast<Elem>(lambda)), u.shift);
            for (unsigned beta = 0; beta < order; ++beta) {
                const unsigned flip = u.phase(static_cast<Elem>(beta)) ^ u.phase(f.add(static_cast<Elem>(lambda), static_cast<Elem>(beta)));
                ++counts[2 * shifted + flip];
            }
        }
    }
    flush();
    return acc;
}

}  // namespace

BellDistribution bell_distribution(const ChannelModel& model) { return accumulate(model, false).e; }

Observables predict_observables(const BellDistribution& d) {
    const unsigned order = d.order();
    Observables o;
    o.e_c = d(0, 0) + d(1, 0) + d(0, 1) + d(1, 1);
    if (o.e_c == 0) {
        o.e_b_defined = false;
        o.e_b = 0;
    } else {
        o.e_b = (d(0, 1) + d(1, 1)) / o.e_c;
    }
    o.consistent = (1 - o.e_c) == Rational(order - 2) * (d(1, 0) + d(1, 1));
    return o;
}

Observables predict_channel(const ChannelModel& model) {
    const auto acc = accumulate(model, true);
    const auto& d = acc.e;
    Observables o;
    // Unitary terms keep the state on a line pair; intercepted states land on
    // the prepared pair with probability 1 and a fair sign.
    const Rational in_pair = d(0, 0) + d(1, 0) + d(0, 1) + d(1, 1) + acc.intercept_weight;
    const Rational errors = d(0, 1) + d(1, 1) + acc.intercept_weight / 2;
    o.e_c = in_pair;
    o.e_b_defined = in_pair != 0;
    o.e_b = o.e_b_defined ? Rational(errors / in_pair) : Rational(0);
    const unsigned order = model.field().order();
    o.consistent = acc.intercept_weight != 0 || (1 - o.e_c) == Rational(order - 2) * (d(1, 0) + d(1, 1));
    return o;
}

Observables intercept_distribution(const Rational& eta, const FieldPtr& field) {
    if (eta < 0 || eta > 1)
        throw UsageError("intercept probability must lie in [0, 1]");
    const GaloisField& f = *field;
    const unsigned order = f.order();

    std::vector<PairState> pairs;
    for (unsigned i = 0; i < order; ++i)
        for (unsigned j = i + 1; j < order; ++j)
            pairs.push_back(PairState::make(static_cast<Elem>(i), static_cast<Elem>(j), 0));

    // Masses (in units of quarters) accumulated over all choices; every choice
    // is equiprobable within each branch so the common factor cancels in the
    // ratios.
    struct Mass {
        BigInt same_in_pair = 0, same_error = 0, line_in_pair = 0;
    };
    auto tally = [&](bool intercept) {
        Mass m;
        for (const auto& alice : pairs) {
            const Elem lam = f.add(alice.first, alice.second);
            for (std::uint8_t s = 0; s < 2; ++s) {
                const PairState prepared{alice.first, alice.second, s};
                const SparseKet sent = SparseKet::from_pair(prepared);
                std::vector<SparseKet> received;
                if (intercept) {
                    received = {SparseKet::basis(alice.first), SparseKet::basis(alice.second)};
                } else {
                    received = {sent, sent};
                }
                for (const auto& ket : received) {
                    for (const auto& bob : pairs) {
                        if (f.add(bob.first, bob.second) != lam)
                            continue;
                        const auto q = probabilities(ket, bob);
                        m.line_in_pair += q.plus + q.minus;
                        if (bob.same_pair(alice)) {
                            m.same_in_pair += q.plus + q.minus;
                            m.same_error += s == 0 ? q.minus : q.plus;
                        }
                    }
                }
            }
        }
        return m;
    };
    const Mass clean = tally(false);
    const Mass eve = tally(true);
    const Rational same = (1 - eta) * Rational(clean.same_in_pair) + eta * Rational(eve.same_in_pair);
    const Rational err = (1 - eta) * Rational(clean.same_error) + eta * Rational(eve.same_error);
    const Rational line = (1 - eta) * Rational(clean.line_in_pair) + eta * Rational(eve.line_in_pair);

    Observables o;
    o.e_c = same / line;
    o.e_b_defined = same != 0;
    o.e_b = o.e_b_defined ? Rational(err / same) : Rational(0);
    return o;
}

bool ErrorMatrix::valid(double tol) const {
    return p_i >= -tol && p_x >= -tol && p_y >= -tol && p_z >= -tol && std::abs(sum() - 1) <= tol;
}

ErrorMatrix ExactErrorMatrix::to_double() const {
    return {qkd::to_double(p_i), qkd::to_double(p_x), qkd::to_double(p_y), qkd::to_double(p_z)};
}

ExactErrorMatrix error_matrix(const BellDistribution& d) {
    const Rational ec = d(0, 0) + d(1, 0) + d(0, 1) + d(1, 1);
    if (ec == 0)
        throw DomainError("error matrix undefined: e_c = 0");
    return {d(0, 0) / ec, d(1, 0) / ec, d(1, 1) / ec, d(0, 1) / ec};
}

EdVerdict check_ed_condition(const BellDistribution& d) {
    const unsigned order = d.order();
    EdVerdict v;
    v.lhs = d(0, 1) + d(1, 1) + Rational(order - 1) * (d(1, 0) + d(1, 1));
    v.pass = v.lhs < Rational(1, 2);
    v.e00_greatest = d(0, 0) > Rational(1, 2);
    return v;
}

bool check_pm_identity(const BellDistribution& d) {
    const unsigned order = d.order();
    const auto obs = predict_observables(d);
    const Rational lhs = d(0, 0) + obs.e_b * obs.e_c + Rational(order - 1) * (1 - obs.e_c) / Rational(order - 2) - d(1, 1);
    return lhs == 1;
}

}  // namespace qkd
