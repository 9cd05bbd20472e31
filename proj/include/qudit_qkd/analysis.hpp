#pragma once

// Closed-form statistics of the entanglement-distillation view: the
// distribution of Bell outcomes e_{a,l} induced by a channel, the
// correspondences to the observable (e_b, e_c), the 2x2 error matrix and the
// continuation conditions.

#include "qudit_qkd/channels.hpp"
#include "qudit_qkd/rational.hpp"

#include <stdexcept>
#include <vector>

namespace qkd {

struct UnsupportedModel : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// e_{a,l} over a in GF(N), l in {0,1}, stored exactly.
class BellDistribution {
public:
    explicit BellDistribution(unsigned order) : order_(order), e_(2 * order) {}

    unsigned order() const { return order_; }
    const Rational& operator()(Elem a, unsigned l) const { return e_[2 * a + l]; }
    Rational& operator()(Elem a, unsigned l) { return e_[2 * a + l]; }

    Rational total() const;
    bool nonnegative() const;
    /// e_{a0} + e_{a1} equal for every nonzero a.
    bool sum_rule_holds() const;
    /// Sum is 1, entries >= 0 and the sum rule holds.
    bool valid() const { return nonnegative() && total() == 1 && sum_rule_holds(); }

private:
    unsigned order_;
    std::vector<Rational> e_;
};

/// Averages the conjugation image of the reference outcome (0,0) over all
/// (lambda != 0, beta) and over the channel terms. Intercept-resend terms are
/// not unitary and throw UnsupportedModel.
BellDistribution bell_distribution(const ChannelModel& model);

struct Observables {
    Rational e_b;
    Rational e_c;
    bool e_b_defined = true;
    /// 1 - e_c == (N - 2)(e_{10} + e_{11}).
    bool consistent = true;
};

Observables predict_observables(const BellDistribution& d);

/// Predicted (e_b, e_c) for any builtin mixture, including intercept-resend
/// terms (which contribute in-pair mass 1 and error mass 1/2).
Observables predict_channel(const ChannelModel& model);

/// (e_b, e_c) for partial_intercept(eta) by exact enumeration of Born
/// probabilities over every Alice pair, sign, Eve outcome and Bob pair.
Observables intercept_distribution(const Rational& eta, const FieldPtr& field);

/// Pauli-frame error probabilities of the sifted positions.
struct ErrorMatrix {
    double p_i = 1;
    double p_x = 0;
    double p_y = 0;
    double p_z = 0;

    double sum() const { return p_i + p_x + p_y + p_z; }
    /// Nonnegative entries summing to 1 within `tol`.
    bool valid(double tol = 1e-12) const;
};

struct ExactErrorMatrix {
    Rational p_i, p_x, p_y, p_z;
    ErrorMatrix to_double() const;
};

/// (p_I, p_z; p_x, p_y) = (e00, e01; e10, e11) / e_c. Throws DomainError if e_c = 0.
ExactErrorMatrix error_matrix(const BellDistribution& d);

struct EdVerdict {
    bool pass = false;
    bool e00_greatest = false;
    Rational lhs;
};

/// e01 + e11 + (N-1)(e10 + e11) < 1/2, strict.
EdVerdict check_ed_condition(const BellDistribution& d);

/// e00 + e_b e_c + (N-1)(1-e_c)/(N-2) - e11 == 1 exactly.
bool check_pm_identity(const BellDistribution& d);

}  // namespace qkd
