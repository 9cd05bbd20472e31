#pragma once

// Adversary/noise models for the quantum channel: finite mixtures of
// (shift, diagonal phase) unitaries, computational-basis intercept-resend,
// and independent per-index dephasing (full_dephase for N > 16).

#include "qudit_qkd/field.hpp"
#include "qudit_qkd/qstates.hpp"
#include "qudit_qkd/rational.hpp"
#include "qudit_qkd/rng.hpp"

#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace qkd {

struct UnitaryAction {
    Elem shift = 0;
    DiagonalPhase phase;
};

/// Eve measures in the computational basis and resends the result.
struct InterceptResend {};

/// Independent fair sign flip on every basis index. Same distribution as the
/// uniform mixture over all 2^N diagonal masks.
struct IndependentDephase {};

using ChannelAction = std::variant<UnitaryAction, InterceptResend, IndependentDephase>;

struct ChannelTerm {
    Rational probability;
    ChannelAction action;
};

class ChannelModel {
public:
    /// Validates probabilities (nonnegative, exact sum 1).
    ChannelModel(FieldPtr field, std::vector<ChannelTerm> terms, std::string spec);

    /// Parses the channel grammar: identity | z_flip:q | shift_noise:eta |
    /// full_dephase | partial_intercept:eta |
    /// custom:[(p,a=A,f=0xMASK),...]. Numbers are exact decimals or p/q.
    static ChannelModel parse(std::string_view spec, FieldPtr field);

    static ChannelModel identity(FieldPtr field);
    static ChannelModel z_flip(FieldPtr field, const Rational& q);
    static ChannelModel shift_noise(FieldPtr field, const Rational& eta);
    static ChannelModel full_dephase(FieldPtr field);
    static ChannelModel partial_intercept(FieldPtr field, const Rational& eta);

    const std::vector<ChannelTerm>& terms() const { return terms_; }
    const GaloisField& field() const { return *field_; }
    const FieldPtr& field_ptr() const { return field_; }
    const std::string& spec() const { return spec_; }
    bool unitary_only() const;

    /// Index of the sampled term for this draw.
    std::size_t sample_term(Stream& rng) const;

    /// Samples one term and applies it.
    SparseKet transmit(const SparseKet& ket, Stream& rng) const;
    SparseKet apply_term(std::size_t term, const SparseKet& ket, Stream& rng) const;

private:
    FieldPtr field_;
    std::vector<ChannelTerm> terms_;
    std::vector<double> cdf_;
    std::string spec_;
};

}  // namespace qkd
