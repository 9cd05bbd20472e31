#include "qudit_qkd/channels.hpp"

#include <algorithm>
#include <cctype>

namespace qkd {

namespace {

void check_unit(const Rational& p, std::string_view what) {
    if (p < 0 || p > 1)
        throw UsageError(std::string(what) + " must lie in [0, 1], got " + to_string(p));
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

// "(0.9,a=0,f=0x0)" -> term
ChannelTerm parse_custom_term(std::string_view body, const GaloisField& field) {
    Rational p;
    Elem shift = 0;
    DiagonalPhase phase;
    bool have_p = false;
    std::size_t pos = 0;
    while (pos <= body.size()) {
        const auto comma = body.find(',', pos);
        const auto item = trim(body.substr(pos, comma == std::string_view::npos ? body.npos : comma - pos));
        if (item.starts_with("a=")) {
            const auto v = parse_rational(item.substr(2));
            if (denominator(v) != 1 || v < 0 || v >= field.order())
                throw UsageError("custom term shift '" + std::string(item) + "' is not a field element");
            shift = static_cast<Elem>(numerator(v).convert_to<unsigned>());
        } else if (item.starts_with("f=")) {
            phase = DiagonalPhase::from_hex(item.substr(2), field.order());
        } else if (!have_p) {
            p = parse_rational(item);
            have_p = true;
        } else {
            throw UsageError("unexpected field '" + std::string(item) + "' in custom channel term");
        }
        if (comma == std::string_view::npos)
            break;
        pos = comma + 1;
    }
    if (!have_p)
        throw UsageError("custom channel term without probability");
    check_unit(p, "custom term probability");
    return {p, UnitaryAction{shift, phase}};
}

}  // namespace

ChannelModel::ChannelModel(FieldPtr field, std::vector<ChannelTerm> terms, std::string spec)
    : field_(std::move(field)), terms_(std::move(terms)), spec_(std::move(spec)) {
    if (!field_)
        throw UsageError("channel needs a field");
    if (terms_.empty())
        throw UsageError("channel has no terms");
    Rational total = 0;
    double running = 0;
    cdf_.reserve(terms_.size());
    for (const auto& t : terms_) {
        check_unit(t.probability, "channel term probability");
        if (const auto* u = std::get_if<UnitaryAction>(&t.action); u && !field_->contains(u->shift))
            throw UsageError("channel shift outside the field");
        total += t.probability;
        running += to_double(t.probability);
        cdf_.push_back(running);
    }
    if (total != 1)
        throw UsageError("channel probabilities sum to " + to_string(total) + ", not 1");
    cdf_.back() = 1.0;
}

ChannelModel ChannelModel::identity(FieldPtr field) {
    std::vector<ChannelTerm> t{{Rational(1), UnitaryAction{}}};
    return {std::move(field), std::move(t), "identity"};
}

ChannelModel ChannelModel::z_flip(FieldPtr field, const Rational& q) {
    check_unit(q, "z_flip probability");
    const auto z = DiagonalPhase::norm_phase(field->order());
    std::vector<ChannelTerm> t;
    if (q != 1)
        t.push_back({1 - q, UnitaryAction{}});
    if (q != 0)
        t.push_back({q, UnitaryAction{0, z}});
    return {std::move(field), std::move(t), "z_flip:" + to_string(q)};
}

ChannelModel ChannelModel::shift_noise(FieldPtr field, const Rational& eta) {
    check_unit(eta, "shift_noise probability");
    std::vector<ChannelTerm> t;
    if (eta != 1)
        t.push_back({1 - eta, UnitaryAction{}});
    if (eta != 0) {
        const Rational each = eta / (field->order() - 1);
        for (unsigned a = 1; a < field->order(); ++a)
            t.push_back({each, UnitaryAction{static_cast<Elem>(a), {}}});
    }
    return {std::move(field), std::move(t), "shift_noise:" + to_string(eta)};
}

ChannelModel ChannelModel::full_dephase(FieldPtr field) {
    std::vector<ChannelTerm> t;
    const unsigned order = field->order();
    if (order <= 16) {
        const unsigned count = 1u << order;
        const Rational each(1, count);
        t.reserve(count);
        for (unsigned m = 0; m < count; ++m)
            t.push_back({each, UnitaryAction{0, DiagonalPhase(std::bitset<256>(m))}});
    } else {
        t.push_back({Rational(1), IndependentDephase{}});
    }
    return {std::move(field), std::move(t), "full_dephase"};
}

ChannelModel ChannelModel::partial_intercept(FieldPtr field, const Rational& eta) {
    check_unit(eta, "partial_intercept probability");
    std::vector<ChannelTerm> t;
    if (eta != 1)
        t.push_back({1 - eta, UnitaryAction{}});
    if (eta != 0)
        t.push_back({eta, InterceptResend{}});
    return {std::move(field), std::move(t), "partial_intercept:" + to_string(eta)};
}

ChannelModel ChannelModel::parse(std::string_view spec, FieldPtr field) {
    spec = trim(spec);
    std::string_view name = spec;
    std::string_view arg;
    if (auto colon = spec.find(':'); colon != std::string_view::npos) {
        name = trim(spec.substr(0, colon));
        arg = trim(spec.substr(colon + 1));
    }
    auto need_arg = [&] {
        if (arg.empty())
            throw UsageError("channel '" + std::string(name) + "' needs a parameter, e.g. " + std::string(name) + ":0.1");
        return parse_rational(arg);
    };
    auto no_arg = [&] {
        if (!arg.empty())
            throw UsageError("channel '" + std::string(name) + "' takes no parameter");
    };

    if (name == "identity") {
        no_arg();
        return identity(std::move(field));
    }
    if (name == "z_flip")
        return z_flip(std::move(field), need_arg());
    if (name == "shift_noise")
        return shift_noise(std::move(field), need_arg());
    if (name == "full_dephase") {
        no_arg();
        return full_dephase(std::move(field));
    }
    if (name == "partial_intercept")
        return partial_intercept(std::move(field), need_arg());
    if (name == "custom") {
        if (arg.size() < 2 || arg.front() != '[' || arg.back() != ']')
            throw UsageError("custom channel expects [(p,a=..,f=0x..),...]");
        std::string_view body = arg.substr(1, arg.size() - 2);
        std::vector<ChannelTerm> terms;
        while (!trim(body).empty()) {
            body = trim(body);
            if (body.front() == ',') {
                body.remove_prefix(1);
                continue;
            }
            if (body.front() != '(')
                throw UsageError("custom channel term must start with '('");
            const auto close = body.find(')');
            if (close == std::string_view::npos)
                throw UsageError("unterminated custom channel term");
            terms.push_back(parse_custom_term(body.substr(1, close - 1), *field));
            body.remove_prefix(close + 1);
        }
        return {std::move(field), std::move(terms), std::string(spec)};
    }
    throw UsageError("unknown channel '" + std::string(name) + "'");
}

bool ChannelModel::unitary_only() const {
    return std::all_of(terms_.begin(), terms_.end(),
                       [](const ChannelTerm& t) { return std::holds_alternative<UnitaryAction>(t.action); });
}

std::size_t ChannelModel::sample_term(Stream& rng) const {
    const double u = uniform_unit(rng);
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), terms_.size() - 1);
}

SparseKet ChannelModel::apply_term(std::size_t term, const SparseKet& ket, Stream& rng) const {
    return std::visit(
        [&](const auto& action) -> SparseKet {
            using A = std::decay_t<decltype(action)>;
            if constexpr (std::is_same_v<A, UnitaryAction>) {
                return apply_error(*field_, action.shift, action.phase, ket);
            } else if constexpr (std::is_same_v<A, InterceptResend>) {
                const auto terms = ket.terms();
                const auto pick = terms.size() == 1 ? 0 : uniform_below(rng, terms.size());
                return SparseKet::basis(terms[pick].index);
            } else {
                KetTerm t[2];
                std::size_t n = 0;
                for (const auto& term : ket.terms()) {
                    const bool flip = uniform_below(rng, 2) == 1;
                    t[n++] = {term.index, static_cast<std::int8_t>(flip ? -term.sign : term.sign)};
                }
                return SparseKet::from_terms(std::span<const KetTerm>(t, n));
            }
        },
        terms_[term].action);
}

SparseKet ChannelModel::transmit(const SparseKet& ket, Stream& rng) const {
    return apply_term(sample_term(rng), ket, rng);
}

}  // namespace qkd
