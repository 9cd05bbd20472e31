#include "qudit_qkd/rational.hpp"

#include "qudit_qkd/field.hpp"

#include <cctype>

namespace qkd {

namespace {

BigInt parse_digits(std::string_view s, std::string_view whole) {
    if (s.empty())
        throw UsageError("malformed number '" + std::string(whole) + "'");
    BigInt v = 0;
    for (char c : s) {
        if (!std::isdigit(static_cast<unsigned char>(c)))
            throw UsageError("malformed number '" + std::string(whole) + "'");
        v = v * 10 + (c - '0');
    }
    return v;
}

}  // namespace

Rational parse_rational(std::string_view text) {
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front())))
        text.remove_prefix(1);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back())))
        text.remove_suffix(1);
    const std::string_view whole = text;
    bool negative = false;
    if (!text.empty() && (text.front() == '-' || text.front() == '+')) {
        negative = text.front() == '-';
        text.remove_prefix(1);
    }

    Rational r;
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
        const BigInt den = parse_digits(text.substr(slash + 1), whole);
        if (den == 0)
            throw UsageError("zero denominator in '" + std::string(whole) + "'");
        r = Rational(parse_digits(text.substr(0, slash), whole), den);
    } else if (auto dot = text.find('.'); dot != std::string_view::npos) {
        const auto int_part = text.substr(0, dot);
        const auto frac_part = text.substr(dot + 1);
        if (int_part.empty() && frac_part.empty())
            throw UsageError("malformed number '" + std::string(whole) + "'");
        BigInt scale = 1;
        for (std::size_t i = 0; i < frac_part.size(); ++i)
            scale *= 10;
        const BigInt ip = int_part.empty() ? BigInt(0) : parse_digits(int_part, whole);
        const BigInt fp = frac_part.empty() ? BigInt(0) : parse_digits(frac_part, whole);
        r = Rational(ip * scale + fp, scale);
    } else {
        r = Rational(parse_digits(text, whole));
    }
    return negative ? Rational(-r) : r;
}

}  // namespace qkd
