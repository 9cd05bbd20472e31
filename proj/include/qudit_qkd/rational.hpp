#pragma once

// Exact rational probabilities. Conversion to double happens only at the
// reporting boundary.

#include <boost/multiprecision/cpp_int.hpp>

#include <string>
#include <string_view>

namespace qkd {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

/// Parses "0.3", "1", "3/10", "1e-2" is rejected. Decimal and fraction forms
/// are exact.
Rational parse_rational(std::string_view text);

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

inline std::string to_string(const Rational& r) { return r.str(); }

}  // namespace qkd
