// Scalar fields used throughout hmcfs.
//
// Every algorithm is written once, templated on the scalar, and instantiated
// for two fields:
//   Rational - exact arbitrary-precision rational (GMP backed),
//   double   - IEEE binary64, for long runs where exactness is not needed.
//
// ScalarTraits<T> collects the handful of field-specific behaviours
// (exactness, tolerance used when comparing, parsing and formatting).
#pragma once

#include <boost/multiprecision/gmp.hpp>
#include <boost/multiprecision/eigen.hpp>

#include <cmath>
#include <string>
#include <string_view>

namespace hmcfs {

using Rational = boost::multiprecision::number<boost::multiprecision::gmp_rational,
                                               boost::multiprecision::et_off>;

/// Parses "p/q", an integer, or a finite decimal ("0.125", "-3.5e-2") into an
/// exact rational. Throws std::invalid_argument on malformed input.
Rational parse_rational(std::string_view text);

/// Parses the same grammar into a double (p/q is evaluated in floating point).
double parse_double(std::string_view text);

/// "p/q" in lowest terms, or "p" when the denominator is one.
std::string format_rational(const Rational& value);

/// Shortest round-tripping decimal representation.
std::string format_double(double value);

template <typename T>
struct ScalarTraits;

template <>
struct ScalarTraits<Rational> {
  static constexpr bool exact = true;
  static constexpr const char* name = "rational";
  // Exact fields compare with ==; the tolerance is ignored.
  static Rational stochastic_tolerance() { return Rational(0); }

  static Rational parse(std::string_view s) { return parse_rational(s); }
  static std::string format(const Rational& v) { return format_rational(v); }
  static double to_double(const Rational& v) { return v.convert_to<double>(); }
  static Rational from_rational(const Rational& v) { return v; }
  static bool near(const Rational& a, const Rational& b, double /*tol*/) { return a == b; }
};

template <>
struct ScalarTraits<double> {
  static constexpr bool exact = false;
  static constexpr const char* name = "float64";
  static double stochastic_tolerance() { return 1e-12; }

  static double parse(std::string_view s) { return parse_double(s); }
  static std::string format(double v) { return format_double(v); }
  static double to_double(double v) { return v; }
  static double from_rational(const Rational& v) { return v.convert_to<double>(); }
  static bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }
};

template <typename T>
inline constexpr bool is_exact_v = ScalarTraits<T>::exact;

/// Converts between the two fields (Rational -> double rounds; double ->
/// Rational is exact on the binary value).
template <typename To, typename From>
To scalar_cast(const From& v) {
  if constexpr (std::is_same_v<To, From>) {
    return v;
  } else if constexpr (std::is_same_v<To, double>) {
    return ScalarTraits<From>::to_double(v);
  } else {
    return Rational(v);
  }
}

}  // namespace hmcfs
