#include "hmcfs/scalar.hpp"

#include <algorithm>
#include <charconv>
#include <stdexcept>

namespace hmcfs {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad(std::string_view text) {
  throw std::invalid_argument("not a number: \"" + std::string(text) + "\"");
}

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  return true;
}

using Integer = boost::multiprecision::mpz_int;

// GMP reads a leading zero as an octal prefix.
Integer from_digits(std::string_view digits) {
  digits.remove_prefix(std::min(digits.find_first_not_of('0'), digits.size() - 1));
  return Integer{std::string(digits)};
}

Integer parse_integer(std::string_view s, std::string_view whole) {
  bool neg = false;
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
    neg = s.front() == '-';
    s.remove_prefix(1);
  }
  if (!all_digits(s)) bad(whole);
  const Integer v = from_digits(s);
  return neg ? Integer(-v) : v;
}

/// [sign] digits [. digits] [(e|E) [sign] digits]
Rational parse_decimal(std::string_view s, std::string_view whole) {
  bool neg = false;
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
    neg = s.front() == '-';
    s.remove_prefix(1);
  }
  long exponent = 0;
  if (auto e = s.find_first_of("eE"); e != std::string_view::npos) {
    const auto exp_text = s.substr(e + 1);
    const Integer ev = parse_integer(exp_text, whole);
    if (ev > 4000 || ev < -4000) bad(whole);
    exponent = ev.convert_to<long>();
    s = s.substr(0, e);
  }
  std::string digits;
  if (auto dot = s.find('.'); dot != std::string_view::npos) {
    const auto ip = s.substr(0, dot);
    const auto fp = s.substr(dot + 1);
    if ((ip.empty() && fp.empty()) || (!ip.empty() && !all_digits(ip)) || (!fp.empty() && !all_digits(fp)))
      bad(whole);
    digits = std::string(ip) + std::string(fp);
    exponent -= static_cast<long>(fp.size());
  } else {
    if (!all_digits(s)) bad(whole);
    digits = std::string(s);
  }
  Rational v{from_digits(digits)};
  Rational scale = boost::multiprecision::pow(Integer(10), static_cast<unsigned>(std::labs(exponent)));
  v = exponent >= 0 ? v * scale : v / scale;
  return neg ? Rational(-v) : v;
}

}  // namespace

Rational parse_rational(std::string_view text) {
  const auto s = trim(text);
  if (s.empty()) bad(text);
  if (auto slash = s.find('/'); slash != std::string_view::npos) {
    const Integer num = parse_integer(trim(s.substr(0, slash)), text);
    const Integer den = parse_integer(trim(s.substr(slash + 1)), text);
    if (den == 0) throw std::invalid_argument("zero denominator: \"" + std::string(text) + "\"");
    return Rational(num, den);
  }
  return parse_decimal(s, text);
}

double parse_double(std::string_view text) {
  const auto s = trim(text);
  if (s.empty()) bad(text);
  if (s.find('/') != std::string_view::npos) return parse_rational(s).convert_to<double>();
  // Validate the grammar first so that "inf", "nan" and hex floats are rejected.
  (void)parse_decimal(s, text);
  double v = 0.0;
  auto body = s;
  if (body.front() == '+') body.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), v);
  if (ec != std::errc() || ptr != body.data() + body.size()) bad(text);
  return v;
}

std::string format_rational(const Rational& value) { return value.str(); }

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

}  // namespace hmcfs
