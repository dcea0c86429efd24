#include "perco/exact.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace perco {

namespace {

Rational parse_decimal(const std::string& text) {
  std::string mantissa = text;
  long exponent = 0;
  if (const auto epos = text.find_first_of("eE"); epos != std::string::npos) {
    mantissa = text.substr(0, epos);
    exponent = std::stol(text.substr(epos + 1));
  }
  if (mantissa.empty()) throw std::invalid_argument("empty probability");
  const auto dot = mantissa.find('.');
  std::string digits = mantissa;
  if (dot != std::string::npos) {
    digits = mantissa.substr(0, dot) + mantissa.substr(dot + 1);
    exponent -= static_cast<long>(mantissa.size() - dot - 1);
  }
  if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
    throw std::invalid_argument("malformed probability '" + text + "'");
  }
  // A leading zero would select octal parsing.
  digits.erase(0, std::min(digits.find_first_not_of('0'), digits.size() - 1));
  boost::multiprecision::cpp_int num(digits);
  boost::multiprecision::cpp_int den = 1;
  for (long i = 0; i < std::labs(exponent); ++i) (exponent < 0 ? den : num) *= 10;
  return Rational(num, den);
}

}  // namespace

ExactProbability::ExactProbability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probability must lie in [0,1]");
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, p);
  *this = parse(std::string(buf, res.ptr));
}

ExactProbability ExactProbability::parse(const std::string& text) {
  Rational r;
  if (const auto slash = text.find('/'); slash != std::string::npos) {
    const Rational num = parse_decimal(text.substr(0, slash));
    const Rational den = parse_decimal(text.substr(slash + 1));
    if (den == 0) throw std::invalid_argument("zero denominator in probability");
    r = num / den;
  } else {
    r = parse_decimal(text);
  }
  if (r < 0 || r > 1) throw std::invalid_argument("probability must lie in [0,1]");
  return ExactProbability(r.convert_to<double>(), r, text);
}

Decimal OpenCountProfile::evaluate(const ExactProbability& p) const {
  const Decimal pd = Decimal(numerator(p.rational())) / Decimal(denominator(p.rational()));
  const Decimal qd = 1 - pd;
  Decimal sum = 0;
  for (int j = 0; j <= edge_count; ++j) {
    if (counts[static_cast<std::size_t>(j)] == 0) continue;
    sum += Decimal(counts[static_cast<std::size_t>(j)]) * pow(pd, j) * pow(qd, edge_count - j);
  }
  return sum;
}

Rational OpenCountProfile::evaluate_rational(const ExactProbability& p) const {
  const Rational q = 1 - p.rational();
  std::vector<Rational> p_pow(static_cast<std::size_t>(edge_count) + 1, Rational(1));
  std::vector<Rational> q_pow(p_pow);
  for (std::size_t j = 1; j < p_pow.size(); ++j) {
    p_pow[j] = p_pow[j - 1] * p.rational();
    q_pow[j] = q_pow[j - 1] * q;
  }
  Rational sum = 0;
  for (int j = 0; j <= edge_count; ++j) {
    if (counts[static_cast<std::size_t>(j)] == 0) continue;
    sum += Rational(counts[static_cast<std::size_t>(j)]) * p_pow[static_cast<std::size_t>(j)] *
           q_pow[static_cast<std::size_t>(edge_count - j)];
  }
  return sum;
}

std::uint64_t OpenCountProfile::accepted() const {
  std::uint64_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

std::string to_string(const Decimal& x, int digits) {
  std::ostringstream os;
  os.precision(digits);
  os << x;
  return os.str();
}

std::string to_string(const Rational& x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

}  // namespace perco
