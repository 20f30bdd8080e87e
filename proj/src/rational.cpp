#include "topocb/rational.hpp"

#include <cctype>

namespace topocb {

namespace {

bool isIntegerToken(const std::string& s) {
  if (s.empty()) return false;
  std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  return true;
}

}  // namespace

Rational Rational::parse(const std::string& text) {
  auto slash = text.find('/');
  if (slash == std::string::npos) {
    if (!isIntegerToken(text))
      throw std::invalid_argument("malformed rational: '" + text + "'");
    return Rational(mpq_class(mpz_class(text)));
  }
  std::string num = text.substr(0, slash);
  std::string den = text.substr(slash + 1);
  if (!isIntegerToken(num) || !isIntegerToken(den))
    throw std::invalid_argument("malformed rational: '" + text + "'");
  mpz_class d(den);
  if (d == 0)
    throw std::invalid_argument("malformed rational (zero denominator): '" +
                                text + "'");
  mpq_class q(mpz_class(num), d);
  q.canonicalize();
  return Rational(q);
}

std::string Rational::str() const {
  if (inf_) return "inf";
  if (q_.get_den() == 1) return q_.get_num().get_str();
  return q_.get_num().get_str() + "/" + q_.get_den().get_str();
}

Rational pow2inv(int n) {
  if (n < 0) throw std::invalid_argument("pow2inv needs n >= 0");
  mpz_class d = 1;
  mpz_mul_2exp(d.get_mpz_t(), d.get_mpz_t(), n);
  return Rational(mpq_class(1, d));
}

}  // namespace topocb
