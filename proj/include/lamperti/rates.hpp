#ifndef LAMPERTI_RATES_HPP_
#define LAMPERTI_RATES_HPP_

#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "lamperti/chain_model.hpp"
#include "lamperti/types.hpp"

namespace lamperti {

struct RateValues {
  double r;
  double R;
  double expR;
  double U;
  double ell;
};

/*
 * The rate functions built on r(x) = (2mu/b) x/(1+x^2):
 *   R(x) = (mu/b) ln(1+x^2),  e^R = (1+x^2)^{mu/b},
 *   U(x) = int_{x0}^x e^{R(y)} dy  (zero for x <= x0),
 *   ell(x) = x^{2mu/b} / e^{R(x)}.
 */
struct RateFunctions {
  double mu = 2.0;
  double b = 1.0;
  double rho = 5.0;
  double x0 = 0.0;

  RateFunctions() = default;
  RateFunctions(double mu_, double b_, double x0_)
      : mu(mu_), b(b_), rho(2.0 * mu_ / b_ + 1.0), x0(x0_) {}

  static RateFunctions from(const ChainSpec &spec) {
    return {spec.profile.mu, spec.profile.b, static_cast<double>(spec.boundary_x0)};
  }

  double r(double x) const { return (2.0 * mu / b) * x / (1.0 + x * x); }
  double R(double x) const { return (mu / b) * std::log1p(x * x); }
  double expR(double x) const { return std::pow(1.0 + x * x, mu / b); }

  double ell(double x) const {
    if (x <= 0.0) {
      return 1.0;
    }
    return std::exp((2.0 * mu / b) * std::log(x) - R(x));
  }

  // Integral of e^R over [lo, hi], relative error <= 1e-12.
  double integrate_expR(double lo, double hi) const {
    if (hi <= lo) {
      return 0.0;
    }
    auto f = [this](double y) { return expR(y); };
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 15, 1e-12);
  }

  double U(double x) const { return x <= x0 ? 0.0 : integrate_expR(x0, x); }
};

inline RateValues rate(const RateFunctions &fns, double x) {
  if (x < 0.0) {
    throw Rejected("rate: x must be nonnegative");
  }
  return {fns.r(x), fns.R(x), fns.expR(x), fns.U(x), fns.ell(x)};
}

/*
 * U and e^R tabulated on the integers 0..max_state. Differences U(y)-U(x) over
 * short spans are summed from unit-interval integrals, which avoids the
 * cancellation of subtracting two large cumulative values.
 */
class PotentialTable {
public:
  PotentialTable(const RateFunctions &fns, State max_state)
      : fns_(fns), x0_(static_cast<State>(std::floor(fns.x0))),
        inc_(static_cast<std::size_t>(max_state) + 1, 0.0),
        U_(static_cast<std::size_t>(max_state) + 1, 0.0),
        expR_(static_cast<std::size_t>(max_state) + 1, 0.0) {
    for (State k = 0; k <= max_state; ++k) {
      expR_[static_cast<std::size_t>(k)] = fns.expR(static_cast<double>(k));
    }
    for (State k = std::max<State>(x0_, 0); k < max_state; ++k) {
      inc_[static_cast<std::size_t>(k)] =
          fns.integrate_expR(static_cast<double>(k), static_cast<double>(k + 1));
      U_[static_cast<std::size_t>(k) + 1] = U_[static_cast<std::size_t>(k)] + inc_[static_cast<std::size_t>(k)];
    }
  }

  State max_state() const { return static_cast<State>(U_.size()) - 1; }
  const RateFunctions &rates() const { return fns_; }

  double U(State x) const {
    check(x);
    return x <= x0_ ? 0.0 : U_[static_cast<std::size_t>(x)];
  }

  double expR(State x) const {
    check(x);
    return expR_[static_cast<std::size_t>(x)];
  }

  // U(to) - U(from).
  double U_diff(State from, State to) const {
    check(from);
    check(to);
    const State lo = std::max(std::min(from, to), x0_);
    const State hi = std::max(std::max(from, to), x0_);
    double s = 0.0;
    if (hi - lo > 64) {
      s = U_[static_cast<std::size_t>(hi)] - U_[static_cast<std::size_t>(lo)];
    } else {
      for (State k = lo; k < hi; ++k) {
        s += inc_[static_cast<std::size_t>(k)];
      }
    }
    return to >= from ? s : -s;
  }

private:
  void check(State x) const {
    if (x < 0 || x > max_state()) {
      throw Rejected("PotentialTable: state outside tabulated range", x);
    }
  }

  RateFunctions fns_;
  State x0_;
  std::vector<double> inc_;
  std::vector<double> U_;
  std::vector<double> expR_;
};

} // namespace lamperti

#endif /* LAMPERTI_RATES_HPP_ */
