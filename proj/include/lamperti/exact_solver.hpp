#ifndef LAMPERTI_EXACT_SOLVER_HPP_
#define LAMPERTI_EXACT_SOLVER_HPP_

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "lamperti/assumptions.hpp"
#include "lamperti/chain_model.hpp"
#include "lamperti/kernel.hpp"

namespace lamperti {

enum class StationaryMethod { product_formula, global_balance };

inline const char *to_string(StationaryMethod m) {
  return m == StationaryMethod::product_formula ? "product_formula" : "global_balance";
}

struct StationaryTable {
  std::vector<double> probs; // pi(0..N)
  std::vector<double> tail;  // tail[x] = sum_{y > x} probs[y]
  State truncation_N = 0;
  double tail_mass_bound = 0.0;
  StationaryMethod method = StationaryMethod::product_formula;
  double residual = 0.0;          // ||pi P_N - pi||_inf
  double doubling_rel_change = 0.0; // global balance only; max over [0, N/2]

  double pi(State x) const { return probs.at(static_cast<std::size_t>(x)); }
  double tail_at(State x) const { return tail.at(static_cast<std::size_t>(x)); }
};

namespace detail {

inline std::vector<double> suffix_tail(const std::vector<double> &probs) {
  std::vector<double> tail(probs.size(), 0.0);
  double s = 0.0;
  for (std::size_t i = probs.size(); i-- > 0;) {
    tail[i] = s;
    s += probs[i];
  }
  return tail;
}

} // namespace detail

/// sup-norm of pi P_N - pi for the reflecting truncation.
inline double balance_residual(const ChainSpec &spec, std::span<const double> probs) {
  const State N = static_cast<State>(probs.size()) - 1;
  const SparseRowMatrix P = reflecting_kernel(spec, N);
  Eigen::Map<const Eigen::VectorXd> pi(probs.data(), static_cast<Eigen::Index>(probs.size()));
  const Eigen::VectorXd r = P.transpose() * pi - pi;
  return r.cwiseAbs().maxCoeff();
}

/*
 * Product formula pi(x) = pi(0) prod_{k=1}^x p+(k-1)/p-(k) for chains with
 * jumps in {-1, 0, +1}, accumulated in log space.
 */
inline StationaryTable stationary_skip_free(const ChainSpec &spec, State N) {
  if (!spec.skip_free()) {
    throw Rejected("stationary_skip_free: chain has jumps outside {-1,0,+1}");
  }
  if (N < 1) {
    throw Rejected("stationary_skip_free: N must be positive");
  }
  std::vector<double> logw(static_cast<std::size_t>(N) + 1, 0.0);
  double up_prev = spec.law(0).prob_of(1);
  for (State k = 1; k <= N; ++k) {
    const JumpLaw law = spec.law(k);
    const double down = law.prob_of(-1);
    if (!(down > 0.0)) {
      throw Rejected("stationary_skip_free: p-(k) = 0", k);
    }
    logw[static_cast<std::size_t>(k)] =
        logw[static_cast<std::size_t>(k) - 1] + std::log(up_prev) - std::log(down);
    up_prev = law.prob_of(1);
  }
  const double top = *std::max_element(logw.begin(), logw.end());
  StationaryTable t;
  t.probs.resize(logw.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logw.size(); ++i) {
    t.probs[i] = std::exp(logw[i] - top);
    z += t.probs[i];
  }
  for (double &p : t.probs) {
    p /= z;
  }
  t.tail = detail::suffix_tail(t.probs);
  t.truncation_N = N;
  t.method = StationaryMethod::product_formula;

  // Geometric majorant from the ratio p+(N)/p-(N+1).
  const double ratio = up_prev / spec.law(N + 1).prob_of(-1);
  t.tail_mass_bound = ratio < 1.0 ? t.probs.back() * ratio / (1.0 - ratio)
                                  : std::numeric_limits<double>::infinity();
  t.residual = balance_residual(spec, t.probs);
  return t;
}

namespace detail {

inline std::vector<double> solve_global_balance(const ChainSpec &spec, State N, double tol) {
  if (const auto bad = states_not_reaching_boundary(spec, N); !bad.empty()) {
    throw Rejected("stationary_global_balance: truncation is reducible; state " +
                       std::to_string(bad.front()) + " cannot reach B (" + std::to_string(bad.size()) +
                       " states in the component)",
                   bad.front());
  }
  if (const auto bad = states_unreachable_from_origin(spec, N); !bad.empty()) {
    throw Rejected("stationary_global_balance: truncation is reducible; state " +
                       std::to_string(bad.front()) + " is not reachable from 0 (" +
                       std::to_string(bad.size()) + " states in the component)",
                   bad.front());
  }
  const int n = static_cast<int>(N + 1);
  const SparseRowMatrix P = reflecting_kernel(spec, N);

  // (I - P)^T pi = 0 with the last equation replaced by sum(pi) = 1.
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(P.nonZeros()) + 2 * static_cast<std::size_t>(n));
  for (int x = 0; x < n; ++x) {
    for (SparseRowMatrix::InnerIterator it(P, x); it; ++it) {
      if (it.col() != n - 1) {
        trip.emplace_back(static_cast<int>(it.col()), x, -it.value());
      }
    }
    if (x != n - 1) {
      trip.emplace_back(x, x, 1.0);
    }
    trip.emplace_back(n - 1, x, 1.0);
  }
  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(trip.begin(), trip.end());
  A.makeCompressed();

  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) {
    throw Rejected("stationary_global_balance: singular system");
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  Eigen::VectorXd pi = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !pi.allFinite()) {
    throw Rejected("stationary_global_balance: solve failed");
  }
  // Iterative refinement until the balance residual meets tol.
  for (int it = 0; it < 4; ++it) {
    const Eigen::VectorXd r = rhs - A * pi;
    if (r.cwiseAbs().maxCoeff() <= 0.1 * tol) {
      break;
    }
    pi += lu.solve(r);
  }
  std::vector<double> probs(static_cast<std::size_t>(n));
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    if (pi(i) < -1e-12) {
      throw Rejected("stationary_global_balance: negative solution component", i);
    }
    probs[static_cast<std::size_t>(i)] = std::max(0.0, pi(i));
    z += probs[static_cast<std::size_t>(i)];
  }
  for (double &p : probs) {
    p /= z;
  }
  return probs;
}

} // namespace detail

/*
 * Stationary law of the reflecting truncation to [0, N] by a sparse LU solve.
 * With estimate_tail set, the solve is repeated at 2N: tail_mass_bound is
 * the mass the larger window puts above N, doubling_rel_change the largest
 * relative change of pi on [0, N/2].
 */
inline StationaryTable stationary_global_balance(const ChainSpec &spec, State N, double tol = 1e-10,
                                                 bool estimate_tail = true) {
  if (N < 1) {
    throw Rejected("stationary_global_balance: N must be positive");
  }
  StationaryTable t;
  t.probs = detail::solve_global_balance(spec, N, tol);
  t.tail = detail::suffix_tail(t.probs);
  t.truncation_N = N;
  t.method = StationaryMethod::global_balance;
  t.residual = balance_residual(spec, t.probs);
  if (t.residual > tol) {
    throw Rejected("stationary_global_balance: residual " + std::to_string(t.residual) +
                   " exceeds tolerance");
  }
  if (estimate_tail) {
    const std::vector<double> big = detail::solve_global_balance(spec, 2 * N, tol);
    double beyond = 0.0;
    for (State x = N + 1; x <= 2 * N; ++x) {
      beyond += big[static_cast<std::size_t>(x)];
    }
    t.tail_mass_bound = beyond;
    double change = 0.0;
    for (State x = 0; x <= N / 2; ++x) {
      const double a = t.probs[static_cast<std::size_t>(x)];
      const double b = big[static_cast<std::size_t>(x)];
      if (b > 0.0) {
        change = std::max(change, std::abs(a - b) / b);
      }
    }
    t.doubling_rel_change = change;
  }
  return t;
}

/// Product formula for skip-free chains, linear solve otherwise.
inline StationaryTable stationary(const ChainSpec &spec, State N, double tol = 1e-10) {
  return spec.skip_free() ? stationary_skip_free(spec, N) : stationary_global_balance(spec, N, tol);
}

/*
 * Invariant density of the diffusion with m1(y) = -mu/max(y,1), m2 = b,
 *   p(x) proportional to (2/b) exp(int_0^x 2 m1(y)/b dy),
 * normalized so that the grid sum times the (uniform) spacing is 1.
 */
inline std::vector<double> diffusion_density(double mu, double b, std::span<const double> x_grid) {
  if (!(b > 0.0) || !(2.0 * mu > b)) {
    throw Rejected("diffusion_density: density not integrable unless 2mu > b > 0");
  }
  if (x_grid.size() < 2) {
    throw Rejected("diffusion_density: grid needs at least two points");
  }
  const double dx = x_grid[1] - x_grid[0];
  if (!(dx > 0.0)) {
    throw Rejected("diffusion_density: grid must be increasing");
  }
  using Quad = boost::math::quadrature::gauss_kronrod<double, 31>;
  auto integrand = [mu, b](double y) { return -2.0 * mu / (b * std::max(y, 1.0)); };
  auto exponent = [&](double x) {
    if (x <= 1.0) {
      return Quad::integrate(integrand, 0.0, x, 15, 1e-13);
    }
    return Quad::integrate(integrand, 0.0, 1.0, 15, 1e-13) +
           Quad::integrate(integrand, 1.0, x, 15, 1e-13);
  };
  std::vector<double> p(x_grid.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x_grid.size(); ++i) {
    if (x_grid[i] < 0.0) {
      throw Rejected("diffusion_density: grid must be nonnegative");
    }
    p[i] = (2.0 / b) * std::exp(exponent(x_grid[i]));
    s += p[i];
  }
  for (double &v : p) {
    v /= s * dx;
  }
  return p;
}

} // namespace lamperti

#endif /* LAMPERTI_EXACT_SOLVER_HPP_ */
