#ifndef LAMPERTI_KERNEL_HPP_
#define LAMPERTI_KERNEL_HPP_

#include <algorithm>
#include <vector>

#include <Eigen/Sparse>

#include "lamperti/chain_model.hpp"

namespace lamperti {

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Transition matrix on [0, N]; jumps leaving the window are redirected to the
// nearest endpoint, so every row sums to one.
inline SparseRowMatrix reflecting_kernel(const ChainSpec &spec, State N) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(N + 1) * 4);
  for (State x = 0; x <= N; ++x) {
    const JumpLaw law = spec.law(x);
    for (std::size_t i = 0; i < law.size(); ++i) {
      if (law.probs[i] == 0.0) {
        continue;
      }
      const State y = std::clamp<State>(x + law.offsets[i], 0, N);
      trip.emplace_back(static_cast<int>(x), static_cast<int>(y), law.probs[i]);
    }
  }
  SparseRowMatrix P(static_cast<int>(N + 1), static_cast<int>(N + 1));
  P.setFromTriplets(trip.begin(), trip.end()); // duplicates are summed
  P.makeCompressed();
  return P;
}

/*
 * Kernel of the chain killed on entering B = [0, x0], restricted to
 * (x0, N]. Row/column k corresponds to state x0 + 1 + k. Mass that would
 * land above N is dropped.
 */
inline SparseRowMatrix killed_kernel(const ChainSpec &spec, State x0, State N) {
  const State n = N - x0;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(n) * 4);
  for (State x = x0 + 1; x <= N; ++x) {
    const JumpLaw law = spec.law(x);
    for (std::size_t i = 0; i < law.size(); ++i) {
      const State y = x + law.offsets[i];
      if (law.probs[i] == 0.0 || y <= x0 || y > N) {
        continue;
      }
      trip.emplace_back(static_cast<int>(x - x0 - 1), static_cast<int>(y - x0 - 1), law.probs[i]);
    }
  }
  SparseRowMatrix K(static_cast<int>(n), static_cast<int>(n));
  K.setFromTriplets(trip.begin(), trip.end());
  K.makeCompressed();
  return K;
}

} // namespace lamperti

#endif /* LAMPERTI_KERNEL_HPP_ */
