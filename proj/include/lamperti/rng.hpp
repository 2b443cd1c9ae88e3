#ifndef LAMPERTI_RNG_HPP_
#define LAMPERTI_RNG_HPP_

#include <algorithm>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "lamperti/chain_model.hpp"

namespace lamperti {

using Engine = std::mt19937_64;

/// Independent stream `stream` derived from a 64-bit master seed.
inline Engine make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Engine(seq);
}

/// Uniform on [0,1) from the top 53 bits; identical on every platform.
inline double uniform01(Engine &g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

/*
 * Draws one step of a chain by inversion. Cumulative tables are cached for
 * states 0..cache_limit; larger states evaluate the law on demand.
 */
class JumpSampler {
public:
  JumpSampler(const ChainSpec &spec, State cache_limit) : law_(spec.law) {
    std::vector<Row> rows;
    rows.reserve(static_cast<std::size_t>(cache_limit) + 1);
    for (State x = 0; x <= cache_limit; ++x) {
      rows.push_back(make_row(law_(x)));
      width_ = std::max(width_, rows.back().offsets.size());
    }
    // Flat layout: row x occupies slots [x*width, (x+1)*width), padded with
    // cumulative value 2 so the scan stops inside the row.
    offsets_.assign(rows.size() * width_, 0);
    cum_.assign(rows.size() * width_, 2.0);
    for (std::size_t x = 0; x < rows.size(); ++x) {
      for (std::size_t i = 0; i < rows[x].offsets.size(); ++i) {
        offsets_[x * width_ + i] = rows[x].offsets[i];
        cum_[x * width_ + i] = rows[x].cum[i];
      }
    }
    cached_ = rows.size();
  }

  State step(State x, Engine &g) const {
    const double u = uniform01(g);
    if (x >= 0 && static_cast<std::size_t>(x) < cached_) {
      const std::size_t base = static_cast<std::size_t>(x) * width_;
      std::size_t i = 0;
      while (u >= cum_[base + i]) {
        ++i;
      }
      return x + offsets_[base + i];
    }
    const Row r = make_row(law_(x));
    for (std::size_t i = 0; i + 1 < r.cum.size(); ++i) {
      if (u < r.cum[i]) {
        return x + r.offsets[i];
      }
    }
    return x + r.offsets.back();
  }

  State cache_limit() const { return static_cast<State>(cached_) - 1; }

private:
  struct Row {
    std::vector<int> offsets;
    std::vector<double> cum;
  };

  static Row make_row(const JumpLaw &law) {
    Row r;
    double c = 0.0;
    for (std::size_t i = 0; i < law.size(); ++i) {
      if (law.probs[i] <= 0.0) {
        continue;
      }
      c += law.probs[i];
      r.offsets.push_back(law.offsets[i]);
      r.cum.push_back(c);
    }
    if (r.cum.empty()) {
      throw Rejected("JumpSampler: empty jump law");
    }
    r.cum.back() = 1.0; // absorb rounding in the last bucket
    return r;
  }

  std::function<JumpLaw(State)> law_;
  std::size_t width_ = 1;
  std::size_t cached_ = 0;
  std::vector<int> offsets_;
  std::vector<double> cum_;
};

} // namespace lamperti

#endif /* LAMPERTI_RNG_HPP_ */
