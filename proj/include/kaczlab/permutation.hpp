#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kaczlab/errors.hpp"

namespace kaczlab {

// Reproducible 64-bit generator: xoshiro256** whose state is expanded from the
// seed with splitmix64. The algorithm is frozen; changing it changes every
// recorded trace.
class RngState {
public:
  static constexpr std::string_view algorithm = "xoshiro256**/splitmix64";

  explicit RngState(std::uint64_t seed = 0) : seed_(seed) {
    std::uint64_t z = seed;
    for (auto& w : s_)
      w = splitmix64(z);
  }

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, bound) by rejection; bound must be positive.
  std::uint64_t below(std::uint64_t bound) noexcept {
    const std::uint64_t limit = bound * (UINT64_MAX / bound);  // largest multiple of bound
    std::uint64_t r;
    do {
      r = next();
    } while (r >= limit);
    return r % bound;
  }

  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  friend bool operator==(const RngState&, const RngState&) = default;

private:
  static std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

  static std::uint64_t splitmix64(std::uint64_t& x) noexcept {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t s_[4]{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// A bijection on {0, ..., m-1}, stored as the visiting order of rows.
class Permutation {
public:
  Permutation() = default;

  explicit Permutation(std::vector<std::size_t> order) : order_(std::move(order)) {
    std::vector<bool> seen(order_.size(), false);
    for (std::size_t i : order_) {
      if (i >= order_.size() || seen[i])
        throw InputError("sequence is not a permutation of 0..m-1");
      seen[i] = true;
    }
  }

  // Builds from 1-based indices as written in files and on the command line.
  static Permutation from_one_based(std::span<const std::size_t> order) {
    std::vector<std::size_t> zero(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (order[i] == 0)
        throw InputError("1-based permutation contains 0");
      zero[i] = order[i] - 1;
    }
    return Permutation(std::move(zero));
  }

  std::size_t size() const noexcept { return order_.size(); }
  std::size_t operator[](std::size_t i) const noexcept { return order_[i]; }
  std::span<const std::size_t> order() const noexcept { return order_; }
  auto begin() const noexcept { return order_.begin(); }
  auto end() const noexcept { return order_.end(); }

  Permutation reversed() const {
    Permutation r;
    r.order_.assign(order_.rbegin(), order_.rend());
    return r;
  }

  // "(1,2,3)" style, 1-based.
  std::string to_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < order_.size(); ++i) {
      if (i)
        s += ',';
      s += std::to_string(order_[i] + 1);
    }
    return s + ')';
  }

  friend bool operator==(const Permutation&, const Permutation&) = default;
  friend auto operator<=>(const Permutation&, const Permutation&) = default;

private:
  std::vector<std::size_t> order_;
};

inline Permutation identity_permutation(std::size_t m) {
  if (m == 0)
    throw DomainError("permutation size must be at least 1");
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i)
    order[i] = i;
  return Permutation(std::move(order));
}

// Fisher-Yates shuffle of (0, ..., m-1).
inline Permutation random_permutation(std::size_t m, RngState& rng) {
  if (m == 0)
    throw DomainError("permutation size must be at least 1");
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i)
    order[i] = i;
  for (std::size_t i = m - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i + 1));
    std::swap(order[i], order[j]);
  }
  return Permutation(std::move(order));
}

// With-replacement sampling proportional to nonnegative weights, by inverse
// CDF over the prefix sums.
class WeightedSampler {
public:
  explicit WeightedSampler(std::span<const double> weights) : prefix_(weights.size()) {
    if (weights.empty())
      throw DomainError("weighted sampling needs at least one weight");
    double total = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
        throw DomainError("sampling weights must be finite and nonnegative");
      total += weights[i];
      prefix_[i] = total;
    }
    if (total <= 0.0)
      throw DomainError("sampling weights are all zero");
  }

  std::size_t operator()(RngState& rng) const {
    const double target = rng.uniform() * prefix_.back();
    const auto it = std::upper_bound(prefix_.begin(), prefix_.end(), target);
    return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - prefix_.begin(),
                                                             static_cast<std::ptrdiff_t>(prefix_.size()) - 1));
  }

private:
  std::vector<double> prefix_;
};

// Index i with probability w_i / sum(w). Builds the prefix sums on every call;
// use WeightedSampler when drawing repeatedly from the same weights.
inline std::size_t weighted_row_index(std::span<const double> squared_row_norms, RngState& rng) {
  return WeightedSampler(squared_row_norms)(rng);
}

}  // namespace kaczlab
