#include "qflrl/rng.hpp"

#include <cmath>
#include <numbers>

namespace qflrl {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  base_ = mix64(seed + kGolden) ^ mix64(stream_id + 0x6a09e667f3bcc909ULL);
}

std::uint64_t RngStream::next_u64() {
  return mix64(base_ + (++counter_) * kGolden);
}

double RngStream::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::gaussian(double mu, double sigma) {
  if (!(sigma > 0.0)) throw InvalidInput("gaussian: sigma must be positive");
  // Box-Muller; u1 shifted into (0,1] so the log is finite.
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  return mu + sigma * r * std::cos(2.0 * std::numbers::pi * u2);
}

int RngStream::bernoulli(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("bernoulli: p outside [0,1]");
  return uniform01() < p ? 1 : 0;
}

int RngStream::binomial(int n, double p) {
  if (n < 0) throw InvalidInput("binomial: n must be non-negative");
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("binomial: p outside [0,1]");
  int k = 0;
  for (int i = 0; i < n; ++i) k += uniform01() < p ? 1 : 0;
  return k;
}

std::size_t RngStream::categorical(std::span<const double> probs) {
  if (probs.empty()) throw InvalidInput("categorical: empty probability vector");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw InvalidInput("categorical: negative probability");
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-9)
    throw InvalidInput("categorical: probabilities do not sum to 1");
  const double u = uniform01() * sum;
  double acc = 0.0;
  std::size_t last_positive = 0;
  bool seen_positive = false;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) {
      acc += probs[i];
      last_positive = i;
      seen_positive = true;
      if (u < acc) return i;
    }
  }
  if (!seen_positive) throw InvalidInput("categorical: all probabilities are zero");
  return last_positive;  // u landed on the rounding tail
}

}  // namespace qflrl
