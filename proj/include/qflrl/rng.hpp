#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qflrl/errors.hpp"

namespace qflrl {

/// Counter-based random stream. A stream is fully determined by
/// (seed, stream_id): per-trajectory streams can be derived independently as
/// RngStream(seed, trajectory_index) without any coordination between
/// workers. One stream is owned by exactly one worker at a time.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();

  /// uniform on [0, 1)
  double uniform01();
  double gaussian(double mu, double sigma);
  int bernoulli(double p);
  int binomial(int n, double p);
  /// index into probs; never returns an index whose probability is zero
  std::size_t categorical(std::span<const double> probs);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

}  // namespace qflrl
