#pragma once

// Mergeable Monte Carlo tallies.
//
// Sums are kept as Shewchuk expansions (non-overlapping partials whose exact
// sum is the exact sum of the inputs), so merging shards in any order or
// grouping gives bit-identical results.

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace sle {

class ExactSum {
 public:
  void add(double v);
  void merge(const ExactSum& other);
  /// Correctly rounded value of the exact sum.
  double value() const;

 private:
  std::vector<double> partials_;
};

/// Master seed plus the half-open run ranges that fed an accumulator.
struct SeedLineage {
  std::uint64_t seed = 0;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> runs;

  void add_range(std::uint64_t lo, std::uint64_t hi);
  /// Throws ParameterError when seeds differ or run ranges overlap.
  void merge(const SeedLineage& other);
  std::uint64_t run_count() const;
};

class EstimatorAccumulator {
 public:
  EstimatorAccumulator() = default;
  explicit EstimatorAccumulator(std::uint64_t seed) { lineage_.seed = seed; }

  void add(double v);
  void merge(const EstimatorAccumulator& other);
  void add_runs(std::uint64_t lo, std::uint64_t hi) { lineage_.add_range(lo, hi); }

  std::uint64_t n() const noexcept { return n_; }
  double sum() const { return sum_.value(); }
  double sum_sq() const { return sum_sq_.value(); }
  double mean() const;
  /// Population variance sum_sq/n - mean^2, clamped at 0.
  double variance() const;
  /// sqrt(variance / n).
  double std_error() const;
  const SeedLineage& lineage() const noexcept { return lineage_; }

 private:
  std::uint64_t n_ = 0;
  ExactSum sum_;
  ExactSum sum_sq_;
  SeedLineage lineage_;
};

}  // namespace sle
