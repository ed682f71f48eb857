#include "slelab/accumulator.hpp"

#include <algorithm>
#include <cmath>

#include "slelab/errors.hpp"

namespace sle {

void ExactSum::add(double v) {
  if (!std::isfinite(v)) throw NumericalError("non-finite value added to an exact sum");
  std::size_t i = 0;
  for (double y : partials_) {
    if (std::fabs(v) < std::fabs(y)) std::swap(v, y);
    const double hi = v + y;
    const double lo = y - (hi - v);
    if (lo != 0.0) partials_[i++] = lo;
    v = hi;
  }
  partials_.resize(i);
  partials_.push_back(v);
}

void ExactSum::merge(const ExactSum& other) {
  for (double p : other.partials_) add(p);
}

double ExactSum::value() const {
  // Same final rounding as Python's math.fsum.
  if (partials_.empty()) return 0.0;
  std::size_t n = partials_.size();
  double hi = partials_[--n];
  double lo = 0.0;
  while (n > 0) {
    const double x = hi;
    const double y = partials_[--n];
    hi = x + y;
    const double yr = hi - x;
    lo = y - yr;
    if (lo != 0.0) break;
  }
  if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) || (lo > 0.0 && partials_[n - 1] > 0.0))) {
    const double y = lo * 2.0;
    const double x = hi + y;
    if (y == x - hi) hi = x;
  }
  return hi;
}

void SeedLineage::add_range(std::uint64_t lo, std::uint64_t hi) {
  if (hi <= lo) return;
  SeedLineage one;
  one.seed = seed;
  one.runs.emplace_back(lo, hi);
  merge(one);
}

void SeedLineage::merge(const SeedLineage& other) {
  if (other.runs.empty()) return;
  if (!runs.empty() && other.seed != seed) throw ParameterError("cannot merge tallies from different seeds");
  seed = other.seed;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> all = runs;
  all.insert(all.end(), other.runs.begin(), other.runs.end());
  std::sort(all.begin(), all.end());
  runs.clear();
  for (const auto& r : all) {
    if (!runs.empty() && r.first < runs.back().second) throw ParameterError("run ranges overlap in merge");
    if (!runs.empty() && r.first == runs.back().second) {
      runs.back().second = r.second;
    } else {
      runs.push_back(r);
    }
  }
}

std::uint64_t SeedLineage::run_count() const {
  std::uint64_t c = 0;
  for (const auto& r : runs) c += r.second - r.first;
  return c;
}

void EstimatorAccumulator::add(double v) {
  ++n_;
  sum_.add(v);
  sum_sq_.add(v * v);
}

void EstimatorAccumulator::merge(const EstimatorAccumulator& other) {
  if (n_ > 0 && other.n_ > 0 && !lineage_.runs.empty() && !other.lineage_.runs.empty() &&
      lineage_.seed != other.lineage_.seed) {
    throw ParameterError("cannot merge tallies from different seeds");
  }
  lineage_.merge(other.lineage_);
  n_ += other.n_;
  sum_.merge(other.sum_);
  sum_sq_.merge(other.sum_sq_);
}

double EstimatorAccumulator::mean() const {
  if (n_ == 0) throw StateError("mean of an empty accumulator");
  return sum() / static_cast<double>(n_);
}

double EstimatorAccumulator::variance() const {
  const double m = mean();
  return std::max(0.0, sum_sq() / static_cast<double>(n_) - m * m);
}

double EstimatorAccumulator::std_error() const { return std::sqrt(variance() / static_cast<double>(n_)); }

}  // namespace sle
