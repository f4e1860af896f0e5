#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace recon {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Index = Eigen::Index;

// Input that violates a shape or length contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Parameter or data point outside a model's domain (e.g. sigma <= 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// File missing, unreadable or malformed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Run configuration rejected; the message names the offending key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Optimisation produced a non-finite objective or gradient.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sum in a fixed binary tree over the index range. The grouping depends only
/// on the length, so results are reproducible regardless of how the terms were
/// produced.
template <typename Scalar>
Scalar pairwise_sum(std::span<const Scalar> terms) {
  const std::size_t n = terms.size();
  if (n == 0) return Scalar(0);
  if (n <= 8) {
    Scalar acc(0);
    for (const Scalar& t : terms) acc += t;
    return acc;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(terms.first(half)) + pairwise_sum(terms.subspan(half));
}

template <typename Scalar>
Scalar pairwise_sum(const std::vector<Scalar>& terms) {
  return pairwise_sum(std::span<const Scalar>(terms.data(), terms.size()));
}

/// Elementwise fixed-tree sum of equally shaped dense blocks.
template <typename Dense>
Dense pairwise_sum_dense(std::span<const Dense> blocks) {
  const std::size_t n = blocks.size();
  if (n == 1) return blocks[0];
  if (n == 0) throw ShapeError("pairwise_sum_dense: empty input");
  const std::size_t half = n / 2;
  Dense left = pairwise_sum_dense(blocks.first(half));
  left += pairwise_sum_dense(blocks.subspan(half));
  return left;
}

template <typename Dense>
Dense pairwise_sum_dense(const std::vector<Dense>& blocks) {
  return pairwise_sum_dense(std::span<const Dense>(blocks.data(), blocks.size()));
}

/// Mean and standard error of the mean over per-sample values.
template <typename Scalar>
struct SampleMoments {
  Scalar mean{0};
  Scalar std_error{0};
};

template <typename Scalar>
SampleMoments<Scalar> sample_moments(const std::vector<Scalar>& values) {
  SampleMoments<Scalar> out;
  const auto n = static_cast<Scalar>(values.size());
  if (values.empty()) return out;
  out.mean = pairwise_sum(values) / n;
  if (values.size() < 2) return out;
  std::vector<Scalar> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const Scalar dev = values[i] - out.mean;
    sq[i] = dev * dev;
  }
  const Scalar var = pairwise_sum(sq) / (n - Scalar(1));
  using std::sqrt;
  out.std_error = sqrt(var / n);
  return out;
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace recon
