#pragma once

#include "recon/types.hpp"

#include <string>
#include <vector>

namespace recon {

/// Independent prior over contiguous blocks of the parameter vector.
/// Blocks not covered by any entry are flat.
struct PriorBlock {
  enum class Kind { Flat, Gaussian, HalfCauchy };
  Kind kind = Kind::Flat;
  Index begin = 0;
  Index size = 0;
  double scale = 1.0;
};

template <typename Scalar>
class Prior {
 public:
  Prior() = default;
  Prior(Index dim, std::vector<PriorBlock> blocks) : dim_(dim), blocks_(std::move(blocks)) {
    for (const auto& b : blocks_) {
      if (b.begin < 0 || b.size < 0 || b.begin + b.size > dim_)
        throw ShapeError("Prior: block out of range");
      if (b.kind != PriorBlock::Kind::Flat && !(b.scale > 0.0))
        throw ShapeError("Prior: scale must be positive");
    }
  }

  static Prior standard_gaussian(Index dim, double scale = 1.0) {
    return Prior(dim, {{PriorBlock::Kind::Gaussian, 0, dim, scale}});
  }
  static Prior flat(Index dim) { return Prior(dim, {}); }

  Index dim() const { return dim_; }
  const std::vector<PriorBlock>& blocks() const { return blocks_; }

  bool in_domain(const Vector<Scalar>& theta) const {
    for (const auto& b : blocks_)
      if (b.kind == PriorBlock::Kind::HalfCauchy)
        for (Index i = b.begin; i < b.begin + b.size; ++i)
          if (!(theta(i) > Scalar(0))) return false;
    return true;
  }

  /// log pi_0 up to an additive constant.
  Scalar log_density(const Vector<Scalar>& theta) const {
    using std::log1p;
    Scalar acc(0);
    for (const auto& b : blocks_) {
      const Scalar s(b.scale);
      for (Index i = b.begin; i < b.begin + b.size; ++i) {
        const Scalar t = theta(i);
        switch (b.kind) {
          case PriorBlock::Kind::Gaussian: acc -= Scalar(0.5) * t * t / (s * s); break;
          case PriorBlock::Kind::HalfCauchy: acc -= log1p((t / s) * (t / s)); break;
          case PriorBlock::Kind::Flat: break;
        }
      }
    }
    return acc;
  }

  Vector<Scalar> score(const Vector<Scalar>& theta) const {
    Vector<Scalar> g = Vector<Scalar>::Zero(dim_);
    for (const auto& b : blocks_) {
      const Scalar s(b.scale);
      for (Index i = b.begin; i < b.begin + b.size; ++i) {
        const Scalar t = theta(i);
        switch (b.kind) {
          case PriorBlock::Kind::Gaussian: g(i) = -t / (s * s); break;
          case PriorBlock::Kind::HalfCauchy: g(i) = Scalar(-2) * t / (s * s + t * t); break;
          case PriorBlock::Kind::Flat: break;
        }
      }
    }
    return g;
  }

  /// Diagonal of the Hessian of log pi_0; the prior is coordinate-separable.
  Vector<Scalar> hessian_diagonal(const Vector<Scalar>& theta) const {
    Vector<Scalar> h = Vector<Scalar>::Zero(dim_);
    for (const auto& b : blocks_) {
      const Scalar s(b.scale);
      for (Index i = b.begin; i < b.begin + b.size; ++i) {
        const Scalar t = theta(i);
        switch (b.kind) {
          case PriorBlock::Kind::Gaussian: h(i) = Scalar(-1) / (s * s); break;
          case PriorBlock::Kind::HalfCauchy: {
            const Scalar den = s * s + t * t;
            h(i) = Scalar(2) * (t * t - s * s) / (den * den);
            break;
          }
          case PriorBlock::Kind::Flat: break;
        }
      }
    }
    return h;
  }

  Scalar quad(const Vector<Scalar>& theta, const Vector<Scalar>& v) const {
    return (hessian_diagonal(theta).array() * v.array().square()).sum();
  }
  Scalar trace(const Vector<Scalar>& theta) const { return hessian_diagonal(theta).sum(); }

 private:
  Index dim_ = 0;
  std::vector<PriorBlock> blocks_;
};

}  // namespace recon
