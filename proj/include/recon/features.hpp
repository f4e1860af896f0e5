#pragma once

#include "recon/types.hpp"

namespace recon {

/// Regression feature map psi applied to the x-part of a data point.
///  - Identity: psi(x) = x (an intercept, if any, is already a coordinate).
///  - Polynomial: scalar x, psi(x) = (1, x, ..., x^degree).
class FeatureMap {
 public:
  enum class Kind { Identity, Polynomial };

  static FeatureMap identity(Index input_dim) { return FeatureMap(Kind::Identity, input_dim, 1); }
  static FeatureMap polynomial(int degree) {
    if (degree < 1) throw ShapeError("FeatureMap: polynomial degree must be >= 1");
    return FeatureMap(Kind::Polynomial, 1, degree);
  }

  Kind kind() const { return kind_; }
  Index input_dim() const { return input_dim_; }
  int degree() const { return degree_; }
  Index output_dim() const { return kind_ == Kind::Identity ? input_dim_ : Index(degree_ + 1); }

  template <typename Scalar>
  Vector<Scalar> operator()(const Vector<Scalar>& x) const {
    if (kind_ == Kind::Identity) return x;
    Vector<Scalar> psi(degree_ + 1);
    psi(0) = Scalar(1);
    for (int k = 1; k <= degree_; ++k) psi(k) = psi(k - 1) * x(0);
    return psi;
  }

  /// d psi / d x, shape output_dim x input_dim.
  template <typename Scalar>
  Matrix<Scalar> jacobian(const Vector<Scalar>& x) const {
    if (kind_ == Kind::Identity) return Matrix<Scalar>::Identity(input_dim_, input_dim_);
    Matrix<Scalar> j = Matrix<Scalar>::Zero(degree_ + 1, 1);
    Scalar pow_km1(1);
    for (int k = 1; k <= degree_; ++k) {
      j(k, 0) = Scalar(k) * pow_km1;
      pow_km1 *= x(0);
    }
    return j;
  }

 private:
  FeatureMap(Kind kind, Index input_dim, int degree)
      : kind_(kind), input_dim_(input_dim), degree_(degree) {}

  Kind kind_;
  Index input_dim_;
  int degree_;
};

}  // namespace recon
