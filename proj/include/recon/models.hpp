#pragma once

#include "recon/features.hpp"
#include "recon/measures.hpp"
#include "recon/priors.hpp"
#include "recon/types.hpp"

#include <cmath>
#include <algorithm>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace recon {

/// Mean and noise scale used to initialise a response coordinate from a
/// parameter value.
template <typename Scalar>
struct Predictive {
  Scalar mean{0};
  Scalar noise_scale{0};
};

namespace detail {

template <typename Scalar>
Vector<Scalar> x_part(const DataLayout& layout, const Vector<Scalar>& z) {
  Vector<Scalar> x(layout.x_dim());
  for (Index j = 0; j < layout.x_dim(); ++j) x(j) = z(layout.x_coords()[static_cast<std::size_t>(j)]);
  return x;
}

template <typename Scalar>
Scalar y_value(const DataLayout& layout, const Vector<Scalar>& z) {
  return layout.has_y() ? z(*layout.y_coord()) : Scalar(0);
}

/// Derivative of (psi(x), y) with respect to one free data coordinate.
template <typename Scalar>
struct CoordDerivative {
  Vector<Scalar> dpsi;
  Scalar dy{0};
};

template <typename Scalar>
std::vector<CoordDerivative<Scalar>> free_coord_derivatives(const DataLayout& layout, const FeatureMap& features,
                                                            const Vector<Scalar>& x) {
  const Matrix<Scalar> jac = features.jacobian(x);
  std::vector<CoordDerivative<Scalar>> out;
  out.reserve(layout.free_coords().size());
  for (Index c : layout.free_coords()) {
    CoordDerivative<Scalar> d;
    d.dpsi = Vector<Scalar>::Zero(features.output_dim());
    const auto& xs = layout.x_coords();
    for (std::size_t j = 0; j < xs.size(); ++j)
      if (xs[j] == c) d.dpsi = jac.col(static_cast<Index>(j));
    if (layout.has_y() && *layout.y_coord() == c) d.dy = Scalar(1);
    out.push_back(std::move(d));
  }
  return out;
}

inline void check_size(Index got, Index want, const char* what) {
  if (got != want)
    throw ShapeError(std::string(what) + ": expected length " + std::to_string(want) + ", got " +
                     std::to_string(got));
}

}  // namespace detail

/// Everything the attack needs from one (theta, z) pair. `curvature` is the
/// Hessian trace, or the mean of v^T H v over a block of slice directions.
template <typename Scalar>
struct PointTerms {
  Vector<Scalar> score;           // param_dim
  Matrix<Scalar> jac_score;       // param_dim x free_dim
  Scalar curvature{0};
  Vector<Scalar> curvature_grad;  // free_dim
};

/// Bayesian likelihood model l(theta, x) with prior pi_0. Public callbacks
/// validate shapes and the parameter domain, then dispatch to the model.
///
/// Data derivatives are taken with respect to the free coordinates of the
/// layout, in the order of DataLayout::free_coords().
template <typename Scalar>
class LikelihoodModel {
 public:
  using Vec = Vector<Scalar>;
  using Mat = Matrix<Scalar>;

  virtual ~LikelihoodModel() = default;

  virtual std::string name() const = 0;
  virtual Index param_dim() const = 0;
  virtual std::vector<std::string> param_names() const {
    std::vector<std::string> n;
    for (Index i = 0; i < param_dim(); ++i) n.push_back("theta." + std::to_string(i + 1));
    return n;
  }

  const DataLayout& layout() const { return layout_; }
  const Prior<Scalar>& prior() const { return prior_; }

  bool in_domain(const Vec& theta) const {
    return theta.size() == param_dim() && theta.allFinite() && prior_.in_domain(theta) && domain_ok(theta);
  }

  Scalar log_lik(const Vec& theta, const Vec& x) const {
    check(theta, x);
    return do_log_lik(theta, x);
  }
  Vec score(const Vec& theta, const Vec& x) const {
    check(theta, x);
    return do_score(theta, x);
  }
  Scalar hess_quad(const Vec& theta, const Vec& x, const Vec& v) const {
    check(theta, x);
    detail::check_size(v.size(), param_dim(), "hess_quad direction");
    return do_hess_quad(theta, x, v);
  }
  Scalar hess_trace(const Vec& theta, const Vec& x) const {
    check(theta, x);
    return do_hess_trace(theta, x);
  }
  /// d(score)/d(data), param_dim x free_dim.
  Mat jac_score_data(const Vec& theta, const Vec& x) const {
    check(theta, x);
    return do_jac_score_data(theta, x);
  }
  Vec grad_quad_data(const Vec& theta, const Vec& x, const Vec& v) const {
    check(theta, x);
    detail::check_size(v.size(), param_dim(), "grad_quad_data direction");
    return do_grad_quad_data(theta, x, v);
  }
  Vec grad_trace_data(const Vec& theta, const Vec& x) const {
    check(theta, x);
    return do_grad_trace_data(theta, x);
  }

  /// Batched evaluation for the attack loop. `slices` (rows are directions)
  /// selects the sliced curvature; nullptr selects the trace.
  void point_terms(const Vec& theta, const Vec& x, const Eigen::Ref<const Mat>* slices, PointTerms<Scalar>& out) const {
    check(theta, x);
    if (slices && slices->cols() != param_dim()) throw ShapeError("point_terms: slice width != param_dim");
    do_point_terms(theta, x, slices, out);
  }

  Scalar log_prior(const Vec& theta) const {
    check_theta(theta);
    return prior_.log_density(theta);
  }

  /// Response initialisation; empty for models without a response coordinate.
  virtual std::optional<Predictive<Scalar>> predictive(const Vec& /*theta*/, const Vec& /*x*/) const {
    return std::nullopt;
  }

  void check_theta(const Vec& theta) const {
    detail::check_size(theta.size(), param_dim(), "parameter");
    if (!in_domain(theta)) throw DomainError(name() + ": parameter outside model domain");
  }

 protected:
  LikelihoodModel(DataLayout layout, Prior<Scalar> prior) : layout_(std::move(layout)), prior_(std::move(prior)) {}

  virtual bool domain_ok(const Vec& /*theta*/) const { return true; }

  virtual Scalar do_log_lik(const Vec& theta, const Vec& x) const = 0;
  virtual Vec do_score(const Vec& theta, const Vec& x) const = 0;
  virtual Scalar do_hess_quad(const Vec& theta, const Vec& x, const Vec& v) const = 0;
  virtual Scalar do_hess_trace(const Vec& theta, const Vec& x) const = 0;
  virtual Mat do_jac_score_data(const Vec& theta, const Vec& x) const = 0;
  virtual Vec do_grad_quad_data(const Vec& theta, const Vec& x, const Vec& v) const = 0;
  virtual Vec do_grad_trace_data(const Vec& theta, const Vec& x) const = 0;

  // Composes the single-purpose callbacks; models override it with fused code.
  virtual void do_point_terms(const Vec& theta, const Vec& x, const Eigen::Ref<const Mat>* slices,
                              PointTerms<Scalar>& out) const {
    out.score = do_score(theta, x);
    out.jac_score = do_jac_score_data(theta, x);
    if (!slices) {
      out.curvature = do_hess_trace(theta, x);
      out.curvature_grad = do_grad_trace_data(theta, x);
      return;
    }
    const Index L = slices->rows();
    out.curvature = Scalar(0);
    out.curvature_grad = Vec::Zero(layout_.free_dim());
    for (Index l = 0; l < L; ++l) {
      const Vec v = slices->row(l).transpose();
      out.curvature += do_hess_quad(theta, x, v);
      out.curvature_grad += do_grad_quad_data(theta, x, v);
    }
    out.curvature /= Scalar(L);
    out.curvature_grad /= Scalar(L);
  }

 private:
  void check(const Vec& theta, const Vec& x) const {
    check_theta(theta);
    detail::check_size(x.size(), layout_.dim(), "data point");
  }

  DataLayout layout_;
  Prior<Scalar> prior_;
};

/// l(theta, x) = exp(-|theta - x|^2 / 2) with a N(0, I) prior.
template <typename Scalar>
class GaussianMeanLocation final : public LikelihoodModel<Scalar> {
  using Base = LikelihoodModel<Scalar>;
  using typename Base::Mat;
  using typename Base::Vec;

 public:
  explicit GaussianMeanLocation(Index dim, std::vector<std::string> names = {})
      : Base(DataLayout::pure_x(dim, std::move(names)), Prior<Scalar>::standard_gaussian(dim)), dim_(dim) {}

  std::string name() const override { return "gaussian_mean"; }
  Index param_dim() const override { return dim_; }

 protected:
  Scalar do_log_lik(const Vec& theta, const Vec& x) const override {
    return Scalar(-0.5) * (theta - x).squaredNorm();
  }
  Vec do_score(const Vec& theta, const Vec& x) const override { return x - theta; }
  Scalar do_hess_quad(const Vec&, const Vec&, const Vec& v) const override { return -v.squaredNorm(); }
  Scalar do_hess_trace(const Vec&, const Vec&) const override { return -Scalar(dim_); }
  Mat do_jac_score_data(const Vec&, const Vec&) const override { return Mat::Identity(dim_, dim_); }
  Vec do_grad_quad_data(const Vec&, const Vec&, const Vec&) const override { return Vec::Zero(dim_); }
  Vec do_grad_trace_data(const Vec&, const Vec&) const override { return Vec::Zero(dim_); }

  void do_point_terms(const Vec& theta, const Vec& x, const Eigen::Ref<const Mat>* slices,
                      PointTerms<Scalar>& out) const override {
    out.score = x - theta;
    out.jac_score.setIdentity(dim_, dim_);
    out.curvature = slices ? -slices->rowwise().squaredNorm().mean() : -Scalar(dim_);
    out.curvature_grad.setZero(dim_);
  }

 private:
  Index dim_;
};

/// Unit-noise Gaussian regression on features psi(x) with a N(0, s^2 I) prior:
/// log l = -(<theta, psi(x)> - y)^2 / 2.
template <typename Scalar>
class BayesLinReg final : public LikelihoodModel<Scalar> {
  using Base = LikelihoodModel<Scalar>;
  using typename Base::Mat;
  using typename Base::Vec;

 public:
  BayesLinReg(FeatureMap features, DataLayout layout, double prior_scale = 1.0)
      : Base(std::move(layout), Prior<Scalar>::standard_gaussian(features.output_dim(), prior_scale)),
        features_(features) {
    if (!this->layout().has_y()) throw ShapeError("BayesLinReg: layout needs a response coordinate");
    if (this->layout().x_dim() != features_.input_dim())
      throw ShapeError("BayesLinReg: feature map input does not match layout x-part");
  }

  std::string name() const override { return "bayes_linreg"; }
  Index param_dim() const override { return features_.output_dim(); }
  const FeatureMap& features() const { return features_; }

  std::optional<Predictive<Scalar>> predictive(const Vec& theta, const Vec& x) const override {
    return Predictive<Scalar>{theta.dot(psi(x)), Scalar(1)};
  }

 protected:
  Scalar do_log_lik(const Vec& theta, const Vec& x) const override {
    const Scalar r = residual(theta, x);
    return Scalar(-0.5) * r * r;
  }
  Vec do_score(const Vec& theta, const Vec& x) const override { return -psi(x) * residual(theta, x); }
  Scalar do_hess_quad(const Vec&, const Vec& x, const Vec& v) const override {
    const Scalar a = v.dot(psi(x));
    return -a * a;
  }
  Scalar do_hess_trace(const Vec&, const Vec& x) const override { return -psi(x).squaredNorm(); }

  Mat do_jac_score_data(const Vec& theta, const Vec& x) const override {
    const Vec p = psi(x);
    const Scalar r = residual(theta, x);
    const auto ds = derivs(x);
    Mat j(param_dim(), static_cast<Index>(ds.size()));
    for (std::size_t k = 0; k < ds.size(); ++k) {
      const Scalar dr = theta.dot(ds[k].dpsi) - ds[k].dy;
      j.col(static_cast<Index>(k)) = -ds[k].dpsi * r - p * dr;
    }
    return j;
  }
  Vec do_grad_quad_data(const Vec&, const Vec& x, const Vec& v) const override {
    const Scalar a = v.dot(psi(x));
    const auto ds = derivs(x);
    Vec g(static_cast<Index>(ds.size()));
    for (std::size_t k = 0; k < ds.size(); ++k) g(static_cast<Index>(k)) = Scalar(-2) * a * v.dot(ds[k].dpsi);
    return g;
  }
  Vec do_grad_trace_data(const Vec&, const Vec& x) const override {
    const Vec p = psi(x);
    const auto ds = derivs(x);
    Vec g(static_cast<Index>(ds.size()));
    for (std::size_t k = 0; k < ds.size(); ++k) g(static_cast<Index>(k)) = Scalar(-2) * p.dot(ds[k].dpsi);
    return g;
  }

  void do_point_terms(const Vec& theta, const Vec& x, const Eigen::Ref<const Mat>* slices,
                      PointTerms<Scalar>& out) const override {
    const Vec p = psi(x);
    const Scalar r = theta.dot(p) - detail::y_value(this->layout(), x);
    const auto ds = derivs(x);
    const Index pf = static_cast<Index>(ds.size());
    out.score = -p * r;
    out.jac_score.resize(param_dim(), pf);
    for (Index k = 0; k < pf; ++k) {
      const auto& dk = ds[static_cast<std::size_t>(k)];
      out.jac_score.col(k) = -dk.dpsi * r - p * (theta.dot(dk.dpsi) - dk.dy);
    }
    out.curvature_grad.resize(pf);
    if (!slices) {
      out.curvature = -p.squaredNorm();
      for (Index k = 0; k < pf; ++k) out.curvature_grad(k) = Scalar(-2) * p.dot(ds[static_cast<std::size_t>(k)].dpsi);
      return;
    }
    // mean_l (v_l . psi)(v_l . dpsi) via the projections V psi and V dpsi
    const Vec proj = (*slices) * p;
    const Scalar L(slices->rows());
    out.curvature = -proj.squaredNorm() / L;
    for (Index k = 0; k < pf; ++k)
      out.curvature_grad(k) = Scalar(-2) * proj.dot((*slices) * ds[static_cast<std::size_t>(k)].dpsi) / L;
  }

 private:
  Vec psi(const Vec& x) const { return features_(detail::x_part(this->layout(), x)); }
  Scalar residual(const Vec& theta, const Vec& x) const {
    return theta.dot(psi(x)) - detail::y_value(this->layout(), x);
  }
  std::vector<detail::CoordDerivative<Scalar>> derivs(const Vec& x) const {
    return detail::free_coord_derivatives(this->layout(), features_, detail::x_part(this->layout(), x));
  }

  FeatureMap features_;
};

/// Gaussian regression with unknown noise scale, theta = (beta, sigma):
///   l = (2 pi sigma^2)^{-1/2} exp(-(<beta, x> - y)^2 / (2 sigma^2)),
/// flat prior on beta and a half-Cauchy prior on sigma.
template <typename Scalar>
class KidScoreModel final : public LikelihoodModel<Scalar> {
  using Base = LikelihoodModel<Scalar>;
  using typename Base::Mat;
  using typename Base::Vec;

 public:
  explicit KidScoreModel(DataLayout layout, double sigma_scale = 2.5)
      : Base(layout, make_prior(layout.x_dim(), sigma_scale)),
        features_(FeatureMap::identity(layout.x_dim())),
        beta_dim_(layout.x_dim()) {
    if (!this->layout().has_y()) throw ShapeError("KidScoreModel: layout needs a response coordinate");
    const auto& xs = this->layout().x_coords();
    for (Index c : this->layout().free_coords()) {
      auto it = std::find(xs.begin(), xs.end(), c);
      free_x_pos_.push_back(it == xs.end() ? Index(-1) : static_cast<Index>(it - xs.begin()));
    }
  }

  /// Coordinates (1, mother score, child score) with a frozen intercept.
  static DataLayout default_layout() { return DataLayout::regression(1, true, {"intercept", "mom", "kid"}); }

  std::string name() const override { return "kidscore"; }
  Index param_dim() const override { return beta_dim_ + 1; }
  std::vector<std::string> param_names() const override {
    std::vector<std::string> n;
    for (Index i = 0; i < beta_dim_; ++i) n.push_back("beta." + std::to_string(i + 1));
    n.push_back("sigma");
    return n;
  }

  std::optional<Predictive<Scalar>> predictive(const Vec& theta, const Vec& x) const override {
    return Predictive<Scalar>{theta.head(beta_dim_).dot(xp(x)), theta(beta_dim_)};
  }

 protected:
  bool domain_ok(const Vec& theta) const override { return theta(beta_dim_) > Scalar(0); }

  Scalar do_log_lik(const Vec& theta, const Vec& x) const override {
    using std::log;
    const Scalar s = theta(beta_dim_);
    const Scalar r = residual(theta, x);
    return Scalar(-0.5) * log(Scalar(2) * std::numbers::pi_v<Scalar>) - log(s) - r * r / (Scalar(2) * s * s);
  }

  Vec do_score(const Vec& theta, const Vec& x) const override {
    const Scalar s = theta(beta_dim_);
    const Scalar r = residual(theta, x);
    Vec g(param_dim());
    g.head(beta_dim_) = -(r / (s * s)) * xp(x);
    g(beta_dim_) = r * r / (s * s * s) - Scalar(1) / s;
    return g;
  }

  Scalar do_hess_quad(const Vec& theta, const Vec& x, const Vec& v) const override {
    const Scalar s = theta(beta_dim_);
    const Scalar r = residual(theta, x);
    const Scalar a = v.head(beta_dim_).dot(xp(x));
    const Scalar vs = v(beta_dim_);
    const Scalar s2 = s * s;
    return -a * a / s2 + Scalar(4) * vs * r * a / (s2 * s) + vs * vs * (Scalar(1) / s2 - Scalar(3) * r * r / (s2 * s2));
  }

  Scalar do_hess_trace(const Vec& theta, const Vec& x) const override {
    const Scalar s = theta(beta_dim_);
    const Scalar r = residual(theta, x);
    const Scalar s2 = s * s;
    return -xp(x).squaredNorm() / s2 + Scalar(1) / s2 - Scalar(3) * r * r / (s2 * s2);
  }

  Mat do_jac_score_data(const Vec& theta, const Vec& x) const override {
    const Scalar s = theta(beta_dim_);
    const Scalar r = residual(theta, x);
    const Vec xv = xp(x);
    const auto beta = theta.head(beta_dim_);
    const auto ds = derivs(x);
    Mat j(param_dim(), static_cast<Index>(ds.size()));
    for (std::size_t k = 0; k < ds.size(); ++k) {
      const Scalar dr = beta.dot(ds[k].dpsi) - ds[k].dy;
      auto col = j.col(static_cast<Index>(k));
      col.head(beta_dim_) = -(dr * xv + r * ds[k].dpsi) / (s * s);
      col(beta_dim_) = Scalar(2) * r * dr / (s * s * s);
    }
    return j;
  }

  Vec do_grad_quad_data(const Vec& theta, const Vec& x, const Vec& v) const override {
    const Scalar s = theta(beta_dim_);
    const Scalar r = residual(theta, x);
    const auto vb = v.head(beta_dim_);
    const Scalar vs = v(beta_dim_);
    const Scalar a = vb.dot(xp(x));
    const auto beta = theta.head(beta_dim_);
    const Scalar s2 = s * s;
    const auto ds = derivs(x);
    Vec g(static_cast<Index>(ds.size()));
    for (std::size_t k = 0; k < ds.size(); ++k) {
      const Scalar dr = beta.dot(ds[k].dpsi) - ds[k].dy;
      const Scalar da = vb.dot(ds[k].dpsi);
      g(static_cast<Index>(k)) = Scalar(-2) * a * da / s2 + Scalar(4) * vs * (dr * a + r * da) / (s2 * s) -
                                 Scalar(6) * vs * vs * r * dr / (s2 * s2);
    }
    return g;
  }

  Vec do_grad_trace_data(const Vec& theta, const Vec& x) const override {
    const Scalar s = theta(beta_dim_);
    const Scalar r = residual(theta, x);
    const Vec xv = xp(x);
    const auto beta = theta.head(beta_dim_);
    const Scalar s2 = s * s;
    const auto ds = derivs(x);
    Vec g(static_cast<Index>(ds.size()));
    for (std::size_t k = 0; k < ds.size(); ++k) {
      const Scalar dr = beta.dot(ds[k].dpsi) - ds[k].dy;
      g(static_cast<Index>(k)) = Scalar(-2) * xv.dot(ds[k].dpsi) / s2 - Scalar(6) * r * dr / (s2 * s2);
    }
    return g;
  }

  void do_point_terms(const Vec& theta, const Vec& x, const Eigen::Ref<const Mat>* slices,
                      PointTerms<Scalar>& out) const override {
    const Index k = beta_dim_;
    const Index pf = this->layout().free_dim();
    const auto& xs = this->layout().x_coords();
    const Scalar s = theta(k);
    const Scalar s2 = s * s;
    Scalar r = -detail::y_value(this->layout(), x);
    Scalar xx(0);
    for (Index j = 0; j < k; ++j) {
      const Scalar xj = x(xs[static_cast<std::size_t>(j)]);
      r += theta(j) * xj;
      xx += xj * xj;
    }
    const Scalar i2 = Scalar(1) / s2, i3 = i2 / s, i4 = i2 * i2;
    out.score.resize(k + 1);
    for (Index j = 0; j < k; ++j) out.score(j) = -(r * i2) * x(xs[static_cast<std::size_t>(j)]);
    out.score(k) = r * r * i3 - s * i2;

    // d r / d(free slot q): beta_j for x-coordinate j, -1 for the response
    out.jac_score.resize(k + 1, pf);
    for (Index q = 0; q < pf; ++q) {
      const Index j = free_x_pos_[static_cast<std::size_t>(q)];
      const Scalar dr = j >= 0 ? theta(j) : Scalar(-1);
      for (Index i = 0; i < k; ++i)
        out.jac_score(i, q) = -(dr * x(xs[static_cast<std::size_t>(i)]) + (i == j ? r : Scalar(0))) * i2;
      out.jac_score(k, q) = Scalar(2) * r * dr * i3;
    }

    out.curvature_grad.setZero(pf);
    if (!slices) {
      out.curvature = (Scalar(1) - xx) * i2 - Scalar(3) * r * r * i4;
      for (Index q = 0; q < pf; ++q) {
        const Index j = free_x_pos_[static_cast<std::size_t>(q)];
        const Scalar dr = j >= 0 ? theta(j) : Scalar(-1);
        const Scalar dxx = j >= 0 ? Scalar(2) * x(xs[static_cast<std::size_t>(j)]) : Scalar(0);
        out.curvature_grad(q) = -dxx * i2 - Scalar(6) * r * dr * i4;
      }
      return;
    }
    const Index L = slices->rows();
    const Scalar c0 = i2 - Scalar(3) * r * r * i4;
    Scalar acc(0);
    for (Index l = 0; l < L; ++l) {
      Scalar a(0);
      for (Index j = 0; j < k; ++j) a += (*slices)(l, j) * x(xs[static_cast<std::size_t>(j)]);
      const Scalar vs = (*slices)(l, k);
      acc += -a * a * i2 + Scalar(4) * vs * r * a * i3 + vs * vs * c0;
      // gradient in (a, r): d/da and d/dr of the quadratic form
      const Scalar ga = Scalar(-2) * a * i2 + Scalar(4) * vs * r * i3;
      const Scalar gr = Scalar(4) * vs * a * i3 - Scalar(6) * vs * vs * r * i4;
      for (Index q = 0; q < pf; ++q) {
        const Index j = free_x_pos_[static_cast<std::size_t>(q)];
        out.curvature_grad(q) += j >= 0 ? ga * (*slices)(l, j) + gr * theta(j) : -gr;
      }
    }
    out.curvature = acc / Scalar(L);
    out.curvature_grad /= Scalar(L);
  }

 private:
  static Prior<Scalar> make_prior(Index beta_dim, double sigma_scale) {
    return Prior<Scalar>(beta_dim + 1, {{PriorBlock::Kind::HalfCauchy, beta_dim, 1, sigma_scale}});
  }
  Vec xp(const Vec& x) const { return detail::x_part(this->layout(), x); }
  Scalar residual(const Vec& theta, const Vec& x) const {
    return theta.head(beta_dim_).dot(xp(x)) - detail::y_value(this->layout(), x);
  }
  std::vector<detail::CoordDerivative<Scalar>> derivs(const Vec& x) const {
    return detail::free_coord_derivatives(this->layout(), features_, xp(x));
  }

  FeatureMap features_;
  Index beta_dim_;
  std::vector<Index> free_x_pos_;  // x-part position of each free slot, -1 for the response
};

/// Per-datum training loss l(theta, x) with ridge regulariser
/// R(theta) = lambda |theta|^2.
template <typename Scalar>
class LossModel {
 public:
  using Vec = Vector<Scalar>;
  using Mat = Matrix<Scalar>;

  virtual ~LossModel() = default;

  virtual std::string name() const = 0;
  Index param_dim() const { return features_.output_dim(); }
  const DataLayout& layout() const { return layout_; }
  const FeatureMap& features() const { return features_; }
  double ridge() const { return ridge_; }

  Scalar value(const Vec& theta, const Vec& x) const {
    check(theta, x);
    return do_value(theta, x);
  }
  Vec grad_theta(const Vec& theta, const Vec& x) const {
    check(theta, x);
    return do_grad_theta(theta, x);
  }
  /// d(grad_theta)/d(data), param_dim x free_dim.
  Mat jac_data(const Vec& theta, const Vec& x) const {
    check(theta, x);
    return do_jac_data(theta, x);
  }
  Mat hess_theta(const Vec& theta, const Vec& x) const {
    check(theta, x);
    return do_hess_theta(theta, x);
  }

  Scalar regularizer(const Vec& theta) const { return Scalar(ridge_) * theta.squaredNorm(); }
  Vec regularizer_grad(const Vec& theta) const { return Scalar(2 * ridge_) * theta; }
  Mat regularizer_hess() const { return Scalar(2 * ridge_) * Mat::Identity(param_dim(), param_dim()); }

  virtual Predictive<Scalar> predictive(const Vec& theta, const Vec& x) const = 0;

 protected:
  LossModel(FeatureMap features, DataLayout layout, double ridge)
      : features_(features), layout_(std::move(layout)), ridge_(ridge) {
    if (!layout_.has_y()) throw ShapeError(std::string("loss model: layout needs a response coordinate"));
    if (layout_.x_dim() != features_.input_dim())
      throw ShapeError("loss model: feature map input does not match layout x-part");
    if (!(ridge_ >= 0.0)) throw ShapeError("loss model: ridge must be >= 0");
  }

  Vec psi(const Vec& x) const { return features_(detail::x_part(layout_, x)); }
  Scalar y(const Vec& x) const { return detail::y_value(layout_, x); }
  std::vector<detail::CoordDerivative<Scalar>> derivs(const Vec& x) const {
    return detail::free_coord_derivatives(layout_, features_, detail::x_part(layout_, x));
  }

  virtual Scalar do_value(const Vec& theta, const Vec& x) const = 0;
  virtual Vec do_grad_theta(const Vec& theta, const Vec& x) const = 0;
  virtual Mat do_jac_data(const Vec& theta, const Vec& x) const = 0;
  virtual Mat do_hess_theta(const Vec& theta, const Vec& x) const = 0;

 private:
  void check(const Vec& theta, const Vec& x) const {
    detail::check_size(theta.size(), param_dim(), "parameter");
    detail::check_size(x.size(), layout_.dim(), "data point");
  }

  FeatureMap features_;
  DataLayout layout_;
  double ridge_;
};

/// l = (<theta, psi(x)> - y)^2.
template <typename Scalar>
class SquaredErrorLoss final : public LossModel<Scalar> {
  using Base = LossModel<Scalar>;
  using typename Base::Mat;
  using typename Base::Vec;

 public:
  SquaredErrorLoss(FeatureMap features, DataLayout layout, double ridge = 0.0)
      : Base(features, std::move(layout), ridge) {}

  std::string name() const override { return "squared_loss"; }

  Predictive<Scalar> predictive(const Vec& theta, const Vec& x) const override {
    return {theta.dot(this->psi(x)), Scalar(1)};
  }

 protected:
  Scalar do_value(const Vec& theta, const Vec& x) const override {
    const Scalar r = theta.dot(this->psi(x)) - this->y(x);
    return r * r;
  }
  Vec do_grad_theta(const Vec& theta, const Vec& x) const override {
    const Vec p = this->psi(x);
    return Scalar(2) * (theta.dot(p) - this->y(x)) * p;
  }
  Mat do_jac_data(const Vec& theta, const Vec& x) const override {
    const Vec p = this->psi(x);
    const Scalar r = theta.dot(p) - this->y(x);
    const auto ds = this->derivs(x);
    Mat j(this->param_dim(), static_cast<Index>(ds.size()));
    for (std::size_t k = 0; k < ds.size(); ++k) {
      const Scalar dr = theta.dot(ds[k].dpsi) - ds[k].dy;
      j.col(static_cast<Index>(k)) = Scalar(2) * (ds[k].dpsi * r + p * dr);
    }
    return j;
  }
  Mat do_hess_theta(const Vec&, const Vec& x) const override {
    const Vec p = this->psi(x);
    return Scalar(2) * p * p.transpose();
  }
};

/// l = log(1 + exp(-y <theta, psi(x)>)), labels y in {-1, +1}.
template <typename Scalar>
class LogisticLoss final : public LossModel<Scalar> {
  using Base = LossModel<Scalar>;
  using typename Base::Mat;
  using typename Base::Vec;

 public:
  LogisticLoss(FeatureMap features, DataLayout layout, double ridge = 0.0)
      : Base(features, std::move(layout), ridge) {}

  std::string name() const override { return "logistic_loss"; }

  Predictive<Scalar> predictive(const Vec& theta, const Vec& x) const override {
    using std::tanh;
    return {tanh(theta.dot(this->psi(x)) / Scalar(2)), Scalar(0)};
  }

 protected:
  // sigma(-y m), the derivative of the loss with respect to -y m
  static Scalar weight(Scalar y, Scalar m) {
    using std::exp;
    return Scalar(1) / (Scalar(1) + exp(y * m));
  }

  Scalar do_value(const Vec& theta, const Vec& x) const override {
    using std::exp;
    using std::log1p;
    const Scalar t = -this->y(x) * theta.dot(this->psi(x));
    return t > Scalar(0) ? t + log1p(exp(-t)) : log1p(exp(t));
  }
  Vec do_grad_theta(const Vec& theta, const Vec& x) const override {
    const Vec p = this->psi(x);
    const Scalar yv = this->y(x);
    return -yv * weight(yv, theta.dot(p)) * p;
  }
  Mat do_jac_data(const Vec& theta, const Vec& x) const override {
    const Vec p = this->psi(x);
    const Scalar yv = this->y(x);
    const Scalar m = theta.dot(p);
    const Scalar q = weight(yv, m);
    const auto ds = this->derivs(x);
    Mat j(this->param_dim(), static_cast<Index>(ds.size()));
    for (std::size_t k = 0; k < ds.size(); ++k) {
      const Scalar dt = -(ds[k].dy * m + yv * theta.dot(ds[k].dpsi));
      const Scalar dq = q * (Scalar(1) - q) * dt;
      j.col(static_cast<Index>(k)) = -(ds[k].dy * q + yv * dq) * p - yv * q * ds[k].dpsi;
    }
    return j;
  }
  Mat do_hess_theta(const Vec& theta, const Vec& x) const override {
    const Vec p = this->psi(x);
    const Scalar yv = this->y(x);
    const Scalar q = weight(yv, theta.dot(p));
    return yv * yv * q * (Scalar(1) - q) * p * p.transpose();
  }
};

// Free-function accessors over the model contracts.

template <typename Scalar>
Scalar log_lik(const LikelihoodModel<Scalar>& model, const Vector<Scalar>& theta, const Vector<Scalar>& x) {
  return model.log_lik(theta, x);
}

template <typename Scalar>
Vector<Scalar> score_theta(const LikelihoodModel<Scalar>& model, const Vector<Scalar>& theta,
                           const Vector<Scalar>& x) {
  return model.score(theta, x);
}

template <typename Scalar>
struct Curvature {
  std::optional<Scalar> quad;   // v^T H v, when a direction was given
  std::optional<Scalar> trace;  // Tr H otherwise
};

template <typename Scalar>
Curvature<Scalar> curvature(const LikelihoodModel<Scalar>& model, const Vector<Scalar>& theta,
                            const Vector<Scalar>& x, const std::optional<Vector<Scalar>>& v = std::nullopt) {
  Curvature<Scalar> c;
  if (v)
    c.quad = model.hess_quad(theta, x, *v);
  else
    c.trace = model.hess_trace(theta, x);
  return c;
}

template <typename Scalar>
struct DataDerivatives {
  Matrix<Scalar> jac_score;  // param_dim x free_dim
  Vector<Scalar> grad_quad;  // empty without a direction
  Vector<Scalar> grad_trace;
};

template <typename Scalar>
DataDerivatives<Scalar> data_derivatives(const LikelihoodModel<Scalar>& model, const Vector<Scalar>& theta,
                                         const Vector<Scalar>& x,
                                         const std::optional<Vector<Scalar>>& v = std::nullopt) {
  DataDerivatives<Scalar> d;
  d.jac_score = model.jac_score_data(theta, x);
  if (v) d.grad_quad = model.grad_quad_data(theta, x, *v);
  d.grad_trace = model.grad_trace_data(theta, x);
  return d;
}

template <typename Scalar>
struct PriorTerms {
  Vector<Scalar> score;
  std::optional<Scalar> quad;
  Scalar trace{0};
};

template <typename Scalar>
PriorTerms<Scalar> prior_terms(const LikelihoodModel<Scalar>& model, const Vector<Scalar>& theta,
                               const std::optional<Vector<Scalar>>& v = std::nullopt) {
  model.check_theta(theta);
  PriorTerms<Scalar> p;
  p.score = model.prior().score(theta);
  if (v) {
    detail::check_size(v->size(), model.param_dim(), "prior direction");
    p.quad = model.prior().quad(theta, *v);
  }
  p.trace = model.prior().trace(theta);
  return p;
}

template <typename Scalar>
struct LossTerms {
  Scalar value{0};
  Vector<Scalar> grad_theta;
  Matrix<Scalar> jac_data;
};

template <typename Scalar>
LossTerms<Scalar> loss_terms(const LossModel<Scalar>& model, const Vector<Scalar>& theta, const Vector<Scalar>& x) {
  return {model.value(theta, x), model.grad_theta(theta, x), model.jac_data(theta, x)};
}

}  // namespace recon
