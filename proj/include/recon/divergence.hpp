#pragma once

#include "recon/measures.hpp"
#include "recon/models.hpp"
#include "recon/types.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace recon {

enum class DrawSource { Exact, Rwm, File };

/// T parameter vectors, one per row, treated as samples from pi_X.
template <typename Scalar>
struct PosteriorDraws {
  Matrix<Scalar> draws;
  DrawSource source = DrawSource::File;
  std::vector<std::string> names;
  std::optional<double> acceptance_rate;

  PosteriorDraws() = default;
  PosteriorDraws(Matrix<Scalar> d, DrawSource src, std::vector<std::string> n = {})
      : draws(std::move(d)), source(src), names(std::move(n)) {
    if (draws.rows() < 1) throw ShapeError("PosteriorDraws: need at least one draw");
    if (!names.empty() && static_cast<Index>(names.size()) != draws.cols())
      throw ShapeError("PosteriorDraws: names do not match parameter dimension");
  }

  Index count() const { return draws.rows(); }
  Index dim() const { return draws.cols(); }
  Vector<Scalar> draw(Index t) const { return draws.row(t).transpose(); }
  Vector<Scalar> mean() const { return draws.colwise().mean().transpose(); }
};

/// Standard normal slicing directions v_{tl}, stored row t * L + l.
template <typename Scalar>
struct SliceSet {
  Index T = 0;
  Index L = 0;
  Index d = 0;
  Matrix<Scalar> vectors;

  static SliceSet draw(Index T, Index L, Index d, std::mt19937_64& rng) {
    if (T < 1 || L < 1 || d < 1) throw ShapeError("SliceSet: T, L and d must be >= 1");
    SliceSet s{T, L, d, Matrix<Scalar>(T * L, d)};
    std::normal_distribution<double> normal;
    for (Index r = 0; r < T * L; ++r)
      for (Index j = 0; j < d; ++j) s.vectors(r, j) = Scalar(normal(rng));
    return s;
  }

  Vector<Scalar> slice(Index t, Index l) const { return vectors.row(t * L + l).transpose(); }
};

/// Monte Carlo estimate over draws. Attacker-facing objectives omit an
/// additive constant that depends only on the unknown data.
template <typename Scalar>
struct DivergenceEstimate {
  Scalar value{0};
  Scalar std_error{0};
  std::vector<Scalar> per_draw;
  bool constant_omitted = false;
};

namespace detail {

template <typename Scalar>
DivergenceEstimate<Scalar> estimate_from(std::vector<Scalar> per_draw, bool constant_omitted) {
  const auto mom = sample_moments(per_draw);
  return {mom.mean, mom.std_error, std::move(per_draw), constant_omitted};
}

template <typename Scalar>
void check_draws(const LikelihoodModel<Scalar>& model, const PosteriorDraws<Scalar>& draws) {
  if (draws.dim() != model.param_dim())
    throw ShapeError("draws have dimension " + std::to_string(draws.dim()) + ", model expects " +
                     std::to_string(model.param_dim()));
}

}  // namespace detail

/// grad log pi_{w,Z}(theta) = grad log pi_0(theta) + sum_m w_m s(theta, z_m).
template <typename Scalar>
Vector<Scalar> weighted_posterior_score(const LikelihoodModel<Scalar>& model, const WeightedMeasure<Scalar>& measure,
                                        const Vector<Scalar>& theta) {
  std::vector<Vector<Scalar>> terms;
  terms.reserve(static_cast<std::size_t>(measure.size()) + 1);
  model.check_theta(theta);
  terms.push_back(model.prior().score(theta));
  for (Index m = 0; m < measure.size(); ++m)
    terms.push_back(measure.weight(m) * model.score(theta, Vector<Scalar>(measure.point(m))));
  return pairwise_sum_dense(terms);
}

template <typename Scalar>
Scalar weighted_posterior_trace(const LikelihoodModel<Scalar>& model, const WeightedMeasure<Scalar>& measure,
                                const Vector<Scalar>& theta) {
  std::vector<Scalar> terms;
  terms.push_back(model.prior().trace(theta));
  for (Index m = 0; m < measure.size(); ++m)
    terms.push_back(measure.weight(m) * model.hess_trace(theta, Vector<Scalar>(measure.point(m))));
  return pairwise_sum(terms);
}

template <typename Scalar>
Scalar weighted_posterior_quad(const LikelihoodModel<Scalar>& model, const WeightedMeasure<Scalar>& measure,
                               const Vector<Scalar>& theta, const Vector<Scalar>& v) {
  std::vector<Scalar> terms;
  terms.push_back(model.prior().quad(theta, v));
  for (Index m = 0; m < measure.size(); ++m)
    terms.push_back(measure.weight(m) * model.hess_quad(theta, Vector<Scalar>(measure.point(m)), v));
  return pairwise_sum(terms);
}

/// (1/2T) sum_t |grad log pi_target(theta_t) - grad log pi_recon(theta_t)|^2.
/// Needs the target measure, so it is a test-side oracle only.
template <typename Scalar>
DivergenceEstimate<Scalar> fd_direct(const LikelihoodModel<Scalar>& model, const PosteriorDraws<Scalar>& draws,
                                     const WeightedMeasure<Scalar>& target, const WeightedMeasure<Scalar>& recon) {
  detail::check_draws(model, draws);
  std::vector<Scalar> per(static_cast<std::size_t>(draws.count()));
  for (Index t = 0; t < draws.count(); ++t) {
    const Vector<Scalar> th = draws.draw(t);
    const Vector<Scalar> diff = weighted_posterior_score(model, target, th) - weighted_posterior_score(model, recon, th);
    per[static_cast<std::size_t>(t)] = Scalar(0.5) * diff.squaredNorm();
  }
  return detail::estimate_from(std::move(per), false);
}

/// Integration-by-parts estimator
///   (1/T) sum_t Tr H_{w,Z}(theta_t) + (1/2T) sum_t |S_{w,Z}(theta_t)|^2,
/// equal to the Fisher divergence minus a data-only constant.
template <typename Scalar>
DivergenceEstimate<Scalar> fd_ibp_objective(const LikelihoodModel<Scalar>& model, const PosteriorDraws<Scalar>& draws,
                                            const WeightedMeasure<Scalar>& recon) {
  detail::check_draws(model, draws);
  std::vector<Scalar> per(static_cast<std::size_t>(draws.count()));
  for (Index t = 0; t < draws.count(); ++t) {
    const Vector<Scalar> th = draws.draw(t);
    per[static_cast<std::size_t>(t)] = weighted_posterior_trace(model, recon, th) +
                                       Scalar(0.5) * weighted_posterior_score(model, recon, th).squaredNorm();
  }
  return detail::estimate_from(std::move(per), true);
}

/// Sliced estimator: the trace is replaced by the average of v^T H v over the
/// L slices drawn for each theta_t.
template <typename Scalar>
DivergenceEstimate<Scalar> sfd_objective(const LikelihoodModel<Scalar>& model, const PosteriorDraws<Scalar>& draws,
                                         const SliceSet<Scalar>& slices, const WeightedMeasure<Scalar>& recon) {
  detail::check_draws(model, draws);
  if (slices.T != draws.count() || slices.d != model.param_dim() || slices.vectors.rows() != slices.T * slices.L)
    throw ShapeError("sfd_objective: slices must be shaped T x L x d");
  std::vector<Scalar> per(static_cast<std::size_t>(draws.count()));
  std::vector<Scalar> quads(static_cast<std::size_t>(slices.L));
  for (Index t = 0; t < draws.count(); ++t) {
    const Vector<Scalar> th = draws.draw(t);
    for (Index l = 0; l < slices.L; ++l)
      quads[static_cast<std::size_t>(l)] = weighted_posterior_quad(model, recon, th, slices.slice(t, l));
    per[static_cast<std::size_t>(t)] = pairwise_sum(quads) / Scalar(slices.L) +
                                       Scalar(0.5) * weighted_posterior_score(model, recon, th).squaredNorm();
  }
  return detail::estimate_from(std::move(per), true);
}

/// k(x, x') = (1/T) sum_t <s(theta_t, x), s(theta_t, x')>, the score kernel
/// averaged over a fixed draw set.
template <typename Scalar>
class BayesKernel {
 public:
  BayesKernel(const LikelihoodModel<Scalar>& model, const PosteriorDraws<Scalar>& draws)
      : model_(&model), draws_(&draws) {
    detail::check_draws(model, draws);
  }

  Scalar operator()(const Vector<Scalar>& x, const Vector<Scalar>& xp) const {
    std::vector<Scalar> terms(static_cast<std::size_t>(draws_->count()));
    for (Index t = 0; t < draws_->count(); ++t) {
      const Vector<Scalar> th = draws_->draw(t);
      terms[static_cast<std::size_t>(t)] = model_->score(th, x).dot(model_->score(th, xp));
    }
    return pairwise_sum(terms) / Scalar(draws_->count());
  }

 private:
  const LikelihoodModel<Scalar>* model_;
  const PosteriorDraws<Scalar>* draws_;
};

/// k(x, x') = <grad_theta l(theta*, x), grad_theta l(theta*, x')>.
template <typename Scalar>
class LossKernel {
 public:
  LossKernel(const LossModel<Scalar>& model, Vector<Scalar> theta_star)
      : model_(&model), theta_star_(std::move(theta_star)) {
    detail::check_size(theta_star_.size(), model.param_dim(), "theta*");
  }

  Scalar operator()(const Vector<Scalar>& x, const Vector<Scalar>& xp) const {
    return model_->grad_theta(theta_star_, x).dot(model_->grad_theta(theta_star_, xp));
  }

 private:
  const LossModel<Scalar>* model_;
  Vector<Scalar> theta_star_;
};

/// Squared MMD between un-normalised measures,
///   sum a_i a_j k(p_i, p_j) + sum b_i b_j k(q_i, q_j) - 2 sum a_i b_j k(p_i, q_j).
template <typename Scalar, typename Kernel>
Scalar mmd_squared(const Kernel& kernel, const WeightedMeasure<Scalar>& a, const WeightedMeasure<Scalar>& b) {
  auto block = [&kernel](const WeightedMeasure<Scalar>& p, const WeightedMeasure<Scalar>& q) {
    std::vector<Scalar> terms;
    terms.reserve(static_cast<std::size_t>(p.size() * q.size()));
    for (Index i = 0; i < p.size(); ++i) {
      const Vector<Scalar> pi = p.point(i);
      for (Index j = 0; j < q.size(); ++j)
        terms.push_back(p.weight(i) * q.weight(j) * kernel(pi, Vector<Scalar>(q.point(j))));
    }
    return pairwise_sum(terms);
  };
  return block(a, a) + block(b, b) - Scalar(2) * block(a, b);
}

/// |P|_H^2 = sum_n k(x_n, x_n) for unit weights (weights enter squared).
template <typename Scalar, typename Kernel>
Scalar diagonal_mass(const Kernel& kernel, const WeightedMeasure<Scalar>& a) {
  std::vector<Scalar> terms;
  for (Index i = 0; i < a.size(); ++i) {
    const Vector<Scalar> p = a.point(i);
    terms.push_back(a.weight(i) * a.weight(i) * kernel(p, p));
  }
  return pairwise_sum(terms);
}

/// sum_m w_m grad_theta l(theta, z_m).
template <typename Scalar>
Vector<Scalar> loss_gradient_sum(const LossModel<Scalar>& model, const Vector<Scalar>& theta,
                                 const WeightedMeasure<Scalar>& measure) {
  std::vector<Vector<Scalar>> terms;
  for (Index m = 0; m < measure.size(); ++m)
    terms.push_back(measure.weight(m) * model.grad_theta(theta, Vector<Scalar>(measure.point(m))));
  return pairwise_sum_dense(terms);
}

/// |grad R(theta*) + sum_m w_m grad_theta l(theta*, z_m)|.
template <typename Scalar>
Scalar nonbayes_objective(const LossModel<Scalar>& model, const Vector<Scalar>& theta_star,
                          const WeightedMeasure<Scalar>& recon) {
  return (model.regularizer_grad(theta_star) + loss_gradient_sum(model, theta_star, recon)).norm();
}

/// Newton iterations on sum_n l(theta, x_n) + R(theta) until the gradient
/// norm drops below `tol`. Stands in for a model trained to a local minimum.
template <typename Scalar>
Vector<Scalar> train_to_stationarity(const LossModel<Scalar>& model, const WeightedMeasure<Scalar>& data,
                                     Vector<Scalar> theta, double tol = 1e-12, int max_iter = 100) {
  detail::check_size(theta.size(), model.param_dim(), "initial parameter");
  for (int it = 0; it < max_iter; ++it) {
    const Vector<Scalar> g = model.regularizer_grad(theta) + loss_gradient_sum(model, theta, data);
    if (g.norm() <= Scalar(tol)) return theta;
    Matrix<Scalar> h = model.regularizer_hess();
    for (Index m = 0; m < data.size(); ++m) h += data.weight(m) * model.hess_theta(theta, Vector<Scalar>(data.point(m)));
    theta -= h.ldlt().solve(g);
    if (!theta.allFinite()) throw NumericalError("train_to_stationarity: Newton step diverged");
  }
  return theta;
}

}  // namespace recon
