#pragma once

#include "recon/models.hpp"

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace recon {

struct AuditEntry {
  std::string callback;
  double rel_error = 0.0;
};

struct AuditReport {
  std::vector<AuditEntry> entries;
  double max_error = 0.0;
  bool passed = false;
};

inline constexpr double kAuditTolerance = 1e-5;

namespace detail {

template <typename Scalar>
double audit_error(const Matrix<Scalar>& analytic, const Matrix<Scalar>& numeric) {
  using std::max;
  const Scalar den = max(Scalar(analytic.norm()), Scalar(1));
  return static_cast<double>((analytic - numeric).norm() / den);
}

template <typename Scalar>
Scalar fd_step(double h, Scalar coord) {
  using std::abs;
  return Scalar(h) * std::max(Scalar(1), abs(coord));
}

/// Central-difference derivative of f (returning a dense object) along
/// coordinate i of `at`.
template <typename Scalar, typename F>
auto central_diff(const Vector<Scalar>& at, Index i, Scalar step, F&& f) {
  Vector<Scalar> plus = at, minus = at;
  plus(i) += step;
  minus(i) -= step;
  return ((f(plus) - f(minus)) / (Scalar(2) * step)).eval();
}

inline void finalize(AuditReport& r) {
  r.max_error = 0.0;
  for (const auto& e : r.entries) r.max_error = std::max(r.max_error, e.rel_error);
  r.passed = r.max_error < kAuditTolerance;
}

}  // namespace detail

/// Compares every analytic callback of a likelihood model against central
/// differences of log_lik and score, with per-coordinate step
/// h * max(1, |coordinate|). Directions for the quadratic forms are drawn from
/// `seed`.
template <typename Scalar>
AuditReport finite_difference_audit(const LikelihoodModel<Scalar>& model, const Vector<Scalar>& theta,
                                    const Vector<Scalar>& x, double h, std::uint64_t seed) {
  using Vec = Vector<Scalar>;
  using Mat = Matrix<Scalar>;
  if (!(h > 0.0)) throw DomainError("finite_difference_audit: step must be positive");
  model.check_theta(theta);
  detail::check_size(x.size(), model.layout().dim(), "data point");
  const Index d = model.param_dim();
  for (Index i = 0; i < d; ++i) {
    const Scalar step = detail::fd_step(h, theta(i));
    for (Scalar sgn : {Scalar(2), Scalar(-2)}) {
      Vec probe = theta;
      probe(i) += sgn * step;
      if (!model.in_domain(probe))
        throw DomainError("finite_difference_audit: parameter " + std::to_string(i) +
                          " within 2h of the domain boundary");
    }
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vec v(d);
  for (Index i = 0; i < d; ++i) v(i) = Scalar(normal(rng));

  AuditReport report;
  auto add = [&](const char* name, const Mat& a, const Mat& n) {
    report.entries.push_back({name, detail::audit_error<Scalar>(a, n)});
  };

  // score against d(log_lik)/d(theta)
  Vec score_fd(d);
  for (Index i = 0; i < d; ++i)
    score_fd(i) = detail::central_diff<Scalar>(theta, i, detail::fd_step(h, theta(i)), [&](const Vec& t) {
      return Vector<Scalar>::Constant(1, model.log_lik(t, x));
    })(0);
  add("score_theta", model.score(theta, x), score_fd);

  // Hessian columns from differences of the analytic score
  Mat hess(d, d);
  for (Index i = 0; i < d; ++i)
    hess.col(i) = detail::central_diff<Scalar>(theta, i, detail::fd_step(h, theta(i)),
                                               [&](const Vec& t) { return model.score(t, x); });
  hess = ((hess + hess.transpose()) / Scalar(2)).eval();
  add("curvature.quad", Vec::Constant(1, model.hess_quad(theta, x, v)), Vec::Constant(1, v.dot(hess * v)));
  add("curvature.trace", Vec::Constant(1, model.hess_trace(theta, x)), Vec::Constant(1, hess.trace()));

  // data derivatives over free coordinates
  const auto& free = model.layout().free_coords();
  const Index pf = static_cast<Index>(free.size());
  Mat jac_fd(d, pf);
  Vec gq_fd(pf), gt_fd(pf);
  for (Index k = 0; k < pf; ++k) {
    const Index c = free[static_cast<std::size_t>(k)];
    const Scalar step = detail::fd_step(h, x(c));
    jac_fd.col(k) = detail::central_diff<Scalar>(x, c, step, [&](const Vec& z) { return model.score(theta, z); });
    gq_fd(k) = detail::central_diff<Scalar>(x, c, step, [&](const Vec& z) {
      return Vector<Scalar>::Constant(1, model.hess_quad(theta, z, v));
    })(0);
    gt_fd(k) = detail::central_diff<Scalar>(x, c, step, [&](const Vec& z) {
      return Vector<Scalar>::Constant(1, model.hess_trace(theta, z));
    })(0);
  }
  add("data.jac_score", model.jac_score_data(theta, x), jac_fd);
  add("data.grad_quad", model.grad_quad_data(theta, x, v), gq_fd);
  add("data.grad_trace", model.grad_trace_data(theta, x), gt_fd);

  // prior
  const auto& prior = model.prior();
  Vec pscore_fd(d);
  Vec pdiag_fd(d);
  for (Index i = 0; i < d; ++i) {
    const Scalar step = detail::fd_step(h, theta(i));
    pscore_fd(i) = detail::central_diff<Scalar>(theta, i, step, [&](const Vec& t) {
      return Vector<Scalar>::Constant(1, prior.log_density(t));
    })(0);
    pdiag_fd(i) = detail::central_diff<Scalar>(theta, i, step, [&](const Vec& t) { return prior.score(t); })(i);
  }
  add("prior.score", prior.score(theta), pscore_fd);
  add("prior.quad", Vec::Constant(1, prior.quad(theta, v)),
      Vec::Constant(1, (pdiag_fd.array() * v.array().square()).sum()));
  add("prior.trace", Vec::Constant(1, prior.trace(theta)), Vec::Constant(1, pdiag_fd.sum()));

  detail::finalize(report);
  return report;
}

/// Loss-model counterpart: grad_theta against differences of the loss value,
/// jac_data and hess_theta against differences of grad_theta.
template <typename Scalar>
AuditReport finite_difference_audit(const LossModel<Scalar>& model, const Vector<Scalar>& theta,
                                    const Vector<Scalar>& x, double h) {
  using Vec = Vector<Scalar>;
  using Mat = Matrix<Scalar>;
  if (!(h > 0.0)) throw DomainError("finite_difference_audit: step must be positive");
  const Index d = model.param_dim();
  detail::check_size(theta.size(), d, "parameter");
  detail::check_size(x.size(), model.layout().dim(), "data point");

  AuditReport report;
  auto add = [&](const char* name, const Mat& a, const Mat& n) {
    report.entries.push_back({name, detail::audit_error<Scalar>(a, n)});
  };

  Vec grad_fd(d);
  Mat hess_fd(d, d);
  for (Index i = 0; i < d; ++i) {
    const Scalar step = detail::fd_step(h, theta(i));
    grad_fd(i) = detail::central_diff<Scalar>(theta, i, step, [&](const Vec& t) {
      return Vector<Scalar>::Constant(1, model.value(t, x));
    })(0);
    hess_fd.col(i) = detail::central_diff<Scalar>(theta, i, step, [&](const Vec& t) { return model.grad_theta(t, x); });
  }
  add("loss.grad_theta", model.grad_theta(theta, x), grad_fd);
  add("loss.hess_theta", model.hess_theta(theta, x), hess_fd);

  const auto& free = model.layout().free_coords();
  Mat jac_fd(d, static_cast<Index>(free.size()));
  for (std::size_t k = 0; k < free.size(); ++k) {
    const Index c = free[k];
    jac_fd.col(static_cast<Index>(k)) = detail::central_diff<Scalar>(
        x, c, detail::fd_step(h, x(c)), [&](const Vec& z) { return model.grad_theta(theta, z); });
  }
  add("loss.jac_data", model.jac_data(theta, x), jac_fd);

  detail::finalize(report);
  return report;
}

}  // namespace recon
