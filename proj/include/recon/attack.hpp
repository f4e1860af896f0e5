#pragma once

#include "recon/adam.hpp"
#include "recon/divergence.hpp"
#include "recon/measures.hpp"
#include "recon/models.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace recon {

enum class Objective { Fd, Sfd, NonBayes };

inline std::string to_string(Objective o) {
  switch (o) {
    case Objective::Fd: return "fd";
    case Objective::Sfd: return "sfd";
    case Objective::NonBayes: return "nonbayes";
  }
  return "?";
}

struct AttackConfig {
  Objective objective = Objective::Sfd;
  Index M = 50;
  Index iters = 1000;
  double lr_w = 1e-3;
  double lr_z = 1e-3;
  Index L = 10;
  std::uint64_t seed = 0;
  Index trace_every = 100;
  AdamHyper adam;
  int threads = 1;

  void validate() const {
    if (M < 1) throw ConfigError("attack.M must be >= 1");
    if (iters < 1) throw ConfigError("attack.iters must be >= 1");
    if (!(lr_w > 0.0)) throw ConfigError("attack.lr_w must be positive");
    if (!(lr_z > 0.0)) throw ConfigError("attack.lr_z must be positive");
    if (objective == Objective::Sfd && L < 1) throw ConfigError("attack.L must be >= 1");
    if (trace_every < 1) throw ConfigError("attack.trace_every must be >= 1");
    if (threads < 1) throw ConfigError("attack.threads must be >= 1");
  }
};

/// What the adversary holds: a likelihood model with posterior draws, or a
/// loss model with released parameters theta*.
template <typename Scalar>
struct AttackProblem {
  const LikelihoodModel<Scalar>* model = nullptr;
  const PosteriorDraws<Scalar>* draws = nullptr;
  const LossModel<Scalar>* loss = nullptr;
  Vector<Scalar> theta_star;

  static AttackProblem bayes(const LikelihoodModel<Scalar>& m, const PosteriorDraws<Scalar>& d) {
    detail::check_draws(m, d);
    return {&m, &d, nullptr, {}};
  }
  static AttackProblem nonbayes(const LossModel<Scalar>& l, Vector<Scalar> theta) {
    detail::check_size(theta.size(), l.param_dim(), "theta*");
    return {nullptr, nullptr, &l, std::move(theta)};
  }

  bool is_bayes() const { return model != nullptr; }
  const DataLayout& layout() const { return is_bayes() ? model->layout() : loss->layout(); }
  Index param_dim() const { return is_bayes() ? model->param_dim() : loss->param_dim(); }
};

/// Weights one; free x-coordinates standard normal; the response drawn from
/// the model's predictive at the reference parameter (draw mean, or theta*);
/// frozen coordinates at their layout values.
template <typename Scalar>
WeightedMeasure<Scalar> initialize_pseudo(const AttackProblem<Scalar>& problem, const AttackConfig& config) {
  const DataLayout& layout = problem.layout();
  Vector<Scalar> ref;
  if (problem.is_bayes()) {
    if (!problem.draws || problem.draws->count() < 1) throw ShapeError("initialize_pseudo: no posterior draws");
    ref = problem.draws->mean();
  } else {
    ref = problem.theta_star;
  }
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal;
  Matrix<Scalar> pts = Matrix<Scalar>::Zero(config.M, layout.dim());
  for (Index m = 0; m < config.M; ++m) {
    for (const auto& f : layout.frozen()) pts(m, f.index) = Scalar(f.value);
    for (Index c : layout.free_coords())
      if (!(layout.has_y() && c == *layout.y_coord())) pts(m, c) = Scalar(normal(rng));
    if (layout.has_y() && !layout.is_frozen(*layout.y_coord())) {
      const Vector<Scalar> z = pts.row(m).transpose();
      Predictive<Scalar> pred{Scalar(0), Scalar(1)};
      if (problem.is_bayes()) {
        if (auto p = problem.model->predictive(ref, z)) pred = *p;
      } else {
        pred = problem.loss->predictive(ref, z);
      }
      pts(m, *layout.y_coord()) = pred.mean + pred.noise_scale * Scalar(normal(rng));
    }
  }
  return WeightedMeasure<Scalar>(Vector<Scalar>::Ones(config.M), std::move(pts));
}

template <typename Scalar>
struct ObjectiveGradients {
  Scalar value{0};
  Vector<Scalar> grad_w;  // M
  Matrix<Scalar> grad_z;  // M x free_dim
};

/// Additive penalty on (w, Z): returns its value and adds its gradient.
template <typename Scalar>
using PenaltyHook = std::function<Scalar(const WeightedMeasure<Scalar>&, Vector<Scalar>&, Matrix<Scalar>&)>;

namespace detail {

/// In-place fixed-tree sum of the columns of `cols`; the result lands in
/// column 0. The tree depends only on the column count.
template <typename Scalar>
void tree_reduce_columns(Matrix<Scalar>& cols) {
  const Index n = cols.cols();
  for (Index stride = 1; stride < n; stride *= 2)
    for (Index i = 0; i + stride < n; i += 2 * stride) cols.col(i) += cols.col(i + stride);
}

template <typename F>
void parallel_for(Index n, int threads, F&& body) {
  if (threads <= 1 || n < 2) {
    for (Index i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  const Index chunk = (n + threads - 1) / threads;
  for (int k = 0; k < threads; ++k) {
    const Index lo = k * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (Index i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace detail

/// Value and exact (w, Z_free) gradients of the attack objective:
///  fd/sfd: the integration-by-parts estimator (trace or sliced curvature),
///  nonbayes: |grad R(theta*) + sum_m w_m grad l(theta*, z_m)|^2.
/// Per-draw contributions are combined with a fixed reduction tree, so the
/// result does not depend on `threads`.
template <typename Scalar>
ObjectiveGradients<Scalar> objective_gradients(const AttackProblem<Scalar>& problem, Objective objective,
                                               const SliceSet<Scalar>* slices, const WeightedMeasure<Scalar>& measure,
                                               int threads = 1) {
  const DataLayout& layout = problem.layout();
  if (measure.dim() != layout.dim()) throw ShapeError("objective_gradients: measure does not match layout");
  const Index M = measure.size();
  const Index pf = layout.free_dim();
  ObjectiveGradients<Scalar> out;

  if (objective == Objective::NonBayes) {
    if (problem.is_bayes()) throw ShapeError("objective_gradients: nonbayes mode needs a loss model");
    if (slices) throw ShapeError("objective_gradients: slices are only used in sfd mode");
    const auto& loss = *problem.loss;
    const Vector<Scalar>& th = problem.theta_star;
    std::vector<Vector<Scalar>> g(static_cast<std::size_t>(M));
    std::vector<Vector<Scalar>> terms;
    terms.push_back(loss.regularizer_grad(th));
    for (Index m = 0; m < M; ++m) {
      g[static_cast<std::size_t>(m)] = loss.grad_theta(th, Vector<Scalar>(measure.point(m)));
      terms.push_back(measure.weight(m) * g[static_cast<std::size_t>(m)]);
    }
    const Vector<Scalar> G = pairwise_sum_dense(terms);
    out.value = G.squaredNorm();
    out.grad_w.resize(M);
    out.grad_z.resize(M, pf);
    for (Index m = 0; m < M; ++m) {
      out.grad_w(m) = Scalar(2) * G.dot(g[static_cast<std::size_t>(m)]);
      out.grad_z.row(m) =
          (Scalar(2) * measure.weight(m)) * (loss.jac_data(th, Vector<Scalar>(measure.point(m))).transpose() * G).transpose();
    }
    return out;
  }

  if (!problem.is_bayes()) throw ShapeError("objective_gradients: fd/sfd modes need a likelihood model");
  const auto& model = *problem.model;
  const auto& draws = *problem.draws;
  const Index T = draws.count();
  const Index d = model.param_dim();
  if (objective == Objective::Sfd) {
    if (!slices) throw ShapeError("objective_gradients: sfd mode needs slices");
    if (slices->T != T || slices->d != d) throw ShapeError("objective_gradients: slices must be T x L x d");
  } else if (slices) {
    throw ShapeError("objective_gradients: slices are only used in sfd mode");
  }

  // column t: [value, grad_w (M), grad_z row-major (M * pf)]
  const Index width = 1 + M + M * pf;
  Matrix<Scalar> per(width, T);
  std::vector<Vector<Scalar>> points(static_cast<std::size_t>(M));
  for (Index m = 0; m < M; ++m) points[static_cast<std::size_t>(m)] = measure.point(m);

  detail::parallel_for(T, threads, [&](Index t) {
    const Vector<Scalar> th = draws.draw(t);
    model.check_theta(th);
    std::optional<Eigen::Ref<const Matrix<Scalar>>> block;
    Scalar prior_curv;
    if (objective == Objective::Sfd) {
      block.emplace(slices->vectors.middleRows(t * slices->L, slices->L));
      const Vector<Scalar> hd = model.prior().hessian_diagonal(th);
      prior_curv = (block->array().square().rowwise() * hd.transpose().array()).sum() / Scalar(slices->L);
    } else {
      prior_curv = model.prior().trace(th);
    }
    // reused across draws and calls; Eigen members keep their storage
    thread_local std::vector<PointTerms<Scalar>> pt;
    pt.resize(static_cast<std::size_t>(M));
    Vector<Scalar> S = model.prior().score(th);
    Scalar curv = prior_curv;
    for (Index m = 0; m < M; ++m) {
      auto& p = pt[static_cast<std::size_t>(m)];
      model.point_terms(th, points[static_cast<std::size_t>(m)], block ? &*block : nullptr, p);
      S += measure.weight(m) * p.score;
      curv += measure.weight(m) * p.curvature;
    }
    auto col = per.col(t);
    col(0) = curv + Scalar(0.5) * S.squaredNorm();
    for (Index m = 0; m < M; ++m) {
      const auto& p = pt[static_cast<std::size_t>(m)];
      col(1 + m) = p.curvature + S.dot(p.score);
      for (Index k = 0; k < pf; ++k)
        col(1 + M + m * pf + k) = measure.weight(m) * (p.curvature_grad(k) + p.jac_score.col(k).dot(S));
    }
  });

  detail::tree_reduce_columns(per);
  const Vector<Scalar> total = per.col(0) / Scalar(T);
  out.value = total(0);
  out.grad_w = total.segment(1, M);
  out.grad_z.resize(M, pf);
  for (Index m = 0; m < M; ++m) out.grad_z.row(m) = total.segment(1 + M + m * pf, pf).transpose();
  return out;
}

template <typename Scalar>
struct Checkpoint {
  Index iteration = 0;
  Scalar objective{0};
  ReconStats<Scalar> stats;
  std::optional<StatErrorReport<Scalar>> errors;
};

template <typename Scalar>
struct AttackTrace {
  AttackConfig config;
  std::vector<Checkpoint<Scalar>> checkpoints;
};

template <typename Scalar>
struct AttackResult {
  AttackTrace<Scalar> trace;
  WeightedMeasure<Scalar> measure;
};

namespace detail {

template <typename Scalar>
Vector<Scalar> pack(const WeightedMeasure<Scalar>& mu, const DataLayout& layout) {
  const Index M = mu.size(), pf = layout.free_dim();
  Vector<Scalar> p(M + M * pf);
  p.head(M) = mu.weights();
  for (Index m = 0; m < M; ++m)
    for (Index k = 0; k < pf; ++k) p(M + m * pf + k) = mu.points()(m, layout.free_coords()[static_cast<std::size_t>(k)]);
  return p;
}

template <typename Scalar>
void unpack(const Vector<Scalar>& p, const DataLayout& layout, WeightedMeasure<Scalar>& mu) {
  const Index M = mu.size(), pf = layout.free_dim();
  mu.weights() = p.head(M);
  for (Index m = 0; m < M; ++m)
    for (Index k = 0; k < pf; ++k) mu.points()(m, layout.free_coords()[static_cast<std::size_t>(k)]) = p(M + m * pf + k);
}

}  // namespace detail

/// Adam on (w, Z_free) from `initial`. Fresh slices are drawn every
/// iteration in sfd mode; draws stay fixed. A checkpoint is recorded at
/// iteration 0, every `trace_every` iterations and after the final update.
template <typename Scalar>
AttackResult<Scalar> run_attack_from(const AttackProblem<Scalar>& problem, const AttackConfig& config,
                                     WeightedMeasure<Scalar> initial,
                                     const std::optional<WeightedMeasure<Scalar>>& target = std::nullopt,
                                     const PenaltyHook<Scalar>& penalty = {}) {
  config.validate();
  if (problem.is_bayes() == (config.objective == Objective::NonBayes))
    throw ConfigError("attack.objective does not match the model kind");
  const DataLayout& layout = problem.layout();
  std::optional<ReconStats<Scalar>> target_stats;
  if (target) target_stats = recon_statistics(*target, layout);

  std::seed_seq slice_seed{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                           0x51u};
  std::mt19937_64 slice_rng(slice_seed);

  AttackResult<Scalar> res{{config, {}}, std::move(initial)};
  WeightedMeasure<Scalar>& mu = res.measure;
  const Index M = mu.size(), pf = layout.free_dim();
  Vector<Scalar> params = detail::pack(mu, layout);
  Vector<Scalar> lrs(params.size());
  lrs.head(M).setConstant(Scalar(config.lr_w));
  lrs.tail(M * pf).setConstant(Scalar(config.lr_z));
  AdamState<Scalar> adam(params.size(), config.adam);

  auto evaluate = [&](Index it) {
    std::optional<SliceSet<Scalar>> slices;
    if (config.objective == Objective::Sfd)
      slices = SliceSet<Scalar>::draw(problem.draws->count(), config.L, problem.param_dim(), slice_rng);
    auto og = objective_gradients(problem, config.objective, slices ? &*slices : nullptr, mu, config.threads);
    if (penalty) og.value += penalty(mu, og.grad_w, og.grad_z);
    if (!std::isfinite(static_cast<double>(og.value)) || !og.grad_w.allFinite() || !og.grad_z.allFinite())
      throw NumericalError("attack: non-finite objective or gradient at iteration " + std::to_string(it));
    return og;
  };
  auto record = [&](Index it, Scalar value) {
    Checkpoint<Scalar> cp{it, value, recon_statistics(mu, layout), std::nullopt};
    if (target_stats) cp.errors = stat_errors(*target_stats, cp.stats, layout);
    res.trace.checkpoints.push_back(std::move(cp));
  };

  for (Index it = 0; it < config.iters; ++it) {
    auto og = evaluate(it);
    if (it % config.trace_every == 0) record(it, og.value);
    Vector<Scalar> grads(params.size());
    grads.head(M) = og.grad_w;
    for (Index m = 0; m < M; ++m) grads.segment(M + m * pf, pf) = og.grad_z.row(m).transpose();
    adam_update(adam, params, grads, lrs);
    detail::unpack(params, layout, mu);
  }
  record(config.iters, evaluate(config.iters).value);
  return res;
}

template <typename Scalar>
AttackResult<Scalar> run_attack(const AttackProblem<Scalar>& problem, const AttackConfig& config,
                                const std::optional<WeightedMeasure<Scalar>>& target = std::nullopt,
                                const PenaltyHook<Scalar>& penalty = {}) {
  config.validate();
  return run_attack_from(problem, config, initialize_pseudo(problem, config), target, penalty);
}

/// True when every series changed by less than `rel_tol` (relative to its
/// final value) across the last `fraction` of the checkpoints.
template <typename Scalar>
bool plateau_reached(const std::vector<std::vector<Scalar>>& series, double rel_tol = 1e-4, double fraction = 0.1) {
  for (const auto& s : series) {
    if (s.size() < 2) return false;
    const std::size_t window = std::max<std::size_t>(2, static_cast<std::size_t>(fraction * double(s.size())));
    const std::size_t start = s.size() - std::min(window, s.size());
    using std::abs;
    const Scalar last = s.back();
    const Scalar scale = std::max(abs(last), Scalar(kRelErrorFloor));
    for (std::size_t i = start; i < s.size(); ++i)
      if (abs(s[i] - last) / scale >= Scalar(rel_tol)) return false;
  }
  return true;
}

}  // namespace recon
