#pragma once

#include "recon/divergence.hpp"
#include "recon/measures.hpp"
#include "recon/models.hpp"

#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <random>
#include <vector>

namespace recon {

struct SamplerConfig {
  Index T = 1000;
  Index burn_in = -1;   // negative: 10 * T
  Index thinning = 10;  // 0 or 1 keeps every state
  double step_scale = 0.1;
  std::uint64_t seed = 0;
  std::vector<double> init;
  int chains = 1;

  Index effective_burn_in() const { return burn_in < 0 ? 10 * T : burn_in; }
  Index effective_thinning() const { return thinning < 1 ? 1 : thinning; }

  void validate() const {
    if (T < 1) throw ShapeError("sampler: T must be >= 1");
    if (!(step_scale > 0.0)) throw ShapeError("sampler: step_scale must be positive");
    if (chains < 1) throw ShapeError("sampler: chains must be >= 1");
  }
};

/// I.i.d. draws from the conjugate posterior of the Gaussian mean location
/// model, N(sum x / (N + 1), I / (N + 1)).
template <typename Scalar>
PosteriorDraws<Scalar> exact_gaussian_mean_draws(const WeightedMeasure<Scalar>& data, Index T, std::uint64_t seed) {
  if (data.size() < 1) throw ShapeError("exact_gaussian_mean_draws: empty dataset");
  if (T < 1) throw ShapeError("exact_gaussian_mean_draws: T must be >= 1");
  const Scalar mass = data.weights().sum();
  const Vector<Scalar> mean = (data.weights().transpose() * data.points()).transpose() / (mass + Scalar(1));
  using std::sqrt;
  const Scalar sd = Scalar(1) / sqrt(mass + Scalar(1));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix<Scalar> out(T, data.dim());
  for (Index t = 0; t < T; ++t)
    for (Index j = 0; j < data.dim(); ++j) out(t, j) = mean(j) + sd * Scalar(normal(rng));
  return PosteriorDraws<Scalar>(std::move(out), DrawSource::Exact);
}

/// log pi_X(theta) up to a constant; -inf outside the model domain.
template <typename Scalar>
Scalar log_posterior(const LikelihoodModel<Scalar>& model, const WeightedMeasure<Scalar>& data,
                     const Vector<Scalar>& theta) {
  if (!model.in_domain(theta)) return -std::numeric_limits<Scalar>::infinity();
  std::vector<Scalar> terms;
  terms.push_back(model.log_prior(theta));
  for (Index n = 0; n < data.size(); ++n)
    terms.push_back(data.weight(n) * model.log_lik(theta, Vector<Scalar>(data.point(n))));
  return pairwise_sum(terms);
}

namespace detail {

template <typename Scalar>
struct ChainResult {
  Matrix<Scalar> draws;
  Index accepted = 0;
  Index proposed = 0;
};

template <typename Scalar>
ChainResult<Scalar> run_chain(const LikelihoodModel<Scalar>& model, const WeightedMeasure<Scalar>& data,
                              const SamplerConfig& cfg, Index keep, std::uint64_t seed) {
  const Index d = model.param_dim();
  Vector<Scalar> cur(d);
  for (Index i = 0; i < d; ++i) cur(i) = Scalar(cfg.init[static_cast<std::size_t>(i)]);
  Scalar cur_lp = log_posterior(model, data, cur);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  ChainResult<Scalar> res;
  res.draws.resize(keep, d);
  const Index burn = cfg.effective_burn_in();
  const Index thin = cfg.effective_thinning();
  const Index total = burn + keep * thin;
  Index kept = 0;
  for (Index it = 1; it <= total; ++it) {
    Vector<Scalar> prop = cur;
    for (Index i = 0; i < d; ++i) prop(i) += Scalar(cfg.step_scale * normal(rng));
    const double u = unif(rng);
    const Scalar prop_lp = log_posterior(model, data, prop);
    ++res.proposed;
    using std::log;
    if (std::isfinite(static_cast<double>(prop_lp)) && Scalar(log(u)) < prop_lp - cur_lp) {
      cur = prop;
      cur_lp = prop_lp;
      ++res.accepted;
    }
    if (it > burn && (it - burn) % thin == 0) res.draws.row(kept++) = cur.transpose();
  }
  return res;
}

}  // namespace detail

/// Random-walk Metropolis targeting pi_X with isotropic Gaussian proposals.
/// Chains run independently (seed + chain index) and are concatenated in
/// chain order; T is split across chains.
template <typename Scalar>
PosteriorDraws<Scalar> rwm_draws(const LikelihoodModel<Scalar>& model, const WeightedMeasure<Scalar>& data,
                                 const SamplerConfig& cfg) {
  cfg.validate();
  if (static_cast<Index>(cfg.init.size()) != model.param_dim())
    throw ShapeError("rwm_draws: init has length " + std::to_string(cfg.init.size()) + ", model expects " +
                     std::to_string(model.param_dim()));
  Vector<Scalar> init(model.param_dim());
  for (Index i = 0; i < init.size(); ++i) init(i) = Scalar(cfg.init[static_cast<std::size_t>(i)]);
  if (!model.in_domain(init)) throw DomainError("rwm_draws: init outside model domain");
  if (!std::isfinite(static_cast<double>(log_posterior(model, data, init))))
    throw DomainError("rwm_draws: init has zero posterior probability");

  std::vector<std::future<detail::ChainResult<Scalar>>> jobs;
  const Index base = cfg.T / cfg.chains;
  for (int c = 0; c < cfg.chains; ++c) {
    const Index keep = base + (c < cfg.T % cfg.chains ? 1 : 0);
    jobs.push_back(std::async(cfg.chains > 1 ? std::launch::async : std::launch::deferred,
                              [&model, &data, &cfg, keep, c] {
                                return detail::run_chain(model, data, cfg, keep, cfg.seed + std::uint64_t(c));
                              }));
  }
  Matrix<Scalar> all(cfg.T, model.param_dim());
  Index row = 0, accepted = 0, proposed = 0;
  for (auto& j : jobs) {
    auto r = j.get();
    all.middleRows(row, r.draws.rows()) = r.draws;
    row += r.draws.rows();
    accepted += r.accepted;
    proposed += r.proposed;
  }
  PosteriorDraws<Scalar> out(std::move(all), DrawSource::Rwm, model.param_names());
  out.acceptance_rate = proposed ? double(accepted) / double(proposed) : 0.0;
  return out;
}

}  // namespace recon
