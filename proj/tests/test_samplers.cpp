#include <doctest.h>

#include "recon/samplers.hpp"

#include <random>

using namespace recon;
using Mat = Matrix<double>;
using Vec = Vector<double>;

namespace {

Measure line(std::initializer_list<double> v) {
  Mat m(static_cast<Index>(v.size()), 1);
  Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return build_measure<double>(m);
}

/// Mean and standard error from batch means, for autocorrelated chains.
std::pair<double, double> batch_moments(const Vec& x, Index batches) {
  const Index size = x.size() / batches;
  std::vector<double> means;
  for (Index b = 0; b < batches; ++b) means.push_back(x.segment(b * size, size).mean());
  const auto m = sample_moments(means);
  return {m.mean, m.std_error};
}

}  // namespace

TEST_CASE("exact draws for the Gaussian mean model") {
  const auto d = exact_gaussian_mean_draws(line({0, 2}), 100000, 7);
  CHECK(d.count() == 100000);
  CHECK(d.source == DrawSource::Exact);
  const double mean = d.draws.col(0).mean();
  const double var = (d.draws.col(0).array() - mean).square().mean();
  CHECK(std::abs(mean - 2.0 / 3.0) < 3 * std::sqrt(1.0 / 3.0 / 100000));
  CHECK(var == doctest::Approx(1.0 / 3.0).epsilon(0.02));

  SUBCASE("large N concentrates") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd;
    Mat x(500, 2);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
    const auto big = exact_gaussian_mean_draws(build_measure<double>(x), 10000, 3);
    const Vec m = big.mean();
    const double v = (big.draws.rowwise() - m.transpose()).squaredNorm() / (2.0 * 10000);
    CHECK(std::abs(v - 1.0 / 501) < 0.1 / 501);
  }
  SUBCASE("fixed seed reproduces the draws") {
    CHECK(exact_gaussian_mean_draws(line({0, 2}), 50, 9).draws == exact_gaussian_mean_draws(line({0, 2}), 50, 9).draws);
  }
}

TEST_CASE("random-walk Metropolis on the conjugate model") {
  GaussianMeanLocation<double> g(1);
  SamplerConfig cfg;
  cfg.T = 100000;
  cfg.burn_in = 10000;
  cfg.thinning = 10;
  cfg.step_scale = 1.0;
  cfg.seed = 41;
  cfg.init = {0.0};
  const auto d = rwm_draws(g, line({0, 2}), cfg);
  CHECK(d.count() == 100000);
  CHECK(d.source == DrawSource::Rwm);
  REQUIRE(d.acceptance_rate);
  CHECK(*d.acceptance_rate > 0.1);
  CHECK(*d.acceptance_rate < 0.9);

  const Vec x = d.draws.col(0);
  const auto [mean, se] = batch_moments(x, 50);
  CHECK(std::abs(mean - 2.0 / 3.0) < 3 * se);
  const Vec centred_sq = (x.array() - 2.0 / 3.0).square().matrix();
  const auto [var, var_se] = batch_moments(centred_sq, 50);
  CHECK(std::abs(var - 1.0 / 3.0) < 3 * var_se);
}

TEST_CASE("tiny steps are almost always accepted") {
  GaussianMeanLocation<double> g(2);
  SamplerConfig cfg;
  cfg.T = 200;
  cfg.step_scale = 1e-8;
  cfg.seed = 5;
  cfg.init = {0.1, 0.2};
  const auto d = rwm_draws(g, build_measure<double>(Mat::Ones(3, 2)), cfg);
  CHECK(*d.acceptance_rate > 0.99);
  CHECK((d.draws.rowwise() - d.draws.row(0)).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("sampler respects the model domain") {
  KidScoreModel<double> k(KidScoreModel<double>::default_layout());
  Mat x(3, 3);
  x << 1, 0.9, 0.8, 1, 1.1, 0.95, 1, 1.0, 0.7;
  SamplerConfig cfg;
  cfg.T = 500;
  cfg.step_scale = 0.5;
  cfg.seed = 1;
  cfg.init = {0.0, 0.5, 0.3};
  const auto d = rwm_draws(k, build_measure<double>(x), cfg);
  CHECK(d.draws.col(2).minCoeff() > 0.0);

  cfg.init = {0.0, 0.5, -0.3};
  CHECK_THROWS(rwm_draws(k, build_measure<double>(x), cfg));
  cfg.init = {0.0};
  CHECK_THROWS_AS(rwm_draws(k, build_measure<double>(x), cfg), ShapeError);
}

TEST_CASE("chains are deterministic for any chain count") {
  GaussianMeanLocation<double> g(1);
  SamplerConfig cfg;
  cfg.T = 300;
  cfg.seed = 77;
  cfg.init = {0.0};
  cfg.chains = 3;
  const auto a = rwm_draws(g, line({1, 2, 3}), cfg);
  const auto b = rwm_draws(g, line({1, 2, 3}), cfg);
  CHECK(a.count() == 300);
  CHECK(a.draws == b.draws);
}
