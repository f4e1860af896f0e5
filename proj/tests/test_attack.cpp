#include <doctest.h>

#include "recon/adam.hpp"
#include "recon/attack.hpp"
#include "recon/samplers.hpp"

#include <random>

using namespace recon;
using Mat = Matrix<double>;
using Vec = Vector<double>;

namespace {

Mat random_matrix(std::uint64_t seed, Index r, Index c, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Mat m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = scale * nd(rng);
  return m;
}

}  // namespace

TEST_CASE("adam") {
  AdamState<double> st(3);
  Vec p(3);
  p << 1, -2, 3;
  const Vec lr = Vec::Constant(3, 0.001);

  SUBCASE("zero gradient leaves parameters unchanged") {
    const Vec before = p;
    adam_update(st, p, Vec(Vec::Zero(3)), lr);
    CHECK(p == before);
  }
  SUBCASE("first step has magnitude lr against the gradient sign") {
    const Vec before = p;
    Vec g(3);
    g << 0.5, -20, 1e-3;
    adam_update(st, p, g, lr);
    const Vec step = p - before;
    for (Index i = 0; i < 3; ++i) {
      CHECK(step(i) * g(i) < 0);
      CHECK(std::abs(step(i)) <= 0.001 * (1 + 1e-6));
      CHECK(std::abs(step(i)) == doctest::Approx(0.001).epsilon(1e-4));
    }
  }
  SUBCASE("per-group learning rates") {
    Vec lrs(3);
    lrs << 0.1, 0.01, 0.001;
    const Vec before = p;
    adam_update(st, p, Vec(Vec::Ones(3)), lrs);
    CHECK((before - p).isApprox(lrs, 1e-6));
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(adam_update(st, p, Vec(Vec::Ones(2)), lr), ShapeError);
  }
}

TEST_CASE("initialize_pseudo") {
  GaussianMeanLocation<double> g(2);
  const PosteriorDraws<double> draws(random_matrix(1, 10, 2), DrawSource::File);
  AttackConfig cfg;
  cfg.M = 4000;
  cfg.seed = 12;
  const auto p = AttackProblem<double>::bayes(g, draws);
  const auto mu = initialize_pseudo(p, cfg);
  CHECK(mu.weights() == Vec::Ones(4000));
  CHECK(mu.points().colwise().mean().cwiseAbs().maxCoeff() < 0.06);
  CHECK(initialize_pseudo(p, cfg).points() == mu.points());

  SUBCASE("regression layout") {
    KidScoreModel<double> k(KidScoreModel<double>::default_layout());
    Mat th(3, 3);
    th << 0.2, 0.6, 0.1, 0.3, 0.5, 0.2, 0.25, 0.55, 0.15;
    const PosteriorDraws<double> kd(th, DrawSource::File);
    const auto km = initialize_pseudo(AttackProblem<double>::bayes(k, kd), cfg);
    CHECK((km.points().col(0).array() == 1.0).all());
    const Vec resid = km.points().col(2) - 0.25 * Vec::Ones(4000) - 0.55 * km.points().col(1);
    CHECK(std::abs(resid.mean()) < 0.01);
    CHECK(std::sqrt(resid.squaredNorm() / 4000) == doctest::Approx(0.15).epsilon(0.05));
  }
}

TEST_CASE("objective gradients at the closed-form minimiser") {
  GaussianMeanLocation<double> g(2);
  const Mat X = random_matrix(3, 6, 2);
  const Vec mean = X.colwise().mean().transpose();
  const Vec mu_post = X.colwise().sum().transpose() / 7.0;
  // antithetic draws: the draw mean equals the posterior mean exactly
  Mat th(40, 2);
  const Mat half = random_matrix(4, 20, 2, 1 / std::sqrt(7.0));
  th.topRows(20) = half.rowwise() + mu_post.transpose();
  th.bottomRows(20) = (-half).rowwise() + mu_post.transpose();
  const PosteriorDraws<double> draws(th, DrawSource::File);
  Mat z(1, 2);
  z.row(0) = mean.transpose();
  const Measure mu(Vec::Constant(1, 6.0), z);
  const auto og = objective_gradients<double>(AttackProblem<double>::bayes(g, draws), Objective::Fd, nullptr, mu);
  CHECK(og.grad_z.norm() < 1e-9);
}

TEST_CASE("nonbayes gradients with zero weights") {
  SquaredErrorLoss<double> sq(FeatureMap::identity(2), DataLayout::regression(1, true));
  Mat z = random_matrix(5, 3, 3);
  z.col(0).setOnes();
  const Measure mu(Vec::Zero(3), z);
  const auto og = objective_gradients<double>(AttackProblem<double>::nonbayes(sq, Vec(Vec::Ones(2))), Objective::NonBayes,
                                      nullptr, mu);
  CHECK(og.grad_z.isZero());
  CHECK(og.value == 0.0);
}

TEST_CASE("weight multiplicity") {
  KidScoreModel<double> k(KidScoreModel<double>::default_layout());
  Mat th(5, 3);
  th << 0.2, 0.6, 0.1, 0.3, 0.5, 0.2, 0.25, 0.55, 0.15, 0.1, 0.7, 0.3, 0.2, 0.4, 0.25;
  const PosteriorDraws<double> draws(th, DrawSource::File);
  const auto p = AttackProblem<double>::bayes(k, draws);
  Mat one(2, 3), two(3, 3);
  one << 1, 0.9, 0.7, 1, 1.2, 0.8;
  two << 1, 0.9, 0.7, 1, 0.9, 0.7, 1, 1.2, 0.8;
  Vec w1(2), w2(3);
  w1 << 3.0, 1.5;
  w2 << 1.5, 1.5, 1.5;
  std::mt19937_64 rng(2);
  const auto s = SliceSet<double>::draw(5, 4, 3, rng);
  for (Objective o : {Objective::Fd, Objective::Sfd}) {
    const SliceSet<double>* sp = o == Objective::Sfd ? &s : nullptr;
    const double a = objective_gradients<double>(p, o, sp, Measure(w1, one)).value;
    const double b = objective_gradients<double>(p, o, sp, Measure(w2, two)).value;
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
  }
}

TEST_CASE("slice presence must match the mode") {
  GaussianMeanLocation<double> g(1);
  const PosteriorDraws<double> draws(random_matrix(1, 4, 1), DrawSource::File);
  const auto p = AttackProblem<double>::bayes(g, draws);
  const Measure mu = build_measure<double>(random_matrix(2, 2, 1));
  std::mt19937_64 rng(1);
  const auto s = SliceSet<double>::draw(4, 2, 1, rng);
  CHECK_THROWS_AS(objective_gradients<double>(p, Objective::Sfd, nullptr, mu), ShapeError);
  CHECK_THROWS_AS(objective_gradients<double>(p, Objective::Fd, &s, mu), ShapeError);
  CHECK_THROWS_AS(objective_gradients<double>(p, Objective::NonBayes, nullptr, mu), ShapeError);
}

TEST_CASE("run_attack") {
  KidScoreModel<double> k(KidScoreModel<double>::default_layout());
  Mat th(20, 3);
  for (Index t = 0; t < 20; ++t) th.row(t) << 0.25 + 0.01 * t, 0.6 - 0.005 * t, 0.17 + 0.001 * t;
  const PosteriorDraws<double> draws(th, DrawSource::File);
  const auto p = AttackProblem<double>::bayes(k, draws);
  AttackConfig cfg;
  cfg.M = 8;
  cfg.iters = 50;
  cfg.trace_every = 20;
  cfg.seed = 5;

  const auto a = run_attack(p, cfg);
  SUBCASE("checkpoints") {
    REQUIRE(a.trace.checkpoints.size() == 4);
    CHECK(a.trace.checkpoints[0].iteration == 0);
    CHECK(a.trace.checkpoints[1].iteration == 20);
    CHECK(a.trace.checkpoints[2].iteration == 40);
    CHECK(a.trace.checkpoints[3].iteration == 50);
    CHECK_FALSE(a.trace.checkpoints[0].errors);
    CHECK(a.trace.checkpoints.back().stats.total_mass == doctest::Approx(a.measure.weights().sum()).epsilon(1e-14));
  }
  SUBCASE("frozen intercept is untouched") {
    CHECK((a.measure.points().col(0).array() == 1.0).all());
  }
  SUBCASE("equal seeds and any thread count give the same result") {
    auto threaded = cfg;
    threaded.threads = 3;
    const auto b = run_attack(p, threaded);
    CHECK(b.measure.points() == a.measure.points());
    CHECK(b.measure.weights() == a.measure.weights());
    for (std::size_t i = 0; i < a.trace.checkpoints.size(); ++i)
      CHECK(a.trace.checkpoints[i].objective == b.trace.checkpoints[i].objective);
  }
  SUBCASE("target statistics are traced") {
    Mat x(3, 3);
    x << 1, 0.9, 0.8, 1, 1.1, 0.95, 1, 1.0, 0.7;
    const auto t = run_attack(p, cfg, std::optional<Measure>(build_measure<double>(x)));
    REQUIRE(t.trace.checkpoints[0].errors);
    CHECK(t.trace.checkpoints[0].errors->find("total_mass")->rel_error == doctest::Approx(5.0 / 3.0));
  }
  SUBCASE("a non-finite objective names the iteration") {
    PenaltyHook<double> bad = [](const Measure&, Vec&, Mat&) { return std::nan(""); };
    CHECK_THROWS_WITH_AS(run_attack<double>(p, cfg, std::nullopt, bad), doctest::Contains("iteration 0"), NumericalError);
  }
  SUBCASE("config validation") {
    auto c = cfg;
    c.objective = Objective::NonBayes;
    CHECK_THROWS_AS(run_attack(p, c), ConfigError);
    c = cfg;
    c.M = 0;
    CHECK_THROWS_AS(run_attack(p, c), ConfigError);
    c = cfg;
    c.lr_w = 0;
    CHECK_THROWS_AS(run_attack(p, c), ConfigError);
  }
}

TEST_CASE("nonbayes attack on ridge regression") {
  const auto layout = DataLayout::regression(1, true);
  SquaredErrorLoss<double> sq(FeatureMap::identity(2), layout, 0.1);
  Mat X = random_matrix(8, 15, 3);
  X.col(0).setOnes();
  const Vec theta = train_to_stationarity(sq, build_measure<double>(X), Vec(Vec::Zero(2)));
  AttackConfig cfg;
  cfg.objective = Objective::NonBayes;
  cfg.M = 10;
  cfg.iters = 4000;
  cfg.trace_every = 100;
  cfg.seed = 3;
  const auto r = run_attack(AttackProblem<double>::nonbayes(sq, theta), cfg);
  const auto& cps = r.trace.checkpoints;
  const double first = cps.front().objective, last = cps.back().objective;
  CHECK(last < 1e-6 * first);
  // decreasing on average: each quarter of the trace ends below where it started
  const std::size_t q = cps.size() / 4;
  for (std::size_t i = 0; i + q < cps.size(); i += q)
    CHECK((cps[i + q].objective < cps[i].objective || cps[i].objective == 0.0));
}

TEST_CASE("plateau detection") {
  std::vector<std::vector<double>> flat{{1, 2, 3, 4, 5, 5, 5, 5, 5, 5}};
  CHECK(plateau_reached(flat, 1e-4, 0.3));
  std::vector<std::vector<double>> moving{{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}};
  CHECK_FALSE(plateau_reached(moving, 1e-4, 0.3));
  CHECK_FALSE(plateau_reached(std::vector<std::vector<double>>{{1.0}}));
}
