#include <doctest.h>

#include "recon/divergence.hpp"
#include "recon/samplers.hpp"

#include <random>

using namespace recon;
using Mat = Matrix<double>;
using Vec = Vector<double>;

namespace {

Mat col(std::initializer_list<double> v) {
  Mat m(static_cast<Index>(v.size()), 1);
  Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

Mat random_matrix(std::mt19937_64& rng, Index r, Index c) {
  std::normal_distribution<double> nd;
  Mat m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = nd(rng);
  return m;
}

}  // namespace

TEST_CASE("weighted posterior score") {
  GaussianMeanLocation<double> g(2);
  Mat z(2, 2);
  z << 1, 2, -3, 0.5;
  const Measure mu = build_measure<double>(z);
  const Vec expect = (z.row(0) + z.row(1)).transpose();
  CHECK(weighted_posterior_score(g, mu, Vec(Vec::Zero(2))) == expect);

  SUBCASE("zero weights leave the prior score") {
    const Measure zero(Vec::Zero(2), z);
    const Vec th = Vec::Constant(2, 0.7);
    CHECK(weighted_posterior_score(g, zero, th) == g.prior().score(th));
  }
  SUBCASE("weight multiplicity") {
    Mat one(1, 2);
    one << 0.4, -1.1;
    Mat two(2, 2);
    two << 0.4, -1.1, 0.4, -1.1;
    const Vec th = Vec::Constant(2, 0.3);
    CHECK((weighted_posterior_score(g, Measure(Vec::Constant(1, 2.0), one), th) -
           weighted_posterior_score(g, build_measure<double>(two), th))
              .norm() < 1e-15);
  }
}

TEST_CASE("fd_direct") {
  GaussianMeanLocation<double> g(1);
  const Measure X = build_measure<double>(col({0, 2}));
  const auto draws = exact_gaussian_mean_draws(X, 20000, 17);

  CHECK(fd_direct(g, draws, X, X).value == 0.0);
  CHECK(fd_direct(g, draws, X, Measure(Vec::Constant(1, 2.0), col({1}))).value == doctest::Approx(0.0).epsilon(1e-12));

  // score gap theta - 1 under N(2/3, 1/3): 1/2 ((mu - 1)^2 + 1/3) = 2/9
  const auto e = fd_direct(g, draws, X, build_measure<double>(col({1})));
  CHECK(std::abs(e.value - 2.0 / 9.0) < 3 * e.std_error);
  CHECK_FALSE(e.constant_omitted);
}

TEST_CASE("fd_ibp_objective") {
  GaussianMeanLocation<double> g(1);
  const Measure X = build_measure<double>(col({0, 2}));
  const auto draws = exact_gaussian_mean_draws(X, 50000, 19);

  SUBCASE("recon = target gives minus the constant") {
    // E[Tr H] + 1/2 E|S|^2 with S = -(N+1)(theta - mu): -(N+1) + (N+1)/2
    const auto e = fd_ibp_objective(g, draws, X);
    CHECK(e.constant_omitted);
    CHECK(std::abs(e.value - (-1.5)) < 3 * e.std_error);
  }
  SUBCASE("zero weights reduce to the prior") {
    const Measure zero(Vec::Zero(2), col({0, 2}));
    const auto e = fd_ibp_objective(g, draws, zero);
    double expect = 0;
    for (Index t = 0; t < draws.count(); ++t) expect += -1.0 + 0.5 * draws.draws(t, 0) * draws.draws(t, 0);
    CHECK(e.value == doctest::Approx(expect / double(draws.count())).epsilon(1e-12));
  }
}

TEST_CASE("coordinate slices reproduce the trace") {
  KidScoreModel<double> k(KidScoreModel<double>::default_layout());
  Mat z(3, 3);
  z << 1, 0.9, 0.8, 1, 1.1, 1.0, 1, 1.3, 0.9;
  Vec w(3);
  w << 1.0, 2.0, 0.5;
  const Measure mu(w, z);
  Vec th(3);
  th << 0.2, 0.6, 0.3;
  double sum = 0;
  for (Index i = 0; i < 3; ++i) sum += weighted_posterior_quad(k, mu, th, Vec(Vec::Unit(3, i)));
  CHECK(sum == doctest::Approx(weighted_posterior_trace(k, mu, th)).epsilon(1e-13));

  Mat draws_m(1, 3);
  draws_m.row(0) = th.transpose();
  const PosteriorDraws<double> draws(draws_m, DrawSource::File);
  SliceSet<double> s{1, 3, 3, Mat::Identity(3, 3)};
  const double sfd = sfd_objective(k, draws, s, mu).value;
  const double ibp = fd_ibp_objective(k, draws, mu).value;
  // the slice average is Tr H / d
  const double sq = 0.5 * weighted_posterior_score(k, mu, th).squaredNorm();
  CHECK(3 * (sfd - sq) == doctest::Approx(ibp - sq).epsilon(1e-12));
}

TEST_CASE("sfd rejects mismatched slices") {
  GaussianMeanLocation<double> g(2);
  std::mt19937_64 rng(1);
  const PosteriorDraws<double> draws(random_matrix(rng, 5, 2), DrawSource::File);
  const Measure mu = build_measure<double>(random_matrix(rng, 3, 2));
  CHECK_THROWS_AS(sfd_objective(g, draws, SliceSet<double>::draw(4, 2, 2, rng), mu), ShapeError);
  CHECK_THROWS_AS(sfd_objective(g, draws, SliceSet<double>::draw(5, 2, 3, rng), mu), ShapeError);
}

TEST_CASE("kernels") {
  std::mt19937_64 rng(23);
  GaussianMeanLocation<double> g(2);
  const PosteriorDraws<double> draws(random_matrix(rng, 40, 2), DrawSource::File);
  const BayesKernel<double> k(g, draws);
  const Vec mbar = draws.mean();
  double msq = 0;
  for (Index t = 0; t < draws.count(); ++t) msq += draws.draw(t).squaredNorm();
  msq /= double(draws.count());
  for (int i = 0; i < 100; ++i) {
    const Mat xs = random_matrix(rng, 2, 2);
    const Vec x = xs.row(0).transpose(), xp = xs.row(1).transpose();
    const double closed = x.dot(xp) - (x + xp).dot(mbar) + msq;
    CHECK(k(x, xp) == doctest::Approx(closed).epsilon(1e-12));
    CHECK(k(x, x) >= 0.0);
  }

  SquaredErrorLoss<double> sq(FeatureMap::identity(2), DataLayout::regression(1, true));
  Vec ts(2);
  ts << 0.5, 2.0;
  const LossKernel<double> lk(sq, ts);
  Vec a(3), b(3), zero_res(3);
  a << 1, 0.3, -1;
  b << 1, -2, 0.7;
  zero_res << 1, 1, 2.5;
  const double ra = 0.5 + 2 * 0.3 + 1, rb = 0.5 - 4 - 0.7;
  CHECK(lk(a, b) == doctest::Approx(4 * (1 + 0.3 * -2) * ra * rb).epsilon(1e-13));
  CHECK(lk(zero_res, b) == 0.0);
}

TEST_CASE("mmd_squared") {
  std::mt19937_64 rng(29);
  GaussianMeanLocation<double> g(2);
  const PosteriorDraws<double> draws(random_matrix(rng, 30, 2), DrawSource::File);
  const Measure a = build_measure<double>(random_matrix(rng, 5, 2));
  CHECK(std::abs(mmd_squared(BayesKernel<double>(g, draws), a, a)) < 1e-10);

  const Measure b = build_measure<double>(random_matrix(rng, 3, 2), Vec(Vec::LinSpaced(3, 0.5, 2.0)));
  const double lhs = fd_direct(g, draws, a, b).value;
  CHECK(0.5 * mmd_squared(BayesKernel<double>(g, draws), a, b) == doctest::Approx(lhs).epsilon(1e-12));
}

TEST_CASE("norm growth") {
  std::mt19937_64 rng(31);
  GaussianMeanLocation<double> g(3);
  const Mat X = random_matrix(rng, 12, 3);
  const auto draws = exact_gaussian_mean_draws(build_measure<double>(X), 100, 5);
  const BayesKernel<double> k(g, draws);
  double prev = 0;
  for (Index n = 1; n <= X.rows(); ++n) {
    const double v = diagonal_mass(k, build_measure<double>(Mat(X.topRows(n))));
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("nonbayes objective") {
  const auto layout = DataLayout::regression(1, true);
  SquaredErrorLoss<double> sq(FeatureMap::identity(2), layout, 0.1);
  Mat X(4, 3);
  X << 1, 0.1, 0.5, 1, -0.7, -0.2, 1, 1.3, 1.4, 1, 0.4, 0.2;
  const Measure data = build_measure<double>(X);
  const Vec theta = train_to_stationarity(sq, data, Vec(Vec::Zero(2)));
  CHECK((sq.regularizer_grad(theta) + loss_gradient_sum(sq, theta, data)).norm() < 1e-12);

  CHECK(nonbayes_objective(sq, theta, data) < 1e-10);
  SquaredErrorLoss<double> plain(FeatureMap::identity(2), layout);
  CHECK(nonbayes_objective(plain, theta, Measure(Vec::Zero(4), X)) == 0.0);

  // with stationary theta*, the objective is the gradient gap
  Mat z(2, 3);
  z << 1, 0.3, 0.1, 1, -0.5, 0.6;
  const Measure mu(Vec(Vec::Constant(2, 1.5)), z);
  const double gap = (loss_gradient_sum(sq, theta, data) - loss_gradient_sum(sq, theta, mu)).squaredNorm();
  CHECK(nonbayes_objective(sq, theta, mu) == doctest::Approx(std::sqrt(gap)).epsilon(1e-12));
}
