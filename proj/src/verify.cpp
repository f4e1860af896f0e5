#include "recon/verify.hpp"

#include "recon/attack.hpp"
#include "recon/audit.hpp"
#include "recon/divergence.hpp"
#include "recon/io.hpp"
#include "recon/samplers.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>

namespace recon::verify {

namespace {

using Vec = Vector<double>;
using Mat = Matrix<double>;

// Tolerances of the acceptance criteria.
constexpr double kFdMmdRelTol = 1e-9;
constexpr double kNonBayesRelTol = 1e-10;
constexpr double kSigmaBand = 3.0;
constexpr double kGaussianRecoveryTol = 0.01;
constexpr double kKidScoreTol = 0.05;
constexpr double kGradientRelTol = 1e-5;

struct Rng {
  std::mt19937_64 eng;
  explicit Rng(std::uint64_t seed) : eng(seed) {}
  double normal() { return std::normal_distribution<double>()(eng); }
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(eng); }
  Index integer(Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(eng); }
  Mat normal_matrix(Index r, Index c, double scale = 1.0) {
    Mat m(r, c);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j) m(i, j) = scale * normal();
    return m;
  }
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), 1e-300); }

/// Points laid out for a regression layout, frozen coordinates filled in.
Mat regression_points(Rng& rng, Index n, const DataLayout& layout, bool labels = false) {
  Mat p = rng.normal_matrix(n, layout.dim());
  for (const auto& f : layout.frozen()) p.col(f.index).setConstant(f.value);
  if (labels)
    for (Index i = 0; i < n; ++i) p(i, *layout.y_coord()) = rng.uniform(0, 1) < 0.5 ? -1.0 : 1.0;
  return p;
}

/// Exact draws from the conjugate posterior of BayesLinReg.
PosteriorDraws<double> blr_posterior_draws(const BayesLinReg<double>& model, const Measure& data, Index T, Rng& rng,
                                           double prior_scale = 1.0) {
  const Index d = model.param_dim();
  Mat precision = Mat::Identity(d, d) / (prior_scale * prior_scale);
  Vec rhs = Vec::Zero(d);
  const auto& layout = model.layout();
  for (Index n = 0; n < data.size(); ++n) {
    const Vec z = data.point(n);
    const Vec psi = model.features()(detail::x_part(layout, z));
    precision += data.weight(n) * psi * psi.transpose();
    rhs += data.weight(n) * psi * z(*layout.y_coord());
  }
  Eigen::LLT<Mat> llt(precision);
  const Vec mean = llt.solve(rhs);
  Mat out(T, d);
  for (Index t = 0; t < T; ++t) {
    Vec e(d);
    for (Index i = 0; i < d; ++i) e(i) = rng.normal();
    // precision = L L^T, so L^{-T} e has covariance precision^{-1}
    out.row(t) = (mean + llt.matrixU().solve(e)).transpose();
  }
  return PosteriorDraws<double>(std::move(out), DrawSource::Exact);
}

CheckResult timed(const std::string& name, const std::function<CheckResult()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult r = body();
  r.name = name;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

// Fisher divergence equals half the squared MMD under the score kernel, per draw set.
CheckResult check_fd_mmd_identity() {
  Rng rng(101);
  double worst = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const Index N = rng.integer(1, 10), M = rng.integer(1, 10), T = rng.integer(1, 200);
    std::unique_ptr<LikelihoodModel<double>> model;
    Measure target, recon;
    PosteriorDraws<double> draws;
    if (inst % 2 == 0) {
      const Index d = rng.integer(1, 3);
      model = std::make_unique<GaussianMeanLocation<double>>(d);
      target = build_measure<double>(rng.normal_matrix(N, d, 2.0));
      draws = exact_gaussian_mean_draws(target, T, 1000 + inst);
      Vec w(M);
      for (Index m = 0; m < M; ++m) w(m) = rng.uniform(-1.0, 3.0);
      recon = build_measure<double>(rng.normal_matrix(M, d, 2.0), w);
    } else {
      const bool poly = inst % 4 == 1;
      const DataLayout layout = poly ? DataLayout::regression(1, false) : DataLayout::regression(1, true);
      auto blr = std::make_unique<BayesLinReg<double>>(poly ? FeatureMap::polynomial(2) : FeatureMap::identity(2),
                                                       layout);
      target = build_measure<double>(regression_points(rng, N, layout));
      draws = blr_posterior_draws(*blr, target, T, rng);
      Vec w(M);
      for (Index m = 0; m < M; ++m) w(m) = rng.uniform(-1.0, 3.0);
      recon = build_measure<double>(regression_points(rng, M, layout), w);
      model = std::move(blr);
    }
    const double fd = fd_direct(*model, draws, target, recon).value;
    const double half_mmd = 0.5 * mmd_squared(BayesKernel<double>(*model, draws), target, recon);
    worst = std::max(worst, rel(fd, half_mmd));
  }
  return {"", worst <= kFdMmdRelTol, "50 instances, max rel err " + fmt(worst) + " (tol " + fmt(kFdMmdRelTol) + ")"};
}

// Gradient gap at theta* equals the MMD under the loss-gradient kernel.
CheckResult check_nonbayes_identity() {
  Rng rng(202);
  double worst = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const Index N = rng.integer(1, 10), M = rng.integer(1, 10);
    const Index xd = rng.integer(1, 2);
    const DataLayout layout = DataLayout::regression(xd, true);
    const bool logistic = inst % 2 == 1;
    std::unique_ptr<LossModel<double>> loss;
    if (logistic)
      loss = std::make_unique<LogisticLoss<double>>(FeatureMap::identity(xd + 1), layout, 0.1);
    else
      loss = std::make_unique<SquaredErrorLoss<double>>(FeatureMap::identity(xd + 1), layout, 0.1);
    const Measure X = build_measure<double>(regression_points(rng, N, layout, logistic));
    Vec w(M);
    for (Index m = 0; m < M; ++m) w(m) = rng.uniform(-1.0, 3.0);
    const Measure Z = build_measure<double>(regression_points(rng, M, layout, logistic), w);
    Vec theta(loss->param_dim());
    for (Index i = 0; i < theta.size(); ++i) theta(i) = rng.normal();
    const double gap = (loss_gradient_sum(*loss, theta, X) - loss_gradient_sum(*loss, theta, Z)).norm();
    const double mmd = std::sqrt(std::max(0.0, mmd_squared(LossKernel<double>(*loss, theta), X, Z)));
    worst = std::max(worst, rel(gap, mmd));
  }
  return {"", worst <= kNonBayesRelTol,
          "50 instances, max rel err " + fmt(worst) + " (tol " + fmt(kNonBayesRelTol) + ")"};
}

// Sliced estimator converges to the trace estimator as L grows.
CheckResult check_sfd_fd() {
  Rng rng(303);
  const Index d = 3, N = 8, M = 4, T = 100, L = 10000;
  GaussianMeanLocation<double> model(d);
  const Measure X = build_measure<double>(rng.normal_matrix(N, d, 2.0));
  const auto draws = exact_gaussian_mean_draws(X, T, 304);
  Vec w(M);
  for (Index m = 0; m < M; ++m) w(m) = rng.uniform(0.5, 3.0);
  const Measure R = build_measure<double>(rng.normal_matrix(M, d, 2.0), w);
  std::mt19937_64 srng(305);
  const auto slices = SliceSet<double>::draw(T, L, d, srng);
  const auto sfd = sfd_objective(model, draws, slices, R);
  const auto ibp = fd_ibp_objective(model, draws, R);
  std::vector<double> diff(static_cast<std::size_t>(T));
  for (std::size_t t = 0; t < diff.size(); ++t) diff[t] = sfd.per_draw[t] - ibp.per_draw[t];
  const auto mom = sample_moments(diff);
  const bool ok = std::abs(sfd.value - ibp.value) <= kSigmaBand * mom.std_error;
  return {"", ok,
          "sfd " + fmt(sfd.value) + " vs fd_ibp " + fmt(ibp.value) + ", |diff| " + fmt(std::abs(sfd.value - ibp.value)) +
              ", 3 x slice std err " + fmt(kSigmaBand * mom.std_error)};
}

// IBP estimator plus the data-only constant recovers the Fisher divergence.
CheckResult check_ibp_constant() {
  Rng rng(404);
  const Index N = 6, M = 3, T = 100000;
  GaussianMeanLocation<double> model(1);
  const Measure X = build_measure<double>(rng.normal_matrix(N, 1, 2.0));
  const auto draws = exact_gaussian_mean_draws(X, T, 405);
  Vec w(M);
  for (Index m = 0; m < M; ++m) w(m) = rng.uniform(0.5, 2.5);
  const Measure R = build_measure<double>(rng.normal_matrix(M, 1, 2.0), w);

  const auto fd = fd_direct(model, draws, X, R);
  const auto ibp = fd_ibp_objective(model, draws, R);
  std::vector<double> shifted(static_cast<std::size_t>(T));
  for (Index t = 0; t < T; ++t) {
    const Vec th = draws.draw(t);
    shifted[static_cast<std::size_t>(t)] =
        ibp.per_draw[static_cast<std::size_t>(t)] + 0.5 * weighted_posterior_score(model, X, th).squaredNorm();
  }
  const auto with_c = sample_moments(shifted);
  const double combined = std::sqrt(with_c.std_error * with_c.std_error + fd.std_error * fd.std_error);

  // closed form: score gap (S_w - N) theta + (sum x - sum w z) under N(mu, 1/(N+1))
  const double n = double(N), sw = w.sum();
  const double mu = X.points().sum() / (n + 1.0), var = 1.0 / (n + 1.0);
  const double a = sw - n, b = X.points().sum() - (w.transpose() * R.points()).value();
  const double closed = 0.5 * ((a * mu + b) * (a * mu + b) + a * a * var);

  const bool ok_fd = std::abs(with_c.mean - fd.value) <= kSigmaBand * combined;
  const bool ok_closed = std::abs(with_c.mean - closed) <= kSigmaBand * combined;
  return {"", ok_fd && ok_closed,
          "fd_ibp+C " + fmt(with_c.mean) + ", fd_direct " + fmt(fd.value) + ", closed form " + fmt(closed) +
              ", 3 x combined std err " + fmt(kSigmaBand * combined)};
}

struct GaussianRecoveryRun {
  Measure X;
  PosteriorDraws<double> draws;
  AttackResult<double> result;
};

GaussianRecoveryRun gaussian_recovery_run() {
  Rng rng(505);
  const Index N = 20, d = 2;
  Mat pts = rng.normal_matrix(N, d);
  pts.col(0).array() += 2.0;
  pts.col(1).array() -= 1.0;
  GaussianMeanLocation<double> model(d);
  GaussianRecoveryRun run{build_measure<double>(pts), {}, {}};
  run.draws = exact_gaussian_mean_draws(run.X, 1000, 506);
  AttackConfig cfg;
  cfg.objective = Objective::Sfd;
  cfg.M = 5;
  cfg.iters = 20000;
  cfg.L = 10;
  cfg.lr_w = 1e-3;
  cfg.lr_z = 1e-3;
  cfg.seed = 507;
  cfg.trace_every = 200;
  run.result = run_attack(AttackProblem<double>::bayes(model, run.draws), cfg, std::optional<Measure>(run.X));
  return run;
}

// Mass and sum of the data are recovered from the Gaussian mean posterior.
CheckResult check_gaussian_recovery() {
  const auto run = gaussian_recovery_run();
  const auto target = recon_statistics(run.X, DataLayout::pure_x(2));
  const auto got = recon_statistics(run.result.measure, DataLayout::pure_x(2));
  const double e_mass = rel(target.total_mass, got.total_mass);
  const double e_sum = (target.weighted_sum - got.weighted_sum).norm() / target.weighted_sum.norm();
  const bool ok = e_mass < kGaussianRecoveryTol && e_sum < kGaussianRecoveryTol;
  // Minimiser of the estimated objective on this draw set: the curvature and
  // squared-score terms balance at sum w + 1 = d / tr(draw covariance).
  const Mat centred = run.draws.draws.rowwise() - run.draws.mean().transpose();
  const double spread = centred.squaredNorm() / double(run.draws.count());
  const double optimum = 2.0 / spread - 1.0;
  return {"", ok,
          "sum w = " + fmt(got.total_mass) + " (N=20, rel err " + fmt(e_mass) + "), |sum wz - sum x|/|sum x| = " +
              fmt(e_sum) + " (tol " + fmt(kGaussianRecoveryTol) + "); draw-set optimum sum w = " + fmt(optimum)};
}

/// Synthetic data shaped like the child/mother test-score regression, in
/// units of 100 points: mom ~ N(1, 0.15^2), kid = 0.26 + 0.6 mom + 0.18 eps.
Measure kidscore_like_data(Index N, std::uint64_t seed) {
  Rng rng(seed);
  Mat pts(N, 3);
  for (Index n = 0; n < N; ++n) {
    const double mom = (100.0 + 15.0 * rng.normal()) / 100.0;
    pts(n, 0) = 1.0;
    pts(n, 1) = mom;
    pts(n, 2) = 0.26 + 0.6 * mom + 0.18 * rng.normal();
  }
  return build_measure<double>(pts);
}

SamplerConfig kidscore_sampler(const Measure& X, std::uint64_t seed) {
  // least-squares start; proposals tuned for the posterior scale of N = 100
  Mat A(X.size(), 2);
  A.col(0) = X.points().col(0);
  A.col(1) = X.points().col(1);
  const Vec beta = A.colPivHouseholderQr().solve(X.points().col(2));
  const double sigma = std::sqrt((A * beta - X.points().col(2)).squaredNorm() / double(X.size()));
  SamplerConfig s;
  s.T = 1000;
  s.burn_in = 20000;
  s.thinning = 200;
  s.step_scale = 0.02;
  s.seed = seed;
  s.init = {beta(0), beta(1), sigma};
  return s;
}

// Count, means and variances of the kid-score regression are recovered.
CheckResult check_kidscore_recovery() {
  const Measure X = kidscore_like_data(100, 606);
  KidScoreModel<double> model(KidScoreModel<double>::default_layout());
  const auto draws = rwm_draws(model, X, kidscore_sampler(X, 607));
  AttackConfig cfg;
  cfg.objective = Objective::Sfd;
  cfg.M = 50;
  cfg.iters = 12000;
  cfg.L = 10;
  cfg.lr_w = 1e-3;
  cfg.lr_z = 1e-3;
  cfg.seed = 608;
  cfg.trace_every = 200;
  const auto res = run_attack(AttackProblem<double>::bayes(model, draws), cfg, std::optional<Measure>(X));
  const auto& errs = *res.trace.checkpoints.back().errors;
  std::string detail = "acceptance " + fmt(*draws.acceptance_rate) + ";";
  bool ok = true;
  for (const char* name : {"total_mass", "mean_mom", "var_mom", "mean_kid", "var_kid"}) {
    const auto* e = errs.find(name);
    ok = ok && e && e->rel_error < kKidScoreTol;
    detail += std::string(" ") + name + " " + fmt(e ? e->rel_error : -1.0);
  }
  std::vector<std::vector<double>> series(5);
  for (const auto& cp : res.trace.checkpoints) {
    series[0].push_back(cp.stats.total_mass);
    series[1].push_back(x_moments(cp.stats, 1).mean);
    series[2].push_back(x_moments(cp.stats, 1).variance);
    series[3].push_back(y_moments(cp.stats).mean);
    series[4].push_back(y_moments(cp.stats).variance);
  }
  detail += plateau_reached(series, 1e-4, 0.1) ? " (plateau)" : " (no plateau at 1e-4)";
  detail += " tol " + fmt(kKidScoreTol);
  return {"", ok, detail};
}

// Analytic objective gradients against central differences.
CheckResult check_gradients() {
  Rng rng(707);
  double worst = 0.0;
  int states = 0;
  for (Objective mode : {Objective::Fd, Objective::Sfd, Objective::NonBayes}) {
    for (int inst = 0; inst < 100; ++inst, ++states) {
      const Index M = rng.integer(1, 5);
      std::unique_ptr<LikelihoodModel<double>> model;
      std::unique_ptr<LossModel<double>> loss;
      std::optional<PosteriorDraws<double>> draws;
      DataLayout layout;
      if (mode != Objective::NonBayes) {
        const Index T = rng.integer(2, 12);
        if (inst % 2 == 0) {
          model = std::make_unique<KidScoreModel<double>>(KidScoreModel<double>::default_layout());
          Mat th = rng.normal_matrix(T, 3, 0.5);
          for (Index t = 0; t < T; ++t) th(t, 2) = rng.uniform(0.5, 2.0);
          draws = PosteriorDraws<double>(th, DrawSource::Exact);
        } else {
          model = std::make_unique<BayesLinReg<double>>(FeatureMap::polynomial(2), DataLayout::regression(1, false));
          draws = PosteriorDraws<double>(rng.normal_matrix(T, 3, 0.5), DrawSource::Exact);
        }
        layout = model->layout();
      } else {
        layout = DataLayout::regression(1, true);
        if (inst % 2 == 0)
          loss = std::make_unique<SquaredErrorLoss<double>>(FeatureMap::identity(2), layout, 0.3);
        else
          loss = std::make_unique<LogisticLoss<double>>(FeatureMap::identity(2), layout, 0.3);
      }
      Vec w(M);
      for (Index m = 0; m < M; ++m) w(m) = rng.uniform(0.2, 2.0);
      Measure mu = build_measure<double>(regression_points(rng, M, layout, mode == Objective::NonBayes && inst % 2 == 1), w);
      const auto problem = model ? AttackProblem<double>::bayes(*model, *draws)
                                 : AttackProblem<double>::nonbayes(*loss, rng.normal_matrix(2, 1));
      std::optional<SliceSet<double>> slices;
      if (mode == Objective::Sfd) {
        std::mt19937_64 srng(static_cast<std::uint64_t>(9000 + inst));
        slices = SliceSet<double>::draw(draws->count(), 3, 3, srng);
      }
      const SliceSet<double>* sp = slices ? &*slices : nullptr;
      const auto og = objective_gradients(problem, mode, sp, mu);
      auto value_at = [&](const Measure& m) { return objective_gradients(problem, mode, sp, m).value; };

      const Index pf = layout.free_dim();
      Vec analytic(M + M * pf), numeric(M + M * pf);
      for (Index m = 0; m < M; ++m) {
        analytic(m) = og.grad_w(m);
        const double h = 1e-5 * std::max(1.0, std::abs(mu.weight(m)));
        Measure a = mu, b = mu;
        a.weights()(m) += h;
        b.weights()(m) -= h;
        numeric(m) = (value_at(a) - value_at(b)) / (2 * h);
        for (Index k = 0; k < pf; ++k) {
          const Index c = layout.free_coords()[static_cast<std::size_t>(k)];
          analytic(M + m * pf + k) = og.grad_z(m, k);
          const double hz = 1e-5 * std::max(1.0, std::abs(mu.points()(m, c)));
          Measure p = mu, q = mu;
          p.points()(m, c) += hz;
          q.points()(m, c) -= hz;
          numeric(M + m * pf + k) = (value_at(p) - value_at(q)) / (2 * hz);
        }
      }
      worst = std::max(worst, (analytic - numeric).norm() / std::max(analytic.norm(), 1.0));
    }
  }
  return {"", worst < kGradientRelTol,
          std::to_string(states) + " states over fd/sfd/nonbayes, max rel err " + fmt(worst) + " (tol " +
              fmt(kGradientRelTol) + ")"};
}

// |P_X|_H^2 grows strictly as points are appended.
CheckResult check_norm_growth() {
  Rng rng(808);
  int failures = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Index N = 10;
    std::unique_ptr<LikelihoodModel<double>> model;
    Measure X;
    PosteriorDraws<double> draws;
    if (trial % 2 == 0) {
      const Index d = rng.integer(1, 3);
      model = std::make_unique<GaussianMeanLocation<double>>(d);
      X = build_measure<double>(rng.normal_matrix(N, d, 2.0));
      draws = exact_gaussian_mean_draws(X, 200, 809 + trial);
    } else {
      const DataLayout layout = DataLayout::regression(1, true);
      auto blr = std::make_unique<BayesLinReg<double>>(FeatureMap::identity(2), layout);
      X = build_measure<double>(regression_points(rng, N, layout));
      draws = blr_posterior_draws(*blr, X, 200, rng);
      model = std::move(blr);
    }
    const BayesKernel<double> k(*model, draws);
    double prev = 0.0;
    for (Index n = 1; n <= N; ++n) {
      const double norm = diagonal_mass(k, build_measure<double>(Mat(X.points().topRows(n))));
      if (!(norm > prev)) ++failures;
      prev = norm;
    }
  }
  return {"", failures == 0, "20 trials x 10 appends, " + std::to_string(failures) + " non-increasing steps"};
}

// Equal seeds give byte-identical traces and draws.
CheckResult check_determinism() {
  const auto a = gaussian_recovery_run();
  const auto b = gaussian_recovery_run();
  std::ostringstream ta, tb;
  io::write_trace_csv(ta, a.result.trace, DataLayout::pure_x(2));
  io::write_trace_csv(tb, b.result.trace, DataLayout::pure_x(2));

  const Measure X = kidscore_like_data(100, 606);
  KidScoreModel<double> model(KidScoreModel<double>::default_layout());
  auto cfg = kidscore_sampler(X, 607);
  cfg.T = 200;
  const auto d1 = rwm_draws(model, X, cfg);
  const auto d2 = rwm_draws(model, X, cfg);
  const bool same_draws = d1.draws.cwiseEqual(d2.draws).all();
  const bool same_trace = ta.str() == tb.str();
  return {"", same_trace && same_draws,
          std::string("trace CSV ") + (same_trace ? "identical" : "DIFFERS") + " (" + std::to_string(ta.str().size()) +
              " bytes), RWM draws " + (same_draws ? "identical" : "DIFFER")};
}

// Analytic callbacks of every bundled model against central differences.
CheckResult check_audits() {
  Rng rng(909);
  struct Case {
    std::unique_ptr<LikelihoodModel<double>> lik;
    std::unique_ptr<LossModel<double>> loss;
  };
  std::vector<Case> cases;
  cases.push_back({std::make_unique<GaussianMeanLocation<double>>(3), nullptr});
  cases.push_back({std::make_unique<BayesLinReg<double>>(FeatureMap::identity(3), DataLayout::regression(2, true)), nullptr});
  cases.push_back({std::make_unique<BayesLinReg<double>>(FeatureMap::polynomial(3), DataLayout::regression(1, false)), nullptr});
  cases.push_back({std::make_unique<KidScoreModel<double>>(KidScoreModel<double>::default_layout()), nullptr});
  cases.push_back({nullptr, std::make_unique<SquaredErrorLoss<double>>(FeatureMap::identity(2), DataLayout::regression(1, true), 0.5)});
  cases.push_back({nullptr, std::make_unique<SquaredErrorLoss<double>>(FeatureMap::polynomial(2), DataLayout::regression(1, false))});
  cases.push_back({nullptr, std::make_unique<LogisticLoss<double>>(FeatureMap::identity(2), DataLayout::regression(1, true))});
  double worst = 0.0;
  int count = 0;
  for (const auto& c : cases) {
    for (int i = 0; i < 100; ++i, ++count) {
      const DataLayout& layout = c.lik ? c.lik->layout() : c.loss->layout();
      const Index d = c.lik ? c.lik->param_dim() : c.loss->param_dim();
      Vec theta(d);
      for (Index j = 0; j < d; ++j) theta(j) = rng.normal();
      if (c.lik && c.lik->name() == "kidscore") theta(d - 1) = rng.uniform(0.5, 2.0);
      Vec x = regression_points(rng, 1, layout).row(0).transpose();
      const auto rep = c.lik ? finite_difference_audit(*c.lik, theta, x, 1e-5, 9100 + i)
                             : finite_difference_audit(*c.loss, theta, x, 1e-5);
      worst = std::max(worst, rep.max_error);
    }
  }
  return {"", worst < kAuditTolerance,
          std::to_string(count) + " audits over 7 models, max rel err " + fmt(worst) + " (tol " + fmt(kAuditTolerance) + ")"};
}

}  // namespace

const std::vector<Check>& all_checks() {
  static const std::vector<Check> checks = {
      {"fd_mmd_identity", "FD = 1/2 MMD^2 with the posterior score kernel", false, check_fd_mmd_identity},
      {"nonbayes_mmd_identity", "gradient gap = MMD with the loss-gradient kernel", false, check_nonbayes_identity},
      {"sfd_fd_agreement", "sliced estimator matches the trace estimator at L = 1e4", false, check_sfd_fd},
      {"ibp_constant", "IBP estimator + constant matches direct FD and closed form", false, check_ibp_constant},
      {"gaussian_recovery", "attack recovers N and sum x (Gaussian mean location)", true, check_gaussian_recovery},
      {"kidscore_recovery", "attack recovers count, means and variances (kid-score regression)", true,
       check_kidscore_recovery},
      {"gradient_check", "objective gradients match central differences", false, check_gradients},
      {"norm_growth", "|P_X|^2_H strictly increases with N", false, check_norm_growth},
      {"determinism", "equal seeds give identical traces and draws", true, check_determinism},
      {"finite_difference_audit", "model derivatives match central differences", false, check_audits},
  };
  return checks;
}

std::vector<CheckResult> run_checks(const std::string& filter, bool include_heavy, std::ostream& out) {
  std::vector<CheckResult> results;
  for (const auto& c : all_checks()) {
    const bool selected = filter.empty() ? (include_heavy || !c.heavy) : c.name.find(filter) != std::string::npos;
    if (!selected) continue;
    CheckResult r;
    try {
      r = timed(c.name, c.run);
    } catch (const std::exception& e) {
      r = {c.name, false, std::string("exception: ") + e.what(), 0.0};
    }
    out << (r.passed ? "PASS " : "FAIL ") << r.name << " [" << fmt(r.seconds) << " s] " << r.detail << '\n';
    out.flush();
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace recon::verify
