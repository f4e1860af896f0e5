#include "recon/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

namespace recon::config {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw ConfigError("unknown config key '" + where + "." + it.key() + "'");
}

template <typename T>
T get(const json& j, const std::string& where, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + where + "." + key + "' has the wrong type");
  }
}

std::string existing_path(const json& j, const std::string& where, const char* key) {
  const auto p = get<std::string>(j, where, key, "");
  if (p.empty()) throw ConfigError("config key '" + where + "." + key + "' is empty");
  if (!std::filesystem::exists(p)) throw ConfigError("config key '" + where + "." + key + "': file not found: " + p);
  return p;
}

Objective parse_objective(const std::string& s) {
  if (s == "fd") return Objective::Fd;
  if (s == "sfd") return Objective::Sfd;
  if (s == "nonbayes") return Objective::NonBayes;
  throw ConfigError("config key 'attack.objective' must be fd, sfd or nonbayes");
}

}  // namespace

std::optional<std::uint64_t> seed_from_env() {
  const char* v = std::getenv("RECON_SEED");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  const unsigned long long s = std::strtoull(v, &end, 10);
  if (*end != '\0') throw ConfigError("RECON_SEED is not an unsigned integer");
  return static_cast<std::uint64_t>(s);
}

RunConfig parse_run_config(const json& input, std::optional<std::uint64_t> env_seed) {
  RunConfig rc;
  rc.raw = input;
  reject_unknown(rc.raw, "config", {"model", "data", "sampler", "attack", "output"});
  if (env_seed) {
    if (rc.raw.contains("sampler")) rc.raw["sampler"]["seed"] = *env_seed;
    if (rc.raw.contains("attack")) rc.raw["attack"]["seed"] = *env_seed;
  }
  const json& doc = rc.raw;

  if (!doc.contains("model")) throw ConfigError("missing config key 'model'");
  {
    const json& m = doc.at("model");
    reject_unknown(m, "model",
                   {"name", "dim", "x_dim", "intercept", "features", "degree", "prior_scale", "sigma_scale", "ridge"});
    auto& mc = rc.model;
    mc.name = get<std::string>(m, "model", "name", "");
    static const std::set<std::string> names{"gaussian_mean", "bayes_linreg", "kidscore", "squared_loss",
                                             "logistic_loss"};
    if (!names.count(mc.name)) throw ConfigError("config key 'model.name': unknown model '" + mc.name + "'");
    mc.dim = get<Index>(m, "model", "dim", 0);
    mc.x_dim = get<Index>(m, "model", "x_dim", 1);
    mc.intercept = get<bool>(m, "model", "intercept", true);
    mc.features = get<std::string>(m, "model", "features", "identity");
    if (mc.features != "identity" && mc.features != "polynomial")
      throw ConfigError("config key 'model.features' must be identity or polynomial");
    mc.degree = get<int>(m, "model", "degree", 2);
    mc.prior_scale = get<double>(m, "model", "prior_scale", 1.0);
    mc.sigma_scale = get<double>(m, "model", "sigma_scale", 2.5);
    mc.ridge = get<double>(m, "model", "ridge", 0.0);
  }

  if (doc.contains("data")) {
    const json& d = doc.at("data");
    reject_unknown(d, "data", {"path", "draws", "theta_star", "fit_theta_star"});
    if (d.contains("path")) rc.data.path = existing_path(d, "data", "path");
    if (d.contains("draws")) rc.data.draws = existing_path(d, "data", "draws");
    if (d.contains("theta_star")) rc.data.theta_star = get<std::vector<double>>(d, "data", "theta_star", {});
    rc.data.fit_theta_star = get<bool>(d, "data", "fit_theta_star", false);
  }

  if (doc.contains("sampler")) {
    const json& s = doc.at("sampler");
    reject_unknown(s, "sampler", {"kind", "T", "burn_in", "thinning", "step_scale", "seed", "init", "chains"});
    SamplerSection sec;
    sec.kind = get<std::string>(s, "sampler", "kind", "rwm");
    if (sec.kind != "exact" && sec.kind != "rwm") throw ConfigError("config key 'sampler.kind' must be exact or rwm");
    auto& c = sec.config;
    c.T = get<Index>(s, "sampler", "T", c.T);
    c.burn_in = get<Index>(s, "sampler", "burn_in", c.burn_in);
    c.thinning = get<Index>(s, "sampler", "thinning", c.thinning);
    c.step_scale = get<double>(s, "sampler", "step_scale", c.step_scale);
    c.seed = get<std::uint64_t>(s, "sampler", "seed", c.seed);
    c.init = get<std::vector<double>>(s, "sampler", "init", {});
    c.chains = get<int>(s, "sampler", "chains", c.chains);
    if (c.T < 1) throw ConfigError("config key 'sampler.T' must be >= 1");
    if (!(c.step_scale > 0)) throw ConfigError("config key 'sampler.step_scale' must be positive");
    if (c.chains < 1) throw ConfigError("config key 'sampler.chains' must be >= 1");
    rc.sampler = sec;
  }

  if (doc.contains("attack")) {
    const json& a = doc.at("attack");
    reject_unknown(a, "attack",
                   {"objective", "M", "iters", "lr_w", "lr_z", "L", "seed", "trace_every", "adam", "threads"});
    AttackConfig ac;
    ac.objective = parse_objective(get<std::string>(a, "attack", "objective", "sfd"));
    ac.M = get<Index>(a, "attack", "M", ac.M);
    ac.iters = get<Index>(a, "attack", "iters", ac.iters);
    ac.lr_w = get<double>(a, "attack", "lr_w", ac.lr_w);
    ac.lr_z = get<double>(a, "attack", "lr_z", ac.lr_z);
    ac.L = get<Index>(a, "attack", "L", ac.L);
    ac.seed = get<std::uint64_t>(a, "attack", "seed", ac.seed);
    ac.trace_every = get<Index>(a, "attack", "trace_every", ac.trace_every);
    ac.threads = get<int>(a, "attack", "threads", ac.threads);
    if (a.contains("adam")) {
      const json& h = a.at("adam");
      reject_unknown(h, "attack.adam", {"beta1", "beta2", "eps"});
      ac.adam.beta1 = get<double>(h, "attack.adam", "beta1", ac.adam.beta1);
      ac.adam.beta2 = get<double>(h, "attack.adam", "beta2", ac.adam.beta2);
      ac.adam.eps = get<double>(h, "attack.adam", "eps", ac.adam.eps);
    }
    ac.validate();
    if (ac.objective == Objective::NonBayes && rc.model.is_bayes())
      throw ConfigError("config key 'attack.objective': nonbayes needs a loss model");
    if (ac.objective != Objective::NonBayes && !rc.model.is_bayes())
      throw ConfigError("config key 'attack.objective': fd/sfd need a likelihood model");
    rc.attack = ac;
  }

  if (doc.contains("output")) {
    const json& o = doc.at("output");
    reject_unknown(o, "output", {"dir", "draws"});
    rc.output.dir = get<std::string>(o, "output", "dir", rc.output.dir);
    rc.output.draws_file = get<std::string>(o, "output", "draws", rc.output.draws_file);
  }
  return rc;
}

RunConfig load_run_config(const std::string& path, std::optional<std::uint64_t> env_seed) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_run_config(doc, env_seed);
}

ModelBundle build_models(const ModelConfig& cfg, const std::vector<std::string>& names) {
  ModelBundle b;
  const bool poly = cfg.features == "polynomial";
  auto regression_layout = [&]() {
    return poly ? DataLayout::regression(1, false, names) : DataLayout::regression(cfg.x_dim, cfg.intercept, names);
  };
  auto feature_map = [&]() {
    return poly ? FeatureMap::polynomial(cfg.degree) : FeatureMap::identity(cfg.x_dim + (cfg.intercept ? 1 : 0));
  };
  try {
    if (cfg.name == "gaussian_mean") {
      const Index dim = cfg.dim > 0 ? cfg.dim : static_cast<Index>(names.size());
      if (dim < 1) throw ConfigError("config key 'model.dim' required for gaussian_mean without a dataset");
      b.likelihood = std::make_unique<GaussianMeanLocation<double>>(dim, names);
    } else if (cfg.name == "bayes_linreg") {
      b.likelihood = std::make_unique<BayesLinReg<double>>(feature_map(), regression_layout(), cfg.prior_scale);
    } else if (cfg.name == "kidscore") {
      if (poly) throw ConfigError("config key 'model.features': kidscore uses identity features");
      b.likelihood = std::make_unique<KidScoreModel<double>>(regression_layout(), cfg.sigma_scale);
    } else if (cfg.name == "squared_loss") {
      b.loss = std::make_unique<SquaredErrorLoss<double>>(feature_map(), regression_layout(), cfg.ridge);
    } else if (cfg.name == "logistic_loss") {
      b.loss = std::make_unique<LogisticLoss<double>>(feature_map(), regression_layout(), cfg.ridge);
    } else {
      throw ConfigError("config key 'model.name': unknown model '" + cfg.name + "'");
    }
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  return b;
}

nlohmann::json attack_config_to_json(const AttackConfig& a) {
  return {{"objective", to_string(a.objective)},
          {"M", a.M},
          {"iters", a.iters},
          {"lr_w", a.lr_w},
          {"lr_z", a.lr_z},
          {"L", a.L},
          {"seed", a.seed},
          {"trace_every", a.trace_every},
          {"threads", a.threads},
          {"adam", {{"beta1", a.adam.beta1}, {"beta2", a.adam.beta2}, {"eps", a.adam.eps}}}};
}

}  // namespace recon::config
