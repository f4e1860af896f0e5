#pragma once

#include "recon/attack.hpp"
#include "recon/models.hpp"
#include "recon/samplers.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace recon::config {

struct ModelConfig {
  std::string name;                 // gaussian_mean | bayes_linreg | kidscore | squared_loss | logistic_loss
  Index dim = 0;                    // gaussian_mean: data/parameter dimension (0: from dataset)
  Index x_dim = 1;                  // regressors, excluding the intercept
  bool intercept = true;
  std::string features = "identity";  // identity | polynomial
  int degree = 2;
  double prior_scale = 1.0;
  double sigma_scale = 2.5;
  double ridge = 0.0;

  bool is_bayes() const { return name == "gaussian_mean" || name == "bayes_linreg" || name == "kidscore"; }
};

struct DataConfig {
  std::optional<std::string> path;   // dataset CSV (target in test mode, input to samplers)
  std::optional<std::string> draws;  // posterior draws CSV
  std::optional<std::vector<double>> theta_star;
  bool fit_theta_star = false;       // solve grad L(theta*, X) = 0 on the dataset
};

struct SamplerSection {
  std::string kind = "rwm";  // exact | rwm
  SamplerConfig config;
};

struct OutputConfig {
  std::string dir = ".";
  std::string draws_file = "draws.csv";
};

struct RunConfig {
  nlohmann::json raw;  // document after environment overrides
  ModelConfig model;
  DataConfig data;
  std::optional<SamplerSection> sampler;
  std::optional<AttackConfig> attack;
  OutputConfig output;
};

/// Parses and validates a run configuration. Unknown keys, bad types and
/// missing read paths raise ConfigError naming the key. When `env_seed` is
/// set it replaces every seed in the document.
RunConfig parse_run_config(const nlohmann::json& doc, std::optional<std::uint64_t> env_seed = std::nullopt);
RunConfig load_run_config(const std::string& path, std::optional<std::uint64_t> env_seed = std::nullopt);

/// Value of RECON_SEED, if set.
std::optional<std::uint64_t> seed_from_env();

/// The concrete models named by a configuration. Exactly one of the two
/// pointers is set.
struct ModelBundle {
  std::unique_ptr<LikelihoodModel<double>> likelihood;
  std::unique_ptr<LossModel<double>> loss;

  const DataLayout& layout() const { return likelihood ? likelihood->layout() : loss->layout(); }
};

/// Coordinate names default to the dataset header when one is given.
ModelBundle build_models(const ModelConfig& cfg, const std::vector<std::string>& names = {});

nlohmann::json attack_config_to_json(const AttackConfig& a);

}  // namespace recon::config
