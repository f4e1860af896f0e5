#include "recon/cli.hpp"

#include "recon/config.hpp"
#include "recon/io.hpp"
#include "recon/verify.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace recon::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Dataset {
  std::vector<std::string> names;
  Measure measure;
};

std::optional<Dataset> load_data(const config::RunConfig& rc) {
  if (!rc.data.path) return std::nullopt;
  auto table = io::load_dataset(*rc.data.path);
  return Dataset{table.header, build_measure<double>(table.rows)};
}

void check_layout(const DataLayout& layout, const Dataset& data, const std::string& path) {
  if (data.measure.dim() != layout.dim())
    throw ConfigError(path + ": dataset has " + std::to_string(data.measure.dim()) + " columns, model layout needs " +
                      std::to_string(layout.dim()));
  for (const auto& f : layout.frozen())
    for (Index n = 0; n < data.measure.size(); ++n)
      if (data.measure.points()(n, f.index) != f.value)
        throw ConfigError(path + ": column '" + layout.name(f.index) + "' must equal " + io::format_double(f.value));
}

fs::path output_dir(const config::RunConfig& rc) {
  fs::path dir(rc.output.dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("config key 'output.dir': cannot create " + dir.string());
  return dir;
}

PosteriorDraws<double> sample_draws(const config::RunConfig& rc, const LikelihoodModel<double>& model,
                                    const std::optional<Dataset>& data) {
  if (!rc.sampler) throw ConfigError("missing config key 'sampler'");
  if (!data) throw ConfigError("missing config key 'data.path' (the sampler conditions on a dataset)");
  const auto& sec = *rc.sampler;
  if (sec.kind == "exact") {
    if (model.name() != "gaussian_mean")
      throw ConfigError("config key 'sampler.kind': exact draws need model gaussian_mean");
    auto d = exact_gaussian_mean_draws(data->measure, sec.config.T, sec.config.seed);
    d.names = model.param_names();
    return d;
  }
  auto cfg = sec.config;
  if (cfg.init.empty()) {
    // zeros, with a unit noise scale for kidscore
    cfg.init.assign(static_cast<std::size_t>(model.param_dim()), 0.0);
    if (model.name() == "kidscore") cfg.init.back() = 1.0;
  }
  if (static_cast<Index>(cfg.init.size()) != model.param_dim())
    throw ConfigError("config key 'sampler.init' needs " + std::to_string(model.param_dim()) + " values");
  auto d = rwm_draws(model, data->measure, cfg);
  d.names = model.param_names();
  return d;
}

int cmd_sample(const std::string& config_path, std::ostream& out) {
  const auto rc = config::load_run_config(config_path, config::seed_from_env());
  const auto data = load_data(rc);
  const auto bundle = config::build_models(rc.model, data ? data->names : std::vector<std::string>{});
  if (!bundle.likelihood) throw ConfigError("config key 'model.name': sample needs a likelihood model");
  if (data) check_layout(bundle.layout(), *data, *rc.data.path);
  const auto draws = sample_draws(rc, *bundle.likelihood, data);
  const fs::path path = output_dir(rc) / rc.output.draws_file;
  io::save_draws(path.string(), draws);
  out << "wrote " << draws.count() << " draws to " << path.string();
  if (draws.acceptance_rate) out << " (acceptance " << *draws.acceptance_rate << ")";
  out << '\n';
  return kExitOk;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << j.dump(2) << '\n';
  if (!f) throw IoError("error writing " + path.string());
}

int cmd_attack(const std::string& config_path, std::ostream& out) {
  const auto rc = config::load_run_config(config_path, config::seed_from_env());
  if (!rc.attack) throw ConfigError("missing config key 'attack'");
  const auto data = load_data(rc);
  const auto bundle = config::build_models(rc.model, data ? data->names : std::vector<std::string>{});
  const DataLayout& layout = bundle.layout();
  if (data) check_layout(layout, *data, *rc.data.path);

  json draws_info;
  std::optional<PosteriorDraws<double>> draws;
  std::optional<AttackProblem<double>> problem;
  if (bundle.likelihood) {
    if (rc.data.draws) {
      draws = io::load_draws(*rc.data.draws);
      draws_info = {{"source", "file"}, {"path", *rc.data.draws}};
    } else {
      draws = sample_draws(rc, *bundle.likelihood, data);
      draws_info = {{"source", rc.sampler->kind}, {"sampler", rc.raw.at("sampler")}};
      if (draws->acceptance_rate) draws_info["acceptance_rate"] = *draws->acceptance_rate;
    }
    draws_info["T"] = draws->count();
    problem = AttackProblem<double>::bayes(*bundle.likelihood, *draws);
  } else {
    Vector<double> theta;
    if (rc.data.theta_star) {
      theta = Eigen::Map<const Vector<double>>(rc.data.theta_star->data(),
                                               static_cast<Index>(rc.data.theta_star->size()));
      draws_info = {{"theta_star_source", "config"}};
    } else if (rc.data.fit_theta_star) {
      if (!data) throw ConfigError("config key 'data.fit_theta_star' needs 'data.path'");
      theta = train_to_stationarity(*bundle.loss, data->measure,
                                    Vector<double>(Vector<double>::Zero(bundle.loss->param_dim())));
      draws_info = {{"theta_star_source", "fit"}};
    } else {
      throw ConfigError("missing config key 'data.theta_star' (or set data.fit_theta_star)");
    }
    if (theta.size() != bundle.loss->param_dim())
      throw ConfigError("config key 'data.theta_star' needs " + std::to_string(bundle.loss->param_dim()) + " values");
    draws_info["theta_star"] = std::vector<double>(theta.data(), theta.data() + theta.size());
    problem = AttackProblem<double>::nonbayes(*bundle.loss, theta);
  }

  const std::optional<Measure> target = data ? std::optional<Measure>(data->measure) : std::nullopt;
  const auto result = run_attack(*problem, *rc.attack, target);

  const fs::path dir = output_dir(rc);
  io::write_trace_csv((dir / "trace.csv").string(), result.trace, layout);
  io::save_measure((dir / "measure.csv").string(), result.measure, layout);
  write_json(dir / "layout.json", io::layout_to_json(layout));

  const auto& last = result.trace.checkpoints.back();
  json summary;
  summary["config"] = rc.raw;
  summary["attack"] = config::attack_config_to_json(*rc.attack);
  summary["seeds"] = {{"attack", rc.attack->seed}};
  if (rc.sampler) summary["seeds"]["sampler"] = rc.sampler->config.seed;
  summary["draws"] = draws_info;
  summary["objective"] = last.objective;
  summary["iterations"] = last.iteration;
  summary["total_mass"] = last.stats.total_mass;
  summary["final_stats"] = io::stats_to_json(last.stats, layout);
  if (last.errors) summary["errors"] = io::errors_to_json(*last.errors);
  write_json(dir / "summary.json", summary);

  out << "objective " << io::format_double(last.objective) << ", total mass " << io::format_double(last.stats.total_mass);
  if (last.errors) out << ", max rel error " << io::format_double(last.errors->max_error());
  out << "\nwrote trace.csv, measure.csv, layout.json, summary.json to " << dir.string() << '\n';
  return kExitOk;
}

int cmd_verify(const std::string& filter, std::ostream& out) {
  const auto results = verify::run_checks(filter, false, out);
  if (results.empty()) throw ConfigError("verify: no check matches '" + filter + "'");
  std::size_t failed = 0;
  for (const auto& r : results) failed += r.passed ? 0 : 1;
  out << results.size() - failed << "/" << results.size() << " checks passed\n";
  return failed ? kExitCheckFailed : kExitOk;
}

int cmd_report(const std::string& measure_path, const std::string& data_path, const std::string& layout_path,
               std::ostream& out) {
  const DataLayout layout = io::load_layout(layout_path);
  const Measure recon = io::load_measure(measure_path, layout);
  const auto table = io::load_dataset(data_path);
  if (table.rows.cols() != layout.dim())
    throw ConfigError(data_path + ": dataset has " + std::to_string(table.rows.cols()) + " columns, layout needs " +
                      std::to_string(layout.dim()));
  const auto target = recon_statistics(build_measure<double>(table.rows), layout);
  const auto got = recon_statistics(recon, layout);
  json r;
  r["total_mass"] = got.total_mass;
  r["final_stats"] = io::stats_to_json(got, layout);
  r["errors"] = io::errors_to_json(stat_errors(target, got, layout));
  out << r.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Training-data reconstruction from posteriors and trained models", "recon"};
  app.require_subcommand(1);

  std::string config_path, filter, measure_path, data_path, layout_path;
  auto* sample = app.add_subcommand("sample", "draw from the posterior of a configured model");
  sample->add_option("--config", config_path, "run config JSON")->required();
  auto* attack = app.add_subcommand("attack", "reconstruct a weighted measure");
  attack->add_option("--config", config_path, "run config JSON")->required();
  auto* verify_cmd = app.add_subcommand("verify", "run the built-in checks");
  verify_cmd->add_option("--filter", filter, "substring of check names; selects heavy checks too");
  auto* report = app.add_subcommand("report", "relative errors of a measure against a dataset");
  report->add_option("--measure", measure_path)->required();
  report->add_option("--data", data_path)->required();
  report->add_option("--layout", layout_path)->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "recon: " << e.what() << '\n';
    return kExitConfigError;
  }

  try {
    if (*sample) return cmd_sample(config_path, out);
    if (*attack) return cmd_attack(config_path, out);
    if (*verify_cmd) return cmd_verify(filter, out);
    return cmd_report(measure_path, data_path, layout_path, out);
  } catch (const ConfigError& e) {
    err << "recon: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const IoError& e) {
    err << "recon: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const ShapeError& e) {
    err << "recon: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "recon: " << e.what() << '\n';
    return kExitCheckFailed;
  }
}

int run_command(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_command(args, std::cout, std::cerr);
}

}  // namespace recon::cli
