// cimr: command-line front end for experiments, corpus export and the fusion
// gradient check.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cimr/cimr.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitBackend = 3;

constexpr double kGradTolerance = 1e-4;

struct RunOptions {
  std::string config_path;
  std::vector<std::string> variants;
  std::optional<int> episodes;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> backend_url;
  std::string out;
  std::string traces;
  std::string triplets;
  std::optional<std::string> format;
  std::optional<int> threads;
};

int run_command(const RunOptions& opt) {
  try {
    cimr::ExperimentConfig config = cimr::load_config(opt.config_path);
    if (!opt.variants.empty()) {
      config.variants.clear();
      for (const auto& v : opt.variants) config.variants.push_back(cimr::parse_variant(v));
    }
    if (opt.episodes) config.episodes = *opt.episodes;
    if (opt.seed) config.base_seed = *opt.seed;
    if (opt.threads) config.threads = *opt.threads;
    if (auto url = cimr::resolve_backend_url(opt.backend_url ? opt.backend_url : config.backend_url)) {
      config.backend_url = url;
    }
    if (!opt.out.empty()) config.results_path = opt.out;
    if (!opt.traces.empty()) config.traces_path = opt.traces;
    if (!opt.triplets.empty()) config.triplets_path = opt.triplets;
    if (opt.format) {
      config.format = *opt.format == "markdown" ? cimr::TableFormat::markdown : cimr::TableFormat::csv;
    }
    if (config.results_path.empty() || config.traces_path.empty()) {
      throw cimr::ConfigError(cimr::ConfigErrc::Missing, "--out and --traces are required");
    }
    cimr::validate(config);

    const auto result = cimr::run_experiment(config);
    std::cout << cimr::render_markdown(result.table);
    std::printf("\n%zu episodes in %.2f s; %d correction triplets\n", result.traces.size(),
                result.seconds, result.triplets_written);
    return kExitOk;
  } catch (const cimr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const cimr::BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

int gradcheck_command(std::uint64_t seed, int instances) {
  const auto summary = cimr::gradient_suite(seed, instances);
  std::printf("instances: %d\nmax relative error: %.3e\n", summary.instances,
              summary.max_relative_error);
  const bool ok = summary.max_relative_error < kGradTolerance;
  std::printf("%s (tolerance %.0e)\n", ok ? "PASS" : "FAIL", kGradTolerance);
  return ok ? kExitOk : kExitFailure;
}

int corpus_command(std::uint64_t seed, int episodes, const std::string& out) {
  try {
    cimr::ExperimentConfig config;
    config.base_seed = seed;
    config.episodes = episodes;
    cimr::validate(config);
    cimr::write_corpus(out, cimr::build_scenarios(config));
    return kExitOk;
  } catch (const cimr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop iterative multimodal reasoning simulator"};
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Run a variant sweep and write results and traces");
  run_cmd->add_option("--config", run.config_path, "Experiment config file")->required();
  run_cmd->add_option("--variant", run.variants, "full | no_self_correction | no_dynamic_context")
      ->take_all();
  run_cmd->add_option("--episodes", run.episodes, "Number of scenarios");
  run_cmd->add_option("--seed", run.seed, "Base scenario seed");
  run_cmd->add_option("--backend-url", run.backend_url, "Remote backend endpoint");
  run_cmd->add_option("--out", run.out, "Results table path");
  run_cmd->add_option("--traces", run.traces, "Per-round trace JSONL path");
  run_cmd->add_option("--triplets", run.triplets, "Correction triplet JSONL path");
  run_cmd->add_option("--format", run.format, "Results format")
      ->check(CLI::IsMember({"csv", "markdown"}));
  run_cmd->add_option("--threads", run.threads, "Worker threads (0 = all cores)");

  std::uint64_t grad_seed = 1;
  int grad_instances = 100;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Check fusion gradients against finite differences");
  grad_cmd->add_option("--seed", grad_seed, "Suite seed");
  grad_cmd->add_option("--instances", grad_instances, "Random instances")->check(CLI::PositiveNumber);

  std::uint64_t corpus_seed = 0;
  int corpus_episodes = 100;
  std::string corpus_out;
  auto* corpus_cmd = app.add_subcommand("corpus", "Write a scenario corpus as JSONL");
  corpus_cmd->add_option("--seed", corpus_seed, "Base scenario seed");
  corpus_cmd->add_option("--episodes", corpus_episodes, "Number of scenarios");
  corpus_cmd->add_option("--out", corpus_out, "Output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*run_cmd) return run_command(run);
  if (*grad_cmd) return gradcheck_command(grad_seed, grad_instances);
  if (*corpus_cmd) return corpus_command(corpus_seed, corpus_episodes, corpus_out);
  return kExitConfig;
}
