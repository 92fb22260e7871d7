// Command-line driver: train, eval, ablate, gradcheck, gen-data.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "magcn/data.hpp"
#include "magcn/errors.hpp"
#include "magcn/trainer.hpp"

namespace {

using namespace magcn;

void print_metrics(const MetricsReport& r) {
  std::cout << std::fixed << std::setprecision(4) << r.tag << " [" << r.split << "] acc=" << r.accuracy
            << " f1=" << r.f1 << (r.f1_degenerate ? " (degenerate)" : "") << " f1_macro=" << r.f1_macro
            << " loss=" << r.loss << " params=" << r.parameter_count << "\n";
}

int run_train(const std::string& config, std::optional<std::uint64_t> seed, const std::string& out) {
  RunConfig cfg = load_run_config(config);
  if (seed) cfg.seed = *seed;
  if (!out.empty()) cfg.out_dir = out;
  const TrainResult result = train(cfg);
  print_metrics(result.report);
  std::cout << "best train accuracy " << result.report.best_train_accuracy << " at epoch "
            << result.report.best_epoch << "\n";
  if (!cfg.out_dir.empty()) std::cout << "wrote " << cfg.out_dir << "\n";
  return 0;
}

int run_eval(const std::string& checkpoint, const std::string& data) {
  const MetricsReport r = evaluate(checkpoint, data);
  print_metrics(r);
  std::cout << report_to_json(r).dump() << "\n";
  return 0;
}

int run_ablate(const std::string& config, const std::string& grid_name, const std::string& out) {
  RunConfig cfg = load_run_config(config);
  if (!out.empty()) cfg.out_dir = out;
  const std::vector<MetricsReport> reports = ablate(cfg, parse_ablation_grid(grid_name));
  std::cout << format_ablation_table(reports);
  std::ofstream records;
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    records.open(std::filesystem::path(cfg.out_dir) / "ablation.jsonl");
    std::ofstream(std::filesystem::path(cfg.out_dir) / "ablation.txt") << format_ablation_table(reports);
  }
  for (const auto& r : reports) {
    nlohmann::json j = report_to_json(r);
    j.erase("epochs");
    j["grid"] = grid_name;
    if (records.is_open()) records << j.dump() << "\n";
  }
  return 0;
}

int run_gradcheck(const std::string& config, std::size_t n, double epsilon, double tolerance) {
  const RunConfig cfg = load_run_config(config);
  const auto start = std::chrono::steady_clock::now();
  const GradcheckReport report = model_gradcheck(cfg.model, n, cfg.seed, epsilon, tolerance);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << std::scientific << std::setprecision(3);
  for (const auto& e : report.entries) {
    std::cout << (e.passed ? "  ok   " : "  FAIL ") << std::left << std::setw(40) << e.name << std::right
              << " max_rel=" << e.max_rel_error << " analytic=" << e.analytic << " numeric=" << e.numeric << "\n";
  }
  std::cout << (report.passed ? "PASS" : "FAIL") << " max relative error " << report.max_rel_error << " (eps "
            << report.epsilon << ", tol " << report.tolerance << ", " << std::fixed << std::setprecision(2)
            << seconds << " s)\n";
  return report.passed ? 0 : 1;
}

int run_gen_data(const std::string& spec, const std::string& out) {
  const Dataset data = generate_synthetic(load_synthetic_spec(spec));
  save_dataset(data, out);
  std::cout << "wrote " << data.samples.size() << " samples to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MAGCN multimodal sentiment model"};
  app.require_subcommand(1);

  std::string config, out, checkpoint, data, grid, spec;
  std::optional<std::uint64_t> seed;
  std::size_t gc_length = 4;
  double gc_epsilon = 1e-5, gc_tolerance = 1e-4;

  auto* train_cmd = app.add_subcommand("train", "Train a model from a run config");
  train_cmd->add_option("--config", config, "Run config (flat JSON)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--seed", seed, "Override the config seed");
  train_cmd->add_option("--out", out, "Output directory for checkpoint and metrics");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset file");
  eval_cmd->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", data)->required()->check(CLI::ExistingFile);

  auto* ablate_cmd = app.add_subcommand("ablate", "Run an ablation grid with shared seed and data");
  ablate_cmd->add_option("--config", config)->required()->check(CLI::ExistingFile);
  ablate_cmd->add_option("--grid", grid, "se, cl, gcn, modality or components")
      ->required()
      ->check(CLI::IsMember({"se", "cl", "gcn", "modality", "components"}));
  ablate_cmd->add_option("--out", out, "Output directory");

  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every model gradient");
  gc_cmd->add_option("--config", config)->required()->check(CLI::ExistingFile);
  gc_cmd->add_option("--length", gc_length, "Utterance length")->capture_default_str();
  gc_cmd->add_option("--epsilon", gc_epsilon)->capture_default_str();
  gc_cmd->add_option("--tolerance", gc_tolerance)->capture_default_str();

  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic dataset file");
  gen_cmd->add_option("--spec", spec, "Generator spec (flat JSON)")->required()->check(CLI::ExistingFile);
  gen_cmd->add_option("--out", out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return run_train(config, seed, out);
    if (*eval_cmd) return run_eval(checkpoint, data);
    if (*ablate_cmd) return run_ablate(config, grid, out);
    if (*gc_cmd) return run_gradcheck(config, gc_length, gc_epsilon, gc_tolerance);
    if (*gen_cmd) return run_gen_data(spec, out);
  } catch (const magcn::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const magcn::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
