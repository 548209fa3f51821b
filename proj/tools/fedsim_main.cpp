#include <glob.h>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedsim/errors.hpp"
#include "fedsim/experiment.hpp"

namespace {

// Expands shell-style patterns; a pattern with no match is kept verbatim so
// the downstream reader can report the missing path by name.
std::vector<std::string> expand_globs(const std::vector<std::string>& patterns) {
  std::vector<std::string> out;
  for (const auto& pat : patterns) {
    glob_t g{};
    int rc = ::glob(pat.c_str(), 0, nullptr, &g);
    if (rc == 0) {
      for (size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
    } else if (rc == GLOB_NOMATCH) {
      out.push_back(pat);
    } else {
      globfree(&g);
      throw fedsim::IoError("glob failed for pattern " + pat);
    }
    globfree(&g);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void apply_out(fedsim::ExperimentConfig& cfg, fedsim::RunOptions& opts,
               const std::string& out) {
  if (out.empty()) return;
  if (out.size() > 6 && out.substr(out.size() - 6) == ".jsonl")
    opts.jsonl_path = out;
  else
    cfg.out_dir = out;
}

void report(const fedsim::RunResult& res) {
  std::printf("rounds=%zu final_acc=%.4f final_eval_loss=%.6f\n",
              res.rounds.size(), res.final_acc, res.final_eval_loss);
  if (!res.jsonl_path.empty())
    std::printf("log: %s\n", res.jsonl_path.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic cross-device federated learning simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::string field;
  std::string csv_out;
  std::string svg_out;
  uint64_t seed_val = 0;
  int threads = 1;
  std::vector<std::string> inputs;

  auto* run = app.add_subcommand("run", "run one federated experiment");
  run->add_option("--config", config_path, "experiment config (JSON)")
      ->required();
  auto* run_seed = run->add_option("--seed", seed_val,
                                   "override the config seed");
  run->add_option("--out", out_path,
                  "output JSONL file (*.jsonl) or directory");
  run->add_option("--threads", threads,
                  "client training threads (0 = hardware)");

  auto* summ = app.add_subcommand(
      "summarize", "aggregate per-run logs into a mean/std accuracy table");
  summ->add_option("paths", inputs, "JSONL files or glob patterns")
      ->required();
  summ->add_option("--out", csv_out, "output CSV path")->required();

  auto* plot = app.add_subcommand("plot",
                                  "render one logged metric as an SVG chart");
  plot->add_option("paths", inputs, "JSONL files or glob patterns")
      ->required();
  plot->add_option("--field", field, "metric key to plot")->required();
  plot->add_option("--out", svg_out, "output SVG path")->required();

  auto* oracle = app.add_subcommand(
      "oracle-gd", "centralized full-batch gradient descent reference run");
  oracle->add_option("--config", config_path, "experiment config (JSON)")
      ->required();
  auto* oracle_seed = oracle->add_option("--seed", seed_val,
                                         "override the config seed");
  oracle->add_option("--out", out_path,
                     "output JSONL file (*.jsonl) or directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (run->parsed() || oracle->parsed()) {
      fedsim::ExperimentConfig cfg = fedsim::parse_config_file(config_path);
      if (run_seed->count() || oracle_seed->count()) cfg.seed = seed_val;
      fedsim::RunOptions opts;
      opts.threads = threads;
      apply_out(cfg, opts, out_path);
      fedsim::RunResult res = run->parsed()
                                  ? fedsim::run_experiment(cfg, opts)
                                  : fedsim::run_centralized_gd(cfg, opts);
      report(res);
    } else if (summ->parsed()) {
      std::vector<std::string> files = expand_globs(inputs);
      std::vector<fedsim::SummaryRow> rows = fedsim::summarize(files);
      fedsim::write_summary_csv(rows, csv_out);
      for (const auto& r : rows)
        std::printf("%-10s %-10s n=%d  %.2f +/- %.2f\n", r.method.c_str(),
                    r.partition.c_str(), r.n_runs, r.mean_acc, r.std_acc);
      std::printf("wrote %s\n", csv_out.c_str());
    } else if (plot->parsed()) {
      fedsim::plot_series(expand_globs(inputs), field, svg_out);
      std::printf("wrote %s\n", svg_out.c_str());
    }
  } catch (const fedsim::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fedsim::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const fedsim::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const fedsim::ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
