// lidcd: causal discovery under latent interventions.
//
// Subcommands: generate (simulate a dataset), fit (train on a dataset),
// eval (score a fit report against a manifest), benchmark (grid of runs).

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lidcd/harness.hpp"

namespace fs = std::filesystem;
using namespace lidcd;

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

const std::vector<std::string> kConfigKeys = {
    "d", "e", "edge_prob", "family", "kind", "n", "variant", "likelihood",
    "alpha", "gamma", "xi_g", "h", "K", "ffn_hidden", "ffn_blocks", "dropout",
    "flow_layers", "flow_hidden", "sigma_floor", "lr", "weight_decay", "batch",
    "epochs_first", "epochs_rest", "fixed_epochs", "max_outer", "h_tol",
    "temperature", "edge_threshold", "val_split", "al_phi0", "al_mu0", "al_eta",
    "al_delta", "kappa", "f", "seed", "name", "out", "strict_hparams"};

void add_config_flags(CLI::App* app, Overrides& overrides) {
  app->set_help_flag("--help", "print help");
  for (const std::string& key : kConfigKeys) {
    app->add_option_function<std::string>(
        "--" + key,
        [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); },
        "config key '" + key + "'");
  }
  app->add_option_function<std::vector<std::string>>(
      "--set",
      [&overrides](const std::vector<std::string>& kvs) {
        for (const std::string& kv : kvs) {
          const std::size_t eq = kv.find('=');
          if (eq == std::string::npos)
            throw CLI::ValidationError("--set expects key=value, got '" + kv + "'");
          overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
        }
      },
      "extra key=value overrides");
}

void apply_pairs_preset(Overrides& o) {
  // Two-variable cause-effect pairs: the three graphs are equiprobable.
  o.emplace_back("d", "2");
  o.emplace_back("edge_prob", "0.66666666666666667");
  o.emplace_back("family", "linear");
  o.emplace_back("kind", "stochastic");
  o.emplace_back("n", "999");
}

int run_generate(const std::string& config_path, Overrides overrides,
                 std::string data_out) {
  const ExperimentConfig cfg = parse_experiment_config(config_path, overrides);
  const Dataset ds = generate_dataset(cfg, cfg.seed);
  if (data_out.empty())
    data_out = (fs::path(output_root(cfg)) / cfg.name / "dataset.csv").string();
  fs::create_directories(fs::path(data_out).parent_path());
  save_dataset(ds, data_out);
  write_config_echo(cfg.echo(), manifest_path_for(data_out) + ".config.txt");
  std::cout << "wrote " << data_out << "\n"
            << "  d=" << ds.d << " edges=" << ds.manifest->graph.edge_count()
            << " regimes=" << ds.regimes() << " n=" << ds.n << "\n";
  return 0;
}

int run_fit(const std::string& config_path, Overrides overrides, const std::string& data) {
  const ExperimentConfig cfg = parse_experiment_config(config_path, overrides);
  LoadOptions lo;
  Dataset ds = load_csv(data, lo);
  const std::string out_dir = (fs::path(output_root(cfg)) / cfg.name).string();
  RunOutcome outcome = run_fit_eval(cfg, ds, cfg.seed, out_dir);
  if (!outcome.ok) {
    std::cerr << "fit failed: " << outcome.error << "\n";
    return 1;
  }
  const FitReport& r = outcome.report;
  std::cout << "fit " << (r.converged ? "converged" : "stopped") << " after "
            << r.outer_iterations << " outer iterations (" << r.steps << " steps)\n";
  if (!r.h_trace.empty()) std::cout << "  final h(Lambda) = " << r.h_trace.back() << "\n";
  if (!r.val_loglik_trace.empty())
    std::cout << "  final val loglik = " << r.val_loglik_trace.back() << "\n";
  if (outcome.metrics.has_value()) std::cout << "  " << metrics_to_text(*outcome.metrics) << "\n";
  std::cout << "  artifacts in " << outcome.run_dir << "\n";
  return 0;
}

int run_eval(const std::string& report_path, const std::string& manifest_path,
             std::string out_path) {
  const FitReport report = load_fit_report(report_path);
  const Dataset::Manifest manifest = load_manifest(manifest_path);
  const GraphMetrics m = evaluate(report.adjacency, manifest.graph.adj, report.d);
  std::cout << metrics_to_text(m) << "\n";
  if (out_path.empty())
    out_path = (fs::path(report_path).parent_path() / "metrics.json").string();
  write_metrics_json(m, out_path);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int run_benchmark_cmd(const std::string& config_path, Overrides overrides,
                      const std::string& preset) {
  Overrides all;
  if (preset == "pairs") {
    apply_pairs_preset(all);
    all.emplace_back("scms", "60");
    all.emplace_back("variants", "known,unknown,latent,observational");
  } else if (preset == "table1") {
    all.emplace_back("d", "10");
    all.emplace_back("n", "10000");
    all.emplace_back("families", "linear,nonlinear,nongaussian");
    all.emplace_back("es", "1,4");
    all.emplace_back("kinds", "stochastic,imperfect");
    all.emplace_back("variants", "latent,unknown,known,observational");
    all.emplace_back("scms", "10");
  } else if (!preset.empty()) {
    std::cerr << "unknown preset '" << preset << "' (expected pairs|table1)\n";
    return 2;
  }
  all.insert(all.end(), overrides.begin(), overrides.end());
  const BenchmarkConfig cfg = parse_benchmark_config(config_path, all);
  const std::string out_dir =
      (fs::path(output_root(cfg.base)) / cfg.base.name).string();
  fs::create_directories(out_dir);
  write_config_echo(cfg.base.echo(), (fs::path(out_dir) / "config.txt").string());
  const BenchmarkResult result = run_benchmark(cfg, out_dir);
  std::cout << format_benchmark_table(result);
  std::cout << "artifacts in " << out_dir << "\n";
  if (result.failed_runs > 0) {
    std::cerr << result.failed_runs << " run(s) failed:\n";
    for (const BenchmarkCell& cell : result.cells)
      for (const std::string& e : cell.errors) std::cerr << "  " << e << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"causal discovery under latent interventions"};
  app.require_subcommand(1);
  // '--h' is the embedding width, so help is long-form only.
  app.set_help_flag("--help", "print help");

  std::string config_path, data_path, data_out, report_path, manifest_path, out_path,
      preset;
  Overrides gen_ov, fit_ov, bench_ov;

  CLI::App* gen = app.add_subcommand("generate", "simulate an SCM dataset");
  gen->add_option("--config", config_path, "key = value config file");
  gen->add_option("--data-out", data_out, "output CSV path");
  gen->add_flag_callback("--preset-pairs", [&]() { apply_pairs_preset(gen_ov); },
                         "two-variable cause-effect preset");
  add_config_flags(gen, gen_ov);

  CLI::App* fitc = app.add_subcommand("fit", "fit the model to a dataset");
  fitc->add_option("--config", config_path, "key = value config file");
  fitc->add_option("--data", data_path, "dataset CSV")->required();
  add_config_flags(fitc, fit_ov);

  CLI::App* evalc = app.add_subcommand("eval", "score a fit report against a manifest");
  evalc->add_option("--report", report_path, "fitreport.json")->required();
  evalc->add_option("--manifest", manifest_path, "dataset manifest JSON")->required();
  evalc->add_option("--metrics-out", out_path, "metrics JSON output path");

  CLI::App* bench = app.add_subcommand("benchmark", "run a grid of experiments");
  bench->add_option("--config", config_path, "key = value config file");
  bench->add_option("--preset", preset, "pairs | table1");
  add_config_flags(bench, bench_ov);
  for (const char* key : {"families", "es", "kinds", "variants", "scms", "workers"}) {
    bench->add_option_function<std::string>(
        std::string("--") + key,
        [&bench_ov, key](const std::string& v) { bench_ov.emplace_back(key, v); },
        std::string("grid key '") + key + "'");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return run_generate(config_path, gen_ov, data_out);
    if (fitc->parsed()) return run_fit(config_path, fit_ov, data_path);
    if (evalc->parsed()) return run_eval(report_path, manifest_path, out_path);
    if (bench->parsed()) return run_benchmark_cmd(config_path, bench_ov, preset);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
