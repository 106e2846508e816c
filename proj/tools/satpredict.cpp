// satpredict: early termination prediction for CDCL solver runs.
//
// Exit codes: 0 success, 2 input/config error, 3 insufficient data.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "satpredict/satpredict.hpp"

namespace fs = std::filesystem;
using namespace satpredict;
using nlohmann::json;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitInsufficient = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_output(const std::string& path, const std::string& body) {
  if (path.empty() || path == "-") {
    std::cout << body;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot open '" + path + "' for writing");
  out << body;
  if (!out) throw Error(Errc::Io, "write to '" + path + "' failed");
}

// Files named directly, plus the regular files directly inside named
// directories; sorted by path.
std::vector<fs::path> expand_inputs(const std::vector<std::string>& paths) {
  std::vector<fs::path> files;
  for (const auto& p : paths) {
    if (fs::is_directory(p)) {
      for (const auto& entry : fs::directory_iterator(p))
        if (entry.is_regular_file()) files.push_back(entry.path());
    } else if (fs::exists(p)) {
      files.emplace_back(p);
    } else {
      throw Error(Errc::Io, "no such file '" + p + "'");
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<RunTrace> parse_logs(const std::vector<fs::path>& files, const std::string& adapter,
                                 const std::string& instance_id) {
  std::vector<RunTrace> traces;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot open '" + f.string() + "'");
    try {
      traces.push_back(parse_stats_stream(in, adapter, f.stem().string(), instance_id));
    } catch (const Error& e) {
      const auto where = f.string() + (e.line() ? ":" + std::to_string(*e.line()) : std::string());
      throw Error(e.code(), where + ": " + e.what(), e.line());
    }
  }
  return traces;
}

std::vector<RunTrace> load_traces_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open '" + path + "'");
  try {
    return parse_canonical_csv(in);
  } catch (const Error& e) {
    const auto where = path + (e.line() ? ":" + std::to_string(*e.line()) : std::string());
    throw Error(e.code(), where + ": " + e.what(), e.line());
  }
}

FeatureSetSpec make_spec(const std::string& set, std::size_t k) {
  if (k < 1) throw UsageError("--iterations must be >= 1");
  return {feature_set_from_name(set), k};
}

Dataset dataset_from_traces(const std::vector<RunTrace>& traces, double time_limit, const FeatureSetSpec& spec,
                            std::uint64_t seed, std::optional<std::size_t> pool) {
  std::vector<Label> labels;
  labels.reserve(traces.size());
  for (const auto& t : traces) labels.push_back(label_run(t, time_limit));
  return build_balanced(traces, labels, spec, seed, pool);
}

json layer_widths(const Model& m) {
  json w = json::array();
  for (auto v : m.arch.widths()) w.push_back(v);
  return w;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Early termination prediction from CDCL solver iteration statistics"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse solver stats logs into the canonical CSV");
  std::vector<std::string> ingest_paths;
  std::string adapter = "canonical", out_path, instance_id;
  ingest->add_option("paths", ingest_paths, "Log files or directories");
  ingest->add_option("--adapter", adapter, "Log dialect adapter")->capture_default_str();
  ingest->add_option("--instance-id", instance_id, "Instance id recorded for every run");
  ingest->add_option("--out", out_path, "Output CSV (default stdout)");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic trace corpus");
  std::size_t n_per_class = 75;
  std::uint64_t seed = 0;
  std::string config_path;
  std::optional<double> noise;
  std::optional<std::size_t> bayes_mc;
  bool dump_config = false, as_json = false;
  synth->add_option("--n-per-class", n_per_class, "Runs per class")->capture_default_str();
  synth->add_option("--seed", seed, "Random seed")->capture_default_str();
  synth->add_option("--config", config_path, "Generator parameters (JSON)");
  synth->add_option("--noise", noise, "Override noise_scale");
  synth->add_option("--bayes-mc", bayes_mc, "Print the Bayes-optimal accuracy estimate with this many samples");
  synth->add_flag("--dump-config", dump_config, "Print the effective generator parameters and exit");
  synth->add_option("--out", out_path, "Output CSV (default stdout)");

  // dataset
  auto* dataset_cmd = app.add_subcommand("dataset", "Label, balance and optionally split traces");
  std::string traces_path, test_out_path, set_name = "set1";
  std::size_t iterations = 2;
  std::optional<double> time_limit, test_fraction;
  std::optional<std::size_t> pool_size;
  dataset_cmd->add_option("--traces", traces_path, "Canonical trace CSV")->required();
  dataset_cmd->add_option("--time-limit", time_limit, "Runs terminating within this many seconds are labeled 1")->required();
  dataset_cmd->add_option("--set", set_name, "Feature set: set1 or set2")->capture_default_str();
  dataset_cmd->add_option("--iterations", iterations, "Leading iterations per feature vector (K)")->capture_default_str();
  dataset_cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
  dataset_cmd->add_option("--pool-size", pool_size, "Keep exactly this many examples");
  dataset_cmd->add_option("--test-fraction", test_fraction, "Stratified test share; requires --test-out");
  dataset_cmd->add_option("--out", out_path, "Dataset CSV (training side when splitting)")->required();
  dataset_cmd->add_option("--test-out", test_out_path, "Test dataset CSV");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a classifier");
  std::string dataset_path, arch_name_opt = "C";
  TrainConfig cfg;
  std::optional<double> dropout;
  bool no_normalize = false;
  auto* train_ds_opt = train_cmd->add_option("--dataset", dataset_path, "Dataset CSV");
  auto* train_tr_opt = train_cmd->add_option("--traces", traces_path, "Canonical trace CSV (labeled with --time-limit)");
  train_ds_opt->excludes(train_tr_opt);
  train_cmd->add_option("--time-limit", time_limit, "Labeling time limit in seconds (with --traces)");
  train_cmd->add_option("--set", set_name, "Feature set for --traces")->capture_default_str();
  train_cmd->add_option("--iterations", iterations, "K for --traces")->capture_default_str();
  train_cmd->add_option("--arch", arch_name_opt, "A, B or C")->capture_default_str();
  train_cmd->add_option("--epochs", cfg.epochs)->capture_default_str();
  train_cmd->add_option("--batch-size", cfg.batch_size)->capture_default_str();
  train_cmd->add_option("--lr", cfg.learning_rate)->capture_default_str();
  train_cmd->add_option("--dropout", dropout, "Dropout rate (arch C, default 0.2)");
  train_cmd->add_option("--seed", seed, "Seed for initialization and training")->capture_default_str();
  train_cmd->add_flag("--no-normalize", no_normalize, "Train on raw features");
  train_cmd->add_option("--out", out_path, "Model JSON")->required();
  train_cmd->add_flag("--json", as_json, "Machine-readable summary");

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Classify runs with a trained model");
  std::string model_path;
  std::vector<std::string> log_paths;
  double threshold = 0.5;
  predict_cmd->add_option("--model", model_path, "Model JSON")->required();
  auto* pred_tr = predict_cmd->add_option("--traces", traces_path, "Canonical trace CSV");
  auto* pred_logs = predict_cmd->add_option("logs", log_paths, "Stats log files");
  pred_tr->excludes(pred_logs);
  predict_cmd->add_option("--adapter", adapter, "Log dialect adapter")->capture_default_str();
  predict_cmd->add_option("--threshold", threshold)->capture_default_str();
  predict_cmd->add_flag("--json", as_json);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model on a test dataset");
  eval_cmd->add_option("--model", model_path, "Model JSON")->required();
  eval_cmd->add_option("--dataset", dataset_path, "Test dataset CSV")->required();
  eval_cmd->add_option("--threshold", threshold)->capture_default_str();
  eval_cmd->add_flag("--json", as_json);

  // watch
  auto* watch_cmd = app.add_subcommand("watch", "Classify a live run from stdin after K iterations");
  std::optional<std::size_t> watch_k;
  watch_cmd->add_option("--model", model_path, "Model JSON")->required();
  watch_cmd->add_option("--iterations", watch_k, "Iterations to wait for (default: the model's K)");
  watch_cmd->add_option("--adapter", adapter, "Log dialect adapter")->capture_default_str();
  watch_cmd->add_option("--threshold", threshold)->capture_default_str();

  // plot
  auto* plot_cmd = app.add_subcommand("plot", "Render diagnostic SVG graphics");
  plot_cmd->require_subcommand(1);
  auto* evo_cmd = plot_cmd->add_subcommand("evolution", "Parameter evolution over cumulative solver time");
  std::string param_name = "conflicts/second", csv_path;
  bool log_x = false;
  evo_cmd->add_option("--traces", traces_path, "Canonical trace CSV")->required();
  evo_cmd->add_option("--param", param_name, "Stat name")->capture_default_str();
  evo_cmd->add_flag("--log-x", log_x, "Logarithmic time axis");
  evo_cmd->add_option("--csv", csv_path, "Also write the series as CSV");
  evo_cmd->add_option("--out", out_path, "SVG output (default stdout)");
  auto* scatter_cmd = plot_cmd->add_subcommand("scatter", "Pairwise scatterplot matrix of one iteration");
  std::size_t plot_iteration = 1;
  scatter_cmd->add_option("--dataset", dataset_path, "Dataset CSV")->required();
  scatter_cmd->add_option("--iteration", plot_iteration, "1-based iteration")->capture_default_str();
  scatter_cmd->add_option("--out", out_path, "SVG output (default stdout)");

  // cnf-stats
  auto* cnf_cmd = app.add_subcommand("cnf-stats", "Instance features of a DIMACS CNF file");
  std::string cnf_path;
  cnf_cmd->add_option("file", cnf_path, "DIMACS file")->required();
  cnf_cmd->add_flag("--json", as_json);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*ingest) {
      const auto files = expand_inputs(ingest_paths);
      if (files.empty()) {
        std::cerr << "error: no inputs\n";
        return kExitInput;
      }
      write_output(out_path, serialize_canonical_csv(parse_logs(files, adapter, instance_id)));
    } else if (*synth) {
      auto params = config_path.empty() ? GeneratorParams::defaults() : params_from_json(json::parse(read_file(config_path)));
      if (noise) params.noise_scale = *noise;
      validate(params);
      if (dump_config) {
        std::cout << params_to_json(params).dump(2) << "\n";
        return 0;
      }
      if (bayes_mc) {
        const auto b = bayes_accuracy(params, *bayes_mc, seed);
        std::cout << json{{"bayes_accuracy", b.accuracy}, {"std_error", b.std_error}, {"n_mc", *bayes_mc}}.dump() << "\n";
        if (out_path.empty()) return 0;
      }
      const auto corpus = generate_corpus(n_per_class, params, seed);
      write_output(out_path, serialize_canonical_csv(corpus.traces));
    } else if (*dataset_cmd) {
      const auto spec = make_spec(set_name, iterations);
      const auto ds = dataset_from_traces(load_traces_csv(traces_path), *time_limit, spec, seed, pool_size);
      if (test_fraction) {
        if (test_out_path.empty()) throw UsageError("--test-fraction requires --test-out");
        const auto [train_ds, test_ds] = split(ds, *test_fraction, seed);
        save_dataset(train_ds, out_path);
        save_dataset(test_ds, test_out_path);
        std::cout << "train=" << train_ds.size() << " test=" << test_ds.size() << "\n";
      } else {
        save_dataset(ds, out_path);
        std::cout << "examples=" << ds.size() << "\n";
      }
    } else if (*train_cmd) {
      Dataset ds;
      if (!traces_path.empty()) {
        if (!time_limit) throw UsageError("--time-limit is required when training from --traces");
        ds = dataset_from_traces(load_traces_csv(traces_path), *time_limit, make_spec(set_name, iterations), seed,
                                 std::nullopt);
      } else if (!dataset_path.empty()) {
        ds = load_dataset(dataset_path);
      } else {
        throw UsageError("one of --dataset or --traces is required");
      }
      const auto arch = arch_from_name(arch_name_opt);
      const double p = dropout.value_or(arch == ArchId::C ? 0.2 : 0.0);
      cfg.seed = seed;
      cfg.normalize = !no_normalize;
      const auto tm = train(build_model(arch, ds.spec.dimension(), p, seed), ds, cfg);
      save_model(tm, out_path);
      const double acc = tm.history.empty() ? 0.0 : tm.history.back().train_acc;
      if (as_json) {
        std::cout << json{{"arch", arch_name(arch)}, {"layers", layer_widths(tm.model)}, {"epochs", tm.history.size()},
                          {"train_acc", acc}, {"model", out_path}}
                         .dump()
                  << "\n";
      } else {
        std::cout << "train_acc=" << text::format_double(acc) << "\n";
      }
    } else if (*predict_cmd) {
      const auto tm = load_model(model_path);
      std::vector<RunTrace> traces;
      if (!traces_path.empty()) {
        traces = load_traces_csv(traces_path);
      } else if (!log_paths.empty()) {
        traces = parse_logs(expand_inputs(log_paths), adapter, "");
      } else {
        throw UsageError("no inputs");
      }
      json arr = json::array();
      for (const auto& t : traces) {
        const auto pr = predict(tm, t, threshold);
        if (as_json) {
          arr.push_back({{"run_id", t.run_id}, {"verdict", to_int(pr.label)}, {"p", pr.probability}});
        } else {
          std::cout << t.run_id << " verdict=" << to_int(pr.label) << " p=" << text::format_double(pr.probability) << "\n";
        }
      }
      if (as_json) std::cout << arr.dump() << "\n";
    } else if (*eval_cmd) {
      const auto tm = load_model(model_path);
      const auto test = load_dataset(dataset_path);
      const auto report = evaluate(tm, test, threshold, fs::path(model_path).stem().string(),
                                   fs::path(dataset_path).stem().string());
      std::cout << render_report(report, as_json ? ReportFormat::Json : ReportFormat::Text);
    } else if (*watch_cmd) {
      const auto tm = load_model(model_path);
      const auto k = watch_k.value_or(tm.spec.iterations);
      const auto verdict = watch_stream(std::cin, tm, AdapterRegistry::instance().find(adapter), k, threshold);
      if (!verdict) {
        std::cout << "insufficient-iterations\n";
        return kExitInsufficient;
      }
      std::cout << format_verdict(*verdict) << std::endl;
    } else if (*evo_cmd) {
      const auto traces = load_traces_csv(traces_path);
      const auto series = evolution_series(traces, param_name);
      if (!csv_path.empty()) write_output(csv_path, series_to_csv(series));
      write_output(out_path, evolution_svg(series, param_name, {log_x}));
    } else if (*scatter_cmd) {
      write_output(out_path, scatter_matrix(load_dataset(dataset_path), plot_iteration));
    } else if (*cnf_cmd) {
      const auto f = instance_features(parse_dimacs(read_file(cnf_path)));
      if (as_json) {
        json fractions = json::object();
        for (const auto& [len, frac] : f.clause_len_fractions) fractions[std::to_string(len)] = frac;
        std::cout << json{{"num_vars", f.num_vars},
                          {"num_clauses", f.num_clauses},
                          {"density", f.density},
                          {"clause_len",
                           {{"min", f.clause_len.min},
                            {"q1", f.clause_len.q1},
                            {"median", f.clause_len.median},
                            {"q3", f.clause_len.q3},
                            {"max", f.clause_len.max}}},
                          {"total_literal_occurrences", f.total_literal_occurrences},
                          {"clause_len_fractions", fractions},
                          {"mean_literal_occurrence", f.mean_literal_occurrence}}
                         .dump()
                  << "\n";
      } else {
        std::cout << "num_vars: " << f.num_vars << "\nnum_clauses: " << f.num_clauses
                  << "\ndensity: " << text::format_double(f.density) << "\nclause_len: min="
                  << text::format_double(f.clause_len.min) << " q1=" << text::format_double(f.clause_len.q1)
                  << " median=" << text::format_double(f.clause_len.median)
                  << " q3=" << text::format_double(f.clause_len.q3) << " max=" << text::format_double(f.clause_len.max)
                  << "\ntotal_literal_occurrences: " << f.total_literal_occurrences
                  << "\nmean_literal_occurrence: " << text::format_double(f.mean_literal_occurrence) << "\n";
        for (const auto& [len, frac] : f.clause_len_fractions)
          std::cout << "fraction_len_" << len << ": " << text::format_double(frac) << "\n";
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitInput;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::InsufficientIterations ? kExitInsufficient : kExitInput;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return 0;
}
