// SPDX-License-Identifier: Apache-2.0
#include "pvl/cli/cli.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "pvl/harness/ablation.hpp"
#include "pvl/harness/gradsuite.hpp"
#include "pvl/harness/report.hpp"
#include "pvl/numerics/errors.hpp"
#include "pvl/protocol/stream.hpp"

namespace pvl::cli {

namespace {

using harness::ExperimentConfig;

/// Raised inside a command to leave with a specific exit code.
struct Exit {
  int code;
  std::string message;
};

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::uint64_t resolve_seed(const CLI::Option *opt, std::uint64_t value) {
  if (opt->count() > 0)
    return value;
  if (const char *env = std::getenv("PRIVILEGE_SEED")) {
    char *end = nullptr;
    errno = 0;
    const auto v = std::strtoull(env, &end, 10);
    if (errno || end == env || *end)
      throw Exit{kExitUsage, std::string("PRIVILEGE_SEED is not an integer: ") + env};
    return v;
  }
  return value;
}

/// Options shared by run and ablate.
struct ExperimentFlags {
  std::string preset = "cifar-mini";
  std::string method = "full";
  std::uint64_t seed = 1;
  CLI::Option *seed_opt = nullptr;
  ExperimentConfig defaults;
  double alpha = defaults.weights.alpha, beta = defaults.weights.beta,
         gamma = defaults.weights.gamma, tau = defaults.weights.tau;
  double lr = defaults.lr, pretrain_lr = defaults.pretrain_lr,
         finetune_lr = defaults.finetune_incremental_lr;
  double noise_sigma = defaults.noise_sigma, proto_scale = defaults.proto_scale;
  std::size_t batch = defaults.batch_size, pretrain_epochs = defaults.pretrain_epochs,
              base_epochs = defaults.base_epochs,
              inc_epochs = defaults.incremental_epochs,
              tuned_layers = defaults.vit.tuned_layers;
  bool no_refresh = false;
  bool serial = false;

  void add(CLI::App *app) {
    app->add_option("--preset", preset, "Stream preset")
        ->check(CLI::IsMember(protocol::preset_names()));
    seed_opt = app->add_option("--seed", seed, "Master seed (falls back to PRIVILEGE_SEED)");
    app->add_option("--alpha", alpha, "Divergence loss weight")->check(CLI::NonNegativeNumber);
    app->add_option("--beta", beta, "Distillation loss weight")->check(CLI::NonNegativeNumber);
    app->add_option("--gamma", gamma, "CE anchor weight inside distillation")->check(CLI::NonNegativeNumber);
    app->add_option("--tau", tau, "Distillation temperature")->check(CLI::PositiveNumber);
    app->add_option("--lr", lr, "Session learning rate")->check(CLI::PositiveNumber);
    app->add_option("--pretrain-lr", pretrain_lr)->check(CLI::PositiveNumber);
    app->add_option("--finetune-lr", finetune_lr,
                    "Incremental learning rate of the fine-tune baseline")
        ->check(CLI::PositiveNumber);
    app->add_option("--noise-sigma", noise_sigma)->check(CLI::NonNegativeNumber);
    app->add_option("--proto-scale", proto_scale)->check(CLI::PositiveNumber);
    app->add_option("--batch-size", batch)->check(CLI::PositiveNumber);
    app->add_option("--pretrain-epochs", pretrain_epochs);
    app->add_option("--base-epochs", base_epochs)->check(CLI::PositiveNumber);
    app->add_option("--inc-epochs", inc_epochs)->check(CLI::PositiveNumber);
    app->add_option("--tuned-layers", tuned_layers);
    app->add_flag("--no-refresh-prototypes", no_refresh,
                  "Keep the pre-training base prototypes for evaluation");
    app->add_flag("--serial", serial, "Disable OpenMP sample parallelism");
  }

  ExperimentConfig config() const {
    ExperimentConfig c = harness::apply_method(defaults, method);
    c.preset = preset;
    c.seed = resolve_seed(seed_opt, seed);
    c.weights.alpha = alpha;
    c.weights.beta = beta;
    c.weights.gamma = gamma;
    c.weights.tau = tau;
    c.lr = lr;
    c.pretrain_lr = pretrain_lr;
    c.finetune_incremental_lr = finetune_lr;
    c.noise_sigma = noise_sigma;
    c.proto_scale = proto_scale;
    c.batch_size = batch;
    c.pretrain_epochs = pretrain_epochs;
    c.base_epochs = base_epochs;
    c.incremental_epochs = inc_epochs;
    c.vit.tuned_layers = tuned_layers;
    c.refresh_base_prototypes = !no_refresh;
    c.parallel = !serial;
    c.validate();
    return c;
  }
};

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  s = s.substr(b, e - b + 1);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front())
    s = s.substr(1, s.size() - 2);
  return s;
}

/// Flat `key=value` lines naming long flags without dashes. Values only fill
/// options that were not given on the command line.
void apply_config_file(CLI::App *app, const std::string &path) {
  std::string text;
  try {
    text = harness::read_text_file(path);
  } catch (const std::exception &e) {
    throw Exit{kExitUsage, e.what()};
  }
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#')
      continue;
    const auto where = path + ":" + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Exit{kExitUsage, where + ": expected key=value"};
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    CLI::Option *opt = key == "config" ? nullptr : app->get_option_no_throw("--" + key);
    if (!opt)
      throw Exit{kExitUsage, where + ": unknown key '" + key + "'"};
    if (opt->count() > 0)
      continue;
    std::vector<std::string> values;
    std::istringstream vs(value);
    for (std::string v; vs >> v;)
      values.push_back(v);
    try {
      opt->add_result(values);
      opt->run_callback();
    } catch (const CLI::Error &e) {
      throw Exit{kExitUsage, where + ": " + e.what()};
    }
  }
}

std::string metrics_line(const harness::Metrics &m) {
  return "A_Base=" + fixed(m.a_base) + " A_Last=" + fixed(m.a_last) +
         " A_Avg=" + fixed(m.a_avg) + " Fgt=" + fixed(m.fgt);
}

// gen-data ---------------------------------------------------------------

struct GenDataCmd {
  std::string preset = "cifar-mini";
  std::uint64_t seed = 1;
  CLI::Option *seed_opt = nullptr;
  std::string output;
  std::string embeddings;
  double noise_sigma = ExperimentConfig{}.noise_sigma;
  std::size_t samples_per_class = 0;
  std::size_t image_size = 16;
  std::size_t dim = ExperimentConfig{}.vit.embed_dim;

  void add(CLI::App *app) {
    app->add_option("--preset", preset)->check(CLI::IsMember(protocol::preset_names()));
    seed_opt = app->add_option("--seed", seed);
    app->add_option("-o,--output", output, "Dataset file (required)");
    app->add_option("--embeddings", embeddings,
                    "Embedding table (default: <output>.emb.csv)");
    app->add_option("--noise-sigma", noise_sigma)->check(CLI::NonNegativeNumber);
    app->add_option("--samples-per-class", samples_per_class)->check(CLI::PositiveNumber);
    app->add_option("--image-size", image_size)->check(CLI::PositiveNumber);
    app->add_option("--embed-dim", dim)->check(CLI::PositiveNumber);
  }

  int operator()(std::ostream &out) const {
    if (output.empty())
      throw Exit{kExitUsage, "gen-data needs --output"};
    protocol::Preset p;
    try {
      p = protocol::make_preset(preset, resolve_seed(seed_opt, seed));
      p.generator.noise_sigma = noise_sigma;
      p.generator.image_size = image_size;
      if (samples_per_class)
        p.generator.samples_per_class = samples_per_class;
      p.generator.validate();
    } catch (const ConfigError &e) {
      throw Exit{kExitUsage, e.what()};
    }
    const auto bundle = protocol::generate_synthetic(p.generator);
    const auto table = objectives::ClassEmbeddingTable::pseudo(bundle.class_names, dim);
    const std::string emb = embeddings.empty() ? output + ".emb.csv" : embeddings;
    try {
      protocol::save_dataset_file(bundle, output);
      table.save(emb);
    } catch (const std::exception &e) {
      throw Exit{kExitData, e.what()};
    }
    const auto counts = bundle.class_counts();
    out << "wrote " << output << ": " << bundle.size() << " samples, "
        << bundle.num_classes() << " classes, " << bundle.channels << "x"
        << bundle.height << "x" << bundle.width << "\n";
    out << "wrote " << emb << ": " << table.size() << " embeddings of dim " << dim << "\n";
    for (std::size_t c = 0; c < counts.size(); ++c)
      out << c << " " << bundle.class_names[c] << " " << counts[c] << "\n";
    return kExitOk;
  }
};

// run --------------------------------------------------------------------

harness::DataContext load_context(const ExperimentConfig &config,
                                  const std::string &data,
                                  const std::string &embeddings) {
  try {
    if (data.empty())
      return harness::make_context(config);
    auto bundle = protocol::load_dataset_file(data);
    auto table = embeddings.empty()
                     ? objectives::ClassEmbeddingTable::pseudo(bundle.class_names,
                                                               config.vit.embed_dim)
                     : objectives::ClassEmbeddingTable::load(embeddings,
                                                             config.vit.embed_dim);
    return harness::make_context(config, std::move(bundle), std::move(table));
  } catch (const std::exception &e) {
    throw Exit{kExitData, e.what()};
  }
}

std::string sibling_csv(const std::string &path) {
  std::filesystem::path p(path);
  p.replace_extension(".csv");
  return p.string();
}

struct RunCmd {
  ExperimentFlags flags;
  std::string data, embeddings, output = "report.json", csv;
  bool timing = false;

  void add(CLI::App *app) {
    flags.add(app);
    app->add_option("--method,--ablation", flags.method, "Method or ablation preset")
        ->check(CLI::IsMember(harness::method_names()));
    app->add_option("--data", data, "Dataset file (default: generate from the preset)");
    app->add_option("--embeddings", embeddings, "Embedding table for --data");
    app->add_option("-o,--output", output, "Report file");
    app->add_option("--csv", csv, "Per-session CSV (default: report path with .csv)");
    app->add_flag("--timing", timing, "Include wall times in the report");
  }

  int operator()(std::ostream &out) const {
    ExperimentConfig config;
    try {
      config = flags.config();
    } catch (const ConfigError &e) {
      throw Exit{kExitUsage, e.what()};
    }
    const auto ctx = load_context(config, data, embeddings);
    const auto report = harness::run_experiment(config, ctx);
    try {
      harness::write_text_file(output, harness::report_to_json(report, {timing}));
      harness::write_text_file(csv.empty() ? sibling_csv(output) : csv,
                               harness::csv_to_text(harness::report_csv_rows(report)));
    } catch (const std::exception &e) {
      throw Exit{kExitData, e.what()};
    }
    out << config.method << " seed=" << config.seed
        << " sessions=" << report.sessions.size() << " "
        << metrics_line(report.metrics) << "\n";
    return kExitOk;
  }
};

// ablate -----------------------------------------------------------------

struct AblateCmd {
  ExperimentFlags flags;
  std::size_t seeds = 5;
  std::vector<std::string> sweep;
  bool assert_order = false;
  std::string output = "ablation.csv";

  void add(CLI::App *app) {
    flags.add(app);
    app->add_option("--seeds", seeds, "Number of seeds, starting at --seed")
        ->check(CLI::PositiveNumber);
    app->add_option("--sweep", sweep, "Extra sweep, e.g. --sweep layers 0,2,4")
        ->expected(2);
    app->add_flag("--assert-order", assert_order,
                  "Exit 4 when a directional check fails");
    app->add_option("-o,--output", output, "Comparison table (CSV)");
  }

  int operator()(std::ostream &out, std::ostream &err) const {
    std::vector<harness::AblationCell> cells;
    ExperimentConfig base;
    try {
      base = flags.config();
      cells = harness::method_grid(base);
      if (!sweep.empty()) {
        if (sweep[0] != "layers")
          throw ConfigError("unknown sweep '" + sweep[0] + "'");
        std::vector<std::size_t> layers;
        std::stringstream ss(sweep[1]);
        std::string item;
        while (std::getline(ss, item, ',')) {
          std::size_t pos = 0;
          unsigned long v = 0;
          try {
            v = std::stoul(item, &pos);
          } catch (const std::exception &) {
            pos = 0;
          }
          if (pos == 0 || pos != item.size())
            throw ConfigError("bad layer count '" + item + "'");
          layers.push_back(v);
        }
        for (auto &c : harness::layer_sweep(base, layers))
          cells.push_back(std::move(c));
      }
    } catch (const ConfigError &e) {
      throw Exit{kExitUsage, e.what()};
    }
    std::vector<std::uint64_t> seed_list;
    for (std::size_t i = 0; i < seeds; ++i)
      seed_list.push_back(base.seed + i);
    const auto table = harness::run_ablation_suite(
        cells, seed_list, [&](const std::string &label, std::uint64_t seed,
                              const harness::RunReport &r) {
          err << label << " seed=" << seed << " " << metrics_line(r.metrics) << "\n";
        });
    try {
      harness::write_text_file(output, harness::ablation_to_csv(table));
    } catch (const std::exception &e) {
      throw Exit{kExitData, e.what()};
    }
    out << std::left << std::setw(20) << "label" << " A_Base  A_Last  A_Avg   Fgt\n";
    for (const auto &r : table.rows)
      out << std::left << std::setw(20) << r.label << " " << fixed(r.median.a_base)
          << "  " << fixed(r.median.a_last) << "  " << fixed(r.median.a_avg) << "  "
          << fixed(r.median.fgt) << "\n";
    bool ok = true;
    for (const auto &c : harness::check_ablation_order(table, base.vit.depth)) {
      out << (c.ok ? "ok   " : "FAIL ") << c.description << "\n";
      ok &= c.ok;
    }
    if (assert_order && !ok)
      throw Exit{kExitAssertion, "ordering assertion failed"};
    return kExitOk;
  }
};

// grad-check -------------------------------------------------------------

struct GradCheckCmd {
  double tol = 0.0;
  std::string inject;
  bool list = false;

  void add(CLI::App *app) {
    app->add_option("--tol", tol, "Override both tolerances")->check(CLI::PositiveNumber);
    app->add_option("--inject-fault", inject, "Test hook: corrupt one case's gradient")
        ->group("");
    app->add_flag("--list", list, "List the case names");
  }

  int operator()(std::ostream &out) const {
    if (list) {
      for (const auto &n : harness::grad_suite_case_names())
        out << n << "\n";
      return kExitOk;
    }
    harness::GradSuiteOptions opt;
    if (tol > 0.0)
      opt.primitive_tolerance = opt.composite_tolerance = tol;
    opt.inject_fault = inject;
    std::vector<harness::GradSuiteEntry> entries;
    try {
      entries = harness::run_grad_suite(opt);
    } catch (const ConfigError &e) {
      throw Exit{kExitUsage, e.what()};
    }
    const harness::GradSuiteEntry *worst = nullptr;
    std::size_t failed = 0;
    for (const auto &e : entries) {
      out << (e.passed ? "PASS " : "FAIL ") << std::left << std::setw(20) << e.name
          << " max_rel=" << std::scientific << std::setprecision(3)
          << e.result.max_rel_error << " tol=" << e.tolerance << std::defaultfloat
          << "\n";
      if (!e.passed) {
        ++failed;
        if (!worst || e.result.max_rel_error / e.tolerance >
                          worst->result.max_rel_error / worst->tolerance)
          worst = &e;
      }
    }
    if (worst) {
      std::ostringstream msg;
      msg << failed << " of " << entries.size() << " gradient checks failed; worst: "
          << worst->name << " (" << worst->result.worst_parameter << "["
          << worst->result.worst_index << "], analytic " << worst->result.worst_analytic
          << ", numeric " << worst->result.worst_numeric << ")";
      throw Exit{kExitCheckFailed, msg.str()};
    }
    out << "all " << entries.size() << " gradient checks passed\n";
    return kExitOk;
  }
};

// report -----------------------------------------------------------------

struct ReportCmd {
  std::vector<std::string> files;
  std::string csv;

  void add(CLI::App *app) {
    app->add_option("reports", files, "Report files");
    app->add_option("--csv", csv, "Write per-session accuracy curves as CSV");
  }

  int operator()(std::ostream &out) const {
    if (files.empty())
      throw Exit{kExitUsage, "report needs at least one report file"};
    std::vector<harness::RunReport> reports;
    for (const auto &f : files) {
      try {
        reports.push_back(harness::report_from_json(harness::read_text_file(f)));
      } catch (const std::exception &e) {
        throw Exit{kExitData, f + ": " + e.what()};
      }
    }
    out << std::left << std::setw(28) << "report" << " A_Base  A_Last  A_Avg   Fgt\n";
    std::vector<harness::Metrics> ms;
    for (std::size_t i = 0; i < reports.size(); ++i) {
      const auto &m = reports[i].metrics;
      ms.push_back(m);
      out << std::left << std::setw(28) << files[i] << " " << fixed(m.a_base) << "  "
          << fixed(m.a_last) << "  " << fixed(m.a_avg) << "  " << fixed(m.fgt) << "\n";
    }
    if (reports.size() > 1) {
      const auto m = harness::median_metrics(ms);
      out << std::left << std::setw(28) << "median" << " " << fixed(m.a_base) << "  "
          << fixed(m.a_last) << "  " << fixed(m.a_avg) << "  " << fixed(m.fgt) << "\n";
    }
    if (!csv.empty()) {
      std::vector<harness::CsvRow> rows;
      for (const auto &r : reports)
        for (const auto &row : harness::report_csv_rows(r))
          rows.push_back(row);
      try {
        harness::write_text_file(csv, harness::csv_to_text(rows));
      } catch (const std::exception &e) {
        throw Exit{kExitData, e.what()};
      }
    }
    return kExitOk;
  }
};

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Few-shot class-incremental learning with prompted vision transformers"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  GenDataCmd gen;
  RunCmd runc;
  AblateCmd ablate;
  GradCheckCmd grad;
  ReportCmd report;
  auto *s_gen = app.add_subcommand("gen-data", "Generate a synthetic dataset and embeddings");
  auto *s_run = app.add_subcommand("run", "Pretrain, base session, incremental sessions");
  auto *s_abl = app.add_subcommand("ablate", "Run the ablation grid over several seeds");
  auto *s_grad = app.add_subcommand("grad-check", "Finite-difference gradient suite");
  auto *s_rep = app.add_subcommand("report", "Summarize report files");
  gen.add(s_gen);
  runc.add(s_run);
  ablate.add(s_abl);
  grad.add(s_grad);
  report.add(s_rep);
  std::map<CLI::App *, std::string> config_paths;
  for (auto *s : {s_gen, s_run, s_abl, s_grad, s_rep})
    s->add_option("--config", config_paths[s],
                  "Flat key=value file of long flag names; explicit flags win");

  std::vector<std::string> argv_store{"pvl"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char *> argv;
  for (auto &a : argv_store)
    argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp &) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    for (auto &[sub, path] : config_paths)
      if (sub->parsed() && !path.empty())
        apply_config_file(sub, path);
    if (s_gen->parsed())
      return gen(out);
    if (s_run->parsed())
      return runc(out);
    if (s_abl->parsed())
      return ablate(out, err);
    if (s_grad->parsed())
      return grad(out);
    return report(out);
  } catch (const Exit &e) {
    err << "error: " << e.message << "\n";
    return e.code;
  } catch (const ParseError &e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
}

} // namespace pvl::cli
