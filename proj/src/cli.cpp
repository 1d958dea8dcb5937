#include "sigaug/cli.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "sigaug/balance.hpp"
#include "sigaug/config_file.hpp"
#include "sigaug/error.hpp"
#include "sigaug/format.hpp"

namespace sigaug {

namespace {

template <typename Int>
Int parse_int(std::string_view key, std::string_view text) {
  Int value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ArgumentError(std::string(key) + ": expected an integer, got '" + std::string(text) + "'");
  }
  return value;
}

double parse_real(std::string_view key, std::string_view text) {
  const auto v = parse_double(text);
  if (!v) throw ArgumentError(std::string(key) + ": expected a number, got '" + std::string(text) + "'");
  return *v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ArgumentError(std::string(key) + ": expected true or false");
}

std::vector<double> parse_list(std::string_view key, std::string_view text) {
  if (text.empty()) return {};
  try {
    return parse_double_list(text);
  } catch (const ArgumentError& e) {
    throw ArgumentError(std::string(key) + ": " + e.what());
  }
}

std::string format_weights(const std::optional<std::array<double, 3>>& w) {
  if (!w) return "auto";
  return format_double_list({(*w)[0], (*w)[1], (*w)[2]});
}

struct Field {
  std::string_view key;
  std::function<std::string(const CliConfig&)> get;
  std::function<void(CliConfig&, std::string_view)> set;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    auto str = [&f](std::string_view key, std::string CliConfig::*member) {
      f.push_back({key, [member](const CliConfig& c) { return c.*member; },
                   [member](CliConfig& c, std::string_view v) { c.*member = std::string(v); }});
    };
    auto real = [&f](std::string_view key, auto getter) {
      f.push_back({key, [getter](const CliConfig& c) { return format_double(getter(const_cast<CliConfig&>(c))); },
                   [getter, key](CliConfig& c, std::string_view v) { getter(c) = parse_real(key, v); }});
    };
    auto integer = [&f](std::string_view key, auto getter) {
      f.push_back({key, [getter](const CliConfig& c) { return std::to_string(getter(const_cast<CliConfig&>(c))); },
                   [getter, key](CliConfig& c, std::string_view v) {
                     using T = std::remove_reference_t<decltype(getter(c))>;
                     getter(c) = parse_int<T>(key, v);
                   }});
    };
    auto list = [&f](std::string_view key, std::vector<double> SweepGrid::*member) {
      f.push_back({key, [member](const CliConfig& c) { return format_double_list(c.grid.*member); },
                   [member, key](CliConfig& c, std::string_view v) { c.grid.*member = parse_list(key, v); }});
    };

    str("subcommand", &CliConfig::subcommand);
    f.push_back({"dataset", [](const CliConfig& c) { return c.experiment.dataset; },
                 [](CliConfig& c, std::string_view v) { c.experiment.dataset = std::string(v); }});
    str("output", &CliConfig::output);
    f.push_back({"seed", [](const CliConfig& c) { return std::to_string(c.experiment.base_seed); },
                 [](CliConfig& c, std::string_view v) {
                   c.experiment.base_seed = parse_int<std::uint64_t>("seed", v);
                   c.experiment.train.seed = c.experiment.base_seed;
                 }});
    f.push_back({"quiet", [](const CliConfig& c) { return std::string(c.quiet ? "true" : "false"); },
                 [](CliConfig& c, std::string_view v) { c.quiet = parse_bool("quiet", v); }});
    f.push_back({"augmentation",
                 [](const CliConfig& c) { return std::string(to_string(c.experiment.augmentation)); },
                 [](CliConfig& c, std::string_view v) {
                   const auto a = parse_augmentation(v);
                   if (!a) throw ArgumentError("augmentation: expected none or sigaug");
                   c.experiment.augmentation = *a;
                 }});
    f.push_back({"supervision",
                 [](const CliConfig& c) { return std::string(to_string(c.experiment.supervision)); },
                 [](CliConfig& c, std::string_view v) {
                   const auto s = parse_supervision(v);
                   if (!s) throw ArgumentError("supervision: expected augmented or original");
                   c.experiment.supervision = *s;
                 }});
    real("mu", [](CliConfig& c) -> double& { return c.experiment.epr.mu; });
    real("theta", [](CliConfig& c) -> double& { return c.experiment.epr.theta_target; });
    real("delta", [](CliConfig& c) -> double& { return c.experiment.epr.delta_target; });
    integer("eta", [](CliConfig& c) -> int& { return c.experiment.epr.eta; });
    integer("runs", [](CliConfig& c) -> int& { return c.experiment.runs; });
    real("test_fraction", [](CliConfig& c) -> double& { return c.experiment.test_fraction; });
    real("subsample", [](CliConfig& c) -> double& { return c.experiment.subsample; });
    integer("epochs", [](CliConfig& c) -> int& { return c.experiment.train.epochs; });
    real("learning_rate", [](CliConfig& c) -> double& { return c.experiment.train.learning_rate; });
    real("lambda", [](CliConfig& c) -> double& { return c.experiment.train.lambda; });
    real("weight_decay", [](CliConfig& c) -> double& { return c.experiment.train.weight_decay; });
    f.push_back({"class_weights",
                 [](const CliConfig& c) { return format_weights(c.experiment.train.class_weights); },
                 [](CliConfig& c, std::string_view v) {
                   if (v == "auto") {
                     c.experiment.train.class_weights.reset();
                     return;
                   }
                   const auto w = parse_list("class_weights", v);
                   if (w.size() != 3) throw ArgumentError("class_weights: expected auto or three numbers");
                   c.experiment.train.class_weights = std::array<double, 3>{w[0], w[1], w[2]};
                 }});
    integer("input_dim", [](CliConfig& c) -> int& { return c.experiment.train.input_dim; });
    integer("embedding_dim", [](CliConfig& c) -> int& { return c.experiment.train.embedding_dim; });
    integer("layers", [](CliConfig& c) -> int& { return c.experiment.train.layers; });
    str("embeddings", &CliConfig::embeddings);
    str("params", &CliConfig::params);
    str("log", &CliConfig::log);
    list("grid_mu", &SweepGrid::mu);
    list("grid_theta", &SweepGrid::theta);
    list("grid_delta", &SweepGrid::delta);
    integer("sweep_cap", [](CliConfig& c) -> std::size_t& { return c.sweep_cap; });
    return f;
  }();
  return table;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> config_entries(const CliConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) out.emplace_back(std::string(f.key), f.get(cfg));
  return out;
}

void set_config_value(CliConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(cfg, value);
      return;
    }
  }
  throw ArgumentError("unknown configuration key: " + std::string(key));
}

void write_config(std::ostream& out, const CliConfig& cfg) {
  for (const auto& [key, value] : config_entries(cfg)) out << key << " = " << value << '\n';
}

CliConfig parse_config(std::istream& in) {
  CliConfig cfg;
  for (const auto& kv : parse_key_values(in)) {
    try {
      set_config_value(cfg, kv.key, kv.value);
    } catch (const ArgumentError& e) {
      throw ParseError(kv.line, e.what());
    }
  }
  return cfg;
}

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void configure_logging(bool quiet) {
  static const auto logger = [] {
    auto l = spdlog::stderr_logger_st("sigaug-cli");
    l->set_pattern("[%l] %v");
    return l;
  }();
  spdlog::set_default_logger(logger);
  spdlog::set_level(quiet ? spdlog::level::err : spdlog::level::info);
}

// Writes to the --output file when one is given, else to `fallback`.
class OutputTarget {
 public:
  OutputTarget(const std::string& path, std::ostream& fallback) {
    if (path.empty()) {
      stream_ = &fallback;
      return;
    }
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw IoError("cannot write output file: " + path);
    stream_ = file_.get();
  }

  std::ostream& stream() { return *stream_; }
  bool to_file() const { return file_ != nullptr; }

  void close() {
    if (file_) {
      file_->close();
      if (!*file_) throw IoError("failed writing output file");
    }
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_ = nullptr;
};

std::ofstream open_for_write(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write file: " + path);
  return f;
}

const std::string& require_dataset(const CliConfig& cfg) {
  if (cfg.experiment.dataset.empty()) throw UsageError("a dataset path is required");
  return cfg.experiment.dataset;
}

int cmd_stats(const CliConfig& cfg, std::ostream& out) {
  const auto records = load_edge_list_file(require_dataset(cfg), EdgeFormat::Rating);
  const auto raw = record_stats(records);
  const auto built = graph_stats(build_graph(records));
  OutputTarget target(cfg.output, out);
  auto& o = target.stream();
  o << "n=" << raw.nodes << '\n'
    << "pos=" << raw.pos_edges << '\n'
    << "neg=" << raw.neg_edges << '\n'
    << "neg_ratio=" << format_double(raw.neg_ratio) << '\n'
    << "built_n=" << built.nodes << '\n'
    << "built_pos=" << built.pos_edges << '\n'
    << "built_neg=" << built.neg_edges << '\n'
    << "built_neg_ratio=" << format_double(built.neg_ratio) << '\n';
  target.close();
  return kExitOk;
}

int cmd_balance(const CliConfig& cfg, std::ostream& out) {
  const auto records = load_edge_list_file(require_dataset(cfg), EdgeFormat::Rating);
  const auto lg = build_labeled_graph(records);
  const auto& epr = cfg.experiment.epr;
  const auto utilities = edge_utilities(lg.graph, Sign::Negative, epr.eta);
  std::size_t kept = 0, discarded = 0, undefined = 0;
  OutputTarget target(cfg.output, out);
  auto& o = target.stream();
  for (const auto& eu : utilities) {
    o << lg.labels[eu.edge.u] << ' ' << lg.labels[eu.edge.v] << ' ' << to_int(eu.edge.sign) << ' '
      << (eu.utility ? format_double(*eu.utility) : std::string("undefined")) << '\n';
    undefined += !eu.utility.has_value();
    (filter_edge(eu.utility, epr.mu) == Verdict::Keep ? kept : discarded) += 1;
  }
  o << "mu=" << format_double(epr.mu) << '\n'
    << "eta=" << epr.eta << '\n'
    << "kept=" << kept << '\n'
    << "discarded=" << discarded << '\n'
    << "undefined=" << undefined << '\n';
  target.close();
  return kExitOk;
}

int cmd_train(const CliConfig& cfg, std::ostream& out) {
  const auto g = build_graph(load_edge_list_file(require_dataset(cfg), EdgeFormat::Rating));
  const auto result = train(g, cfg.experiment.train);
  spdlog::info("trained {} epochs, final loss {}", result.loss_trace.size(),
               result.loss_trace.empty() ? 0.0 : result.loss_trace.back());
  OutputTarget target(cfg.output, out);
  write_embeddings(target.stream(), concat(result.embeddings));
  target.close();
  std::string params_path = cfg.params;
  if (params_path.empty() && target.to_file()) params_path = cfg.output + ".params";
  if (!params_path.empty()) {
    auto f = open_for_write(params_path);
    save_params(f, result.params);
    if (!f) throw IoError("failed writing parameters: " + params_path);
  }
  return kExitOk;
}

int cmd_augment(const CliConfig& cfg, std::ostream& out) {
  const auto g = build_graph(load_edge_list_file(require_dataset(cfg), EdgeFormat::Rating));
  if (cfg.embeddings.empty()) throw UsageError("augment needs --embeddings");
  std::ifstream ef(cfg.embeddings);
  if (!ef) throw IoError("cannot open embeddings file: " + cfg.embeddings);
  const auto emb = read_embeddings(ef);
  const auto aug = augment(g, emb, cfg.experiment.epr);
  spdlog::info("kept {} positive and {} negative perturbations over {} rounds; thresholds_unmet={}",
               aug.log.kept_positive, aug.log.kept_negative, aug.rounds, aug.thresholds_unmet);

  OutputTarget target(cfg.output, out);
  write_signed_edge_list(target.stream(), aug.graph);
  target.close();
  std::string log_path = cfg.log;
  if (log_path.empty() && target.to_file()) log_path = cfg.output + ".log";
  if (log_path.empty()) {
    out << "# perturbation log\n";
    write_log(out, aug.log);
  } else {
    auto f = open_for_write(log_path);
    write_log(f, aug.log);
  }
  return kExitOk;
}

int cmd_evaluate(const CliConfig& cfg, std::ostream& out) {
  require_dataset(cfg);
  const auto report = run_experiment(cfg.experiment);
  OutputTarget target(cfg.output, out);
  if (target.to_file()) {
    write_report_table(out, report);
  } else {
    write_report_table(out, report);
    out << '\n';
  }
  write_report_lines(target.stream(), report);
  target.close();
  return kExitOk;
}

int cmd_sweep(const CliConfig& cfg, std::ostream& out) {
  require_dataset(cfg);
  SweepGrid grid = cfg.grid;
  if (grid.mu.empty()) grid.mu = {cfg.experiment.epr.mu};
  if (grid.theta.empty()) grid.theta = {cfg.experiment.epr.theta_target};
  if (grid.delta.empty()) grid.delta = {cfg.experiment.epr.delta_target};
  const auto rows = sweep(cfg.experiment, grid, cfg.sweep_cap);
  OutputTarget target(cfg.output, out);
  write_sweep_csv(target.stream(), rows);
  target.close();
  return kExitOk;
}

std::string flag_name(std::string_view key) {
  std::string name = "--" + std::string(key);
  std::replace(name.begin(), name.end(), '_', '-');
  return name;
}

const std::vector<std::string_view> kTrainKeys = {"epochs",        "learning_rate", "lambda",
                                                  "weight_decay",  "class_weights", "input_dim",
                                                  "embedding_dim", "layers"};
const std::vector<std::string_view> kExperimentKeys = {
    "augmentation", "supervision", "mu", "theta", "delta", "eta", "runs", "test_fraction", "subsample"};

}  // namespace

int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Signed graph augmentation toolkit", "sigaug"};
  app.require_subcommand(1);

  std::string config_path;
  std::map<std::string, std::string> flag_values;
  std::multimap<std::string, CLI::Option*> options;
  auto add_key = [&](CLI::App* target, const std::string& key, const std::string& name,
                     const std::string& help) {
    options.emplace(key, target->add_option(name, flag_values[key], help));
  };

  add_key(&app, "seed", "--seed", "Base seed for every stochastic component");
  app.add_option("--config", config_path, "Flat key = value configuration file");
  add_key(&app, "output", "--output", "Output file (default: stdout)");
  bool quiet_flag = false;
  app.add_flag("--quiet", quiet_flag, "Suppress the configuration banner and info logging");
  app.fallthrough();

  struct Sub {
    const char* name;
    const char* help;
    std::vector<std::string_view> keys;
  };
  std::vector<Sub> subs = {
      {"stats", "Print node and edge counts", {}},
      {"balance", "Edge utilities of negative edges and filter verdicts", {"mu", "eta"}},
      {"train", "Train the signed GNN and write embeddings", {"params"}},
      {"augment", "Augment a graph from node embeddings", {"embeddings", "log", "mu", "theta", "delta", "eta"}},
      {"evaluate", "Run the link sign prediction protocol", {}},
      {"sweep", "Grid over mu, theta and delta", {"grid_mu", "grid_theta", "grid_delta", "sweep_cap"}},
  };
  for (auto& s : subs) {
    const std::string name = s.name;
    if (name == "train" || name == "evaluate" || name == "sweep") {
      s.keys.insert(s.keys.end(), kTrainKeys.begin(), kTrainKeys.end());
    }
    if (name == "evaluate" || name == "sweep") {
      s.keys.insert(s.keys.end(), kExperimentKeys.begin(), kExperimentKeys.end());
    }
  }

  std::vector<CLI::App*> sub_apps;
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    add_key(sub, "dataset", "dataset,--dataset", "Edge list file");
    for (auto key : s.keys) add_key(sub, std::string(key), flag_name(key), "See README");
    sub_apps.push_back(sub);
  }

  std::reverse(args.begin(), args.end());
  try {
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  CliConfig cfg;
  std::string subcommand;
  for (auto* sub : sub_apps) {
    if (sub->parsed()) subcommand = sub->get_name();
  }

  try {
    if (!config_path.empty()) {
      std::ifstream cf(config_path);
      if (!cf) {
        err << "error: cannot open config file: " << config_path << '\n';
        return kExitIo;
      }
      cfg = parse_config(cf);
    }
    auto given = [&](const std::string& key) {
      const auto [lo, hi] = options.equal_range(key);
      return std::any_of(lo, hi, [](const auto& kv) { return kv.second->count() > 0; });
    };
    for (const auto& [key, value] : flag_values) {
      if (given(key)) set_config_value(cfg, key, value);
    }
    if (quiet_flag) cfg.quiet = true;
    cfg.subcommand = subcommand;
    validate(cfg.experiment);
  } catch (const ParseError& e) {
    err << "error: config " << e.what() << '\n';
    return kExitUsage;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  configure_logging(cfg.quiet);
  if (!cfg.quiet) write_config(err, cfg);

  try {
    if (subcommand == "stats") return cmd_stats(cfg, out);
    if (subcommand == "balance") return cmd_balance(cfg, out);
    if (subcommand == "train") return cmd_train(cfg, out);
    if (subcommand == "augment") return cmd_augment(cfg, out);
    if (subcommand == "evaluate") return cmd_evaluate(cfg, out);
    if (subcommand == "sweep") return cmd_sweep(cfg, out);
    err << app.help();
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitComponent;
  }
}

}  // namespace sigaug
