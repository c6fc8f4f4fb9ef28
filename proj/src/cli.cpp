#include "stylebridge/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "stylebridge/serialize.hpp"

namespace fs = std::filesystem;

namespace stylebridge {

namespace {

StVariant parse_st_variant(const std::string& s) {
  if (s == "teacher_student") return StVariant::teacher_student;
  if (s == "entropy_min") return StVariant::entropy_min;
  throw std::invalid_argument("unknown st variant '" + s + "'");
}

UpdateScope parse_update_scope(const std::string& s) {
  if (s == "all_params") return UpdateScope::all_params;
  if (s == "norm_only") return UpdateScope::norm_only;
  throw std::invalid_argument("unknown update scope '" + s + "'");
}

EvalNetwork parse_eval_network(const std::string& s) {
  if (s == "auto") return EvalNetwork::auto_pick;
  if (s == "teacher") return EvalNetwork::teacher;
  if (s == "student") return EvalNetwork::student;
  throw std::invalid_argument("unknown eval network '" + s + "'");
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void apply_out_root(std::string& out_dir) {
  const char* root = std::getenv("STYLEBRIDGE_OUT_ROOT");
  if (root && *root && !fs::path(out_dir).is_absolute())
    out_dir = (fs::path(root) / out_dir).string();
}

bool dir_nonempty(const fs::path& p) {
  return fs::exists(p) && fs::is_directory(p) && !fs::is_empty(p);
}

}  // namespace

void RunConfig::resolve() {
  if (!explicit_scope) {
    adapt.update_scope = adapt.st_variant == StVariant::entropy_min ? UpdateScope::norm_only
                                                                    : UpdateScope::all_params;
  } else {
    adapt.update_scope = *explicit_scope;
  }
  if (precision != "float32" && precision != "float64")
    throw std::invalid_argument("precision must be float32 or float64");
  if (severity < 0 || severity > 5) throw std::invalid_argument("severity must be in [0, 5]");
  adapt.validate();
  for (const std::string& name : domain_names)
    if (!corruption_from_name(name))
      throw std::invalid_argument("unknown corruption kind '" + name + "'");
}

std::vector<DomainSpec> RunConfig::domains() const {
  if (domain_names.empty()) return default_domains(severity);
  std::vector<DomainSpec> out;
  for (const std::string& name : domain_names) out.push_back({*corruption_from_name(name), severity});
  return out;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["lr"] = adapt.lr;
  j["beta1"] = adapt.beta1;
  j["beta2"] = adapt.beta2;
  j["adam_eps"] = adapt.adam_eps;
  j["ema_momentum"] = adapt.ema_momentum;
  j["batch_size"] = adapt.batch_size;
  j["parts"] = {{"pce", adapt.use_pce},
                {"input_inject", adapt.use_input_inject},
                {"stat_bridge", adapt.use_stat_bridge},
                {"scl", adapt.use_scl},
                {"st", adapt.use_st}};
  j["st_variant"] = st_variant_name(adapt.st_variant);
  j["update_scope"] = update_scope_name(adapt.update_scope);
  j["scl_tau"] = adapt.scl_tau;
  j["fourier_beta"] = adapt.fourier_beta;
  j["conf_threshold"] = adapt.conf_threshold;
  j["eval_network"] = eval_network_name(adapt.eval_network);
  j["seed"] = adapt.seed;
  nlohmann::json domain_list = nlohmann::json::array();
  for (const DomainSpec& d : domains()) domain_list.push_back(d.tag());
  j["stream"] = {{"severity", severity},
                 {"domains", domain_list},
                 {"batches_per_domain", batches_per_domain},
                 {"mixed", mixed},
                 {"seed", stream_seed},
                 {"mixed_seed", mixed_seed}};
  j["kb"] = {{"dir", kb_dir},
             {"classes", kb_classes},
             {"per_class", kb_per_class},
             {"seed", kb_seed}};
  j["checkpoint"] = checkpoint;
  j["out_dir"] = out_dir;
  j["precision"] = precision;
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig cfg;
  auto opt = [&j](const char* key, auto& slot) {
    if (j.contains(key)) slot = j.at(key).get<std::decay_t<decltype(slot)>>();
  };
  opt("lr", cfg.adapt.lr);
  opt("beta1", cfg.adapt.beta1);
  opt("beta2", cfg.adapt.beta2);
  opt("adam_eps", cfg.adapt.adam_eps);
  opt("ema_momentum", cfg.adapt.ema_momentum);
  opt("batch_size", cfg.adapt.batch_size);
  if (j.contains("parts")) {
    const auto& p = j.at("parts");
    auto flag = [&p](const char* key, bool& slot) {
      if (p.contains(key)) slot = p.at(key).get<bool>();
    };
    flag("pce", cfg.adapt.use_pce);
    flag("input_inject", cfg.adapt.use_input_inject);
    flag("stat_bridge", cfg.adapt.use_stat_bridge);
    flag("scl", cfg.adapt.use_scl);
    flag("st", cfg.adapt.use_st);
  }
  if (j.contains("st_variant")) cfg.adapt.st_variant = parse_st_variant(j.at("st_variant"));
  if (j.contains("update_scope")) cfg.explicit_scope = parse_update_scope(j.at("update_scope"));
  opt("scl_tau", cfg.adapt.scl_tau);
  opt("fourier_beta", cfg.adapt.fourier_beta);
  opt("conf_threshold", cfg.adapt.conf_threshold);
  if (j.contains("eval_network")) cfg.adapt.eval_network = parse_eval_network(j.at("eval_network"));
  opt("seed", cfg.adapt.seed);
  if (j.contains("stream")) {
    const auto& s = j.at("stream");
    if (s.contains("severity")) cfg.severity = s.at("severity").get<int>();
    if (s.contains("domains")) cfg.domain_names = s.at("domains").get<std::vector<std::string>>();
    if (s.contains("batches_per_domain"))
      cfg.batches_per_domain = s.at("batches_per_domain").get<std::size_t>();
    if (s.contains("mixed")) cfg.mixed = s.at("mixed").get<bool>();
    if (s.contains("seed")) cfg.stream_seed = s.at("seed").get<std::uint64_t>();
    if (s.contains("mixed_seed")) cfg.mixed_seed = s.at("mixed_seed").get<std::uint64_t>();
  }
  if (j.contains("kb")) {
    const auto& k = j.at("kb");
    if (k.contains("dir")) cfg.kb_dir = k.at("dir").get<std::string>();
    if (k.contains("classes")) cfg.kb_classes = k.at("classes").get<std::size_t>();
    if (k.contains("per_class")) cfg.kb_per_class = k.at("per_class").get<std::size_t>();
    if (k.contains("seed")) cfg.kb_seed = k.at("seed").get<std::uint64_t>();
  }
  opt("checkpoint", cfg.checkpoint);
  opt("out_dir", cfg.out_dir);
  opt("precision", cfg.precision);
  return cfg;
}

RunConfig RunConfig::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

KnowledgeBase build_kb(const RunConfig& cfg) {
  if (!cfg.kb_dir.empty()) return load_knowledge(cfg.kb_dir);
  return build_procedural(cfg.kb_classes, cfg.kb_per_class, cfg.kb_seed);
}

std::vector<Batch> build_stream(const RunConfig& cfg) {
  StreamConfig sc;
  sc.domains = cfg.domains();
  sc.batches_per_domain = cfg.batches_per_domain;
  sc.batch_size = cfg.adapt.batch_size;
  sc.seed = cfg.stream_seed;
  std::vector<Batch> stream = make_stream(sc);
  if (cfg.mixed) stream = shuffle_mixed(std::move(stream), cfg.mixed_seed);
  return stream;
}

namespace {

template <typename T>
int run_adapt_typed(const RunConfig& cfg) {
  const fs::path out(cfg.out_dir);
  try {
    if (cfg.checkpoint.empty())
      throw std::invalid_argument("adapt: config must name a source checkpoint");
    if (!fs::exists(fs::path(cfg.checkpoint) / "manifest.json"))
      throw std::runtime_error("adapt: missing checkpoint at " + cfg.checkpoint);
    ModelParams<T> source = load_checkpoint<T>(cfg.checkpoint);
    KnowledgeBase kb = build_kb(cfg);
    std::vector<Batch> stream = build_stream(cfg);

    MetricsReport report = run_episode(source, cfg.adapt, stream, kb);
    fs::create_directories(out);
    write_metrics_csv(out / "metrics.csv", report, cfg.adapt.lr, cfg.adapt.seed);
    write_summary_json(out / "summary.json", report, cfg.to_json());
    std::cout << "adapt: overall error " << report.overall_error << " over " << report.rows.size()
              << " batches -> " << (out / "summary.json").string() << "\n";
    return kExitOk;
  } catch (const EngineAbort& e) {
    fs::create_directories(out);
    std::ofstream dump(out / "abort_dump.json");
    dump << e.dump << "\n";
    std::cerr << "adapt aborted: " << e.what() << " (dump in " << (out / "abort_dump.json").string()
              << ")\n";
    return kExitAbort;
  }
}

}  // namespace

int cmd_adapt(const RunConfig& cfg) {
  if (cfg.precision == "float64") return run_adapt_typed<double>(cfg);
  return run_adapt_typed<float>(cfg);
}

namespace {

struct AblationRow {
  const char* name;
  bool pce, input, stat, scl;
};

constexpr AblationRow kAblationGrid[7] = {
    {"ex1_st_only", false, false, false, false},
    {"ex2_pce", true, false, false, false},
    {"ex3_pce_input", true, true, false, false},
    {"ex4_pce_stat", true, false, true, false},
    {"ex5_pce_scl", true, false, false, true},
    {"ex6_pce_input_stat", true, true, true, false},
    {"ex7_full", true, true, true, true},
};

int cmd_ablate(RunConfig base, const std::vector<std::size_t>& kb_sizes) {
  const fs::path out(base.out_dir);
  std::ofstream table;

  std::vector<std::pair<std::string, double>> grid_errors;
  std::string shared_hash;
  for (const AblationRow& row : kAblationGrid) {
    RunConfig cfg = base;
    cfg.adapt.use_pce = row.pce;
    cfg.adapt.use_input_inject = row.input;
    cfg.adapt.use_stat_bridge = row.stat;
    cfg.adapt.use_scl = row.scl;
    cfg.adapt.use_st = true;
    cfg.out_dir = (out / row.name).string();
    const int rc = cmd_adapt(cfg);
    if (rc != kExitOk) return rc;
    std::ifstream in(fs::path(cfg.out_dir) / "summary.json");
    nlohmann::json summary;
    in >> summary;
    grid_errors.emplace_back(row.name, summary.at("overall_error").get<double>());
    const std::string hash = summary.at("stream_hash").get<std::string>();
    if (shared_hash.empty()) shared_hash = hash;
    if (hash != shared_hash) throw std::runtime_error("ablate: stream hash diverged across rows");
  }

  fs::create_directories(out);
  table.open(out / "ablation.csv");
  table << "row,pce,input,stat,scl,mean_error,stream_hash\n";
  for (std::size_t i = 0; i < grid_errors.size(); ++i) {
    const AblationRow& row = kAblationGrid[i];
    table << row.name << ',' << row.pce << ',' << row.input << ',' << row.stat << ',' << row.scl
          << ',' << grid_errors[i].second << ',' << shared_hash << '\n';
  }
  table.close();

  if (!kb_sizes.empty()) {
    std::ofstream kbcsv(out / "kb_size.csv");
    kbcsv << "per_class,mean_error\n";
    for (std::size_t m : kb_sizes) {
      RunConfig cfg = base;
      cfg.kb_per_class = m;
      cfg.kb_dir.clear();
      cfg.out_dir = (out / ("kb_" + std::to_string(m))).string();
      const int rc = cmd_adapt(cfg);
      if (rc != kExitOk) return rc;
      std::ifstream in(fs::path(cfg.out_dir) / "summary.json");
      nlohmann::json summary;
      in >> summary;
      kbcsv << m << ',' << summary.at("overall_error").get<double>() << '\n';
    }
  }
  std::cout << "ablate: wrote " << (out / "ablation.csv").string() << "\n";
  return kExitOk;
}

struct RunSummary {
  nlohmann::json summary;
  std::vector<std::array<double, 4>> loss_rows;  // pce, scl, st, total per step
};

RunSummary load_run(const fs::path& dir) {
  RunSummary out;
  std::ifstream in(dir / "summary.json");
  if (!in) throw std::runtime_error("report: missing summary.json in " + dir.string());
  in >> out.summary;

  std::ifstream csv(dir / "metrics.csv");
  if (!csv) throw std::runtime_error("report: missing metrics.csv in " + dir.string());
  std::string line;
  std::getline(csv, line);  // header
  while (std::getline(csv, line)) {
    const std::vector<std::string> cols = split_csv(line);
    if (cols.size() < 11) continue;
    out.loss_rows.push_back(
        {std::stod(cols[5]), std::stod(cols[6]), std::stod(cols[7]), std::stod(cols[8])});
  }
  return out;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
  if (run_dirs.empty()) throw std::invalid_argument("report: no run directories given");
  std::vector<RunSummary> runs;
  for (const std::string& d : run_dirs) runs.push_back(load_run(d));

  // comparability: identical domain tag sets
  auto domain_set = [](const RunSummary& r) {
    std::set<std::string> tags;
    for (const auto& d : r.summary.at("per_domain")) tags.insert(d.at("domain").get<std::string>());
    return tags;
  };
  const std::set<std::string> ref = domain_set(runs.front());
  for (const RunSummary& r : runs)
    if (domain_set(r) != ref) throw std::invalid_argument("report: incomparable runs (domain sets differ)");
  for (const RunSummary& r : runs)
    if (r.loss_rows.size() != runs.front().loss_rows.size())
      throw std::invalid_argument("report: incomparable runs (step counts differ)");

  const fs::path out(out_dir);
  fs::create_directories(out);

  // per-domain table in the first run's order, mean +/- std across runs
  std::ofstream dom(out / "report_domains.csv");
  dom << "domain,mean_error,std_error,runs\n";
  for (const auto& entry : runs.front().summary.at("per_domain")) {
    const std::string tag = entry.at("domain").get<std::string>();
    std::vector<double> errs;
    for (const RunSummary& r : runs)
      for (const auto& d : r.summary.at("per_domain"))
        if (d.at("domain").get<std::string>() == tag) errs.push_back(d.at("mean_error").get<double>());
    double mu = 0.0;
    for (double e : errs) mu += e;
    mu /= static_cast<double>(errs.size());
    double var = 0.0;
    for (double e : errs) var += (e - mu) * (e - mu);
    var /= static_cast<double>(errs.size());
    dom << tag << ',' << mu << ',' << std::sqrt(var) << ',' << errs.size() << '\n';
  }
  {
    std::vector<double> overall;
    for (const RunSummary& r : runs) overall.push_back(r.summary.at("overall_error").get<double>());
    double mu = 0.0;
    for (double e : overall) mu += e;
    mu /= static_cast<double>(overall.size());
    double var = 0.0;
    for (double e : overall) var += (e - mu) * (e - mu);
    var /= static_cast<double>(overall.size());
    dom << "overall," << mu << ',' << std::sqrt(var) << ',' << overall.size() << '\n';
  }

  std::ofstream losses(out / "report_losses.csv");
  losses << "step,loss_pce,loss_scl,loss_st,loss_total\n";
  for (std::size_t step = 0; step < runs.front().loss_rows.size(); ++step) {
    std::array<double, 4> acc{0, 0, 0, 0};
    for (const RunSummary& r : runs)
      for (std::size_t k = 0; k < 4; ++k) acc[k] += r.loss_rows[step][k];
    losses << step;
    for (std::size_t k = 0; k < 4; ++k)
      losses << ',' << acc[k] / static_cast<double>(runs.size());
    losses << '\n';
  }
  std::cout << "report: wrote " << (out / "report_domains.csv").string() << "\n";
  return kExitOk;
}

int cmd_gen_kb(const std::string& out_dir, std::size_t classes, std::size_t per_class,
               std::uint64_t seed, bool force) {
  if (per_class == 0) throw std::invalid_argument("gen-kb: --per-class must be >= 1");
  const fs::path out(out_dir);
  if (dir_nonempty(out) && !force)
    throw std::runtime_error("gen-kb: " + out.string() + " exists and is not empty (use --force)");
  KnowledgeBase kb = build_procedural(classes, per_class, seed);
  save_knowledge(kb, out);
  std::cout << "gen-kb: wrote " << kb.size() << " exemplars to " << out.string() << "\n";
  return kExitOk;
}

int cmd_gen_data(const RunConfig& cfg, bool force) {
  const fs::path out(cfg.out_dir);
  if (dir_nonempty(out) && !force)
    throw std::runtime_error("gen-data: " + out.string() + " exists and is not empty (use --force)");
  std::vector<Batch> stream = build_stream(cfg);
  fs::create_directories(out);

  nlohmann::json manifest;
  manifest["batches"] = stream.size();
  manifest["batch_size"] = cfg.adapt.batch_size;
  manifest["mixed"] = cfg.mixed;
  manifest["seed"] = cfg.stream_seed;
  manifest["stream_hash"] = stream_fingerprint(stream);
  manifest["domains"] = nlohmann::json::array();
  nlohmann::json labels_json;
  labels_json["batches"] = nlohmann::json::array();

  char name[32];
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const Batch& b = stream[i];
    manifest["domains"].push_back(b.domain().tag());
    const Image& first = b.images().front();
    const Shape shape{b.size(), first.channels, first.height, first.width};
    std::vector<double> values;
    values.reserve(shape_numel(shape));
    for (const Image& img : b.images()) values.insert(values.end(), img.pix.begin(), img.pix.end());
    std::snprintf(name, sizeof(name), "batch_%04zu", i);
    save_raw_tensor(out / name, "float64", shape, values);
    labels_json["batches"].push_back(EvalAccess::labels(b));
  }
  {
    std::ofstream mf(out / "manifest.json");
    mf << manifest.dump(2) << "\n";
  }
  {
    std::ofstream lf(out / "labels.json");  // evaluator-only ground truth
    lf << labels_json.dump() << "\n";
  }
  std::cout << "gen-data: wrote " << stream.size() << " batches to " << out.string() << "\n";
  return kExitOk;
}

template <typename T>
int cmd_train_source_typed(const SourceTrainConfig& cfg, const std::string& out_dir) {
  SourceTrainResult<T> result = train_source<T>(cfg);
  const fs::path out(out_dir);
  save_checkpoint(out, result.params);
  nlohmann::json j;
  j["holdout_accuracy"] = result.holdout_accuracy;
  j["epoch_losses"] = result.epoch_losses;
  j["epochs"] = cfg.epochs;
  j["lr"] = cfg.lr;
  j["samples"] = cfg.samples;
  j["holdout"] = cfg.holdout;
  j["batch_size"] = cfg.batch_size;
  j["seed"] = cfg.seed;
  j["dtype"] = dtype_name<T>();
  std::ofstream sf(out / "train_summary.json");
  sf << j.dump(2) << "\n";
  std::cout << "train-source: holdout accuracy " << result.holdout_accuracy << " -> "
            << out.string() << "\n";
  return kExitOk;
}

struct AdaptOverrides {
  std::optional<double> lr, tau, beta, conf, momentum;
  std::optional<std::uint64_t> seed, stream_seed, mixed_seed, kb_seed;
  std::optional<std::size_t> batches, batch_size, kb_classes, kb_per_class;
  std::optional<int> severity;
  std::optional<std::string> checkpoint, out, kb_dir, precision, st_variant, update_scope,
      eval_network, parts, domains;
  std::optional<bool> mixed;
};

void apply_overrides(RunConfig& cfg, const AdaptOverrides& ov) {
  if (ov.lr) cfg.adapt.lr = *ov.lr;
  if (ov.tau) cfg.adapt.scl_tau = *ov.tau;
  if (ov.beta) cfg.adapt.fourier_beta = *ov.beta;
  if (ov.conf) cfg.adapt.conf_threshold = *ov.conf;
  if (ov.momentum) cfg.adapt.ema_momentum = *ov.momentum;
  if (ov.seed) cfg.adapt.seed = *ov.seed;
  if (ov.stream_seed) cfg.stream_seed = *ov.stream_seed;
  if (ov.mixed_seed) cfg.mixed_seed = *ov.mixed_seed;
  if (ov.kb_seed) cfg.kb_seed = *ov.kb_seed;
  if (ov.batches) cfg.batches_per_domain = *ov.batches;
  if (ov.batch_size) cfg.adapt.batch_size = *ov.batch_size;
  if (ov.kb_classes) cfg.kb_classes = *ov.kb_classes;
  if (ov.kb_per_class) cfg.kb_per_class = *ov.kb_per_class;
  if (ov.severity) cfg.severity = *ov.severity;
  if (ov.checkpoint) cfg.checkpoint = *ov.checkpoint;
  if (ov.out) cfg.out_dir = *ov.out;
  if (ov.kb_dir) cfg.kb_dir = *ov.kb_dir;
  if (ov.precision) cfg.precision = *ov.precision;
  if (ov.st_variant) cfg.adapt.st_variant = parse_st_variant(*ov.st_variant);
  if (ov.update_scope) cfg.explicit_scope = parse_update_scope(*ov.update_scope);
  if (ov.eval_network) cfg.adapt.eval_network = parse_eval_network(*ov.eval_network);
  if (ov.mixed) cfg.mixed = *ov.mixed;
  if (ov.domains) cfg.domain_names = split_csv(*ov.domains);
  if (ov.parts) {
    cfg.adapt.use_pce = cfg.adapt.use_input_inject = cfg.adapt.use_stat_bridge =
        cfg.adapt.use_scl = cfg.adapt.use_st = false;
    for (const std::string& p : split_csv(*ov.parts)) {
      if (p == "pce")
        cfg.adapt.use_pce = true;
      else if (p == "input")
        cfg.adapt.use_input_inject = true;
      else if (p == "stat")
        cfg.adapt.use_stat_bridge = true;
      else if (p == "scl")
        cfg.adapt.use_scl = true;
      else if (p == "st")
        cfg.adapt.use_st = true;
      else
        throw std::invalid_argument("unknown part '" + p + "' (expected pce,input,stat,scl,st)");
    }
  }
}

void add_adapt_flags(CLI::App* cmd, std::string& config_path, AdaptOverrides& ov) {
  cmd->add_option("--config", config_path, "JSON config file; flags override its values");
  auto opt_d = [cmd](const char* flag, std::optional<double>& slot, const char* help) {
    cmd->add_option_function<double>(flag, [&slot](double v) { slot = v; }, help);
  };
  auto opt_u = [cmd](const char* flag, std::optional<std::uint64_t>& slot, const char* help) {
    cmd->add_option_function<std::uint64_t>(flag, [&slot](std::uint64_t v) { slot = v; }, help);
  };
  auto opt_z = [cmd](const char* flag, std::optional<std::size_t>& slot, const char* help) {
    cmd->add_option_function<std::size_t>(flag, [&slot](std::size_t v) { slot = v; }, help);
  };
  auto opt_s = [cmd](const char* flag, std::optional<std::string>& slot, const char* help) {
    cmd->add_option_function<std::string>(flag, [&slot](std::string v) { slot = std::move(v); },
                                          help);
  };
  opt_d("--lr", ov.lr, "learning rate");
  opt_d("--scl-tau", ov.tau, "contrastive temperature");
  opt_d("--beta", ov.beta, "Fourier swap window fraction in [0,1]");
  opt_d("--conf-threshold", ov.conf, "pseudo-label confidence floor for the contrastive batch");
  opt_d("--ema-momentum", ov.momentum, "teacher EMA momentum");
  opt_u("--seed", ov.seed, "adaptation seed");
  opt_u("--stream-seed", ov.stream_seed, "stream generation seed");
  opt_u("--mixed-seed", ov.mixed_seed, "batch shuffle seed for --mixed");
  opt_u("--kb-seed", ov.kb_seed, "knowledge base seed");
  opt_z("--batches", ov.batches, "batches per domain");
  opt_z("--batch-size", ov.batch_size, "target batch size");
  opt_z("--kb-classes", ov.kb_classes, "knowledge base class count");
  opt_z("--kb-per-class", ov.kb_per_class, "exemplars per class");
  cmd->add_option_function<int>("--severity", [&ov](int v) { ov.severity = v; },
                                "corruption severity 0..5");
  opt_s("--checkpoint", ov.checkpoint, "source checkpoint directory");
  opt_s("--out", ov.out, "output directory");
  opt_s("--kb-dir", ov.kb_dir, "load exemplars from this directory instead of building them");
  opt_s("--precision", ov.precision, "float32 or float64");
  opt_s("--st-variant", ov.st_variant, "teacher_student or entropy_min");
  opt_s("--update-scope", ov.update_scope, "all_params or norm_only");
  opt_s("--eval-network", ov.eval_network, "auto, teacher, or student");
  opt_s("--parts", ov.parts, "comma list out of pce,input,stat,scl,st");
  opt_s("--domains", ov.domains, "comma list of corruption kinds");
  cmd->add_flag_function("--mixed", [&ov](std::int64_t) { ov.mixed = true; },
                         "shuffle batches across domains");
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"style-bridged continual test-time adaptation on procedural glyph streams"};
  app.require_subcommand(1);

  // gen-kb
  auto* gen_kb = app.add_subcommand("gen-kb", "render the class-exemplar knowledge base");
  std::string kb_out = "runs/kb";
  std::size_t kb_classes = 10, kb_per_class = 2;
  std::uint64_t kb_seed = 5;
  bool kb_force = false;
  gen_kb->add_option("--out", kb_out, "output directory");
  gen_kb->add_option("--classes", kb_classes, "number of classes (<= 10)");
  gen_kb->add_option("--per-class", kb_per_class, "exemplars per class");
  gen_kb->add_option("--seed", kb_seed, "variation seed");
  gen_kb->add_flag("--force", kb_force, "overwrite a non-empty directory");

  // gen-data
  auto* gen_data = app.add_subcommand("gen-data", "materialize a corrupted target stream");
  std::string gd_config;
  AdaptOverrides gd_ov;
  bool gd_force = false;
  add_adapt_flags(gen_data, gd_config, gd_ov);
  gen_data->add_flag("--force", gd_force, "overwrite a non-empty directory");

  // train-source
  auto* train = app.add_subcommand("train-source", "train the source model on clean glyphs");
  std::string tr_out = "runs/source";
  SourceTrainConfig tr_cfg;
  std::string tr_precision = "float32";
  train->add_option("--out", tr_out, "checkpoint directory");
  train->add_option("--epochs", tr_cfg.epochs, "training epochs");
  train->add_option("--lr", tr_cfg.lr, "learning rate");
  train->add_option("--samples", tr_cfg.samples, "training set size");
  train->add_option("--holdout", tr_cfg.holdout, "held-out set size");
  train->add_option("--batch-size", tr_cfg.batch_size, "minibatch size");
  train->add_option("--seed", tr_cfg.seed, "seed");
  train->add_option("--precision", tr_precision, "float32 or float64");

  // adapt
  auto* adapt = app.add_subcommand("adapt", "run one online adaptation episode");
  std::string ad_config;
  AdaptOverrides ad_ov;
  add_adapt_flags(adapt, ad_config, ad_ov);

  // ablate
  auto* ablate = app.add_subcommand("ablate", "run the component ablation grid");
  std::string ab_config;
  AdaptOverrides ab_ov;
  std::string ab_kb_sizes;
  add_adapt_flags(ablate, ab_config, ab_ov);
  ablate->add_option("--kb-size", ab_kb_sizes, "comma list of per-class counts to sweep");

  // report
  auto* report = app.add_subcommand("report", "aggregate run summaries into plot-ready CSV");
  std::vector<std::string> rp_dirs;
  std::string rp_out = "runs/report";
  report->add_option("dirs", rp_dirs, "run directories containing summary.json");
  report->add_option("--out", rp_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen_kb->parsed()) {
      apply_out_root(kb_out);
      return cmd_gen_kb(kb_out, kb_classes, kb_per_class, kb_seed, kb_force);
    }
    if (gen_data->parsed()) {
      RunConfig cfg = gd_config.empty() ? RunConfig{} : RunConfig::from_file(gd_config);
      cfg.out_dir = "runs/data";
      apply_overrides(cfg, gd_ov);
      cfg.resolve();
      apply_out_root(cfg.out_dir);
      return cmd_gen_data(cfg, gd_force);
    }
    if (train->parsed()) {
      apply_out_root(tr_out);
      if (tr_precision == "float64") return cmd_train_source_typed<double>(tr_cfg, tr_out);
      if (tr_precision != "float32")
        throw std::invalid_argument("precision must be float32 or float64");
      return cmd_train_source_typed<float>(tr_cfg, tr_out);
    }
    if (adapt->parsed()) {
      RunConfig cfg = ad_config.empty() ? RunConfig{} : RunConfig::from_file(ad_config);
      apply_overrides(cfg, ad_ov);
      cfg.resolve();
      apply_out_root(cfg.out_dir);
      return cmd_adapt(cfg);
    }
    if (ablate->parsed()) {
      RunConfig cfg = ab_config.empty() ? RunConfig{} : RunConfig::from_file(ab_config);
      cfg.out_dir = "runs/ablate";
      apply_overrides(cfg, ab_ov);
      cfg.resolve();
      apply_out_root(cfg.out_dir);
      std::vector<std::size_t> sizes;
      for (const std::string& s : split_csv(ab_kb_sizes)) sizes.push_back(std::stoul(s));
      return cmd_ablate(cfg, sizes);
    }
    if (report->parsed()) {
      apply_out_root(rp_out);
      return cmd_report(rp_dirs, rp_out);
    }
  } catch (const EngineAbort& e) {
    std::cerr << "aborted: " << e.what() << "\n";
    return kExitAbort;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::out_of_range& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::domain_error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace stylebridge
