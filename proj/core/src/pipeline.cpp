#include "qaexpert/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

#include "qaexpert/assets.hpp"
#include "qaexpert/corpus.hpp"
#include "qaexpert/error.hpp"
#include "qaexpert/fixture.hpp"
#include "qaexpert/io_util.hpp"
#include "qaexpert/profiles.hpp"
#include "qaexpert/stats.hpp"

#ifndef QAEXPERT_VERSION
#define QAEXPERT_VERSION "0.0.0"
#endif

namespace qaexpert::pipeline {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration

namespace {

void check_keys(const ordered_json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  require(j.is_object(), ErrorCode::kInvalidArgument, where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    require(std::find(allowed.begin(), allowed.end(), key) != allowed.end(), ErrorCode::kInvalidArgument,
            "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const ordered_json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::string short_name(learners::LearnerKind kind) {
  switch (kind) {
    case learners::LearnerKind::Logistic: return "lr";
    case learners::LearnerKind::Tree: return "dt";
    case learners::LearnerKind::Forest: return "rf";
    case learners::LearnerKind::RuleFit: return "rulefit";
    case learners::LearnerKind::Majority: return "majority";
  }
  return "unknown";
}

void validate_params(learners::LearnerKind kind, const json& params) {
  switch (kind) {
    case learners::LearnerKind::Logistic: learners::logistic_config(params); break;
    case learners::LearnerKind::Tree: learners::tree_config(params); break;
    case learners::LearnerKind::Forest: learners::forest_config(params); break;
    case learners::LearnerKind::RuleFit: learners::rulefit_config(params); break;
    case learners::LearnerKind::Majority:
      require(params.empty(), ErrorCode::kInvalidArgument, "the majority learner takes no parameters");
      break;
  }
}

}  // namespace

ordered_json config_json(const PipelineConfig& c);

nlohmann::json PipelineConfig::to_json() const { return json(config_json(*this)); }

ordered_json config_json(const PipelineConfig& c) {
  ordered_json learners = ordered_json::object();
  for (const auto& [k, v] : c.learners) learners[k] = v;
  ordered_json grids = ordered_json::object();
  for (const auto& [k, v] : c.grids) grids[k] = v;
  ordered_json j;
  j["store"] = c.store.string();
  j["run_dir"] = c.run_dir.string();
  j["seed"] = c.seed;
  j["cv_folds"] = c.cv_folds;
  j["snapshot_utc"] = c.snapshot_utc ? ordered_json(*c.snapshot_utc) : ordered_json(nullptr);
  j["text_model"] = {{"lambda", c.text_model.lambda},
                     {"epochs", c.text_model.epochs},
                     {"seed", c.text_model.seed},
                     {"calibration_folds", c.text_model.calibration_folds}};
  j["learners"] = learners;
  j["grids"] = grids;
  j["selection"] = {{"method", c.selection_method},
                    {"threshold", c.selection.threshold},
                    {"k", c.selection.k},
                    {"percentile", c.selection.percentile},
                    {"target_size", c.selection.target_size},
                    {"cv_folds", c.selection.cv_folds},
                    {"seed", c.selection.seed}};
  j["thresholds"] = {{"kappa_gate", c.thresholds.kappa_gate},
                     {"user_type", c.thresholds.user_type},
                     {"min_activity", c.thresholds.min_activity},
                     {"activity_rule", c.thresholds.activity_each ? "each" : "total"}};
  return j;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& input) {
  const ordered_json j = input;
  PipelineConfig c;
  try {
    check_keys(j,
               {"store", "run_dir", "seed", "cv_folds", "snapshot_utc", "text_model", "learners", "grids",
                "selection", "thresholds"},
               "config");
    if (j.contains("store")) c.store = j.at("store").get<std::string>();
    if (j.contains("run_dir")) c.run_dir = j.at("run_dir").get<std::string>();
    read(j, "seed", c.seed);
    read(j, "cv_folds", c.cv_folds);
    if (j.contains("snapshot_utc") && !j.at("snapshot_utc").is_null()) {
      c.snapshot_utc = j.at("snapshot_utc").get<std::int64_t>();
    }
    if (j.contains("text_model")) {
      const auto& t = j.at("text_model");
      check_keys(t, {"lambda", "epochs", "seed", "calibration_folds"}, "text_model");
      read(t, "lambda", c.text_model.lambda);
      read(t, "epochs", c.text_model.epochs);
      read(t, "seed", c.text_model.seed);
      read(t, "calibration_folds", c.text_model.calibration_folds);
    }
    if (j.contains("learners")) {
      require(j.at("learners").is_object(), ErrorCode::kInvalidArgument, "learners must be an object");
      for (const auto& [k, v] : j.at("learners").items()) c.learners[k] = json(v);
    }
    if (j.contains("grids")) {
      require(j.at("grids").is_object(), ErrorCode::kInvalidArgument, "grids must be an object");
      for (const auto& [k, v] : j.at("grids").items()) c.grids[k] = v;
    }
    if (j.contains("selection")) {
      const auto& s = j.at("selection");
      check_keys(s, {"method", "threshold", "k", "percentile", "target_size", "cv_folds", "seed"}, "selection");
      read(s, "method", c.selection_method);
      read(s, "threshold", c.selection.threshold);
      read(s, "k", c.selection.k);
      read(s, "percentile", c.selection.percentile);
      read(s, "target_size", c.selection.target_size);
      read(s, "cv_folds", c.selection.cv_folds);
      read(s, "seed", c.selection.seed);
    }
    if (j.contains("thresholds")) {
      const auto& t = j.at("thresholds");
      check_keys(t, {"kappa_gate", "user_type", "min_activity", "activity_rule"}, "thresholds");
      read(t, "kappa_gate", c.thresholds.kappa_gate);
      read(t, "user_type", c.thresholds.user_type);
      read(t, "min_activity", c.thresholds.min_activity);
      if (t.contains("activity_rule")) {
        const auto rule = t.at("activity_rule").get<std::string>();
        require(rule == "total" || rule == "each", ErrorCode::kInvalidArgument,
                "activity_rule must be 'total' or 'each'");
        c.thresholds.activity_each = rule == "each";
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

void PipelineConfig::validate() const {
  require(cv_folds >= 2, ErrorCode::kInvalidArgument, "cv_folds must be at least 2");
  require(text_model.lambda > 0.0 && text_model.epochs >= 1 && text_model.calibration_folds >= 2,
          ErrorCode::kInvalidArgument, "text_model needs lambda > 0, epochs >= 1, calibration_folds >= 2");
  require(thresholds.kappa_gate > 0.0 && thresholds.kappa_gate <= 1.0, ErrorCode::kInvalidArgument,
          "thresholds.kappa_gate must be in (0, 1]");
  require(thresholds.user_type > 0.0 && thresholds.user_type <= 1.0, ErrorCode::kInvalidArgument,
          "thresholds.user_type must be in (0, 1]");
  require(thresholds.min_activity >= 1, ErrorCode::kInvalidArgument, "thresholds.min_activity must be at least 1");
  evalkit::parse_selection_method(selection_method);
  require(selection.threshold >= 0.0, ErrorCode::kInvalidArgument, "selection.threshold must be >= 0");
  require(selection.percentile > 0.0 && selection.percentile <= 100.0, ErrorCode::kInvalidArgument,
          "selection.percentile must be in (0, 100]");
  require(selection.k >= 1 && selection.target_size >= 1 && selection.cv_folds >= 2, ErrorCode::kInvalidArgument,
          "selection.k and selection.target_size must be >= 1, selection.cv_folds >= 2");
  for (const auto& [name, params] : learners) validate_params(learners::parse_kind(name), params);
  for (const auto& [name, grid] : grids) {
    const auto kind = learners::parse_kind(name);
    for (const auto& point : evalkit::expand_grid(grid)) validate_params(kind, point);
  }
}

std::string PipelineConfig::hash() const { return io::hex64(io::fnv1a64(config_json(*this).dump())); }

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* value = std::getenv(name.c_str());
    if (value == nullptr || *value == '\0') return std::nullopt;
    return std::string(value);
  };
}

PipelineConfig resolve_config(const GlobalOptions& cli, const EnvLookup& env) {
  PipelineConfig config;
  std::optional<fs::path> file = cli.config_file;
  if (!file) {
    if (auto e = env("QAEXPERT_CONFIG")) file = *e;
  }
  if (file) {
    require(fs::exists(*file), ErrorCode::kIo, "config file not found: " + file->string());
    const json j = json::parse(io::read_text_file(*file), nullptr, false);
    require(!j.is_discarded(), ErrorCode::kInvalidArgument, "config file is not valid JSON: " + file->string());
    config = PipelineConfig::from_json(j);
  }
  if (auto e = env("QAEXPERT_SEED")) {
    const auto seed = io::parse_int(*e);
    require(seed >= 0, ErrorCode::kInvalidArgument, "QAEXPERT_SEED must be non-negative");
    config.seed = static_cast<std::uint64_t>(seed);
  }
  if (auto e = env("QAEXPERT_STORE")) config.store = *e;
  if (auto e = env("QAEXPERT_RUN_DIR")) config.run_dir = *e;
  if (cli.seed) config.seed = *cli.seed;
  if (cli.store) config.store = *cli.store;
  if (cli.run_dir) config.run_dir = *cli.run_dir;
  config.validate();
  return config;
}

// ---------------------------------------------------------------------------
// Run directory

const std::vector<Artifact>& artifacts() {
  static const std::vector<Artifact> list = {
      {"labels.csv", "gen-fixture"},
      {"truth.csv", "gen-fixture"},
      {"sample.csv", "sample"},
      {"text_model.json", "featurize"},
      {"features.csv", "featurize"},
      {"features.manifest.json", "featurize"},
      {"pool_features.csv", "featurize"},
      {"pool_features.manifest.json", "featurize"},
      {"model.json", "train"},
      {"eval_*.json", "evaluate"},
      {"gridsearch_*.csv", "gridsearch"},
      {"selection.json", "select"},
      {"selection.csv", "select"},
      {"predictions.csv", "predict"},
      {"characteristics.csv", "characterize"},
      {"anova.csv", "characterize"},
      {"manova.json", "characterize"},
      {"profiles.csv", "profile"},
      {"radar.csv", "profile"},
      {"profile_summary.json", "profile"},
      {"report_table4.csv", "report"},
      {"report_table5.csv", "report"},
      {"report_table6.csv", "report"},
      {"report.md", "report"},
  };
  return list;
}

std::string producer_of(std::string_view file) {
  for (const auto& a : artifacts()) {
    const auto star = a.file.find('*');
    if (star == std::string::npos) {
      if (a.file == file) return a.producer;
      continue;
    }
    const std::string_view prefix = std::string_view(a.file).substr(0, star);
    const std::string_view suffix = std::string_view(a.file).substr(star + 1);
    if (file.size() >= prefix.size() + suffix.size() && file.starts_with(prefix) && file.ends_with(suffix)) {
      return a.producer;
    }
  }
  fail(ErrorCode::kNotFound, "unknown artifact '" + std::string(file) + "'");
}

RunLock::RunLock(const fs::path& run_dir) : path_(run_dir / ".lock") {
  fs::create_directories(run_dir);
  std::FILE* f = std::fopen(path_.c_str(), "wx");
  require(f != nullptr, ErrorCode::kConflict,
          "run directory " + run_dir.string() + " is in use by another command (remove " + path_.string() +
              " if no command is running)");
  std::fprintf(f, "%ld\n", static_cast<long>(::getpid()));
  std::fclose(f);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

Run::Run(PipelineConfig config) : config_(std::move(config)) {
  config_.validate();
  fs::create_directories(config_.run_dir);
}

fs::path Run::path(std::string_view file) const { return config_.run_dir / fs::path(std::string(file)); }

fs::path Run::need(std::string_view file) const {
  const fs::path p = path(file);
  require(fs::exists(p), ErrorCode::kDependencyMissing,
          "missing artifact " + p.string() + "; run `qaexpert " + producer_of(file) + "` first");
  return p;
}

json Run::manifest() const {
  const fs::path p = path("manifest.json");
  if (!fs::exists(p)) return json::object();
  json j = json::parse(io::read_text_file(p), nullptr, false);
  require(!j.is_discarded(), ErrorCode::kIo, "corrupt run manifest " + p.string());
  return j;
}

void Run::record(const std::string& command, const std::vector<fs::path>& written) const {
  json m = manifest();
  m["format"] = "qaexpert-run";
  m["version"] = 1;
  m["tool_version"] = QAEXPERT_VERSION;
  m["config_hash"] = config_.hash();
  m["config"] = config_.to_json();
  json assets = json::object();
  for (const auto& [file, version] : assets::versions()) assets[file] = version;
  m["assets"] = assets;
  if (!m.contains("artifacts")) m["artifacts"] = json::object();
  for (const auto& p : written) {
    std::string key = p.string();
    const auto rel = p.lexically_relative(config_.run_dir);
    if (!rel.empty() && *rel.begin() != "..") key = rel.string();
    m["artifacts"][key] = json{{"command", command},
                               {"config_hash", config_.hash()},
                               {"content_hash", io::hex64(io::fnv1a64(io::read_text_file(p)))}};
  }
  io::write_text_file(path("manifest.json"), m.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Shared helpers

namespace {

std::string fixed(double v, int digits = 4) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

corpus::CorpusStore load_store(const PipelineConfig& config) {
  require(fs::exists(config.store), ErrorCode::kDependencyMissing,
          "no corpus store at " + config.store.string() + "; run `qaexpert ingest` or `qaexpert gen-fixture` first");
  return corpus::CorpusStore::load(config.store);
}

fs::path manifest_for(const fs::path& csv) {
  fs::path m = csv;
  m.replace_extension(".manifest.json");
  return m;
}

features::FeatureMatrix load_matrix(const fs::path& csv) {
  const fs::path m = manifest_for(csv);
  require(fs::exists(m), ErrorCode::kDependencyMissing,
          "feature matrix " + csv.string() + " has no manifest " + m.string() + "; run `qaexpert featurize` first");
  return features::FeatureMatrix::load(csv, m);
}

void save_matrix(const features::FeatureMatrix& matrix, const fs::path& csv, std::vector<fs::path>& written) {
  matrix.save(csv, manifest_for(csv));
  written.push_back(csv);
  written.push_back(manifest_for(csv));
}

learners::LearnerSpec learner_spec(const PipelineConfig& config, std::string_view name) {
  learners::LearnerSpec spec;
  spec.kind = learners::parse_kind(name);
  if (auto it = config.learners.find(short_name(spec.kind)); it != config.learners.end()) {
    spec.params = it->second;
  } else if (auto named = config.learners.find(std::string(name)); named != config.learners.end()) {
    spec.params = named->second;
  }
  if (spec.kind != learners::LearnerKind::Majority && !spec.params.contains("seed")) {
    spec.params["seed"] = config.seed;
  }
  return spec;
}

std::vector<std::string> selected_columns(const Run& run) {
  const json j = json::parse(io::read_text_file(run.need("selection.json")), nullptr, false);
  require(!j.is_discarded(), ErrorCode::kIo, "corrupt selection.json");
  return j.at("kept").get<std::vector<std::string>>();
}

learners::Dataset restrict_columns(const learners::Dataset& data, const std::vector<std::string>& names) {
  std::vector<std::size_t> cols;
  for (const auto& n : names) {
    auto it = std::find(data.feature_names.begin(), data.feature_names.end(), n);
    require(it != data.feature_names.end(), ErrorCode::kInvalidArgument, "feature '" + n + "' is not in the matrix");
    cols.push_back(static_cast<std::size_t>(it - data.feature_names.begin()));
  }
  return data.select_columns(cols);
}

learners::Dataset load_dataset(const Run& run, const LearnerOptions& options) {
  const fs::path data = options.data ? *options.data : run.need("features.csv");
  const fs::path labels = options.labels ? *options.labels : run.need("labels.csv");
  auto dataset = make_dataset(load_matrix(data), read_labels(labels));
  if (options.selected) dataset = restrict_columns(dataset, selected_columns(run));
  return dataset;
}

json metrics_json(const evalkit::Metrics& m) {
  json confusion = json::array();
  for (const auto& row : m.confusion) confusion.push_back(std::vector<double>(row.begin(), row.end()));
  return json{{"n", m.n},
              {"accuracy", m.accuracy},
              {"auc", std::isfinite(m.auc_macro_ovr) ? json(m.auc_macro_ovr) : json(nullptr)},
              {"mae", m.mae},
              {"r2", m.r2},
              {"confusion", confusion},
              {"warnings", m.warnings}};
}

evalkit::Metrics metrics_from(const json& j) {
  evalkit::Metrics m;
  m.n = j.at("n").get<std::size_t>();
  m.accuracy = j.at("accuracy").get<double>();
  m.auc_macro_ovr = j.at("auc").is_null() ? std::nan("") : j.at("auc").get<double>();
  m.mae = j.at("mae").get<double>();
  m.r2 = j.at("r2").get<double>();
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    for (std::size_t p = 0; p < kNumClasses; ++p) m.confusion[t][p] = j.at("confusion").at(t).at(p).get<double>();
  }
  m.warnings = j.value("warnings", std::vector<std::string>{});
  return m;
}

json eval_json(const learners::LearnerSpec& spec, const evalkit::EvalReport& report, std::size_t folds,
               std::uint64_t seed, std::size_t n_features) {
  json j = metrics_json(report);
  j["learner"] = short_name(spec.kind);
  j["params"] = spec.params;
  j["folds"] = folds;
  j["seed"] = seed;
  j["n_features"] = n_features;
  json per_fold = json::array();
  for (const auto& f : report.per_fold) per_fold.push_back(metrics_json(f));
  j["per_fold"] = per_fold;
  return j;
}

std::string metrics_line(const evalkit::Metrics& m) {
  return "accuracy " + fixed(m.accuracy) + "  auc " + fixed(m.auc_macro_ovr) + "  mae " + fixed(m.mae) + "  r2 " +
         fixed(m.r2);
}

ordered_json default_grid(learners::LearnerKind kind) {
  switch (kind) {
    case learners::LearnerKind::Logistic: return ordered_json{{"l2_penalty", {1e-4, 1e-3, 1e-2, 1e-1}}};
    case learners::LearnerKind::Tree: return ordered_json{{"max_depth", {3, 5, 8, 12}}, {"min_leaf", {1, 5}}};
    case learners::LearnerKind::Forest:
      return ordered_json{{"n_trees", {100}}, {"max_depth", {8, 16}}, {"min_leaf", {1, 3}}};
    case learners::LearnerKind::RuleFit: return ordered_json{{"max_depth", {2, 3}}, {"l1_penalty", {1e-3, 1e-2}}};
    case learners::LearnerKind::Majority: return ordered_json::array({ordered_json::object()});
  }
  return ordered_json::object();
}

std::unordered_map<std::string, Label> labels_for(const corpus::CorpusStore& store, const fs::path& path) {
  auto labels = read_labels(path);
  for (const auto& [id, label] : labels) {
    require(store.find_comment(id) != nullptr, ErrorCode::kInvalidArgument,
            "labelled comment '" + id + "' is not in the store");
  }
  return labels;
}

std::string write_table_file(const fs::path& path, const io::Table& table, std::vector<fs::path>& written) {
  io::write_table(path, table);
  written.push_back(path);
  return path.string();
}

}  // namespace

std::unordered_map<std::string, Label> read_labels(const fs::path& path) {
  require(fs::exists(path), ErrorCode::kIo, "label file not found: " + path.string());
  std::unordered_map<std::string, Label> out;
  auto add = [&](const std::string& id, const std::string& label) {
    Label l;
    if (label.size() == 1 && label[0] >= '0' && label[0] <= '2') {
      l = label_from_code(label[0] - '0');
    } else {
      l = parse_label_or_throw(label);
    }
    require(out.emplace(id, l).second, ErrorCode::kInvalidArgument,
            "comment '" + id + "' is labelled twice in " + path.string());
  };
  if (path.extension() == ".json") {
    const json j = json::parse(io::read_text_file(path), nullptr, false);
    require(!j.is_discarded(), ErrorCode::kInvalidArgument, "label file is not valid JSON: " + path.string());
    const json& list = j.is_object() ? j.at("labels") : j;
    for (const auto& rec : list) add(rec.at("comment_id").get<std::string>(), rec.at("label").get<std::string>());
    return out;
  }
  const io::Table t = io::read_table(path);
  const auto id_col = t.column("comment_id");
  const auto label_col = t.column("label");
  for (const auto& row : t.rows) add(row.at(id_col), row.at(label_col));
  return out;
}

void write_labels(const fs::path& path, const std::vector<std::string>& ids,
                  const std::unordered_map<std::string, Label>& labels) {
  io::Table t;
  t.header = {"comment_id", "label"};
  for (const auto& id : ids) t.rows.push_back({id, std::string(to_string(labels.at(id)))});
  io::write_table(path, t);
}

learners::Dataset make_dataset(const features::FeatureMatrix& matrix,
                               const std::unordered_map<std::string, Label>& labels) {
  learners::Dataset data;
  data.feature_names = matrix.feature_names;
  data.X.reserve(matrix.rows.size());
  data.y.reserve(matrix.rows.size());
  for (std::size_t i = 0; i < matrix.ids.size(); ++i) {
    auto it = labels.find(matrix.ids[i]);
    require(it != labels.end(), ErrorCode::kInvalidArgument, "feature row '" + matrix.ids[i] + "' has no label");
    data.X.push_back(matrix.rows[i]);
    data.y.push_back(it->second);
  }
  return data;
}

io::Table learner_grid(const std::map<std::string, evalkit::Metrics>& by_learner) {
  static const std::vector<std::pair<std::string, std::string>> columns = {
      {"lr", "logistic_regression"}, {"dt", "decision_tree"}, {"rf", "random_forest"}, {"rulefit", "rulefit"}};
  io::Table t;
  t.header = {"metric"};
  for (const auto& [key, title] : columns) t.header.push_back(title);
  const std::vector<std::pair<std::string, double evalkit::Metrics::*>> rows = {
      {"accuracy", &evalkit::Metrics::accuracy},
      {"auc", &evalkit::Metrics::auc_macro_ovr},
      {"mae", &evalkit::Metrics::mae},
      {"r2", &evalkit::Metrics::r2}};
  for (const auto& [name, member] : rows) {
    std::vector<std::string> row{name};
    for (const auto& [key, title] : columns) {
      auto it = by_learner.find(key);
      row.push_back(it == by_learner.end() ? "NA" : fixed(it->second.*member));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Commands

CommandResult ingest(const PipelineConfig& config, const IngestOptions& options) {
  const auto store = corpus::CorpusStore::ingest(options.posts, options.comments, options.users);
  store.save(config.store);
  const auto& r = store.report();
  std::ostringstream out;
  out << "posts " << r.posts_loaded << " (malformed " << r.malformed_posts << ", duplicates " << r.duplicate_posts
      << ")\n"
      << "comments " << r.comments_loaded << " (malformed " << r.malformed_comments << ", duplicates "
      << r.duplicate_comments << ", quarantined " << r.quarantined_comments << ")\n"
      << "users with account dates " << r.users_with_account_date << "\n"
      << "store " << config.store.string() << "\n";
  for (const auto& w : r.warnings) out << "warning: " << w << "\n";
  return {out.str(), {config.store}};
}

CommandResult metrics(const PipelineConfig& config) {
  const auto store = load_store(config);
  const auto m = corpus::subreddit_metrics(store);
  io::Table t;
  t.header = {"unique_users", "submissions", "comments", "avg_comments_per_submission", "avg_comment_length",
              "avg_score", "avg_upvote_ratio", "avg_awards"};
  t.rows.push_back({std::to_string(m.unique_users), std::to_string(m.submission_count),
                    std::to_string(m.comment_count), fixed(m.avg_comments_per_submission, 2),
                    fixed(m.avg_comment_length, 2), fixed(m.avg_score, 2), fixed(m.avg_upvote_ratio, 2),
                    fixed(m.avg_awards, 2)});
  std::string out = io::format_table(t);
  if (m.empty) out += "note: store has no submissions; means reported as 0\n";
  if (m.quarantined_comments > 0) out += "quarantined comments " + std::to_string(m.quarantined_comments) + "\n";
  return {out, {}};
}

CommandResult measure(const PipelineConfig& config, const MeasureOptions& options) {
  // The text columns of the feature matrix, without the model-dependent one.
  const auto& names = features::column_names();
  const std::size_t n_text = 23;
  if (options.text) {
    const auto values = features::nlp_columns(textpipe::measure(*options.text), 0.0);
    std::ostringstream out;
    for (std::size_t i = 0; i < n_text; ++i) out << names[i] << " " << io::format_double(values[i]) << "\n";
    return {out.str(), {}};
  }
  require(options.out.has_value(), ErrorCode::kInvalidArgument, "measure needs --text or --out");
  const auto store = load_store(config);
  io::Table t;
  t.header = {"comment_id"};
  t.header.insert(t.header.end(), names.begin(), names.begin() + static_cast<std::ptrdiff_t>(n_text));
  t.rows.resize(store.comments().size());
  for (std::size_t i = 0; i < store.comments().size(); ++i) {
    const auto& c = store.comments()[i];
    const auto values = features::nlp_columns(textpipe::measure(c.body), 0.0);
    auto& row = t.rows[i];
    row.push_back(c.id);
    for (std::size_t k = 0; k < n_text; ++k) row.push_back(io::format_double(values[k]));
  }
  std::vector<fs::path> written;
  write_table_file(*options.out, t, written);
  std::ostringstream out;
  out << "measured " << t.rows.size() << " comments into " << options.out->string() << "\n";
  return {out.str(), written};
}

CommandResult sample(const Run& run, const SampleOptions& options) {
  const auto store = load_store(run.config());
  const corpus::MonthWindow window{io::parse_year_month(options.from), io::parse_year_month(options.to)};
  const auto result = corpus::sample_for_labeling(store, options.n, window, run.config().seed);
  io::Table t;
  t.header = {"comment_id", "post_id", "month"};
  for (const auto& id : result.comment_ids) {
    const auto* c = store.find_comment(id);
    t.rows.push_back({id, c->post_id, io::to_string(io::utc_year_month(c->created_utc))});
  }
  std::vector<fs::path> written;
  write_table_file(run.path("sample.csv"), t, written);
  run.record("sample", written);
  std::ostringstream out;
  out << "sampled " << result.comment_ids.size() << " of " << result.eligible_comments << " eligible comments from "
      << result.eligible_posts << " posts\n";
  for (const auto& m : result.per_month) {
    out << "  " << io::to_string(m.month) << "  selected " << m.selected << " of " << m.available << "\n";
  }
  if (result.imbalanced) out << "warning: months could not be balanced\n";
  for (const auto& n : result.notes) out << "note: " << n << "\n";
  return {out.str(), written};
}

CommandResult gen_fixture(const Run& run, const GenFixtureOptions& options) {
  fixture::FixtureConfig fc;
  fc.seed = run.config().seed;
  fc.n_posts = options.posts;
  fc.n_comments = options.comments;
  fc.n_labelled = options.labelled;
  fc.n_users = options.users;
  const auto fx = fixture::generate_fixture(fc);
  fx.store.save(run.config().store);

  std::vector<fs::path> written;
  write_labels(run.path("labels.csv"), fx.labelled_ids, fx.planted);
  written.push_back(run.path("labels.csv"));
  std::vector<std::string> all;
  for (const auto& c : fx.store.comments()) all.push_back(c.id);
  write_labels(run.path("truth.csv"), all, fx.planted);
  written.push_back(run.path("truth.csv"));
  run.record("gen-fixture", written);

  std::ostringstream out;
  out << "fixture seed " << fc.seed << ": " << fx.store.posts().size() << " posts, " << fx.store.comments().size()
      << " comments, " << fx.store.authors().size() << " users, " << fx.labelled_ids.size() << " labelled\n"
      << "store " << run.config().store.string() << "\n";
  return {out.str(), written};
}

CommandResult featurize(const Run& run, const FeaturizeOptions& options) {
  const auto& config = run.config();
  const auto store = load_store(config);
  const fs::path labels_path = options.labels ? *options.labels : run.need("labels.csv");
  const auto labels = labels_for(store, labels_path);
  require(!labels.empty(), ErrorCode::kPrecondition, "no labelled comments in " + labels_path.string());

  const auto model = features::fit_text_model(store, labels, config.text_model);
  const auto oof = features::out_of_fold_probabilities(store, model, labels, config.text_model);

  std::int64_t snapshot = 0;
  if (config.snapshot_utc) {
    snapshot = *config.snapshot_utc;
  } else {
    for (const auto& p : store.posts()) snapshot = std::max(snapshot, p.created_utc);
    for (const auto& c : store.comments()) snapshot = std::max(snapshot, c.created_utc);
  }

  std::vector<std::string> labelled, pool;
  for (const auto& c : store.comments()) (labels.count(c.id) ? labelled : pool).push_back(c.id);

  std::vector<fs::path> written;
  model.save(run.path("text_model.json"));
  written.push_back(run.path("text_model.json"));

  features::AssembleOptions opts;
  opts.snapshot_utc = snapshot;
  opts.threads = options.threads;
  opts.expert_probability_override = oof;
  const auto labelled_matrix = features::assemble(store, labelled, model, opts);
  save_matrix(labelled_matrix, run.path("features.csv"), written);

  opts.expert_probability_override.clear();
  const auto pool_matrix = features::assemble(store, pool, model, opts);
  save_matrix(pool_matrix, run.path("pool_features.csv"), written);
  run.record("featurize", written);

  std::ostringstream out;
  out << "labelled rows " << labelled_matrix.rows.size() << ", pool rows " << pool_matrix.rows.size() << ", columns "
      << labelled_matrix.feature_names.size() << "\n"
      << "vocabulary " << model.tfidf.vocabulary_size() << " terms, snapshot " << snapshot << "\n"
      << "header hash " << labelled_matrix.header_hash() << "\n";
  return {out.str(), written};
}

CommandResult train(const Run& run, const LearnerOptions& options) {
  const auto data = load_dataset(run, options);
  const auto spec = learner_spec(run.config(), options.model);
  const auto model = learners::train(data, spec);
  std::vector<fs::path> written{run.path("model.json")};
  model.save(written.front());
  run.record("train", written);

  const auto imp = model.feature_importances();
  std::vector<std::size_t> order(imp.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return imp[a] > imp[b]; });
  std::ostringstream out;
  out << "trained " << learners::to_string(spec.kind) << " on " << data.n_rows() << " rows, " << data.n_features()
      << " features\n"
      << "top features:\n";
  for (std::size_t i = 0; i < std::min<std::size_t>(5, order.size()); ++i) {
    out << "  " << data.feature_names[order[i]] << "  " << fixed(imp[order[i]]) << "\n";
  }
  return {out.str(), written};
}

CommandResult evaluate(const Run& run, const LearnerOptions& options) {
  const auto& config = run.config();
  const auto data = load_dataset(run, options);
  const auto spec = learner_spec(config, options.model);
  const auto cv = evalkit::cross_validate(data, evalkit::make_trainer(spec), config.cv_folds, config.seed);
  const std::string name = "eval_" + short_name(spec.kind) + (options.selected ? "_selected" : "") + ".json";
  std::vector<fs::path> written{run.path(name)};
  io::write_text_file(written.front(),
                      eval_json(spec, cv.report, config.cv_folds, config.seed, data.n_features()).dump(2) + "\n");
  run.record("evaluate", written);
  std::ostringstream out;
  out << learners::to_string(spec.kind) << " " << config.cv_folds << "-fold on " << data.n_rows() << " rows: "
      << metrics_line(cv.report) << "\n";
  for (const auto& w : cv.report.warnings) out << "warning: " << w << "\n";
  return {out.str(), written};
}

CommandResult gridsearch(const Run& run, const GridOptions& options) {
  const auto& config = run.config();
  const auto data = load_dataset(run, options.learner);
  const auto spec = learner_spec(config, options.learner.model);
  ordered_json grid;
  if (options.grid) {
    grid = ordered_json::parse(io::read_text_file(*options.grid), nullptr, false);
    require(!grid.is_discarded(), ErrorCode::kInvalidArgument, "grid file is not valid JSON");
  } else if (auto it = config.grids.find(short_name(spec.kind)); it != config.grids.end()) {
    grid = it->second;
  } else {
    grid = default_grid(spec.kind);
  }
  const auto result = evalkit::grid_search(data, spec.kind, grid, config.cv_folds, config.seed, spec.params);

  std::vector<std::string> keys;
  for (const auto& point : result.table) {
    for (const auto& [k, v] : point.params.items()) {
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    }
  }
  io::Table t;
  t.header = keys;
  for (const char* m : {"accuracy", "auc", "mae", "r2", "best"}) t.header.push_back(m);
  for (std::size_t i = 0; i < result.table.size(); ++i) {
    const auto& point = result.table[i];
    std::vector<std::string> row;
    for (const auto& k : keys) row.push_back(point.params.contains(k) ? point.params.at(k).dump() : "");
    row.push_back(io::format_double(point.report.accuracy));
    row.push_back(std::isfinite(point.report.auc_macro_ovr) ? io::format_double(point.report.auc_macro_ovr) : "NA");
    row.push_back(io::format_double(point.report.mae));
    row.push_back(io::format_double(point.report.r2));
    row.push_back(i == result.best_index ? "1" : "0");
    t.rows.push_back(std::move(row));
  }
  std::vector<fs::path> written;
  const std::string suffix = short_name(spec.kind) + (options.learner.selected ? "_selected" : "");
  write_table_file(run.path("gridsearch_" + suffix + ".csv"), t, written);

  learners::LearnerSpec best = spec;
  for (const auto& [k, v] : result.best_params.items()) best.params[k] = v;
  const auto& best_report = result.table[result.best_index].report;
  written.push_back(run.path("eval_" + suffix + ".json"));
  io::write_text_file(written.back(),
                      eval_json(best, best_report, config.cv_folds, config.seed, data.n_features()).dump(2) + "\n");
  const auto model = learners::train(data, best);
  written.push_back(run.path("model.json"));
  model.save(written.back());
  run.record("gridsearch", written);

  std::ostringstream out;
  out << "grid of " << result.table.size() << " points for " << learners::to_string(spec.kind) << "\n"
      << "best " << result.best_params.dump() << ": " << metrics_line(best_report) << "\n";
  return {out.str(), written};
}

CommandResult select(const Run& run, const SelectOptions& options) {
  const auto& config = run.config();
  LearnerOptions lo;
  lo.model = options.model;
  const auto data = load_dataset(run, lo);
  const auto method = evalkit::parse_selection_method(options.method.value_or(config.selection_method));
  auto params = config.selection;
  if (options.threshold) params.threshold = *options.threshold;
  if (options.k) params.k = *options.k;
  if (options.percentile) params.percentile = *options.percentile;
  if (options.target_size) params.target_size = *options.target_size;
  if (!config.selection.seed) params.seed = config.seed;
  evalkit::Trainer trainer;
  if (method == evalkit::SelectionMethod::Rfe || method == evalkit::SelectionMethod::Sfs) {
    trainer = evalkit::make_trainer(learner_spec(config, options.model));
  }
  const auto result = evalkit::select_features(data, method, params, trainer);

  json scores = json::object();
  io::Table t;
  t.header = {"feature", "score", "kept"};
  for (std::size_t i = 0; i < data.feature_names.size(); ++i) {
    scores[data.feature_names[i]] = result.scores[i];
    const bool kept = std::find(result.kept_indices.begin(), result.kept_indices.end(), i) != result.kept_indices.end();
    t.rows.push_back({data.feature_names[i], io::format_double(result.scores[i]), kept ? "1" : "0"});
  }
  std::vector<fs::path> written{run.path("selection.json")};
  io::write_text_file(written.front(), json{{"method", std::string(evalkit::to_string(method))},
                                            {"kept", result.kept},
                                            {"scores", scores}}
                                               .dump(2) +
                                           "\n");
  write_table_file(run.path("selection.csv"), t, written);
  run.record("select", written);

  std::ostringstream out;
  out << evalkit::to_string(method) << " kept " << result.kept.size() << " of " << data.n_features() << ":\n";
  for (const auto& k : result.kept) out << "  " << k << "\n";
  return {out.str(), written};
}

CommandResult predict(const Run& run, const PredictOptions& options) {
  const auto model = learners::TrainedModel::load(options.model ? *options.model : run.need("model.json"));
  const auto matrix = load_matrix(options.data ? *options.data : run.need("pool_features.csv"));
  std::vector<std::size_t> cols;
  for (const auto& name : model.feature_names()) cols.push_back(matrix.column(name));
  std::vector<std::vector<double>> rows;
  rows.reserve(matrix.rows.size());
  for (const auto& r : matrix.rows) {
    std::vector<double> x;
    x.reserve(cols.size());
    for (auto c : cols) x.push_back(r[c]);
    rows.push_back(std::move(x));
  }
  const auto proba = model.predict_proba(rows);
  io::Table t;
  t.header = {"comment_id", "label", "p_expert", "p_nonexpert", "p_out_of_scope"};
  std::array<std::size_t, kNumClasses> counts{};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Label l = learners::argmax(proba[i]);
    ++counts[index(l)];
    t.rows.push_back({matrix.ids[i], std::string(to_string(l)), io::format_double(proba[i][0]),
                      io::format_double(proba[i][1]), io::format_double(proba[i][2])});
  }
  std::vector<fs::path> written;
  write_table_file(run.path("predictions.csv"), t, written);
  run.record("predict", written);
  std::ostringstream out;
  out << "predicted " << rows.size() << " comments with " << learners::to_string(model.kind()) << ": expert "
      << counts[0] << ", nonexpert " << counts[1] << ", out_of_scope " << counts[2] << "\n";
  return {out.str(), written};
}

namespace {

json manova_json(const profiles::Characteristics& c) {
  if (c.manova_error) {
    return json{{"error", {{"code", std::string(to_string(c.manova_error->code))}, {"message", c.manova_error->message}}}};
  }
  if (!c.manova) return json{{"error", nullptr}};
  const auto& m = *c.manova;
  return json{{"wilks_lambda", m.wilks_lambda}, {"f", m.f_approx},           {"df1", m.df1},
              {"df2", m.df2},                   {"p_value", m.p_value},      {"used_columns", m.used_columns},
              {"dropped_columns", m.dropped_columns}, {"warnings", m.warnings}};
}

std::string characteristics_summary(const profiles::Characteristics& c) {
  std::ostringstream out;
  out << "class sizes: expert " << c.class_sizes[0] << ", nonexpert " << c.class_sizes[1] << ", out_of_scope "
      << c.class_sizes[2] << "\n";
  for (std::size_t f = 0; f < c.feature_names.size(); ++f) {
    if (c.feature_names[f] != "word_count") continue;
    out << "mean word_count:";
    for (Label l : kAllLabels) {
      const auto& s = c.per_class[index(l)][f];
      out << " " << to_string(l) << " " << (s.n ? fixed(s.mean, 2) : "NA");
    }
    out << "\n";
  }
  for (const auto& n : c.notes) out << "note: " << n << "\n";
  return out.str();
}

}  // namespace

CommandResult characterize(const Run& run) {
  const auto predictions = read_labels(run.need("predictions.csv"));
  const auto matrix = load_matrix(run.need("pool_features.csv"));
  const auto c = profiles::class_characteristics(predictions, matrix, true);
  std::vector<fs::path> written;
  write_table_file(run.path("characteristics.csv"), profiles::characteristics_table(c), written);
  write_table_file(run.path("anova.csv"), profiles::anova_table(c), written);
  written.push_back(run.path("manova.json"));
  io::write_text_file(written.back(), manova_json(c).dump(2) + "\n");
  run.record("characterize", written);
  std::string out = characteristics_summary(c);
  if (c.manova) {
    out += "MANOVA: Wilks " + fixed(c.manova->wilks_lambda, 6) + ", F " + fixed(c.manova->f_approx, 3) + " (" +
           fixed(c.manova->df1, 0) + ", " + fixed(c.manova->df2, 1) + ")\n";
  } else if (c.manova_error) {
    out += "MANOVA: " + c.manova_error->message + "\n";
  }
  return {out, written};
}

CommandResult profile(const Run& run, const ProfileOptions& options) {
  const auto& config = run.config();
  const auto predictions = read_labels(options.predictions ? *options.predictions : run.need("predictions.csv"));
  const auto store = load_store(config);
  const auto matrix = load_matrix(options.features ? *options.features : run.need("pool_features.csv"));
  const fs::path out_dir = options.out ? *options.out : run.dir();
  fs::create_directories(out_dir);

  profiles::ProfileOptions po;
  po.min_activity = config.thresholds.min_activity;
  po.rule = config.thresholds.activity_each ? profiles::ActivityRule::Each : profiles::ActivityRule::Total;
  po.type_threshold = config.thresholds.user_type;
  const auto users = profiles::classify_users(predictions, store, po);
  const auto c = profiles::class_characteristics(predictions, matrix, false);
  const auto radar = profiles::profile_summary(users, matrix, store);

  std::array<std::size_t, 4> typed{};
  for (const auto& u : users) ++typed[static_cast<std::size_t>(u.user_type)];
  std::vector<fs::path> written;
  write_table_file(out_dir / "profiles.csv", profiles::profiles_table(users), written);
  write_table_file(out_dir / "characteristics.csv", profiles::characteristics_table(c), written);
  write_table_file(out_dir / "anova.csv", profiles::anova_table(c), written);
  write_table_file(out_dir / "radar.csv", profiles::radar_table(radar), written);
  const json summary{{"filtered_users", users.size()},
                     {"expert", typed[0]},
                     {"nonexpert", typed[1]},
                     {"out_of_scope", typed[2]},
                     {"unclassified", typed[3]},
                     {"min_activity", po.min_activity},
                     {"activity_rule", config.thresholds.activity_each ? "each" : "total"},
                     {"type_threshold", po.type_threshold},
                     {"notes", radar.notes}};
  written.push_back(out_dir / "profile_summary.json");
  io::write_text_file(written.back(), summary.dump(2) + "\n");
  run.record("profile", written);

  std::ostringstream out;
  out << "users passing the activity filter " << users.size() << ": expert " << typed[0] << ", nonexpert "
      << typed[1] << ", out_of_scope " << typed[2] << ", unclassified " << typed[3] << "\n";
  out << characteristics_summary(c);
  for (const auto& n : radar.notes) out << "note: " << n << "\n";
  return {out.str(), written};
}

CommandResult report(const Run& run) {
  std::map<std::string, evalkit::Metrics> full, selected;
  for (const char* key : {"lr", "dt", "rf", "rulefit"}) {
    for (bool sel : {false, true}) {
      const fs::path p = run.path(std::string("eval_") + key + (sel ? "_selected" : "") + ".json");
      if (!fs::exists(p)) continue;
      const json j = json::parse(io::read_text_file(p), nullptr, false);
      require(!j.is_discarded(), ErrorCode::kIo, "corrupt evaluation file " + p.string());
      (sel ? selected : full)[key] = metrics_from(j);
    }
  }
  require(!full.empty() || !selected.empty(), ErrorCode::kDependencyMissing,
          "no evaluation results in " + run.dir().string() + "; run `qaexpert evaluate` first");

  std::vector<fs::path> written;
  const io::Table table4 = learner_grid(full);
  write_table_file(run.path("report_table4.csv"), table4, written);

  io::Table table5;
  table5.header = {"true\\predicted", "expert", "nonexpert", "out_of_scope"};
  if (auto it = full.find("rf"); it != full.end()) {
    for (Label t : kAllLabels) {
      std::vector<std::string> row{std::string(to_string(t))};
      for (Label p : kAllLabels) row.push_back(fixed(it->second.confusion[index(t)][index(p)]));
      table5.rows.push_back(std::move(row));
    }
  }
  write_table_file(run.path("report_table5.csv"), table5, written);

  const io::Table table6 = learner_grid(selected);
  write_table_file(run.path("report_table6.csv"), table6, written);

  std::ostringstream md;
  md << "# Run report\n\n";
  md << "Config hash `" << run.config().hash() << "`, seed " << run.config().seed << ", " << run.config().cv_folds
     << "-fold stratified cross-validation.\n\n";
  auto emit = [&](const std::string& title, const io::Table& t) {
    md << "## " << title << "\n\n| " ;
    for (std::size_t i = 0; i < t.header.size(); ++i) md << t.header[i] << (i + 1 < t.header.size() ? " | " : " |\n|");
    for (std::size_t i = 0; i < t.header.size(); ++i) md << "---|";
    md << "\n";
    for (const auto& row : t.rows) {
      md << "| ";
      for (std::size_t i = 0; i < row.size(); ++i) md << row[i] << (i + 1 < row.size() ? " | " : " |\n");
    }
    md << "\n";
  };
  emit("Classifier comparison", table4);
  if (!table5.rows.empty()) emit("Random forest confusion matrix (proportions)", table5);
  if (!selected.empty()) emit("Selected features", table6);
  if (fs::exists(run.path("selection.json"))) {
    const json s = json::parse(io::read_text_file(run.path("selection.json")));
    md << "Selection method `" << s.at("method").get<std::string>() << "` kept:";
    for (const auto& k : s.at("kept")) md << " `" << k.get<std::string>() << "`";
    md << "\n\n";
  }
  if (fs::exists(run.path("profile_summary.json"))) {
    const json s = json::parse(io::read_text_file(run.path("profile_summary.json")));
    md << "## User types\n\n"
       << "Users passing the activity filter: " << s.at("filtered_users") << " (expert " << s.at("expert")
       << ", nonexpert " << s.at("nonexpert") << ", out of scope " << s.at("out_of_scope") << ", unclassified "
       << s.at("unclassified") << ").\n";
  }
  written.push_back(run.path("report.md"));
  io::write_text_file(written.back(), md.str());
  run.record("report", written);
  return {io::format_table(table4), written};
}

CommandResult kappa(const fs::path& a, const fs::path& b) {
  const auto la = read_labels(a);
  const auto lb = read_labels(b);
  std::vector<std::string> common;
  for (const auto& [id, l] : la) {
    if (lb.count(id)) common.push_back(id);
  }
  std::sort(common.begin(), common.end());
  require(!common.empty(), ErrorCode::kInvalidArgument, "the two label files share no comment ids");
  std::vector<Label> ya, yb;
  for (const auto& id : common) {
    ya.push_back(la.at(id));
    yb.push_back(lb.at(id));
  }
  const auto r = stats::cohens_kappa(ya, yb);
  std::ostringstream out;
  out << "items " << r.n_items << "\n"
      << "kappa " << fixed(r.kappa, 5) << "\n"
      << "observed agreement " << fixed(r.observed_agreement, 5) << "\n"
      << "expected agreement " << fixed(r.expected_agreement, 5) << "\n"
      << "contingency (rows a, columns b; expert, nonexpert, out_of_scope):\n";
  for (const auto& row : r.contingency) out << "  " << row[0] << " " << row[1] << " " << row[2] << "\n";
  const std::size_t only = la.size() + lb.size() - 2 * common.size();
  if (only > 0) out << "ids in only one file: " << only << "\n";
  return {out.str(), {}};
}

CommandResult anova(const AnovaOptions& options) {
  const io::Table t = io::read_table(options.matrix);
  require(t.header.size() >= 2, ErrorCode::kInvalidArgument, "matrix needs an id column and at least one feature");
  const auto labels = read_labels(options.labels);
  const std::size_t p = t.header.size() - 1;
  std::vector<std::vector<std::vector<double>>> rows_by_class(kNumClasses);
  std::size_t unlabelled = 0;
  for (const auto& row : t.rows) {
    auto it = labels.find(row.at(0));
    if (it == labels.end()) {
      ++unlabelled;
      continue;
    }
    std::vector<double> x(p);
    for (std::size_t j = 0; j < p; ++j) x[j] = io::parse_double(row.at(j + 1));
    rows_by_class[index(it->second)].push_back(std::move(x));
  }
  std::vector<std::vector<std::vector<double>>> groups;
  for (auto& g : rows_by_class) {
    if (!g.empty()) groups.push_back(std::move(g));
  }
  require(groups.size() >= 2, ErrorCode::kPrecondition, "ANOVA needs at least two labelled classes");

  std::ostringstream out;
  if (options.per_feature) {
    io::Table res;
    res.header = {"feature", "f_value", "df_between", "df_within", "p_value"};
    for (std::size_t j = 0; j < p; ++j) {
      std::vector<std::vector<double>> column(groups.size());
      for (std::size_t g = 0; g < groups.size(); ++g) {
        for (const auto& x : groups[g]) column[g].push_back(x[j]);
      }
      const auto a = stats::anova_oneway(column);
      res.rows.push_back({t.header[j + 1], io::format_double(a.f_value), io::format_double(a.df_between),
                          io::format_double(a.df_within), io::format_double(a.p_value)});
    }
    out << io::format_table(res);
  } else {
    const auto m = stats::manova_wilks(groups);
    out << "wilks_lambda " << io::format_double(m.wilks_lambda) << "\n"
        << "f " << io::format_double(m.f_approx) << "\n"
        << "df " << io::format_double(m.df1) << " " << io::format_double(m.df2) << "\n"
        << "p_value " << io::format_double(m.p_value) << "\n";
    for (const auto& w : m.warnings) out << "warning: " << w << "\n";
  }
  if (unlabelled > 0) out << "note: " << unlabelled << " rows without a label were skipped\n";
  return {out.str(), {}};
}

}  // namespace qaexpert::pipeline
