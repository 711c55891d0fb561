#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "qaexpert/evalkit.hpp"
#include "qaexpert/features.hpp"
#include "qaexpert/labels.hpp"
#include "qaexpert/learners.hpp"

// Command layer: every CLI verb is a function over a run directory. Commands
// read and write the artifact files listed in kArtifacts and nothing else.
namespace qaexpert::pipeline {

struct Thresholds {
  double kappa_gate = 0.70;
  double user_type = 0.5;
  std::size_t min_activity = 5;
  bool activity_each = false;  // five comments and five posts instead of five in total
};

struct PipelineConfig {
  std::filesystem::path store = "store";
  std::filesystem::path run_dir = "run";
  std::uint64_t seed = 42;
  std::size_t cv_folds = 10;
  std::optional<std::int64_t> snapshot_utc;  // latest item in the store when unset
  vectorize::MarginConfig text_model;
  // Learner hyperparameters keyed by short kind name (lr, dt, rf, rulefit).
  std::map<std::string, nlohmann::json> learners;
  // Grid-search grids keyed the same way; a built-in grid is used when absent.
  std::map<std::string, nlohmann::ordered_json> grids;
  std::string selection_method = "sfs";
  evalkit::SelectionParams selection;
  Thresholds thresholds;

  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);  // rejects unknown keys and out-of-range values
  std::string hash() const;
  void validate() const;
};

// Values from the command line; unset fields fall through to the
// environment, then to the config file, then to the defaults.
struct GlobalOptions {
  std::optional<std::filesystem::path> config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> store;
  std::optional<std::filesystem::path> run_dir;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

// Environment: QAEXPERT_CONFIG, QAEXPERT_SEED, QAEXPERT_STORE, QAEXPERT_RUN_DIR.
PipelineConfig resolve_config(const GlobalOptions& cli, const EnvLookup& env = process_env());

struct Artifact {
  std::string file;
  std::string producer;  // command that writes it
};

// File names inside a run directory and the command that produces each.
const std::vector<Artifact>& artifacts();
std::string producer_of(std::string_view file);

// Exclusive use of a run directory for the lifetime of the object.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& run_dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

class Run {
 public:
  explicit Run(PipelineConfig config);

  const PipelineConfig& config() const { return config_; }
  const std::filesystem::path& dir() const { return config_.run_dir; }
  std::filesystem::path path(std::string_view file) const;

  // Path of an existing artifact; otherwise kDependencyMissing naming the
  // command that produces it.
  std::filesystem::path need(std::string_view file) const;

  // Records the config hash, asset versions and the content hash of each
  // written artifact in manifest.json.
  void record(const std::string& command, const std::vector<std::filesystem::path>& written) const;
  nlohmann::json manifest() const;

 private:
  PipelineConfig config_;
};

struct CommandResult {
  std::string summary;  // printed on stdout
  std::vector<std::filesystem::path> written;
};

// Label files: "comment_id,label" tables, or the JSON export of an
// annotation session.
std::unordered_map<std::string, Label> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const std::vector<std::string>& ids,
                  const std::unordered_map<std::string, Label>& labels);

// Joins a feature matrix with labels; rows without a label are an error.
learners::Dataset make_dataset(const features::FeatureMatrix& matrix,
                               const std::unordered_map<std::string, Label>& labels);

// ---------------------------------------------------------------------------
// Commands

struct IngestOptions {
  std::filesystem::path posts;
  std::filesystem::path comments;
  std::optional<std::filesystem::path> users;
};
CommandResult ingest(const PipelineConfig& config, const IngestOptions& options);

CommandResult metrics(const PipelineConfig& config);

// Text metrics for one string, or a per-comment table for the whole store.
struct MeasureOptions {
  std::optional<std::string> text;
  std::optional<std::filesystem::path> out;  // table destination in store mode
};
CommandResult measure(const PipelineConfig& config, const MeasureOptions& options);

struct SampleOptions {
  std::size_t n = 1113;
  std::string from = "2020-05";
  std::string to = "2021-04";
};
CommandResult sample(const Run& run, const SampleOptions& options);

struct GenFixtureOptions {
  std::size_t posts = 100;
  std::size_t comments = 1500;
  std::size_t labelled = 0;
  std::size_t users = 0;
};
CommandResult gen_fixture(const Run& run, const GenFixtureOptions& options);

struct FeaturizeOptions {
  std::optional<std::filesystem::path> labels;  // run's labels.csv when unset
  std::size_t threads = 0;
};
CommandResult featurize(const Run& run, const FeaturizeOptions& options);

struct LearnerOptions {
  std::string model = "rf";
  std::optional<std::filesystem::path> data;    // feature matrix; run's features.csv when unset
  std::optional<std::filesystem::path> labels;  // run's labels.csv when unset
  bool selected = false;                        // restrict to the columns kept by `select`
};
CommandResult train(const Run& run, const LearnerOptions& options);
CommandResult evaluate(const Run& run, const LearnerOptions& options);

struct GridOptions {
  LearnerOptions learner;
  std::optional<std::filesystem::path> grid;  // JSON grid file
};
CommandResult gridsearch(const Run& run, const GridOptions& options);

struct SelectOptions {
  std::optional<std::string> method;
  std::optional<double> threshold;
  std::optional<std::size_t> k;
  std::optional<double> percentile;
  std::optional<std::size_t> target_size;
  std::string model = "rf";  // learner for rfe and sfs
};
CommandResult select(const Run& run, const SelectOptions& options);

struct PredictOptions {
  std::optional<std::filesystem::path> model;
  std::optional<std::filesystem::path> data;  // run's pool_features.csv when unset
};
CommandResult predict(const Run& run, const PredictOptions& options);

CommandResult characterize(const Run& run);

struct ProfileOptions {
  std::optional<std::filesystem::path> predictions;
  std::optional<std::filesystem::path> features;
  std::optional<std::filesystem::path> out;  // run directory when unset
};
CommandResult profile(const Run& run, const ProfileOptions& options);

CommandResult report(const Run& run);

CommandResult kappa(const std::filesystem::path& a, const std::filesystem::path& b);

struct AnovaOptions {
  std::filesystem::path matrix;  // delimited table, first column id
  std::filesystem::path labels;
  bool per_feature = false;      // per-feature ANOVA instead of MANOVA
};
CommandResult anova(const AnovaOptions& options);

// Table-4 layout: one row per metric, one column per learner.
io::Table learner_grid(const std::map<std::string, evalkit::Metrics>& by_learner);

}  // namespace qaexpert::pipeline
