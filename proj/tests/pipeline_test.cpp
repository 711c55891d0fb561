#include <gtest/gtest.h>

#include <fstream>
#include <map>

#include "qaexpert/error.hpp"
#include "qaexpert/io_util.hpp"
#include "qaexpert/pipeline.hpp"
#include "support.hpp"

namespace pl = qaexpert::pipeline;
namespace fs = std::filesystem;
namespace io = qaexpert::io;
using qaexpert::ErrorCode;
using qaexpert::Label;
using qaexpert::testing::TempDir;

namespace {

pl::EnvLookup env_of(std::map<std::string, std::string> values) {
  return [values](const std::string& name) -> std::optional<std::string> {
    auto it = values.find(name);
    if (it == values.end()) return std::nullopt;
    return it->second;
  };
}

pl::PipelineConfig config_in(const TempDir& dir, std::uint64_t seed = 42) {
  pl::PipelineConfig c;
  c.store = dir / "store";
  c.run_dir = dir / "run";
  c.seed = seed;
  c.cv_folds = 5;
  c.learners["rf"] = {{"n_trees", 25}};
  return c;
}

ErrorCode code_of(const std::function<void()>& fn, std::string* message = nullptr) {
  try {
    fn();
  } catch (const qaexpert::Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInternal;
}

std::string read(const fs::path& p) { return io::read_text_file(p); }

}  // namespace

TEST(Config, PrecedenceCliOverEnvOverFileOverDefaults) {
  TempDir dir;
  const fs::path file = dir / "cfg.json";
  io::write_text_file(file, R"({"seed": 7, "store": "from_file", "run_dir": "file_run", "cv_folds": 4})");

  pl::GlobalOptions cli;
  cli.config_file = file;
  auto c = pl::resolve_config(cli, env_of({}));
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.store, "from_file");
  EXPECT_EQ(c.cv_folds, 4u);

  c = pl::resolve_config(cli, env_of({{"QAEXPERT_SEED", "11"}, {"QAEXPERT_STORE", "env_store"}}));
  EXPECT_EQ(c.seed, 11u);
  EXPECT_EQ(c.store, "env_store");
  EXPECT_EQ(c.run_dir, "file_run");

  cli.seed = 99;
  cli.run_dir = "cli_run";
  c = pl::resolve_config(cli, env_of({{"QAEXPERT_SEED", "11"}, {"QAEXPERT_RUN_DIR", "env_run"}}));
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.run_dir, "cli_run");

  const auto defaults = pl::resolve_config({}, env_of({}));
  EXPECT_EQ(defaults.seed, 42u);
  EXPECT_EQ(defaults.thresholds.kappa_gate, 0.70);
  EXPECT_EQ(defaults.thresholds.min_activity, 5u);

  const auto via_env = pl::resolve_config({}, env_of({{"QAEXPERT_CONFIG", file.string()}}));
  EXPECT_EQ(via_env.seed, 7u);
}

TEST(Config, JsonRoundTripAndHash) {
  pl::PipelineConfig c;
  c.seed = 5;
  c.learners["rf"] = {{"n_trees", 10}};
  c.thresholds.activity_each = true;
  const auto back = pl::PipelineConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.hash(), c.hash());
  auto other = c;
  other.seed = 6;
  EXPECT_NE(other.hash(), c.hash());
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_EQ(code_of([] { pl::PipelineConfig::from_json({{"sed", 1}}); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { pl::PipelineConfig::from_json({{"thresholds", {{"kappa_gate", 3.0}}}}); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { pl::PipelineConfig::from_json({{"cv_folds", 1}}); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { pl::PipelineConfig::from_json({{"learners", {{"rf", {{"trees", 3}}}}}}); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { pl::resolve_config({}, env_of({{"QAEXPERT_SEED", "abc"}})); }),
            ErrorCode::kInvalidArgument);
}

TEST(Artifacts, ProducersKnown) {
  EXPECT_EQ(pl::producer_of("features.csv"), "featurize");
  EXPECT_EQ(pl::producer_of("eval_rf_selected.json"), "evaluate");
  EXPECT_EQ(pl::producer_of("predictions.csv"), "predict");
  EXPECT_THROW(pl::producer_of("nothing.bin"), qaexpert::Error);
}

TEST(Run, MissingDependencyNamesProducer) {
  TempDir dir;
  const pl::Run run(config_in(dir));
  std::string message;
  EXPECT_EQ(code_of([&] { pl::evaluate(run, {}); }, &message), ErrorCode::kDependencyMissing);
  EXPECT_NE(message.find("qaexpert featurize"), std::string::npos) << message;
  EXPECT_EQ(code_of([&] { pl::report(run); }, &message), ErrorCode::kDependencyMissing);
  EXPECT_NE(message.find("qaexpert evaluate"), std::string::npos) << message;
  EXPECT_EQ(code_of([&] { pl::predict(run, {}); }, &message), ErrorCode::kDependencyMissing);
  EXPECT_NE(message.find("qaexpert train"), std::string::npos) << message;
}

TEST(Run, LockIsExclusive) {
  TempDir dir;
  {
    pl::RunLock lock(dir / "run");
    EXPECT_EQ(code_of([&] { pl::RunLock second(dir / "run"); }), ErrorCode::kConflict);
  }
  EXPECT_FALSE(fs::exists(dir / "run" / ".lock"));
  pl::RunLock again(dir / "run");
}

TEST(Labels, CsvAndSessionExportForms) {
  TempDir dir;
  io::write_text_file(dir / "a.csv", "comment_id,label\nc1,expert\nc2,1\nc3,out_of_scope\n");
  const auto a = pl::read_labels(dir / "a.csv");
  EXPECT_EQ(a.at("c1"), Label::Expert);
  EXPECT_EQ(a.at("c2"), Label::NonExpert);
  EXPECT_EQ(a.at("c3"), Label::OutOfScope);
  io::write_text_file(dir / "b.json",
                      R"({"session":"s","count":2,"labels":[{"comment_id":"c1","label":"nonexpert"},{"comment_id":"c9","label":"expert"}]})");
  const auto b = pl::read_labels(dir / "b.json");
  EXPECT_EQ(b.size(), 2u);
  EXPECT_EQ(b.at("c1"), Label::NonExpert);
  io::write_text_file(dir / "bad.csv", "comment_id,label\nc1,maybe\n");
  EXPECT_THROW(pl::read_labels(dir / "bad.csv"), qaexpert::Error);

  const auto k = pl::kappa(dir / "a.csv", dir / "b.json");
  EXPECT_NE(k.summary.find("items 1"), std::string::npos) << k.summary;
}

TEST(Report, LearnerGridShape) {
  qaexpert::evalkit::Metrics m;
  m.accuracy = 0.9;
  m.auc_macro_ovr = 0.95;
  m.mae = 0.1;
  m.r2 = 0.8;
  const auto t = pl::learner_grid({{"rf", m}});
  EXPECT_EQ(t.header.size(), 5u);
  ASSERT_EQ(t.rows.size(), 4u);
  EXPECT_EQ(t.rows[0][0], "accuracy");
  const std::size_t rf = t.column("random_forest");
  EXPECT_EQ(t.rows[0][rf], "0.9000");
  EXPECT_EQ(t.rows[0][t.column("logistic_regression")], "NA");
}

TEST(Measure, TextAndStoreModes) {
  TempDir dir;
  const auto cfg = config_in(dir);
  const auto r = pl::measure(cfg, {.text = std::string("The cat sat on the mat.")});
  EXPECT_NE(r.summary.find("word_count 6\n"), std::string::npos) << r.summary;
  EXPECT_NE(r.summary.find("gunning_fog 2.4"), std::string::npos) << r.summary;
  const pl::Run run(cfg);
  pl::gen_fixture(run, {.posts = 5, .comments = 40});
  pl::measure(cfg, {.out = dir / "m.csv"});
  const auto t = io::read_table(dir / "m.csv");
  EXPECT_EQ(t.rows.size(), 40u);
  EXPECT_EQ(t.header.size(), 24u);
  EXPECT_THROW(pl::measure(cfg, {}), qaexpert::Error);
}

TEST(Pipeline, EndToEndOnSmallFixture) {
  TempDir dir;
  const pl::Run run(config_in(dir));
  pl::gen_fixture(run, {.posts = 30, .comments = 900, .labelled = 240});
  const auto feat = pl::featurize(run, {.threads = 1});
  EXPECT_TRUE(fs::exists(run.path("features.csv")));
  EXPECT_TRUE(fs::exists(run.path("pool_features.csv")));

  const auto eval = pl::evaluate(run, {.model = "rf"});
  const auto e = nlohmann::json::parse(read(run.path("eval_rf.json")));
  EXPECT_GT(e["accuracy"].get<double>(), 0.8);
  EXPECT_EQ(e["folds"], 5);

  pl::gridsearch(run, {.learner = {.model = "dt"}});
  const auto grid = io::read_table(run.path("gridsearch_dt.csv"));
  EXPECT_EQ(grid.rows.size(), 8u);
  EXPECT_TRUE(fs::exists(run.path("model.json")));

  pl::select(run, {.method = std::string("kbest"), .k = std::size_t{5}});
  pl::evaluate(run, {.model = "rf", .selected = true});
  EXPECT_TRUE(fs::exists(run.path("eval_rf_selected.json")));

  pl::train(run, {.model = "rf"});
  pl::predict(run, {});
  const auto predictions = io::read_table(run.path("predictions.csv"));
  const auto labels = io::read_table(run.path("labels.csv"));
  EXPECT_GT(labels.rows.size(), 100u);
  EXPECT_EQ(predictions.rows.size(), 900u - labels.rows.size());

  pl::characterize(run);
  pl::profile(run, {});
  const auto summary = nlohmann::json::parse(read(run.path("profile_summary.json")));
  const std::size_t typed = summary["expert"].get<std::size_t>() + summary["nonexpert"].get<std::size_t>() +
                            summary["out_of_scope"].get<std::size_t>();
  EXPECT_EQ(typed + summary["unclassified"].get<std::size_t>(), summary["filtered_users"].get<std::size_t>());

  const auto rep = pl::report(run);
  const auto t4 = io::read_table(run.path("report_table4.csv"));
  EXPECT_EQ(t4.rows.size(), 4u);
  EXPECT_EQ(t4.header.size(), 5u);
  EXPECT_EQ(io::read_table(run.path("report_table5.csv")).rows.size(), 3u);

  const auto manifest = run.manifest();
  EXPECT_EQ(manifest["config_hash"], run.config().hash());
  for (const char* a : {"features.csv", "eval_rf.json", "predictions.csv", "profiles.csv", "report.md"}) {
    EXPECT_TRUE(manifest["artifacts"].contains(a)) << a;
  }
}

TEST(Pipeline, RerunsAreByteIdentical) {
  TempDir a, b;
  for (const TempDir* d : {&a, &b}) {
    const pl::Run run(config_in(*d, 3));
    pl::gen_fixture(run, {.posts = 12, .comments = 300, .labelled = 90});
    pl::featurize(run, {.threads = d == &a ? std::size_t{1} : std::size_t{3}});
    pl::evaluate(run, {.model = "rf"});
  }
  for (const char* f : {"labels.csv", "features.csv", "pool_features.csv", "text_model.json", "eval_rf.json"}) {
    EXPECT_EQ(read(a / "run" / f), read(b / "run" / f)) << f;
  }
  // Config hashes differ with the temp paths; content hashes must not.
  const auto ma = nlohmann::json::parse(read(a / "run" / "manifest.json"));
  const auto mb = nlohmann::json::parse(read(b / "run" / "manifest.json"));
  for (const auto& [name, entry] : ma["artifacts"].items()) {
    ASSERT_TRUE(mb["artifacts"].contains(name)) << name;
    EXPECT_EQ(entry["content_hash"], mb["artifacts"][name]["content_hash"]) << name;
  }
}

TEST(Pipeline, AnovaCommandOnMatrix) {
  TempDir dir;
  io::write_text_file(dir / "m.csv", "id,x\na,1\nb,2\nc,3\nd,2\ne,3\nf,4\ng,3\nh,4\ni,5\nz,9\n");
  io::write_text_file(dir / "l.csv",
                      "comment_id,label\na,expert\nb,expert\nc,expert\nd,nonexpert\ne,nonexpert\nf,nonexpert\n"
                      "g,out_of_scope\nh,out_of_scope\ni,out_of_scope\n");
  const auto r = pl::anova({dir / "m.csv", dir / "l.csv", true});
  EXPECT_NE(r.summary.find("x,3,2,6,"), std::string::npos) << r.summary;
  EXPECT_NE(r.summary.find("1 rows without a label"), std::string::npos);
  const auto m = pl::anova({dir / "m.csv", dir / "l.csv", false});
  const auto at = m.summary.find("\nf ");
  ASSERT_NE(at, std::string::npos) << m.summary;
  EXPECT_NEAR(std::stod(m.summary.substr(at + 3)), 3.0, 1e-9);
  EXPECT_NE(m.summary.find("df 2 6\n"), std::string::npos) << m.summary;
}
