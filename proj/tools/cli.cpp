#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <memory>
#include <optional>
#include <thread>

#include "qaexpert/annotate_service.hpp"
#include "qaexpert/corpus.hpp"
#include "qaexpert/error.hpp"
#include "qaexpert/pipeline.hpp"

namespace qaexpert::cli {

namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

struct ServeOptions {
  std::optional<std::string> sessions;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::string> token;
  std::optional<std::string> static_dir;
  bool with_store = false;
};

int serve_annotation(const pipeline::PipelineConfig& config, const ServeOptions& o, std::ostream& out) {
  annotate::ServiceOptions so;
  so.session_dir = o.sessions ? fs::path(*o.sessions) : config.run_dir / "sessions";
  so.token = o.token;
  if (!so.token) {
    if (const char* t = std::getenv("QAEXPERT_ANNOTATE_TOKEN"); t != nullptr && *t != '\0') so.token = t;
  }
  if (o.static_dir) so.static_dir = fs::path(*o.static_dir);
  if (o.with_store) {
    so.store = std::make_shared<const corpus::CorpusStore>(corpus::CorpusStore::load(config.store));
  }
  annotate::AnnotationService service(std::move(so));

  g_interrupted = false;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::atomic<bool> done{false};
  std::thread watcher([&] {
    while (!done) {
      if (g_interrupted) {
        service.stop();
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
  });
  std::thread announce([&] {
    if (service.wait_until_listening(5000)) {
      out << "annotation service on http://" << o.host << ":" << service.bound_port() << std::endl;
    }
  });
  try {
    service.serve(o.host, o.port);
  } catch (...) {
    done = true;
    announce.join();
    watcher.join();
    throw;
  }
  done = true;
  announce.join();
  watcher.join();
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Expert, non-expert and out-of-scope comment identification for Reddit Q&A", "qaexpert"};
  app.require_subcommand(1);
  app.fallthrough();

  pipeline::GlobalOptions global;
  std::optional<std::string> config_file, store, run_dir;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_file, "JSON config file (env QAEXPERT_CONFIG)");
  app.add_option("--seed", seed, "Master seed (env QAEXPERT_SEED)");
  app.add_option("--store", store, "Corpus store directory (env QAEXPERT_STORE)");
  app.add_option("--run-dir", run_dir, "Run directory for artifacts (env QAEXPERT_RUN_DIR)");

  pipeline::IngestOptions ingest;
  std::optional<std::string> users_file;
  auto* c_ingest = app.add_subcommand("ingest", "Load line-delimited post and comment dumps into the store");
  c_ingest->add_option("--posts", ingest.posts, "Posts file")->required();
  c_ingest->add_option("--comments", ingest.comments, "Comments file")->required();
  c_ingest->add_option("--users", users_file, "Optional account creation dates");

  auto* c_metrics = app.add_subcommand("metrics", "Subreddit activity metrics of the store");

  std::optional<std::string> measure_text, measure_out;
  auto* c_measure = app.add_subcommand("measure", "Text metrics of one string or of every comment in the store");
  c_measure->add_option("--text", measure_text, "Text to measure");
  c_measure->add_option("--out", measure_out, "Per-comment table of the store");
  c_measure->require_option(1);

  pipeline::SampleOptions sample;
  auto* c_sample = app.add_subcommand("sample", "Draw comments for manual labelling");
  c_sample->add_option("--n", sample.n, "Sample size")->capture_default_str();
  c_sample->add_option("--from", sample.from, "First month, YYYY-MM")->capture_default_str();
  c_sample->add_option("--to", sample.to, "Last month, YYYY-MM")->capture_default_str();

  ServeOptions serve;
  auto* c_serve = app.add_subcommand("serve-annotation", "Run the dual-coder annotation service");
  c_serve->add_option("--sessions", serve.sessions, "Session log directory (default RUN_DIR/sessions)");
  c_serve->add_option("--host", serve.host, "Listen address")->capture_default_str();
  c_serve->add_option("--port", serve.port, "Listen port, 0 picks a free one")->capture_default_str();
  c_serve->add_option("--token", serve.token, "Shared token (env QAEXPERT_ANNOTATE_TOKEN)");
  c_serve->add_option("--static", serve.static_dir, "Directory served at /");
  c_serve->add_flag("--with-store", serve.with_store, "Serve comment text from the store");

  pipeline::FeaturizeOptions featurize;
  std::optional<std::string> featurize_labels;
  auto* c_featurize = app.add_subcommand("featurize", "Fit the text model and build feature matrices");
  c_featurize->add_option("--labels", featurize_labels, "Label file (default RUN_DIR/labels.csv)");
  c_featurize->add_option("--threads", featurize.threads, "Worker threads, 0 for all cores");

  pipeline::LearnerOptions learner;
  std::optional<std::string> data_file, labels_file;
  auto add_learner_options = [&](CLI::App* cmd) {
    cmd->add_option("--model", learner.model, "lr, dt, rf or rulefit")->capture_default_str();
    cmd->add_option("--data", data_file, "Feature matrix (default RUN_DIR/features.csv)");
    cmd->add_option("--labels", labels_file, "Label file (default RUN_DIR/labels.csv)");
    cmd->add_flag("--selected", learner.selected, "Use only the features kept by `select`");
  };
  auto* c_train = app.add_subcommand("train", "Train a classifier on the labelled matrix");
  add_learner_options(c_train);
  auto* c_evaluate = app.add_subcommand("evaluate", "Stratified k-fold cross-validation");
  add_learner_options(c_evaluate);
  std::optional<std::string> grid_file;
  auto* c_grid = app.add_subcommand("gridsearch", "Grid search, then train the best configuration");
  add_learner_options(c_grid);
  c_grid->add_option("--grid", grid_file, "JSON grid file");

  pipeline::SelectOptions select;
  auto* c_select = app.add_subcommand("select", "Feature selection");
  c_select->add_option("--method", select.method, "variance, kbest, percentile, rfe or sfs");
  c_select->add_option("--threshold", select.threshold, "Variance threshold");
  c_select->add_option("--k", select.k, "Features kept by kbest");
  c_select->add_option("--percentile", select.percentile, "Percentage kept by percentile");
  c_select->add_option("--target-size", select.target_size, "Features kept by rfe and sfs");
  c_select->add_option("--model", select.model, "Learner for rfe and sfs")->capture_default_str();

  std::optional<std::string> predict_model, predict_data;
  auto* c_predict = app.add_subcommand("predict", "Classify the unlabelled pool");
  c_predict->add_option("--model-file", predict_model, "Model (default RUN_DIR/model.json)");
  c_predict->add_option("--data", predict_data, "Feature matrix (default RUN_DIR/pool_features.csv)");

  auto* c_characterize = app.add_subcommand("characterize", "Per-class feature statistics, ANOVA and MANOVA");

  std::optional<std::string> prof_predictions, prof_features, prof_out;
  auto* c_profile = app.add_subcommand("profile", "Type users from predicted comments");
  c_profile->add_option("--predictions", prof_predictions, "Predictions (default RUN_DIR/predictions.csv)");
  c_profile->add_option("--features", prof_features, "Feature matrix (default RUN_DIR/pool_features.csv)");
  c_profile->add_option("--out", prof_out, "Output directory (default RUN_DIR)");

  std::string kappa_a, kappa_b;
  auto* c_kappa = app.add_subcommand("kappa", "Cohen's kappa between two label files");
  c_kappa->add_option("--a", kappa_a, "First coder")->required();
  c_kappa->add_option("--b", kappa_b, "Second coder")->required();

  pipeline::AnovaOptions anova;
  auto* c_anova = app.add_subcommand("anova", "ANOVA or MANOVA of a matrix across label classes");
  c_anova->add_option("--matrix", anova.matrix, "Delimited matrix, first column id")->required();
  c_anova->add_option("--labels", anova.labels, "Label file")->required();
  c_anova->add_flag("--per-feature", anova.per_feature, "One-way ANOVA per column instead of MANOVA");

  pipeline::GenFixtureOptions fixture;
  auto* c_fixture = app.add_subcommand("gen-fixture", "Generate a synthetic subreddit with planted classes");
  c_fixture->add_option("--posts", fixture.posts, "Posts")->capture_default_str();
  c_fixture->add_option("--comments", fixture.comments, "Comments")->capture_default_str();
  c_fixture->add_option("--labelled", fixture.labelled, "Labelled comments drawn with the sampler")
      ->capture_default_str();
  c_fixture->add_option("--users", fixture.users, "Users, 0 picks one per 12 comments");

  auto* c_report = app.add_subcommand("report", "Summary tables of the run");

  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--config" || a == "--seed" || a == "--store" || a == "--run-dir") {
      ++i;
      continue;
    }
    if (a.empty() || a[0] == '-') continue;
    if (app.get_subcommand_no_throw(a) == nullptr) {
      err << "error: unknown command '" << a << "'\n\n" << app.help();
      return 2;
    }
    break;
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (config_file) global.config_file = fs::path(*config_file);
    if (store) global.store = fs::path(*store);
    if (run_dir) global.run_dir = fs::path(*run_dir);
    global.seed = seed;
    const auto config = pipeline::resolve_config(global);
    if (data_file) learner.data = fs::path(*data_file);
    if (labels_file) learner.labels = fs::path(*labels_file);

    pipeline::CommandResult result;
    if (c_ingest->parsed()) {
      if (users_file) ingest.users = fs::path(*users_file);
      result = pipeline::ingest(config, ingest);
    } else if (c_metrics->parsed()) {
      result = pipeline::metrics(config);
    } else if (c_measure->parsed()) {
      pipeline::MeasureOptions mo;
      mo.text = measure_text;
      if (measure_out) mo.out = fs::path(*measure_out);
      result = pipeline::measure(config, mo);
    } else if (c_kappa->parsed()) {
      result = pipeline::kappa(kappa_a, kappa_b);
    } else if (c_anova->parsed()) {
      result = pipeline::anova(anova);
    } else if (c_serve->parsed()) {
      return serve_annotation(config, serve, out);
    } else {
      pipeline::RunLock lock(config.run_dir);
      const pipeline::Run run(config);
      if (c_sample->parsed()) {
        result = pipeline::sample(run, sample);
      } else if (c_fixture->parsed()) {
        result = pipeline::gen_fixture(run, fixture);
      } else if (c_featurize->parsed()) {
        if (featurize_labels) featurize.labels = fs::path(*featurize_labels);
        result = pipeline::featurize(run, featurize);
      } else if (c_train->parsed()) {
        result = pipeline::train(run, learner);
      } else if (c_evaluate->parsed()) {
        result = pipeline::evaluate(run, learner);
      } else if (c_grid->parsed()) {
        pipeline::GridOptions go{learner, std::nullopt};
        if (grid_file) go.grid = fs::path(*grid_file);
        result = pipeline::gridsearch(run, go);
      } else if (c_select->parsed()) {
        result = pipeline::select(run, select);
      } else if (c_predict->parsed()) {
        pipeline::PredictOptions po;
        if (predict_model) po.model = fs::path(*predict_model);
        if (predict_data) po.data = fs::path(*predict_data);
        result = pipeline::predict(run, po);
      } else if (c_characterize->parsed()) {
        result = pipeline::characterize(run);
      } else if (c_profile->parsed()) {
        pipeline::ProfileOptions po;
        if (prof_predictions) po.predictions = fs::path(*prof_predictions);
        if (prof_features) po.features = fs::path(*prof_features);
        if (prof_out) po.out = fs::path(*prof_out);
        result = pipeline::profile(run, po);
      } else if (c_report->parsed()) {
        result = pipeline::report(run);
      }
    }
    out << result.summary;
    return 0;
  } catch (const Error& e) {
    err << "error[" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error[internal]: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace qaexpert::cli
