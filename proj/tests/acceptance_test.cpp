// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qaexpert/annotate.hpp"
#include "qaexpert/annotate_service.hpp"
#include "qaexpert/corpus.hpp"
#include "qaexpert/evalkit.hpp"
#include "qaexpert/io_util.hpp"
#include "qaexpert/learners.hpp"
#include "qaexpert/pipeline.hpp"
#include "qaexpert/stats.hpp"
#include "qaexpert/textpipe.hpp"
#include "qaexpert/vectorize.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace {

using qaexpert::Label;
using nlohmann::json;
namespace fs = std::filesystem;
namespace lr = qaexpert::learners;
namespace ek = qaexpert::evalkit;
namespace pl = qaexpert::pipeline;
namespace an = qaexpert::annotate;
namespace io = qaexpert::io;
using Clock = std::chrono::steady_clock;

constexpr Label E = Label::Expert, N = Label::NonExpert, O = Label::OutOfScope;

// Collects the individual checks of one criterion.
class Criterion {
 public:
  explicit Criterion(std::string name) : name_(std::move(name)), start_(Clock::now()) {}

  void check(bool ok, const std::string& what) {
    details_.push_back((ok ? "    ok    " : "    FAIL  ") + what);
    passed_ = passed_ && ok;
  }

  template <typename Fn>
  void guard(Fn&& body) {
    try {
      body(*this);
    } catch (const std::exception& e) {
      check(false, std::string("exception: ") + e.what());
    }
  }

  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

  bool report() const {
    std::cout << (passed_ ? "PASS " : "FAIL ") << name_ << "\n";
    for (const auto& d : details_) std::cout << d << "\n";
    std::cout.flush();
    return passed_;
  }

 private:
  std::string name_;
  Clock::time_point start_;
  std::vector<std::string> details_;
  bool passed_ = true;
};

std::string num(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

bool formula_suite() {
  Criterion c("formula suite");
  c.guard([](Criterion& c) {
    const double fre = qaexpert::textpipe::measure("The cat sat on the mat.").readability.flesch_reading_ease;
    c.check(std::abs(fre - 116.115) <= 1e-9, "Flesch reading ease of 'The cat sat on the mat.' = 116.115 (got " +
                                                 num(fre) + ")");
    const double h = qaexpert::textpipe::shannon_entropy_bits("abcd");
    c.check(h == 2.0, "entropy('abcd') = 2.0 bits (got " + num(h) + ")");
    const auto a = qaexpert::stats::anova_oneway({{1, 2, 3}, {2, 3, 4}, {3, 4, 5}});
    c.check(std::abs(a.f_value - 3.0) <= 1e-12, "ANOVA F of [1,2,3],[2,3,4],[3,4,5] = 3.0 (got " + num(a.f_value) + ")");
    const std::vector<Label> ka = {E, E, N, O}, kb = {E, N, N, O};
    const double k = qaexpert::stats::cohens_kappa(ka, kb).kappa;
    c.check(std::abs(k - 0.63636) <= 1e-5, "kappa of [E,E,N,O] vs [E,N,N,O] = 0.63636 (got " + num(k) + ")");
    const auto tfidf = qaexpert::vectorize::TfidfModel::fit({{"a", "b"}, {"a", "c"}},
                                                            qaexpert::vectorize::IdfMode::Classic);
    const std::vector<std::string> doc = {"a", "b"};
    const auto v = tfidf.transform(doc);
    const auto ia = *tfidf.index_of("a");
    const bool a_zero = std::none_of(v.entries.begin(), v.entries.end(), [&](const auto& e) { return e.first == ia; });
    c.check(tfidf.idf("a") == 0.0 && a_zero, "classic idf weight of 'a' in ['a b','a c'] = 0");
  });
  c.check(c.elapsed() < 1.0, "runtime " + num(c.elapsed()) + " s < 1 s");
  return c.report();
}

bool oracle_equivalence() {
  Criterion c("oracle equivalence");
  c.guard([](Criterion& c) {
    std::mt19937_64 rng(2024);
    int agree = 0;
    for (int trial = 0; trial < 100; ++trial) {
      std::uniform_int_distribution<int> n_rows(10, 80), n_values(2, 25), cls(0, 2);
      const int n = n_rows(rng), distinct = n_values(rng);
      std::uniform_int_distribution<int> value(0, distinct - 1);
      lr::Dataset d;
      d.feature_names = {"x"};
      std::vector<double> x;
      for (int i = 0; i < n; ++i) {
        const double xv = value(rng);
        x.push_back(xv);
        d.X.push_back({xv});
        d.y.push_back(qaexpert::label_from_code(cls(rng) == 0 ? cls(rng) : static_cast<int>(xv) * 3 / distinct));
      }
      const auto model = lr::train_tree(d, {.max_depth = 1, .min_leaf = 1});
      const auto& root = std::get<lr::DecisionTree>(model.parameters()).nodes[0];
      const auto oracle = qaexpert::testing::brute_force_split(x, d.y, 1);
      bool same = (root.feature >= 0) == oracle.found;
      if (same && oracle.found) {
        std::vector<Label> left, right;
        for (std::size_t i = 0; i < x.size(); ++i) (x[i] <= root.threshold ? left : right).push_back(d.y[i]);
        const double score = qaexpert::testing::gini(left) * static_cast<double>(left.size()) +
                             qaexpert::testing::gini(right) * static_cast<double>(right.size());
        same = std::abs(score - oracle.weighted_gini) < 1e-9 &&
               (oracle.n_minimisers > 1 || root.threshold == oracle.threshold);
      }
      agree += same;
    }
    c.check(agree == 100, "depth-1 split equals brute force on " + std::to_string(agree) + "/100 datasets");

    bool forest_equal = true;
    for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
      const auto d = qaexpert::testing::planted_dataset(seed);
      const auto tree = lr::train_tree(d, {.max_depth = 6, .min_leaf = 1, .seed = seed});
      const auto forest = lr::train_forest(
          d, {.n_trees = 1, .max_depth = 6, .min_leaf = 1, .mtry = d.n_features(), .bootstrap = false, .seed = seed});
      forest_equal = forest_equal && std::get<lr::ForestModel>(forest.parameters()).trees.at(0) ==
                                         std::get<lr::DecisionTree>(tree.parameters());
    }
    c.check(forest_equal, "forest(n_trees=1, mtry=p, no bootstrap) equals train_tree");

    double worst = 0.0;
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
      std::vector<std::vector<double>> groups(3);
      std::vector<std::vector<std::vector<double>>> rows(3);
      for (int g = 0; g < 3; ++g) {
        for (int i = 0; i < 4 + trial % 9; ++i) {
          const double v = noise(rng) + 0.4 * g;
          groups[g].push_back(v);
          rows[g].push_back({v});
        }
      }
      const double fm = qaexpert::stats::manova_wilks(rows).f_approx;
      const double fa = qaexpert::stats::anova_oneway(groups).f_value;
      worst = std::max(worst, std::abs(fm - fa));
    }
    c.check(worst <= 1e-8, "one-column MANOVA F equals ANOVA F (max diff " + num(worst) + ")");
  });
  return c.report();
}

bool learner_sanity() {
  Criterion c("learner sanity");
  c.guard([](Criterion& c) {
    const auto d = qaexpert::testing::planted_dataset(77);
    const auto counts = d.class_counts();
    const double majority =
        static_cast<double>(*std::max_element(counts.begin(), counts.end())) / static_cast<double>(d.n_rows());
    const lr::ForestConfig config{.n_trees = 100, .seed = 77};
    const auto cv = ek::cross_validate(d, [&](const ek::Dataset& train) { return lr::train_forest(train, config); }, 10, 77);
    c.check(cv.report.accuracy >= 0.95, "random forest 10-fold accuracy " + num(cv.report.accuracy) + " >= 0.95");
    c.check(cv.report.accuracy - majority >= 0.30,
            "accuracy exceeds majority baseline " + num(majority) + " by >= 30 points");
    const auto model = lr::train_forest(d, config);
    const auto imp = model.feature_importances();
    const double sum = std::accumulate(imp.begin(), imp.end(), 0.0);
    c.check(std::abs(sum - 1.0) <= 1e-9, "importances sum to 1 (got " + num(sum) + ")");
    std::vector<std::size_t> order(imp.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return imp[a] > imp[b]; });
    const auto rank = std::find(order.begin(), order.end(), std::size_t{7}) - order.begin();
    c.check(rank < 3, "planted feature ranks " + std::to_string(rank + 1) + " (top 3 required)");
  });
  c.check(c.elapsed() < 60.0, "runtime " + num(c.elapsed()) + " s < 60 s");
  return c.report();
}

bool pipeline_end_to_end() {
  Criterion c("pipeline end-to-end");
  c.guard([](Criterion& c) {
    qaexpert::testing::TempDir dir;
    pl::PipelineConfig config;
    config.store = dir / "store";
    config.run_dir = dir / "run";
    config.seed = 42;
    const pl::Run run(config);
    pl::gen_fixture(run, {.posts = 1600, .comments = 21113, .labelled = 1113});
    const auto labels = pl::read_labels(run.path("labels.csv"));
    c.check(labels.size() == 1113, "fixture has 1,113 labelled comments (got " + std::to_string(labels.size()) + ")");
    pl::featurize(run, {});
    const auto pool = io::read_table(run.path("pool_features.csv"));
    c.check(pool.rows.size() == 20000, "20,000 unlabelled comments featurized (got " +
                                           std::to_string(pool.rows.size()) + ")");
    pl::gridsearch(run, {.learner = {.model = "rf"}});
    pl::predict(run, {});
    pl::characterize(run);
    pl::profile(run, {});

    const auto table = io::read_table(run.path("characteristics.csv"));
    std::map<std::string, double> mean_words;
    for (const auto& row : table.rows) {
      if (row[table.column("feature")] == "word_count") {
        mean_words[row[table.column("class")]] = io::parse_double(row[table.column("mean")]);
      }
    }
    c.check(mean_words["expert"] > mean_words["nonexpert"] && mean_words["nonexpert"] > mean_words["out_of_scope"],
            "mean word count expert " + num(mean_words["expert"]) + " > nonexpert " + num(mean_words["nonexpert"]) +
                " > out_of_scope " + num(mean_words["out_of_scope"]));

    const auto summary = json::parse(io::read_text_file(run.path("profile_summary.json")));
    const std::size_t typed = summary["expert"].get<std::size_t>() + summary["nonexpert"].get<std::size_t>() +
                              summary["out_of_scope"].get<std::size_t>();
    const std::size_t filtered = summary["filtered_users"].get<std::size_t>();
    // Independent count of active authors of predicted comments.
    const auto store = qaexpert::corpus::CorpusStore::load(config.store);
    const auto predictions = pl::read_labels(run.path("predictions.csv"));
    std::set<std::string> authors;
    for (const auto& [id, label] : predictions) {
      const auto& author = store.find_comment(id)->author;
      if (!qaexpert::corpus::is_deleted_author(author)) authors.insert(author);
    }
    std::size_t active = 0;
    for (const auto& a : authors) active += store.comments_by(a).size() + store.posts_by(a).size() >= 5;
    c.check(typed + summary["unclassified"].get<std::size_t>() == filtered && filtered == active,
            "typed " + std::to_string(typed) + " + unclassified " + summary["unclassified"].dump() +
                " = filtered users " + std::to_string(filtered) + " (independent count " + std::to_string(active) +
                ")");
  });
  c.check(c.elapsed() < 600.0, "runtime " + num(c.elapsed()) + " s < 600 s");
  return c.report();
}

bool annotation_protocol() {
  Criterion c("annotation protocol");
  c.guard([](Criterion& c) {
    const bool subsets = an::resolve_evidence({E}) == E && an::resolve_evidence({N}) == N &&
                         an::resolve_evidence({O}) == O && an::resolve_evidence({E, N}) == E &&
                         an::resolve_evidence({E, O}) == E && an::resolve_evidence({N, O}) == N &&
                         an::resolve_evidence({E, N, O}) == E;
    c.check(subsets, "all 7 evidence subsets resolve by precedence");

    qaexpert::testing::TempDir dir;
    std::int64_t clock = 0;
    an::AnnotationService service({.session_dir = dir.path(), .clock = [&] { return ++clock; }});
    auto call = [&](const std::string& method, const std::string& path, const json& body = nullptr,
                    std::map<std::string, std::string> query = {}) {
      an::HttpRequest r{method, path, std::move(query), {}, body.is_null() ? "" : body.dump()};
      const auto resp = service.handle(r);
      if (resp.status >= 400) throw std::runtime_error(method + " " + path + ": " + resp.body);
      return json::parse(resp.body);
    };
    const std::size_t sample_size = 60;
    json sample = json::array();
    for (std::size_t i = 0; i < sample_size; ++i) sample.push_back("c" + std::to_string(i));
    call("POST", "/sessions", {{"id", "gate"}, {"sample", sample}, {"coders", {"ann", "ben"}}, {"warmup_size", 10},
                               {"round_size", 10}, {"seed", 5}});
    auto truth = [](const std::string& id) { return std::stoi(id.substr(1)) % 3; };
    auto label_round = [&](const std::function<int(const std::string&, const std::string&)>& pick) {
      static const char* names[] = {"expert", "nonexpert", "out_of_scope"};
      static const json criteria[] = {{"E1", "E2", "E3"}, {"N1"}, {"O1"}};
      for (const std::string coder : {"ann", "ben"}) {
        while (true) {
          const auto next = call("GET", "/sessions/gate/next", nullptr, {{"coder", coder}});
          if (next["comment_id"].is_null()) break;
          const std::string id = next["comment_id"];
          const int cls = pick(coder, id);
          call("POST", "/sessions/gate/labels",
               {{"coder", coder}, {"comment_id", id}, {"classes", {names[cls]}}, {"criteria", criteria[cls]}});
        }
      }
      return call("POST", "/sessions/gate/rounds/close");
    };
    // Two disagreeing rounds, one partly agreeing, then full agreement.
    const std::vector<int> error_every = {1, 2, 3, 0};
    bool gate_respected = true;
    std::string trace;
    for (int err : error_every) {
      const auto closed = label_round([&](const std::string& coder, const std::string& id) {
        const int t = truth(id);
        const int i = std::stoi(id.substr(1));
        return coder == "ben" && err > 0 && i % err == 0 ? (t + 1) % 3 : t;
      });
      const double kappa = closed["kappa"].get<double>();
      const std::string state = closed["state"];
      trace += " " + num(kappa) + "->" + state;
      if (kappa < 0.70 && state == "bulk") gate_respected = false;
      if (kappa >= 0.70 && state != "bulk") gate_respected = false;
      if (state == "bulk") break;
    }
    const auto status = call("GET", "/sessions/gate");
    c.check(gate_respected && status["state"] == "bulk", "bulk opens only once kappa >= 0.70:" + trace);

    label_round([&](const std::string& coder, const std::string& id) {
      const int t = truth(id);
      return coder == "ben" && std::stoi(id.substr(1)) % 4 == 0 ? (t + 2) % 3 : t;
    });
    const auto pending = service.sessions().get("gate")->disagreements();
    for (const auto& id : pending) {
      call("POST", "/sessions/gate/adjudications", {{"comment_id", id}, {"label", "nonexpert"}, {"by", "lead"}});
    }
    const auto exported = call("GET", "/sessions/gate/export");
    c.check(exported["count"] == sample_size && exported["labels"].size() == sample_size,
            "export count " + exported["count"].dump() + " equals sample size " + std::to_string(sample_size) +
                " after adjudicating " + std::to_string(pending.size()) + " items");
  });
  return c.report();
}

bool cv_correctness() {
  Criterion c("cross-validation correctness");
  c.guard([](Criterion& c) {
    const auto d = qaexpert::testing::planted_dataset(123);
    const auto folds = ek::stratified_folds(d.y, 10, 9);
    std::vector<std::size_t> all;
    for (const auto& f : folds) all.insert(all.end(), f.begin(), f.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expected(d.n_rows());
    std::iota(expected.begin(), expected.end(), std::size_t{0});
    c.check(folds.size() == 10 && all == expected, "10 stratified folds partition the row indices");

    const auto counts = d.class_counts();
    const double prior =
        static_cast<double>(*std::max_element(counts.begin(), counts.end())) / static_cast<double>(d.n_rows());
    const auto cv = ek::cross_validate(d, [](const ek::Dataset& t) { return lr::train_majority(t); }, 10, 9);
    c.check(cv.report.accuracy == prior,
            "constant learner pooled accuracy " + num(cv.report.accuracy) + " equals majority prior " + num(prior));
  });
  return c.report();
}

}  // namespace

int main() {
  const std::vector<std::function<bool()>> criteria = {formula_suite,       oracle_equivalence, learner_sanity,
                                                       pipeline_end_to_end, annotation_protocol, cv_correctness};
  int failed = 0;
  for (const auto& criterion : criteria) failed += criterion() ? 0 : 1;
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
