#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "qaexpert/labels.hpp"
#include "qaexpert/stats.hpp"

namespace qaexpert::annotate {

struct Criterion {
  std::string id;
  Label label = Label::Expert;
  std::string text;
  std::string group;  // sub-criteria share a group, e.g. "E6"
};

// The labelling checklist shipped as criteria.json. The same file is served
// to the browser client so both sides check against one list.
struct CriteriaSet {
  std::string version;
  std::size_t expert_minimum = 3;
  std::vector<Criterion> criteria;

  static const CriteriaSet& bundled();
  static CriteriaSet parse(std::string_view json_text);
  const Criterion* find(std::string_view id) const;
  std::size_t count(Label label) const;
};

struct EvidenceSet {
  std::set<Label> classes;
  std::vector<std::string> criteria_met;
};

// Pairwise schema: Expert beats everything, NonExpert beats OutOfScope;
// singletons resolve to themselves. Throws on an empty set.
Label resolve_evidence(const std::set<Label>& classes);

// Applies the expert gate (fewer than `expert_minimum` expert criteria removes
// Expert from the evidence) and then resolve_evidence. If nothing is left,
// the label is NonExpert when a non-expert criterion was checked, otherwise
// OutOfScope. Unknown criterion ids are rejected.
Label resolve_submission(const EvidenceSet& evidence, const CriteriaSet& criteria = CriteriaSet::bundled());

enum class SessionState { Warmup, Gated, Bulk, Adjudication, Closed };

std::string_view to_string(SessionState state);

struct SessionConfig {
  std::size_t warmup_size = 20;
  std::size_t round_size = 20;   // later double-coded rounds
  double kappa_gate = 0.70;
  double bulk_overlap = 0.10;    // share of bulk items both coders label
  std::uint64_t seed = 0;
};

struct LabelRecord {
  std::string coder;
  std::string comment_id;
  Label label = Label::Expert;
  EvidenceSet evidence;
  std::int64_t at = 0;
};

struct Round {
  std::size_t index = 0;  // 1-based
  bool bulk = false;
  std::vector<std::string> ids;
  std::map<std::string, std::vector<std::string>> assignment;  // id -> coders expected to label it
  std::map<std::string, std::map<std::string, LabelRecord>> labels;  // coder -> id -> record
  std::optional<stats::AgreementReport> agreement;  // set when the round closes with shared items
  bool closed = false;
  std::int64_t opened_at = 0;
  std::int64_t closed_at = 0;
  std::map<std::string, std::int64_t> last_submission;  // coder -> time

  std::vector<std::string> missing() const;  // "coder:id" pairs still unlabelled
  double duration_s() const { return closed ? static_cast<double>(closed_at - opened_at) : 0.0; }
};

struct Adjudication {
  std::string comment_id;
  Label label = Label::Expert;
  std::string note;
  std::string by;
  std::int64_t at = 0;
};

struct ExportRecord {
  std::string comment_id;
  Label label = Label::Expert;
  std::string source;  // "agreed", "adjudicated" or "single"
  std::size_t round = 0;
  std::map<std::string, Label> coder_labels;
  std::map<std::string, std::vector<std::string>> criteria;  // coder -> checked criteria
  std::optional<Label> consensus;
  std::string note;
};

// Event-sourced state machine for one two-coder labelling session. Every
// mutation validates, appends one event and applies it; replaying the events
// rebuilds an identical session.
class Session {
 public:
  static Session create(std::string id, std::vector<std::string> sample, std::string coder_a, std::string coder_b,
                        const SessionConfig& config, std::int64_t now);
  static Session replay(const std::vector<nlohmann::json>& events);

  Label submit_label(const std::string& coder, const std::string& comment_id, const EvidenceSet& evidence,
                     std::int64_t now, const CriteriaSet& criteria = CriteriaSet::bundled());
  const Round& close_round(std::int64_t now);
  Label adjudicate(const std::string& comment_id, Label label, const std::string& note, const std::string& by,
                   std::int64_t now);

  std::optional<std::string> next_item(const std::string& coder) const;
  std::vector<ExportRecord> export_labels() const;  // requires the Closed state
  std::vector<std::string> disagreements() const;   // unadjudicated, in sample order

  const std::string& id() const { return id_; }
  SessionState state() const { return state_; }
  const std::vector<std::string>& sample() const { return sample_; }
  const std::array<std::string, 2>& coders() const { return coders_; }
  const SessionConfig& config() const { return config_; }
  const std::vector<Round>& rounds() const { return rounds_; }
  const Round& current_round() const { return rounds_.back(); }
  const std::map<std::string, Adjudication>& adjudications() const { return adjudications_; }
  const std::vector<nlohmann::json>& events() const { return events_; }
  bool gate_passed() const { return gate_passed_; }

  nlohmann::json summary() const;
  nlohmann::json agreement_json() const;
  static nlohmann::json to_json(const ExportRecord& record);

 private:
  Session() = default;
  void apply(const nlohmann::json& event);
  void record(nlohmann::json event);
  void open_round(bool bulk, std::int64_t now);
  bool has_coder(const std::string& coder) const;
  std::size_t round_of(const std::string& comment_id) const;

  std::string id_;
  std::vector<std::string> sample_;
  std::array<std::string, 2> coders_;
  SessionConfig config_;
  SessionState state_ = SessionState::Warmup;
  std::vector<Round> rounds_;
  std::size_t next_unassigned_ = 0;  // cursor into sample_
  bool gate_passed_ = false;
  std::map<std::string, Adjudication> adjudications_;
  std::unordered_map<std::string, std::size_t> round_of_;  // comment id -> index into rounds_
  std::vector<nlohmann::json> events_;
};

// Sessions persisted as one append-only JSON-lines event log per session
// under a directory. Mutations of one session are serialised; readers get
// immutable snapshots and never wait for writers.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path dir);

  std::shared_ptr<const Session> create(std::optional<std::string> id, std::vector<std::string> sample,
                                        std::string coder_a, std::string coder_b, const SessionConfig& config,
                                        std::int64_t now);
  std::shared_ptr<const Session> get(const std::string& id) const;  // throws kNotFound
  std::vector<std::string> ids() const;

  // Runs `mutation` on a copy of the session under the session's lock, then
  // appends the new events to the log and publishes the copy.
  template <typename Fn>
  auto mutate(const std::string& id, Fn&& mutation) {
    auto& entry = entry_for(id);
    std::lock_guard lock(entry.write_mutex);
    Session copy = *std::atomic_load(&entry.current);
    const std::size_t before = copy.events().size();
    auto result = mutation(copy);
    persist(id, copy, before);
    std::atomic_store(&entry.current, std::make_shared<const Session>(std::move(copy)));
    return result;
  }

 private:
  struct Entry {
    std::mutex write_mutex;
    std::shared_ptr<const Session> current;
  };
  Entry& entry_for(const std::string& id) const;
  void persist(const std::string& id, const Session& session, std::size_t from_event) const;
  std::filesystem::path log_path(const std::string& id) const;

  std::filesystem::path dir_;
  mutable std::mutex map_mutex_;
  std::map<std::string, std::unique_ptr<Entry>> sessions_;
  std::size_t counter_ = 0;
};

}  // namespace qaexpert::annotate
