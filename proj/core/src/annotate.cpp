#include "qaexpert/annotate.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "qaexpert/assets.hpp"
#include "qaexpert/error.hpp"
#include "qaexpert/io_util.hpp"

namespace qaexpert::annotate {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Criteria and evidence

CriteriaSet CriteriaSet::parse(std::string_view json_text) {
  const json j = json::parse(json_text, nullptr, false);
  require(!j.is_discarded() && j.is_object(), ErrorCode::kInvalidArgument, "criteria file is not a JSON object");
  CriteriaSet set;
  try {
    set.version = j.at("version").get<std::string>();
    set.expert_minimum = j.at("expert_minimum").get<std::size_t>();
    for (const auto& c : j.at("criteria")) {
      Criterion criterion;
      criterion.id = c.at("id").get<std::string>();
      criterion.label = parse_label_or_throw(c.at("class").get<std::string>());
      criterion.text = c.at("text").get<std::string>();
      criterion.group = c.value("group", criterion.id);
      require(set.find(criterion.id) == nullptr, ErrorCode::kInvalidArgument,
              "duplicate criterion id " + criterion.id);
      set.criteria.push_back(std::move(criterion));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("malformed criteria file: ") + e.what());
  }
  return set;
}

const CriteriaSet& CriteriaSet::bundled() {
  static const CriteriaSet set = parse(assets::raw("criteria.json"));
  return set;
}

const Criterion* CriteriaSet::find(std::string_view id) const {
  for (const auto& c : criteria) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

std::size_t CriteriaSet::count(Label label) const {
  return static_cast<std::size_t>(
      std::count_if(criteria.begin(), criteria.end(), [&](const Criterion& c) { return c.label == label; }));
}

Label resolve_evidence(const std::set<Label>& classes) {
  require(!classes.empty(), ErrorCode::kInvalidArgument, "evidence needs at least one class");
  if (classes.count(Label::Expert)) return Label::Expert;
  if (classes.count(Label::NonExpert)) return Label::NonExpert;
  return Label::OutOfScope;
}

Label resolve_submission(const EvidenceSet& evidence, const CriteriaSet& criteria) {
  require(!evidence.classes.empty(), ErrorCode::kInvalidArgument, "evidence needs at least one class");
  std::array<std::size_t, kNumClasses> checked{};
  std::set<std::string> seen;
  for (const auto& id : evidence.criteria_met) {
    const Criterion* c = criteria.find(id);
    require(c != nullptr, ErrorCode::kInvalidArgument, "unknown criterion '" + id + "'");
    if (seen.insert(id).second) ++checked[index(c->label)];
  }
  std::set<Label> classes = evidence.classes;
  if (checked[index(Label::Expert)] < criteria.expert_minimum) classes.erase(Label::Expert);
  if (classes.empty()) return checked[index(Label::NonExpert)] > 0 ? Label::NonExpert : Label::OutOfScope;
  return resolve_evidence(classes);
}

std::string_view to_string(SessionState state) {
  switch (state) {
    case SessionState::Warmup: return "warmup";
    case SessionState::Gated: return "gated";
    case SessionState::Bulk: return "bulk";
    case SessionState::Adjudication: return "adjudication";
    case SessionState::Closed: return "closed";
  }
  return "unknown";
}

std::vector<std::string> Round::missing() const {
  std::vector<std::string> out;
  for (const auto& id : ids) {
    for (const auto& coder : assignment.at(id)) {
      auto it = labels.find(coder);
      if (it == labels.end() || !it->second.count(id)) out.push_back(coder + ":" + id);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Session

namespace {

json config_json(const SessionConfig& c) {
  return json{{"warmup_size", c.warmup_size},
              {"round_size", c.round_size},
              {"kappa_gate", c.kappa_gate},
              {"bulk_overlap", c.bulk_overlap},
              {"seed", c.seed}};
}

SessionConfig config_from(const json& j) {
  SessionConfig c;
  c.warmup_size = j.at("warmup_size").get<std::size_t>();
  c.round_size = j.at("round_size").get<std::size_t>();
  c.kappa_gate = j.at("kappa_gate").get<double>();
  c.bulk_overlap = j.at("bulk_overlap").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

json labels_json(const std::set<Label>& classes) {
  json out = json::array();
  for (Label l : classes) out.push_back(std::string(to_string(l)));
  return out;
}

bool labelling_state(SessionState s) {
  return s == SessionState::Warmup || s == SessionState::Gated || s == SessionState::Bulk;
}

}  // namespace

Session Session::create(std::string id, std::vector<std::string> sample, std::string coder_a, std::string coder_b,
                        const SessionConfig& config, std::int64_t now) {
  require(!sample.empty(), ErrorCode::kInvalidArgument, "session sample is empty");
  require(!coder_a.empty() && !coder_b.empty(), ErrorCode::kInvalidArgument, "coder identities must be non-empty");
  require(coder_a != coder_b, ErrorCode::kInvalidArgument, "a session needs two distinct coders");
  require(config.warmup_size >= 1 && config.round_size >= 1, ErrorCode::kInvalidArgument,
          "round sizes must be at least 1");
  require(config.kappa_gate > -1.0 && config.kappa_gate <= 1.0, ErrorCode::kInvalidArgument,
          "kappa gate must be in (-1, 1]");
  require(config.bulk_overlap >= 0.0 && config.bulk_overlap <= 1.0, ErrorCode::kInvalidArgument,
          "bulk overlap must be in [0, 1]");
  std::set<std::string> unique(sample.begin(), sample.end());
  require(unique.size() == sample.size(), ErrorCode::kInvalidArgument, "session sample contains duplicate ids");
  Session s;
  s.record(json{{"type", "created"},
                {"id", id},
                {"sample", sample},
                {"coders", {coder_a, coder_b}},
                {"config", config_json(config)},
                {"at", now}});
  return s;
}

Session Session::replay(const std::vector<json>& events) {
  require(!events.empty() && events.front().value("type", "") == "created", ErrorCode::kInvalidArgument,
          "event log must start with a 'created' event");
  Session s;
  try {
    for (const auto& e : events) s.record(e);
  } catch (const json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("corrupt event log: ") + e.what());
  }
  return s;
}

void Session::record(json event) {
  apply(event);
  events_.push_back(std::move(event));
}

bool Session::has_coder(const std::string& coder) const { return coder == coders_[0] || coder == coders_[1]; }

std::size_t Session::round_of(const std::string& comment_id) const {
  auto it = round_of_.find(comment_id);
  require(it != round_of_.end(), ErrorCode::kNotFound, "comment '" + comment_id + "' has not been assigned yet");
  return it->second;
}

void Session::open_round(bool bulk, std::int64_t now) {
  Round r;
  r.index = rounds_.size() + 1;
  r.bulk = bulk;
  r.opened_at = now;
  const std::size_t remaining = sample_.size() - next_unassigned_;
  const std::size_t take =
      bulk ? remaining : std::min(remaining, rounds_.empty() ? config_.warmup_size : config_.round_size);
  r.ids.assign(sample_.begin() + static_cast<std::ptrdiff_t>(next_unassigned_),
               sample_.begin() + static_cast<std::ptrdiff_t>(next_unassigned_ + take));
  next_unassigned_ += take;
  if (!bulk) {
    for (const auto& id : r.ids) r.assignment[id] = {coders_[0], coders_[1]};
  } else {
    // A seeded slice is labelled by both coders to monitor drift; the rest
    // alternates between them in sample order.
    const auto overlap = static_cast<std::size_t>(std::llround(config_.bulk_overlap * static_cast<double>(take)));
    std::vector<std::size_t> positions(take);
    for (std::size_t i = 0; i < take; ++i) positions[i] = i;
    std::mt19937_64 rng(config_.seed ^ (0x2545f4914f6cdd1dULL * r.index));
    std::shuffle(positions.begin(), positions.end(), rng);
    std::vector<char> shared(take, 0);
    for (std::size_t i = 0; i < overlap; ++i) shared[positions[i]] = 1;
    std::size_t turn = 0;
    for (std::size_t i = 0; i < take; ++i) {
      if (shared[i]) {
        r.assignment[r.ids[i]] = {coders_[0], coders_[1]};
      } else {
        r.assignment[r.ids[i]] = {coders_[turn % 2]};
        ++turn;
      }
    }
  }
  for (const auto& id : r.ids) round_of_[id] = rounds_.size();
  rounds_.push_back(std::move(r));
}

void Session::apply(const json& event) {
  const std::string type = event.at("type").get<std::string>();
  const std::int64_t at = event.at("at").get<std::int64_t>();
  if (type == "created") {
    id_ = event.at("id").get<std::string>();
    sample_ = event.at("sample").get<std::vector<std::string>>();
    coders_ = {event.at("coders").at(0).get<std::string>(), event.at("coders").at(1).get<std::string>()};
    config_ = config_from(event.at("config"));
    state_ = SessionState::Warmup;
    open_round(false, at);
  } else if (type == "label") {
    LabelRecord rec;
    rec.coder = event.at("coder").get<std::string>();
    rec.comment_id = event.at("comment").get<std::string>();
    rec.label = parse_label_or_throw(event.at("label").get<std::string>());
    for (const auto& c : event.at("classes")) rec.evidence.classes.insert(parse_label_or_throw(c.get<std::string>()));
    rec.evidence.criteria_met = event.at("criteria").get<std::vector<std::string>>();
    rec.at = at;
    Round& r = rounds_.back();
    r.last_submission[rec.coder] = at;
    r.labels[rec.coder][rec.comment_id] = std::move(rec);
  } else if (type == "round_closed") {
    Round& r = rounds_.back();
    r.closed = true;
    r.closed_at = at;
    std::vector<Label> a, b;
    for (const auto& id : r.ids) {
      if (r.assignment.at(id).size() != 2) continue;
      a.push_back(r.labels.at(coders_[0]).at(id).label);
      b.push_back(r.labels.at(coders_[1]).at(id).label);
    }
    if (!a.empty()) r.agreement = stats::cohens_kappa(a, b);
    const bool more = next_unassigned_ < sample_.size();
    if (!r.bulk) {
      // Tolerance absorbs rounding in the kappa quotient at the threshold.
      const bool passed = r.agreement && r.agreement->kappa >= config_.kappa_gate - 1e-12;
      if (passed) gate_passed_ = true;
      if (more) {
        open_round(passed, at);
        state_ = passed ? SessionState::Bulk : SessionState::Gated;
        return;
      }
    }
    state_ = disagreements().empty() ? SessionState::Closed : SessionState::Adjudication;
  } else if (type == "adjudicated") {
    Adjudication adj;
    adj.comment_id = event.at("comment").get<std::string>();
    adj.label = parse_label_or_throw(event.at("label").get<std::string>());
    adj.note = event.at("note").get<std::string>();
    adj.by = event.at("by").get<std::string>();
    adj.at = at;
    adjudications_[adj.comment_id] = std::move(adj);
    if (state_ == SessionState::Adjudication && disagreements().empty()) state_ = SessionState::Closed;
  } else {
    fail(ErrorCode::kInvalidArgument, "unknown event type '" + type + "'");
  }
}

Label Session::submit_label(const std::string& coder, const std::string& comment_id, const EvidenceSet& evidence,
                            std::int64_t now, const CriteriaSet& criteria) {
  require(labelling_state(state_), ErrorCode::kConflict,
          "session is in state '" + std::string(to_string(state_)) + "' and takes no labels");
  require(has_coder(coder), ErrorCode::kInvalidArgument, "'" + coder + "' is not a coder of this session");
  const Round& r = rounds_.back();
  auto assigned = r.assignment.find(comment_id);
  require(assigned != r.assignment.end(), ErrorCode::kPrecondition,
          "comment '" + comment_id + "' is not in the current round");
  require(std::find(assigned->second.begin(), assigned->second.end(), coder) != assigned->second.end(),
          ErrorCode::kPrecondition, "comment '" + comment_id + "' is not assigned to '" + coder + "'");
  auto done = r.labels.find(coder);
  require(done == r.labels.end() || !done->second.count(comment_id), ErrorCode::kConflict,
          "'" + coder + "' already labelled '" + comment_id + "'");
  const Label label = resolve_submission(evidence, criteria);
  record(json{{"type", "label"},
              {"coder", coder},
              {"comment", comment_id},
              {"classes", labels_json(evidence.classes)},
              {"criteria", evidence.criteria_met},
              {"label", std::string(to_string(label))},
              {"at", now}});
  return label;
}

const Round& Session::close_round(std::int64_t now) {
  require(labelling_state(state_), ErrorCode::kConflict,
          "session is in state '" + std::string(to_string(state_)) + "'; no round is open");
  const auto missing = rounds_.back().missing();
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) list += (i ? ", " : "") + missing[i];
    if (missing.size() > 20) list += ", ...";
    fail(ErrorCode::kPrecondition, "round " + std::to_string(rounds_.back().index) + " is incomplete (" +
                                       std::to_string(missing.size()) + " missing): " + list);
  }
  const std::size_t closing = rounds_.size() - 1;
  record(json{{"type", "round_closed"}, {"round", rounds_.back().index}, {"at", now}});
  return rounds_[closing];
}

Label Session::adjudicate(const std::string& comment_id, Label label, const std::string& note, const std::string& by,
                          std::int64_t now) {
  require(state_ == SessionState::Bulk || state_ == SessionState::Adjudication, ErrorCode::kConflict,
          "adjudication is not open in state '" + std::string(to_string(state_)) + "'");
  require(!adjudications_.count(comment_id), ErrorCode::kConflict, "'" + comment_id + "' is already adjudicated");
  const auto pending = disagreements();
  require(std::find(pending.begin(), pending.end(), comment_id) != pending.end(), ErrorCode::kConflict,
          "'" + comment_id + "' is not a disagreement between the coders");
  record(json{{"type", "adjudicated"},
              {"comment", comment_id},
              {"label", std::string(to_string(label))},
              {"note", note},
              {"by", by},
              {"at", now}});
  return label;
}

std::vector<std::string> Session::disagreements() const {
  std::vector<std::string> out;
  for (const auto& id : sample_) {
    auto it = round_of_.find(id);
    if (it == round_of_.end() || adjudications_.count(id)) continue;
    const Round& r = rounds_[it->second];
    auto a = r.labels.find(coders_[0]);
    auto b = r.labels.find(coders_[1]);
    if (a == r.labels.end() || b == r.labels.end()) continue;
    auto la = a->second.find(id);
    auto lb = b->second.find(id);
    if (la == a->second.end() || lb == b->second.end()) continue;
    if (la->second.label != lb->second.label) out.push_back(id);
  }
  return out;
}

std::optional<std::string> Session::next_item(const std::string& coder) const {
  require(has_coder(coder), ErrorCode::kInvalidArgument, "'" + coder + "' is not a coder of this session");
  if (!labelling_state(state_)) return std::nullopt;
  const Round& r = rounds_.back();
  auto done = r.labels.find(coder);
  for (const auto& id : r.ids) {
    const auto& who = r.assignment.at(id);
    if (std::find(who.begin(), who.end(), coder) == who.end()) continue;
    if (done != r.labels.end() && done->second.count(id)) continue;
    return id;
  }
  return std::nullopt;
}

std::vector<ExportRecord> Session::export_labels() const {
  require(state_ == SessionState::Closed, ErrorCode::kPrecondition,
          "session is in state '" + std::string(to_string(state_)) + "'; export needs a closed session");
  std::vector<ExportRecord> out;
  out.reserve(sample_.size());
  for (const auto& id : sample_) {
    const std::size_t ri = round_of(id);
    const Round& r = rounds_[ri];
    ExportRecord rec;
    rec.comment_id = id;
    rec.round = r.index;
    for (const auto& coder : coders_) {
      auto it = r.labels.find(coder);
      if (it == r.labels.end()) continue;
      auto lab = it->second.find(id);
      if (lab == it->second.end()) continue;
      rec.coder_labels[coder] = lab->second.label;
      rec.criteria[coder] = lab->second.evidence.criteria_met;
    }
    require(!rec.coder_labels.empty(), ErrorCode::kInternal, "closed session has an unlabelled item " + id);
    if (auto adj = adjudications_.find(id); adj != adjudications_.end()) {
      rec.consensus = adj->second.label;
      rec.label = adj->second.label;
      rec.note = adj->second.note;
      rec.source = "adjudicated";
    } else {
      rec.label = rec.coder_labels.begin()->second;
      rec.source = rec.coder_labels.size() == 2 ? "agreed" : "single";
    }
    out.push_back(std::move(rec));
  }
  return out;
}

json Session::to_json(const ExportRecord& r) {
  json coder_labels = json::object();
  for (const auto& [coder, label] : r.coder_labels) coder_labels[coder] = std::string(qaexpert::to_string(label));
  json j{{"comment_id", r.comment_id},
         {"label", std::string(qaexpert::to_string(r.label))},
         {"source", r.source},
         {"round", r.round},
         {"coder_labels", coder_labels},
         {"criteria", r.criteria},
         {"consensus", r.consensus ? json(std::string(qaexpert::to_string(*r.consensus))) : json(nullptr)},
         {"note", r.note}};
  return j;
}

json Session::summary() const {
  json rounds = json::array();
  for (const auto& r : rounds_) {
    json progress = json::object();
    for (const auto& coder : coders_) {
      std::size_t assigned = 0;
      for (const auto& [id, who] : r.assignment) assigned += std::count(who.begin(), who.end(), coder);
      auto it = r.labels.find(coder);
      progress[coder] = json{{"labelled", it == r.labels.end() ? 0 : it->second.size()}, {"assigned", assigned}};
    }
    rounds.push_back(json{{"index", r.index},
                          {"bulk", r.bulk},
                          {"size", r.ids.size()},
                          {"closed", r.closed},
                          {"kappa", r.agreement ? json(r.agreement->kappa) : json(nullptr)},
                          {"duration_s", r.duration_s()},
                          {"progress", progress}});
  }
  return json{{"id", id_},
              {"state", std::string(to_string(state_))},
              {"coders", coders_},
              {"sample_size", sample_.size()},
              {"config", config_json(config_)},
              {"gate_passed", gate_passed_},
              {"rounds", rounds},
              {"disagreements", disagreements().size()},
              {"adjudicated", adjudications_.size()}};
}

json Session::agreement_json() const {
  json rounds = json::array();
  std::vector<Label> all_a, all_b;
  for (const auto& r : rounds_) {
    json row{{"index", r.index}, {"bulk", r.bulk}, {"closed", r.closed}};
    if (r.agreement) {
      row["kappa"] = r.agreement->kappa;
      row["observed_agreement"] = r.agreement->observed_agreement;
      row["expected_agreement"] = r.agreement->expected_agreement;
      row["n_items"] = r.agreement->n_items;
      row["gate_passed"] = !r.bulk && r.agreement->kappa >= config_.kappa_gate - 1e-12;
    } else {
      row["kappa"] = nullptr;
      row["n_items"] = 0;
      row["gate_passed"] = false;
    }
    rounds.push_back(row);
    if (!r.closed) continue;
    for (const auto& id : r.ids) {
      if (r.assignment.at(id).size() != 2) continue;
      all_a.push_back(r.labels.at(coders_[0]).at(id).label);
      all_b.push_back(r.labels.at(coders_[1]).at(id).label);
    }
  }
  json overall = nullptr;
  if (!all_a.empty()) {
    const auto rep = stats::cohens_kappa(all_a, all_b);
    overall = json{{"kappa", rep.kappa}, {"n_items", rep.n_items}};
  }
  return json{{"gate", config_.kappa_gate}, {"gate_passed", gate_passed_}, {"rounds", rounds}, {"overall", overall}};
}

// ---------------------------------------------------------------------------
// SessionStore

namespace {

bool valid_session_id(std::string_view id) {
  if (id.empty() || id.size() > 64) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
  });
}

constexpr std::string_view kLogSuffix = ".events.jsonl";

}  // namespace

SessionStore::SessionStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
  std::vector<std::filesystem::path> logs;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > kLogSuffix.size() && name.ends_with(kLogSuffix)) logs.push_back(entry.path());
  }
  std::sort(logs.begin(), logs.end());
  for (const auto& path : logs) {
    std::vector<json> events;
    for (const auto& line : io::split_lines(io::read_text_file(path))) {
      if (io::trim(line).empty()) continue;
      json e = json::parse(line, nullptr, false);
      require(!e.is_discarded(), ErrorCode::kInvalidArgument, "corrupt event log " + path.string());
      events.push_back(std::move(e));
    }
    if (events.empty()) continue;
    Session s = Session::replay(events);
    auto entry = std::make_unique<Entry>();
    entry->current = std::make_shared<const Session>(std::move(s));
    const std::string id = entry->current->id();
    sessions_.emplace(id, std::move(entry));
    ++counter_;
  }
}

std::filesystem::path SessionStore::log_path(const std::string& id) const {
  return dir_ / (id + std::string(kLogSuffix));
}

std::shared_ptr<const Session> SessionStore::create(std::optional<std::string> id, std::vector<std::string> sample,
                                                    std::string coder_a, std::string coder_b,
                                                    const SessionConfig& config, std::int64_t now) {
  std::lock_guard lock(map_mutex_);
  std::string sid;
  if (id) {
    sid = *id;
  } else {
    do {
      sid = "session-" + std::to_string(++counter_);
    } while (sessions_.count(sid));
  }
  require(valid_session_id(sid), ErrorCode::kInvalidArgument,
          "session ids use letters, digits, '-' and '_' (at most 64)");
  require(!sessions_.count(sid), ErrorCode::kConflict, "session '" + sid + "' already exists");
  Session s = Session::create(sid, std::move(sample), std::move(coder_a), std::move(coder_b), config, now);
  persist(sid, s, 0);
  auto entry = std::make_unique<Entry>();
  entry->current = std::make_shared<const Session>(std::move(s));
  auto snapshot = entry->current;
  sessions_.emplace(sid, std::move(entry));
  return snapshot;
}

SessionStore::Entry& SessionStore::entry_for(const std::string& id) const {
  std::lock_guard lock(map_mutex_);
  auto it = sessions_.find(id);
  require(it != sessions_.end(), ErrorCode::kNotFound, "no session '" + id + "'");
  return *it->second;
}

std::shared_ptr<const Session> SessionStore::get(const std::string& id) const {
  return std::atomic_load(&entry_for(id).current);
}

std::vector<std::string> SessionStore::ids() const {
  std::lock_guard lock(map_mutex_);
  std::vector<std::string> out;
  for (const auto& [id, entry] : sessions_) out.push_back(id);
  return out;
}

void SessionStore::persist(const std::string& id, const Session& session, std::size_t from_event) const {
  std::string chunk;
  for (std::size_t i = from_event; i < session.events().size(); ++i) chunk += session.events()[i].dump() + "\n";
  if (chunk.empty()) return;
  chunk.pop_back();
  io::append_line(log_path(id), chunk);
}

}  // namespace qaexpert::annotate
