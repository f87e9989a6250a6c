#pragma once

// The phased evaluation workflow:
//
//   PreEvaluation -> MachineCentred -> HumanCentred -> Operation (recurring)
//         ^               |                 |
//         +---- fail -----+------ fail -----+
//
// A phase only runs when it is the study's current phase, so every phase
// before it has passed in the current attempt. Any failing phase sends the
// study back to PreEvaluation and opens a new attempt.
//
// All state changes go through the audit log: an event is appended first
// and then applied, and state.json is a snapshot of the fold over
// audit.log. Replaying the log therefore reproduces the snapshot exactly.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xaihealth/altai.hpp"
#include "xaihealth/audit.hpp"
#include "xaihealth/dataset.hpp"
#include "xaihealth/explainer.hpp"
#include "xaihealth/metrics.hpp"
#include "xaihealth/model.hpp"
#include "xaihealth/phase.hpp"
#include "xaihealth/trust.hpp"

namespace xaihealth {

/// Quantitative gates. All thresholds lie in [0, 1].
struct GateConfig {
  double lle_gate = 0.10;               // max acceptable mean LLE
  double accuracy_min = 0.70;           // "adequate efficacy"
  double trust_f1_min = 0.70;           // mean trust F1 across raters
  double randomisation_rho_max = 0.5;   // mean Spearman must fall below
  double drift_accuracy_band = 0.05;    // monitor: tolerated absolute accuracy drop

  void validate() const;
};

nlohmann::json gates_to_json(const GateConfig& g);
GateConfig gates_from_json(const nlohmann::json& doc);

struct TrustSettings {
  std::size_t max_cases = 0;  // 0 = every dataset instance
  std::uint64_t session_seed = 1;
  double keep_fraction = 1.0;
  std::vector<std::string> class_names;
};

/// Parsed study.json. Paths are relative to the study directory.
struct StudyConfig {
  std::string study_id;
  std::filesystem::path dataset;  // manifest.json
  std::filesystem::path model;    // model.json
  std::optional<ExplainerSpec> explainer;
  GateConfig gates;
  std::optional<double> epsilon;  // default 0.1 x dataset input std
  std::size_t num_samples = 50;
  std::uint64_t perturbation_seed = 1;
  std::uint64_t randomisation_seed = 1234;
  std::optional<std::size_t> complexity_k;
  std::filesystem::path altai_bank;     // empty = built-in bank
  std::filesystem::path altai_answers = "altai_answers.json";
  TrustSettings trust;
};

StudyConfig study_config_from_json(const nlohmann::json& doc);
nlohmann::json study_config_to_json(const StudyConfig& cfg);
StudyConfig load_study_config(const std::filesystem::path& study_dir);

/// One threshold comparison, e.g. "mean_lle=0.082000, threshold=0.10, pass=true".
struct GateOutcome {
  std::string name;
  double measured = 0.0;
  double threshold = 0.0;
  std::string comparison;  // "<=", ">=", "<"
  bool pass = false;
  std::string rule;

  std::string line() const;
};

struct PhaseResult {
  Phase phase = Phase::PreEvaluation;
  std::size_t attempt = 1;
  bool pass = false;
  std::vector<std::string> reasons;  // failure reasons, empty on pass
  std::vector<GateOutcome> gates;
  std::optional<altai::Verdict> altai;
  nlohmann::json metrics = nlohmann::json::object();
};

nlohmann::json phase_result_to_json(const PhaseResult& r);
PhaseResult phase_result_from_json(const nlohmann::json& doc);

struct TransitionRecord {
  Phase from = Phase::PreEvaluation;
  Phase to = Phase::PreEvaluation;
  bool pass = false;
  std::size_t attempt = 1;  // attempt after the transition
  std::string timestamp;
};

struct SessionRecord {
  std::string session_id;
  std::string user_id;
  std::uint64_t shuffle_seed = 0;
  std::size_t num_cases = 0;
  std::string timestamp;
};

struct DriftReport {
  std::string dataset;
  double baseline_accuracy = 0.0;
  double accuracy = 0.0;
  double accuracy_drop = 0.0;
  double mean_lle = 0.0;
  double lle_gate = 0.0;
  double accuracy_band = 0.0;
  bool accuracy_drift = false;
  bool lle_drift = false;
  bool flagged = false;
  std::string recommendation;
  std::optional<altai::Verdict> altai;
};

nlohmann::json drift_to_json(const DriftReport& d);
DriftReport drift_from_json(const nlohmann::json& doc);

struct StudyState {
  std::string study_id;
  Phase phase = Phase::PreEvaluation;
  std::size_t attempt = 1;
  nlohmann::json config = nlohmann::json::object();
  std::vector<PhaseResult> results;
  std::vector<TransitionRecord> transitions;
  std::vector<altai::AnswerRecord> altai_answers;
  std::vector<SessionRecord> sessions;
  std::vector<DriftReport> drift;
  std::size_t audit_entries = 0;
  std::string audit_head;

  // Latest result for `phase` within the current attempt.
  const PhaseResult* latest(Phase phase) const;
};

nlohmann::json state_to_json(const StudyState& s);

/// Pure state transition. Throws StalePhaseResult unless the result
/// belongs to the current phase and attempt.
StudyState transition(StudyState state, const PhaseResult& result, const std::string& timestamp = {});

/// Folds one audit event into the state.
void apply_event(StudyState& state, const AuditEvent& event);
StudyState replay(const std::vector<AuditEvent>& events);

// Gate verdicts: pure functions of measured values and configuration.
PhaseResult phase0_verdict(double accuracy, const altai::Verdict& checklist, bool attestation_present,
                           const GateConfig& gates, std::size_t attempt);
PhaseResult phase1_verdict(const MetricSummary& lle, double randomisation_rho_mean, const altai::Verdict& checklist,
                           const GateConfig& gates, std::size_t attempt);
PhaseResult phase2_verdict(double mean_trust_f1, const altai::Verdict& checklist, const GateConfig& gates,
                           std::size_t attempt);

/// Loaded inputs for running phases.
struct StudyContext {
  StudyConfig config;
  Dataset dataset;
  Model model;
  std::unique_ptr<Explainer> explainer;
  altai::QuestionBank bank;
};

/// Throws ConfigurationIncomplete when the dataset, model or explainer is
/// not configured.
StudyContext load_context(const std::filesystem::path& study_dir);

altai::Verdict checklist_for(Phase phase, const altai::QuestionBank& bank,
                             const std::vector<altai::AnswerRecord>& answers);

PhaseResult run_phase0(const StudyState& state, const StudyContext& ctx);
PhaseResult run_phase1(const StudyState& state, const StudyContext& ctx);
PhaseResult run_phase2(const StudyState& state, const StudyContext& ctx, const std::vector<TrustSession>& sessions);
DriftReport run_operation_monitor(const StudyState& state, const StudyContext& ctx, const Dataset& new_dataset);

/// Deterministic report document; NothingToReport before any phase ran.
nlohmann::json emit_report(const StudyState& state);

/// Per-instance scores of a MachineCentred result as CSV rows.
std::vector<CsvRow> phase1_csv_rows(const PhaseResult& result);

/// A study directory: study.json, audit.log, state.json, sessions/,
/// report.json.
class Study {
 public:
  using Clock = std::function<std::string()>;

  /// Opens (and on first use initialises) the study in `dir`.
  static Study open(const std::filesystem::path& dir, Clock clock = {});

  const std::filesystem::path& dir() const noexcept { return dir_; }
  const StudyState& state() const noexcept { return state_; }
  const StudyConfig& config() const noexcept { return config_; }
  const AuditLog& audit() const noexcept { return audit_; }
  SessionStore sessions() const { return SessionStore(dir_ / "sessions"); }

  void set_actor(std::string actor) { actor_ = std::move(actor); }
  std::string now() const;

  /// Lazily loads dataset, model and explainer.
  const StudyContext& context();

  void record_altai_answers(const std::vector<altai::AnswerRecord>& answers);
  /// Records the answers file (config.altai_answers) if it differs from
  /// the recorded answers. Returns true when an event was written.
  bool sync_altai_answers();

  PhaseResult run_current_phase();
  void advance(const PhaseResult& result);

  SessionRecord create_session(const std::string& user_id);
  DriftReport monitor(const Dataset& new_dataset);

  nlohmann::json report() const { return emit_report(state_); }
  std::filesystem::path write_report(const std::filesystem::path& out = {}) const;

 private:
  Study(std::filesystem::path dir, StudyConfig config, AuditLog audit, Clock clock);
  void commit(const std::string& event, nlohmann::json payload);
  void write_snapshot() const;

  std::filesystem::path dir_;
  StudyConfig config_;
  AuditLog audit_;
  Clock clock_;
  std::string actor_ = "cli";
  StudyState state_;
  std::unique_ptr<StudyContext> context_;
};

}  // namespace xaihealth
