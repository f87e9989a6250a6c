#include "xaihealth/study.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "xaihealth/error.hpp"
#include "xaihealth/io.hpp"
#include "xaihealth/rng.hpp"

namespace xaihealth {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// At least two decimals, more when needed to represent the value exactly.
std::string threshold_text(double v) {
  for (int d = 2; d <= 17; ++d) {
    auto s = fixed(v, d);
    if (std::stod(s) == v) return s;
  }
  return fixed(v, 17);
}

std::string display4(double v) { return fixed(round_half_up(v, 4), 4); }

void check_unit(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidConfig, std::string(name) + " must lie in [0, 1]");
}

GateOutcome gate(std::string name, double measured, double threshold, std::string comparison, std::string rule) {
  GateOutcome g{std::move(name), measured, threshold, std::move(comparison), false, std::move(rule)};
  if (g.comparison == "<=") g.pass = measured <= threshold;
  else if (g.comparison == ">=") g.pass = measured >= threshold;
  else if (g.comparison == "<") g.pass = measured < threshold;
  else throw Error(ErrorCode::InvalidConfig, "unknown comparison " + g.comparison);
  return g;
}

json gate_to_json(const GateOutcome& g) {
  return json{{"name", g.name},   {"measured", g.measured}, {"threshold", g.threshold}, {"comparison", g.comparison},
              {"pass", g.pass},   {"rule", g.rule},         {"line", g.line()}};
}

GateOutcome gate_from_json(const json& j) {
  return GateOutcome{j.at("name").get<std::string>(),       j.at("measured").get<double>(),
                     j.at("threshold").get<double>(),       j.at("comparison").get<std::string>(),
                     j.at("pass").get<bool>(),              j.at("rule").get<std::string>()};
}

Phase phase_from(const json& j) {
  auto p = parse_phase(j.get<std::string>());
  if (!p) throw Error(ErrorCode::AuditCorrupt, "unknown phase " + j.dump());
  return *p;
}

json trust_row(const TrustMetrics& m) {
  return json{{"precision", m.precision},
              {"recall", m.recall},
              {"f1", m.f1},
              {"display", {{"precision", display4(m.precision)}, {"recall", display4(m.recall)}, {"f1", display4(m.f1)}}}};
}

json session_to_json(const SessionRecord& s) {
  return json{{"session_id", s.session_id},
              {"user_id", s.user_id},
              {"shuffle_seed", s.shuffle_seed},
              {"num_cases", s.num_cases},
              {"timestamp", s.timestamp}};
}

SessionRecord session_from_json(const json& j) {
  return SessionRecord{j.at("session_id").get<std::string>(), j.at("user_id").get<std::string>(),
                       j.at("shuffle_seed").get<std::uint64_t>(), j.at("num_cases").get<std::size_t>(),
                       j.value("timestamp", std::string{})};
}

json transition_to_json(const TransitionRecord& t) {
  return json{{"from", phase_name(t.from)},
              {"to", phase_name(t.to)},
              {"pass", t.pass},
              {"attempt", t.attempt},
              {"timestamp", t.timestamp}};
}

PerturbationConfig perturbation_for(const StudyContext& ctx) {
  PerturbationConfig pc;
  pc.num_samples = ctx.config.num_samples;
  pc.seed = ctx.config.perturbation_seed;
  pc.epsilon = ctx.config.epsilon ? *ctx.config.epsilon : 0.1 * input_std(ctx.dataset);
  if (!(pc.epsilon > 0.0))
    throw Error(ErrorCode::InvalidConfig, "perturbation epsilon is zero (constant dataset); set 'epsilon' explicitly");
  pc.validate();
  return pc;
}

MetricSummary lle_summary(const Model& model, const Explainer& explainer, const Dataset& ds,
                          const PerturbationConfig& pc) {
  std::vector<std::pair<std::string, double>> scores;
  scores.reserve(ds.size());
  for (const auto& inst : ds.instances) scores.emplace_back(inst.id, lle_score(model, explainer, inst, pc));
  return aggregate(std::move(scores));
}

std::vector<std::pair<std::string, double>> per_instance_from(const json& summary) {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& e : summary.at("per_instance"))
    out.emplace_back(e.at("instance_id").get<std::string>(), e.at("score").get<double>());
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void GateConfig::validate() const {
  check_unit(lle_gate, "lle_gate");
  check_unit(accuracy_min, "accuracy_min");
  check_unit(trust_f1_min, "trust_f1_min");
  check_unit(randomisation_rho_max, "randomisation_rho_max");
  check_unit(drift_accuracy_band, "drift_accuracy_band");
}

json gates_to_json(const GateConfig& g) {
  return json{{"lle_gate", g.lle_gate},
              {"accuracy_min", g.accuracy_min},
              {"trust_f1_min", g.trust_f1_min},
              {"randomisation_rho_max", g.randomisation_rho_max},
              {"drift_accuracy_band", g.drift_accuracy_band}};
}

GateConfig gates_from_json(const json& doc) {
  GateConfig g;
  if (!doc.is_null()) {
    g.lle_gate = doc.value("lle_gate", g.lle_gate);
    g.accuracy_min = doc.value("accuracy_min", g.accuracy_min);
    g.trust_f1_min = doc.value("trust_f1_min", g.trust_f1_min);
    g.randomisation_rho_max = doc.value("randomisation_rho_max", g.randomisation_rho_max);
    g.drift_accuracy_band = doc.value("drift_accuracy_band", g.drift_accuracy_band);
  }
  g.validate();
  return g;
}

StudyConfig study_config_from_json(const json& doc) {
  StudyConfig c;
  try {
    c.study_id = doc.at("study_id").get<std::string>();
    c.dataset = doc.value("dataset", std::string{});
    c.model = doc.value("model", std::string{});
    if (doc.contains("explainer") && !doc["explainer"].is_null()) c.explainer = explainer_from_json(doc["explainer"]);
    c.gates = gates_from_json(doc.value("gates", json()));
    if (doc.contains("perturbation")) {
      const auto& p = doc["perturbation"];
      if (p.contains("epsilon") && !p["epsilon"].is_null()) c.epsilon = p["epsilon"].get<double>();
      c.num_samples = p.value("num_samples", c.num_samples);
      c.perturbation_seed = p.value("seed", c.perturbation_seed);
    }
    c.randomisation_seed = doc.value("randomisation_seed", c.randomisation_seed);
    if (doc.contains("complexity_k") && !doc["complexity_k"].is_null())
      c.complexity_k = doc["complexity_k"].get<std::size_t>();
    c.altai_bank = doc.value("altai_bank", std::string{});
    c.altai_answers = doc.value("altai_answers", std::string{"altai_answers.json"});
    if (doc.contains("trust")) {
      const auto& t = doc["trust"];
      c.trust.max_cases = t.value("max_cases", c.trust.max_cases);
      c.trust.session_seed = t.value("session_seed", c.trust.session_seed);
      c.trust.keep_fraction = t.value("keep_fraction", c.trust.keep_fraction);
      c.trust.class_names = t.value("class_names", std::vector<std::string>{});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("study.json: ") + e.what());
  }
  if (c.study_id.empty()) throw Error(ErrorCode::InvalidConfig, "study_id must not be empty");
  if (!(c.trust.keep_fraction > 0.0 && c.trust.keep_fraction <= 1.0))
    throw Error(ErrorCode::BadFraction, "trust.keep_fraction must lie in (0, 1]");
  return c;
}

json study_config_to_json(const StudyConfig& c) {
  return json{{"study_id", c.study_id},
              {"dataset", c.dataset.string()},
              {"model", c.model.string()},
              {"explainer", c.explainer ? explainer_to_json(*c.explainer) : json()},
              {"gates", gates_to_json(c.gates)},
              {"perturbation",
               {{"epsilon", c.epsilon ? json(*c.epsilon) : json()},
                {"num_samples", c.num_samples},
                {"seed", c.perturbation_seed}}},
              {"randomisation_seed", c.randomisation_seed},
              {"complexity_k", c.complexity_k ? json(*c.complexity_k) : json()},
              {"altai_bank", c.altai_bank.string()},
              {"altai_answers", c.altai_answers.string()},
              {"trust",
               {{"max_cases", c.trust.max_cases},
                {"session_seed", c.trust.session_seed},
                {"keep_fraction", c.trust.keep_fraction},
                {"class_names", c.trust.class_names}}}};
}

StudyConfig load_study_config(const fs::path& study_dir) {
  const auto path = study_dir / "study.json";
  if (!fs::exists(path)) throw Error(ErrorCode::UnknownStudy, "no study.json in " + study_dir.string());
  return study_config_from_json(io::read_json(path));
}

// ---------------------------------------------------------------------------
// Results and state serialization

std::string GateOutcome::line() const {
  return name + "=" + fixed(measured, 6) + ", threshold=" + threshold_text(threshold) +
         ", pass=" + (pass ? "true" : "false");
}

json phase_result_to_json(const PhaseResult& r) {
  json gates = json::array();
  for (const auto& g : r.gates) gates.push_back(gate_to_json(g));
  return json{{"phase", phase_name(r.phase)},
              {"attempt", r.attempt},
              {"pass", r.pass},
              {"reasons", r.reasons},
              {"gates", std::move(gates)},
              {"altai", r.altai ? altai::verdict_to_json(*r.altai) : json()},
              {"metrics", r.metrics}};
}

PhaseResult phase_result_from_json(const json& j) {
  PhaseResult r;
  r.phase = phase_from(j.at("phase"));
  r.attempt = j.at("attempt").get<std::size_t>();
  r.pass = j.at("pass").get<bool>();
  r.reasons = j.at("reasons").get<std::vector<std::string>>();
  for (const auto& g : j.at("gates")) r.gates.push_back(gate_from_json(g));
  if (!j.at("altai").is_null())
    r.altai = altai::Verdict{j["altai"].at("pass").get<bool>(), j["altai"].at("blocking").get<std::vector<std::string>>()};
  r.metrics = j.at("metrics");
  return r;
}

json drift_to_json(const DriftReport& d) {
  return json{{"dataset", d.dataset},
              {"baseline_accuracy", d.baseline_accuracy},
              {"accuracy", d.accuracy},
              {"accuracy_drop", d.accuracy_drop},
              {"accuracy_band", d.accuracy_band},
              {"mean_lle", d.mean_lle},
              {"lle_gate", d.lle_gate},
              {"accuracy_drift", d.accuracy_drift},
              {"lle_drift", d.lle_drift},
              {"flagged", d.flagged},
              {"recommendation", d.recommendation},
              {"altai", d.altai ? altai::verdict_to_json(*d.altai) : json()}};
}

DriftReport drift_from_json(const json& j) {
  DriftReport d;
  d.dataset = j.at("dataset").get<std::string>();
  d.baseline_accuracy = j.at("baseline_accuracy").get<double>();
  d.accuracy = j.at("accuracy").get<double>();
  d.accuracy_drop = j.at("accuracy_drop").get<double>();
  d.accuracy_band = j.at("accuracy_band").get<double>();
  d.mean_lle = j.at("mean_lle").get<double>();
  d.lle_gate = j.at("lle_gate").get<double>();
  d.accuracy_drift = j.at("accuracy_drift").get<bool>();
  d.lle_drift = j.at("lle_drift").get<bool>();
  d.flagged = j.at("flagged").get<bool>();
  d.recommendation = j.at("recommendation").get<std::string>();
  if (!j.at("altai").is_null())
    d.altai = altai::Verdict{j["altai"].at("pass").get<bool>(), j["altai"].at("blocking").get<std::vector<std::string>>()};
  return d;
}

const PhaseResult* StudyState::latest(Phase p) const {
  for (auto it = results.rbegin(); it != results.rend(); ++it) {
    if (it->phase == p && it->attempt == attempt) return &*it;
  }
  return nullptr;
}

json state_to_json(const StudyState& s) {
  json results = json::array();
  for (const auto& r : s.results) results.push_back(phase_result_to_json(r));
  json transitions = json::array();
  for (const auto& t : s.transitions) transitions.push_back(transition_to_json(t));
  json sessions = json::array();
  for (const auto& x : s.sessions) sessions.push_back(session_to_json(x));
  json drift = json::array();
  for (const auto& d : s.drift) drift.push_back(drift_to_json(d));
  return json{{"study_id", s.study_id},
              {"phase", phase_name(s.phase)},
              {"attempt", s.attempt},
              {"config", s.config},
              {"results", std::move(results)},
              {"transitions", std::move(transitions)},
              {"altai_answers", altai::answers_to_json(s.altai_answers)},
              {"sessions", std::move(sessions)},
              {"drift", std::move(drift)},
              {"audit", {{"entries", s.audit_entries}, {"head", s.audit_head}}}};
}

// ---------------------------------------------------------------------------
// Transitions and event folding

StudyState transition(StudyState state, const PhaseResult& result, const std::string& timestamp) {
  if (result.phase != state.phase)
    throw Error(ErrorCode::StalePhaseResult, "result is for " + std::string(phase_name(result.phase)) +
                                                 " but the study is in " + std::string(phase_name(state.phase)));
  if (result.attempt != state.attempt)
    throw Error(ErrorCode::StalePhaseResult, "result belongs to attempt " + std::to_string(result.attempt) +
                                                 ", current attempt is " + std::to_string(state.attempt));
  TransitionRecord t;
  t.from = state.phase;
  t.pass = result.pass;
  t.timestamp = timestamp;
  state.results.push_back(result);
  if (result.pass) {
    state.phase = next_phase(state.phase);
  } else {
    state.phase = Phase::PreEvaluation;
    ++state.attempt;
  }
  t.to = state.phase;
  t.attempt = state.attempt;
  state.transitions.push_back(t);
  return state;
}

void apply_event(StudyState& state, const AuditEvent& e) {
  try {
    const auto& p = e.payload;
    if (e.event == "study_created") {
      state.study_id = p.at("study_id").get<std::string>();
      state.config = p.at("config");
    } else if (e.event == "config_updated") {
      state.config = p.at("config");
    } else if (e.event == "altai_answers_recorded") {
      state.altai_answers = altai::answers_from_json(p.at("answers"));
    } else if (e.event == "phase_completed") {
      state = transition(std::move(state), phase_result_from_json(p.at("result")), e.timestamp);
    } else if (e.event == "session_created") {
      state.sessions.push_back(session_from_json(p));
    } else if (e.event == "drift_flagged") {
      state.drift.push_back(drift_from_json(p));
    } else {
      throw Error(ErrorCode::AuditCorrupt, "unknown audit event '" + e.event + "'");
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::AuditCorrupt, "event " + std::to_string(e.seq) + ": " + ex.what());
  }
  state.audit_entries = e.seq;
  state.audit_head = e.digest;
}

StudyState replay(const std::vector<AuditEvent>& events) {
  StudyState s;
  for (const auto& e : events) apply_event(s, e);
  return s;
}

// ---------------------------------------------------------------------------
// Gate verdicts

PhaseResult phase0_verdict(double accuracy, const altai::Verdict& checklist, bool attestation_present,
                           const GateConfig& gates, std::size_t attempt) {
  PhaseResult r;
  r.phase = Phase::PreEvaluation;
  r.attempt = attempt;
  r.gates.push_back(gate("accuracy", accuracy, gates.accuracy_min, ">=", "accuracy >= accuracy_min"));
  r.altai = checklist;
  if (!r.gates.back().pass) r.reasons.push_back("AccuracyBelowMinimum");
  if (!checklist.pass) r.reasons.push_back("AltaiBlocking");
  if (!attestation_present) r.reasons.push_back("MissingAttestation");
  r.pass = r.reasons.empty();
  r.metrics = json{{"accuracy", accuracy}, {"attestation_present", attestation_present}};
  return r;
}

PhaseResult phase1_verdict(const MetricSummary& lle, double randomisation_rho_mean, const altai::Verdict& checklist,
                           const GateConfig& gates, std::size_t attempt) {
  PhaseResult r;
  r.phase = Phase::MachineCentred;
  r.attempt = attempt;
  r.gates.push_back(gate("mean_lle", lle.mean, gates.lle_gate, "<=",
                         "mean LLE <= lle_gate (fixed cut on the bounded [0,1] LLE scale)"));
  if (!r.gates.back().pass) r.reasons.push_back("LleAboveGate");
  r.gates.push_back(gate("randomisation_rho_mean", randomisation_rho_mean, gates.randomisation_rho_max, "<",
                         "mean Spearman rho between original and randomised-model attributions < randomisation_rho_max"));
  if (!r.gates.back().pass) r.reasons.push_back("RandomisationFailed");
  r.altai = checklist;
  if (!checklist.pass) r.reasons.push_back("AltaiBlocking");
  r.pass = r.reasons.empty();
  r.metrics = json{{"lle", summary_to_json(lle)}};
  return r;
}

PhaseResult phase2_verdict(double mean_trust_f1, const altai::Verdict& checklist, const GateConfig& gates,
                           std::size_t attempt) {
  PhaseResult r;
  r.phase = Phase::HumanCentred;
  r.attempt = attempt;
  r.gates.push_back(gate("mean_trust_f1", mean_trust_f1, gates.trust_f1_min, ">=", "mean trust F1 >= trust_f1_min"));
  if (!r.gates.back().pass) r.reasons.push_back("TrustF1BelowMinimum");
  r.altai = checklist;
  if (!checklist.pass) r.reasons.push_back("AltaiBlocking");
  r.pass = r.reasons.empty();
  std::string layer = r.pass ? "none" : (!r.gates.back().pass ? "trust" : "altai");
  r.metrics = json{{"mean_trust_f1", mean_trust_f1}, {"failing_layer", layer}};
  return r;
}

// ---------------------------------------------------------------------------
// Phase execution

StudyContext load_context(const fs::path& study_dir) {
  auto config = load_study_config(study_dir);
  if (config.dataset.empty()) throw Error(ErrorCode::ConfigurationIncomplete, "study.json names no dataset");
  if (config.model.empty()) throw Error(ErrorCode::ConfigurationIncomplete, "study.json names no model");
  if (!config.explainer) throw Error(ErrorCode::ConfigurationIncomplete, "study.json names no explainer");
  auto dataset = load_dataset(study_dir / config.dataset);
  Model model(load_model(study_dir / config.model));
  if (model.spec().built_in() && !dataset.empty() && shape_size(dataset.input_shape()) != model.spec().input_width())
    throw Error(ErrorCode::ShapeMismatch, "model input width does not match the dataset");
  if (model.num_classes() != dataset.num_classes)
    throw Error(ErrorCode::ShapeMismatch, "model class count does not match the dataset");
  auto explainer = make_explainer(*config.explainer);
  altai::QuestionBank bank = config.altai_bank.empty() ? altai::default_question_bank()
                                                       : altai::bank_from_json(io::read_json(study_dir / config.altai_bank));
  return StudyContext{std::move(config), std::move(dataset), std::move(model), std::move(explainer), std::move(bank)};
}

altai::Verdict checklist_for(Phase phase, const altai::QuestionBank& bank,
                             const std::vector<altai::AnswerRecord>& answers) {
  auto items = altai::apply_answers(altai::items_for_phase(phase, bank), answers);
  return altai::evaluate_checklist(items, phase);
}

PhaseResult run_phase0(const StudyState& state, const StudyContext& ctx) {
  if (state.phase != Phase::PreEvaluation) throw Error(ErrorCode::WrongPhase, "study is not in PreEvaluation");
  const double acc = accuracy(ctx.model, ctx.dataset);
  auto r = phase0_verdict(acc, checklist_for(Phase::PreEvaluation, ctx.bank, state.altai_answers),
                          ctx.dataset.attestation_present(), ctx.config.gates, state.attempt);
  r.metrics["dataset"] = ctx.dataset.name;
  r.metrics["num_instances"] = ctx.dataset.size();
  r.metrics["anonymized"] = ctx.dataset.anonymized;
  r.metrics["consent_basis"] = ctx.dataset.consent_basis;
  return r;
}

PhaseResult run_phase1(const StudyState& state, const StudyContext& ctx) {
  if (state.phase != Phase::MachineCentred)
    throw Error(ErrorCode::WrongPhase, "MachineCentred runs only after PreEvaluation passed");
  if (ctx.dataset.empty()) throw Error(ErrorCode::EmptyDataset, "no instances to evaluate");
  const auto pc = perturbation_for(ctx);
  const auto& explainer = *ctx.explainer;
  const auto& model = ctx.model;

  auto lle = lle_summary(model, explainer, ctx.dataset, pc);

  std::vector<std::pair<std::string, double>> sens_avg, sens_max, fid_f1, fid_cos, loc, entropy, topk;
  std::size_t zero_attributions = 0;
  const bool has_gt = std::all_of(ctx.dataset.instances.begin(), ctx.dataset.instances.end(),
                                  [](const Instance& i) { return i.gt_attribution.has_value(); });
  const bool has_roi = std::all_of(ctx.dataset.instances.begin(), ctx.dataset.instances.end(),
                                   [](const Instance& i) { return i.roi.has_value(); });
  for (const auto& inst : ctx.dataset.instances) {
    sens_avg.emplace_back(inst.id, sensitivity(model, explainer, inst, pc, SensitivityMode::avg));
    sens_max.emplace_back(inst.id, sensitivity(model, explainer, inst, pc, SensitivityMode::max));

    const auto x = inst.input.to_doubles();
    const auto target = argmax(model.scores(x, inst.input.shape()));
    const auto a = explainer.attribute(model, x, inst.input.shape(), target, inst.id);
    if (has_gt) {
      const auto gt = inst.gt_attribution->to_doubles();
      auto f = fidelity_vs_gt(a, gt);
      fid_f1.emplace_back(inst.id, f.f1);
      fid_cos.emplace_back(inst.id, f.cosine);
    }
    bool all_zero = std::all_of(a.begin(), a.end(), [](double v) { return v == 0.0; });
    if (all_zero) {
      ++zero_attributions;
      continue;
    }
    if (has_roi) loc.emplace_back(inst.id, localisation(a, inst.roi->to_doubles()));
    std::size_t k = ctx.config.complexity_k.value_or(0);
    if (k == 0) {
      if (has_gt) {
        for (float g : inst.gt_attribution->data()) k += g != 0.0f ? 1 : 0;
      } else {
        k = std::max<std::size_t>(1, a.size() / 10);
      }
    }
    auto c = complexity(a, std::min(k, a.size()));
    entropy.emplace_back(inst.id, c.entropy);
    topk.emplace_back(inst.id, c.topk_mass);
  }

  double rho_mean = 1.0;
  json randomisation;
  if (model.spec().built_in()) {
    auto rnd = randomisation_check(model, explainer, ctx.dataset, ctx.config.randomisation_seed,
                                   ctx.config.gates.randomisation_rho_max);
    rho_mean = rnd.rho_mean;
    json per = json::array();
    for (const auto& [id, rho] : rnd.per_instance) per.push_back(json{{"instance_id", id}, {"score", rho}});
    randomisation = json{{"rho_mean", rnd.rho_mean}, {"pass", rnd.pass}, {"per_instance", std::move(per)},
                         {"reinit_seed", ctx.config.randomisation_seed}};
  } else {
    randomisation = json{{"available", false}, {"reason", "model parameters are not accessible for external models"}};
  }

  auto r = phase1_verdict(lle, rho_mean, checklist_for(Phase::MachineCentred, ctx.bank, state.altai_answers),
                          ctx.config.gates, state.attempt);
  if (!model.spec().built_in()) r.reasons.push_back("RandomisationUnavailable");
  auto& m = r.metrics;
  m["explainer"] = explainer.id();
  m["perturbation"] = json{{"epsilon", pc.epsilon},
                           {"num_samples", pc.num_samples},
                           {"seed", pc.seed},
                           {"epsilon_rule", ctx.config.epsilon ? "configured" : "0.1 x dataset input std"}};
  m["sensitivity_avg"] = summary_to_json(aggregate(std::move(sens_avg)));
  m["sensitivity_max"] = summary_to_json(aggregate(std::move(sens_max)));
  m["randomisation"] = std::move(randomisation);
  if (!fid_f1.empty()) {
    m["fidelity_f1"] = summary_to_json(aggregate(std::move(fid_f1)));
    m["fidelity_cosine"] = summary_to_json(aggregate(std::move(fid_cos)));
    m["fidelity_note"] = "ground truth from a synthetic attribution benchmark (additive-patch generator)";
  }
  if (!loc.empty()) m["localisation"] = summary_to_json(aggregate(std::move(loc)));
  if (!entropy.empty()) {
    m["complexity_entropy"] = summary_to_json(aggregate(std::move(entropy)));
    m["complexity_topk_mass"] = summary_to_json(aggregate(std::move(topk)));
  }
  m["all_zero_attributions"] = zero_attributions;
  return r;
}

PhaseResult run_phase2(const StudyState& state, const StudyContext& ctx, const std::vector<TrustSession>& sessions) {
  if (state.phase != Phase::HumanCentred)
    throw Error(ErrorCode::WrongPhase, "HumanCentred runs only after MachineCentred passed");
  std::map<std::string, std::vector<TrustJudgment>> by_user;
  std::size_t complete = 0;
  for (const auto& s : sessions) {
    if (!s.complete()) continue;
    ++complete;
    auto& js = by_user[s.user_id()];
    js.insert(js.end(), s.judgments().begin(), s.judgments().end());
  }
  if (complete == 0) throw Error(ErrorCode::NoCompleteSessions, "no complete trust session recorded");

  std::map<std::string, bool> outcomes;
  for (const auto& inst : ctx.dataset.instances)
    outcomes[inst.id] = predict(ctx.model, inst.input).predicted_class == inst.label;

  std::vector<TrustMetrics> per_user;
  json rows = json::array();
  for (const auto& [user, judgments] : by_user) {
    auto c = build_confusion(judgments, outcomes);
    auto m = trust_metrics(c);
    per_user.push_back(m);
    auto row = trust_row(m);
    row["user_id"] = user;
    row["confusion"] = json{{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
    rows.push_back(std::move(row));
  }
  const auto mean = aggregate_users(per_user);
  auto r = phase2_verdict(mean.f1, checklist_for(Phase::HumanCentred, ctx.bank, state.altai_answers),
                          ctx.config.gates, state.attempt);
  r.metrics["per_user"] = std::move(rows);
  r.metrics["mean"] = trust_row(mean);
  r.metrics["complete_sessions"] = complete;
  return r;
}

DriftReport run_operation_monitor(const StudyState& state, const StudyContext& ctx, const Dataset& new_dataset) {
  if (state.phase != Phase::Operation) throw Error(ErrorCode::WrongPhase, "monitoring runs only in Operation");
  if (new_dataset.empty()) throw Error(ErrorCode::EmptyDataset, "monitoring dataset is empty");
  const auto* baseline = state.latest(Phase::PreEvaluation);
  const auto* machine = state.latest(Phase::MachineCentred);
  if (!baseline || !machine) throw Error(ErrorCode::ConfigurationIncomplete, "no baseline results in this attempt");

  PerturbationConfig pc;
  pc.epsilon = machine->metrics.at("perturbation").at("epsilon").get<double>();
  pc.num_samples = ctx.config.num_samples;
  pc.seed = ctx.config.perturbation_seed;

  DriftReport d;
  d.dataset = new_dataset.name;
  d.baseline_accuracy = baseline->metrics.at("accuracy").get<double>();
  d.accuracy = accuracy(ctx.model, new_dataset);
  d.accuracy_drop = d.baseline_accuracy - d.accuracy;
  d.accuracy_band = ctx.config.gates.drift_accuracy_band;
  d.mean_lle = lle_summary(ctx.model, *ctx.explainer, new_dataset, pc).mean;
  d.lle_gate = ctx.config.gates.lle_gate;
  // Small tolerance so a drop of exactly the band (0.80 -> 0.75) is not flagged by rounding.
  d.accuracy_drift = d.accuracy_drop > d.accuracy_band + 1e-12;
  d.lle_drift = d.mean_lle > d.lle_gate;
  d.flagged = d.accuracy_drift || d.lle_drift;
  d.recommendation = d.flagged ? "return to PreEvaluation" : "continue operation";
  d.altai = checklist_for(Phase::Operation, ctx.bank, state.altai_answers);
  return d;
}

json emit_report(const StudyState& state) {
  if (state.results.empty()) throw Error(ErrorCode::NothingToReport, "no phase has been executed");
  json phases = json::array();
  json gate_lines = json::array();
  for (const auto& r : state.results) {
    phases.push_back(phase_result_to_json(r));
    for (const auto& g : r.gates) gate_lines.push_back(std::string(phase_name(r.phase)) + "#" + std::to_string(r.attempt) + ": " + g.line());
  }
  json altai_verdicts = json::object();
  for (const auto& r : state.results) {
    if (r.altai) altai_verdicts[std::string(phase_name(r.phase))] = altai::verdict_to_json(*r.altai);
  }
  json trust = nullptr;
  for (auto it = state.results.rbegin(); it != state.results.rend(); ++it) {
    if (it->phase == Phase::HumanCentred && it->metrics.contains("per_user")) {
      trust = json{{"attempt", it->attempt}, {"per_user", it->metrics["per_user"]}, {"mean", it->metrics["mean"]}};
      break;
    }
  }
  json transitions = json::array();
  for (const auto& t : state.transitions) transitions.push_back(transition_to_json(t));
  json drift = json::array();
  for (const auto& d : state.drift) drift.push_back(drift_to_json(d));
  return json{{"study", {{"study_id", state.study_id}, {"current_phase", phase_name(state.phase)}, {"attempt", state.attempt}}},
              {"configuration", state.config},
              {"phases", std::move(phases)},
              {"gate_lines", std::move(gate_lines)},
              {"altai", std::move(altai_verdicts)},
              {"trust", std::move(trust)},
              {"transitions", std::move(transitions)},
              {"sessions", state.sessions.size()},
              {"monitoring", std::move(drift)},
              {"audit", {{"entries", state.audit_entries}, {"head_digest", state.audit_head}}}};
}

std::vector<CsvRow> phase1_csv_rows(const PhaseResult& result) {
  std::vector<CsvRow> rows;
  for (const char* name : {"lle", "sensitivity_avg", "sensitivity_max", "fidelity_f1", "fidelity_cosine",
                           "localisation", "complexity_entropy", "complexity_topk_mass"}) {
    if (!result.metrics.contains(name)) continue;
    for (const auto& [id, v] : per_instance_from(result.metrics[name])) rows.push_back(CsvRow{id, name, v});
  }
  if (result.metrics.contains("randomisation") && result.metrics["randomisation"].contains("per_instance")) {
    for (const auto& [id, v] : per_instance_from(result.metrics["randomisation"]))
      rows.push_back(CsvRow{id, "randomisation_rho", v});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const CsvRow& a, const CsvRow& b) { return a.instance_id < b.instance_id; });
  return rows;
}

// ---------------------------------------------------------------------------
// Study directory

Study::Study(fs::path dir, StudyConfig config, AuditLog audit, Clock clock)
    : dir_(std::move(dir)), config_(std::move(config)), audit_(std::move(audit)), clock_(std::move(clock)) {
  state_ = replay(audit_.events());
}

Study Study::open(const fs::path& dir, Clock clock) {
  auto config = load_study_config(dir);
  auto audit = AuditLog::open(dir / "audit.log");
  Study study(dir, std::move(config), std::move(audit), std::move(clock));
  const auto config_json = study_config_to_json(study.config_);
  if (study.audit_.size() == 0) {
    study.commit("study_created", json{{"study_id", study.config_.study_id}, {"config", config_json}});
  } else {
    if (study.state_.study_id != study.config_.study_id)
      throw Error(ErrorCode::InvalidConfig, "study.json study_id differs from the audited study");
    if (study.state_.config != config_json) study.commit("config_updated", json{{"config", config_json}});
    study.write_snapshot();
  }
  return study;
}

std::string Study::now() const { return clock_ ? clock_() : io::utc_timestamp(); }

const StudyContext& Study::context() {
  if (!context_) context_ = std::make_unique<StudyContext>(load_context(dir_));
  return *context_;
}

void Study::commit(const std::string& event, json payload) {
  const auto timestamp = now();
  {
    // Dry run so an invalid event never reaches the log.
    AuditEvent probe;
    probe.seq = audit_.size() + 1;
    probe.timestamp = timestamp;
    probe.event = event;
    probe.payload = payload;
    StudyState scratch = state_;
    apply_event(scratch, probe);
  }
  const auto& e = audit_.append(actor_, event, std::move(payload), timestamp);
  apply_event(state_, e);
  write_snapshot();
}

void Study::write_snapshot() const { io::write_json(dir_ / "state.json", state_to_json(state_)); }

void Study::record_altai_answers(const std::vector<altai::AnswerRecord>& answers) {
  std::map<std::string, altai::AnswerRecord> merged;
  for (const auto& a : state_.altai_answers) merged[a.item_id] = a;
  for (const auto& a : answers) merged[a.item_id] = a;
  std::vector<altai::AnswerRecord> all;
  for (auto& [id, a] : merged) all.push_back(std::move(a));
  commit("altai_answers_recorded", json{{"answers", altai::answers_to_json(all)}});
}

bool Study::sync_altai_answers() {
  const auto path = dir_ / config_.altai_answers;
  if (config_.altai_answers.empty() || !fs::exists(path)) return false;
  auto answers = altai::answers_from_json(io::read_json(path));
  std::map<std::string, altai::AnswerRecord> current;
  for (const auto& a : state_.altai_answers) current[a.item_id] = a;
  bool differs = false;
  for (const auto& a : answers) {
    auto it = current.find(a.item_id);
    if (it == current.end() || it->second.answer != a.answer || it->second.evidence != a.evidence) differs = true;
  }
  if (!differs) return false;
  record_altai_answers(answers);
  return true;
}

PhaseResult Study::run_current_phase() {
  switch (state_.phase) {
    case Phase::PreEvaluation: return run_phase0(state_, context());
    case Phase::MachineCentred: return run_phase1(state_, context());
    case Phase::HumanCentred: return run_phase2(state_, context(), sessions().load_all());
    case Phase::Operation: break;
  }
  throw Error(ErrorCode::WrongPhase, "Operation is monitored, not run; use monitor");
}

void Study::advance(const PhaseResult& result) {
  transition(state_, result);  // validates before anything is logged
  commit("phase_completed", json{{"result", phase_result_to_json(result)},
                                 {"from", phase_name(state_.phase)},
                                 {"to", phase_name(result.pass ? next_phase(state_.phase) : Phase::PreEvaluation)}});
}

SessionRecord Study::create_session(const std::string& user_id) {
  if (state_.phase != Phase::HumanCentred)
    throw Error(ErrorCode::WrongPhase, "trust sessions open only in HumanCentred (study is in " +
                                           std::string(phase_name(state_.phase)) + ")");
  if (user_id.empty()) throw Error(ErrorCode::InvalidConfig, "user_id must not be empty");
  const auto& ctx = context();
  auto store = sessions();
  const std::size_t counter = std::max(state_.sessions.size(), store.count()) + 1;
  char id[32];
  std::snprintf(id, sizeof id, "sess-%04zu", counter);

  std::vector<std::string> cases;
  for (const auto& inst : ctx.dataset.instances) cases.push_back(inst.id);
  const std::uint64_t seed = config_.trust.session_seed * 1000003ULL + counter;
  auto rng = stream_rng(seed, "session-order");
  std::shuffle(cases.begin(), cases.end(), rng);
  if (config_.trust.max_cases > 0 && cases.size() > config_.trust.max_cases) cases.resize(config_.trust.max_cases);

  SessionRecord rec{id, user_id, seed, cases.size(), now()};
  store.create(rec.session_id, user_id, cases, seed, rec.timestamp);
  commit("session_created", json{{"session_id", rec.session_id},
                                 {"user_id", rec.user_id},
                                 {"shuffle_seed", rec.shuffle_seed},
                                 {"num_cases", rec.num_cases},
                                 {"timestamp", rec.timestamp},
                                 {"case_order", "seeded shuffle"}});
  return rec;
}

DriftReport Study::monitor(const Dataset& new_dataset) {
  auto d = run_operation_monitor(state_, context(), new_dataset);
  if (d.flagged) commit("drift_flagged", drift_to_json(d));
  return d;
}

fs::path Study::write_report(const fs::path& out) const {
  const auto path = out.empty() ? dir_ / "report.json" : out;
  io::write_json(path, report());
  return path;
}

}  // namespace xaihealth
