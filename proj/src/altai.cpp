#include "xaihealth/altai.hpp"

#include <algorithm>
#include <set>

#include "xaihealth/error.hpp"

namespace xaihealth::altai {
namespace {

using nlohmann::json;

Item item(std::string id, Requirement r, std::string q) {
  return Item{std::move(id), r, std::move(q), Answer::unanswered, {}};
}

bool needs_evidence(Answer a) { return a == Answer::yes || a == Answer::not_applicable; }

}  // namespace

std::string_view requirement_name(Requirement r) noexcept {
  switch (r) {
    case Requirement::HumanAgencyOversight: return "HumanAgencyOversight";
    case Requirement::TechnicalRobustnessSafety: return "TechnicalRobustnessSafety";
    case Requirement::PrivacyDataGovernance: return "PrivacyDataGovernance";
    case Requirement::Transparency: return "Transparency";
    case Requirement::DiversityNonDiscriminationFairness: return "DiversityNonDiscriminationFairness";
    case Requirement::SocietalEnvironmentalWellbeing: return "SocietalEnvironmentalWellbeing";
    case Requirement::Accountability: return "Accountability";
  }
  return "?";
}

std::optional<Requirement> parse_requirement(std::string_view name) noexcept {
  for (auto r : kAllRequirements) {
    if (requirement_name(r) == name) return r;
  }
  return std::nullopt;
}

std::vector<Requirement> required_for(Phase phase) {
  switch (phase) {
    case Phase::PreEvaluation:
      return {Requirement::PrivacyDataGovernance, Requirement::DiversityNonDiscriminationFairness,
              Requirement::SocietalEnvironmentalWellbeing};
    case Phase::MachineCentred: return {Requirement::TechnicalRobustnessSafety, Requirement::Transparency};
    case Phase::HumanCentred: return {Requirement::HumanAgencyOversight};
    case Phase::Operation: return {kAllRequirements.begin(), kAllRequirements.end()};
  }
  return {};
}

std::string_view answer_name(Answer a) noexcept {
  switch (a) {
    case Answer::yes: return "yes";
    case Answer::no: return "no";
    case Answer::not_applicable: return "not_applicable";
    case Answer::unanswered: return "unanswered";
  }
  return "?";
}

std::optional<Answer> parse_answer(std::string_view name) noexcept {
  for (auto a : {Answer::yes, Answer::no, Answer::not_applicable, Answer::unanswered}) {
    if (answer_name(a) == name) return a;
  }
  return std::nullopt;
}

const QuestionBank& default_question_bank() {
  static const QuestionBank bank{
      item("HAO-1", Requirement::HumanAgencyOversight,
           "Are users aware they are interacting with AI, and is this disclosed on every screen that shows its output?"),
      item("HAO-2", Requirement::HumanAgencyOversight,
           "Can the clinician override or disregard the system's prediction at every decision point?"),
      item("TRS-1", Requirement::TechnicalRobustnessSafety,
           "Has explanation robustness been measured and compared against a stated acceptance threshold?"),
      item("TRS-2", Requirement::TechnicalRobustnessSafety,
           "Is there a documented fallback procedure for failures or out-of-distribution inputs?"),
      item("PDG-1", Requirement::PrivacyDataGovernance,
           "Is the data anonymised, or is the legal basis for processing personal data documented?"),
      item("PDG-2", Requirement::PrivacyDataGovernance,
           "Are access to and retention of the evaluation data controlled and logged?"),
      item("TRA-1", Requirement::Transparency, "Is an explanation shown together with every prediction?"),
      item("TRA-2", Requirement::Transparency,
           "Are the capabilities and known limitations of the system documented for its users?"),
      item("DNF-1", Requirement::DiversityNonDiscriminationFairness,
           "Has the dataset been checked for under-representation of relevant patient groups?"),
      item("DNF-2", Requirement::DiversityNonDiscriminationFairness,
           "Has performance been compared across relevant patient subgroups?"),
      item("SEW-1", Requirement::SocietalEnvironmentalWellbeing,
           "Has the impact on clinical workflow and staff been assessed?"),
      item("SEW-2", Requirement::SocietalEnvironmentalWellbeing,
           "Has the energy cost of training and operating the system been considered?"),
      item("ACC-1", Requirement::Accountability,
           "Is there an audit trail of evaluation decisions and of who made them?"),
      item("ACC-2", Requirement::Accountability,
           "Is there a process to report, investigate and redress harm caused by the system?"),
  };
  return bank;
}

QuestionBank bank_from_json(const json& doc) {
  QuestionBank bank;
  try {
    for (const auto& e : doc) {
      auto req = parse_requirement(e.at("requirement").get<std::string>());
      if (!req) throw Error(ErrorCode::InvalidConfig, "unknown ALTAI requirement " + e.at("requirement").dump());
      bank.push_back(item(e.at("item_id").get<std::string>(), *req, e.at("question").get<std::string>()));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  return bank;
}

json bank_to_json(const QuestionBank& bank) {
  json out = json::array();
  for (const auto& it : bank) {
    out.push_back(json{{"item_id", it.item_id},
                       {"requirement", requirement_name(it.requirement)},
                       {"question", it.question}});
  }
  return out;
}

std::vector<AnswerRecord> answers_from_json(const json& doc) {
  std::vector<AnswerRecord> out;
  try {
    for (const auto& e : doc) {
      auto a = parse_answer(e.at("answer").get<std::string>());
      if (!a) throw Error(ErrorCode::InvalidConfig, "unknown ALTAI answer " + e.at("answer").dump());
      out.push_back(AnswerRecord{e.at("item_id").get<std::string>(), *a, e.value("evidence", std::string{})});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  return out;
}

json answers_to_json(std::span<const AnswerRecord> answers) {
  json out = json::array();
  for (const auto& a : answers)
    out.push_back(json{{"item_id", a.item_id}, {"answer", answer_name(a.answer)}, {"evidence", a.evidence}});
  return out;
}

std::vector<Item> items_for_phase(Phase phase, const QuestionBank& bank) {
  std::set<Requirement> covered;
  for (const auto& it : bank) covered.insert(it.requirement);
  for (auto r : kAllRequirements) {
    if (!covered.count(r))
      throw Error(ErrorCode::IncompleteBank, "question bank has no item for requirement " +
                                                 std::to_string(requirement_number(r)) + " (" +
                                                 std::string(requirement_name(r)) + ")");
  }
  const auto needed = required_for(phase);
  std::vector<Item> out;
  for (const auto& it : bank) {
    if (std::find(needed.begin(), needed.end(), it.requirement) != needed.end()) out.push_back(it);
  }
  return out;
}

std::vector<Item> apply_answers(std::vector<Item> items, std::span<const AnswerRecord> answers) {
  for (auto& it : items) {
    for (const auto& a : answers) {
      if (a.item_id == it.item_id) {
        it.answer = a.answer;
        it.evidence = a.evidence;
      }
    }
  }
  return items;
}

Verdict evaluate_checklist(std::span<const Item> items, Phase phase) {
  const auto needed = required_for(phase);
  Verdict v;
  for (const auto& it : items) {
    if (std::find(needed.begin(), needed.end(), it.requirement) == needed.end()) continue;
    const bool has_evidence = it.evidence.find_first_not_of(" \t\r\n") != std::string::npos;
    const bool ok = needs_evidence(it.answer) && has_evidence;
    if (!ok) v.blocking.push_back(it.item_id);
  }
  v.pass = v.blocking.empty();
  return v;
}

json verdict_to_json(const Verdict& v) { return json{{"pass", v.pass}, {"blocking", v.blocking}}; }

}  // namespace xaihealth::altai
