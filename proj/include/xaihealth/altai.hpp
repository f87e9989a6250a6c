#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "xaihealth/phase.hpp"

namespace xaihealth::altai {

// The seven requirements of the Assessment List for Trustworthy AI, in
// their canonical order (numbered 1..7).
enum class Requirement {
  HumanAgencyOversight = 1,
  TechnicalRobustnessSafety,
  PrivacyDataGovernance,
  Transparency,
  DiversityNonDiscriminationFairness,
  SocietalEnvironmentalWellbeing,
  Accountability,
};

inline constexpr std::array<Requirement, 7> kAllRequirements{
    Requirement::HumanAgencyOversight,          Requirement::TechnicalRobustnessSafety,
    Requirement::PrivacyDataGovernance,         Requirement::Transparency,
    Requirement::DiversityNonDiscriminationFairness, Requirement::SocietalEnvironmentalWellbeing,
    Requirement::Accountability};

std::string_view requirement_name(Requirement r) noexcept;
std::optional<Requirement> parse_requirement(std::string_view name) noexcept;
constexpr int requirement_number(Requirement r) noexcept { return static_cast<int>(r); }

/// Requirements a phase must satisfy:
///   PreEvaluation {3,5,6}, MachineCentred {2,4}, HumanCentred {1}, Operation all seven.
std::vector<Requirement> required_for(Phase phase);

enum class Answer { yes, no, not_applicable, unanswered };

std::string_view answer_name(Answer a) noexcept;
std::optional<Answer> parse_answer(std::string_view name) noexcept;

struct Item {
  std::string item_id;
  Requirement requirement = Requirement::HumanAgencyOversight;
  std::string question;
  Answer answer = Answer::unanswered;
  std::string evidence;  // mandatory for yes and not_applicable
};

struct AnswerRecord {
  std::string item_id;
  Answer answer = Answer::unanswered;
  std::string evidence;
};

using QuestionBank = std::vector<Item>;

/// Two items per requirement.
const QuestionBank& default_question_bank();

QuestionBank bank_from_json(const nlohmann::json& doc);
nlohmann::json bank_to_json(const QuestionBank& bank);
std::vector<AnswerRecord> answers_from_json(const nlohmann::json& doc);
nlohmann::json answers_to_json(std::span<const AnswerRecord> answers);

/// Items of the bank whose requirement the phase needs, in bank order.
/// Throws IncompleteBank unless every requirement has at least one item.
std::vector<Item> items_for_phase(Phase phase, const QuestionBank& bank);

/// Later records for the same item id win.
std::vector<Item> apply_answers(std::vector<Item> items, std::span<const AnswerRecord> answers);

struct Verdict {
  bool pass = false;
  std::vector<std::string> blocking;
};

/// Passes iff every item is yes/not_applicable with non-empty evidence.
/// Items whose requirement the phase does not need are ignored.
Verdict evaluate_checklist(std::span<const Item> items, Phase phase);

nlohmann::json verdict_to_json(const Verdict& v);

}  // namespace xaihealth::altai
