#include "xaihealth/phase.hpp"

namespace xaihealth {

std::string_view phase_name(Phase p) noexcept {
  switch (p) {
    case Phase::PreEvaluation: return "PreEvaluation";
    case Phase::MachineCentred: return "MachineCentred";
    case Phase::HumanCentred: return "HumanCentred";
    case Phase::Operation: return "Operation";
  }
  return "?";
}

std::optional<Phase> parse_phase(std::string_view name) noexcept {
  for (auto p : kAllPhases) {
    if (phase_name(p) == name) return p;
  }
  // Lower-case aliases for command lines.
  if (name == "pre" || name == "pre-evaluation" || name == "phase0") return Phase::PreEvaluation;
  if (name == "machine" || name == "machine-centred" || name == "phase1") return Phase::MachineCentred;
  if (name == "human" || name == "human-centred" || name == "phase2") return Phase::HumanCentred;
  if (name == "operation" || name == "monitor") return Phase::Operation;
  return std::nullopt;
}

}  // namespace xaihealth
