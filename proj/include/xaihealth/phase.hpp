#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace xaihealth {

enum class Phase { PreEvaluation, MachineCentred, HumanCentred, Operation };

inline constexpr std::array<Phase, 4> kAllPhases{Phase::PreEvaluation, Phase::MachineCentred, Phase::HumanCentred,
                                                 Phase::Operation};

std::string_view phase_name(Phase p) noexcept;
std::optional<Phase> parse_phase(std::string_view name) noexcept;

// Successor on pass; Operation recurs onto itself.
constexpr Phase next_phase(Phase p) noexcept {
  switch (p) {
    case Phase::PreEvaluation: return Phase::MachineCentred;
    case Phase::MachineCentred: return Phase::HumanCentred;
    case Phase::HumanCentred: return Phase::Operation;
    case Phase::Operation: return Phase::Operation;
  }
  return Phase::PreEvaluation;
}

}  // namespace xaihealth
