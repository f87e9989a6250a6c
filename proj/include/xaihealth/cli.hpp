#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "xaihealth/error.hpp"

namespace xaihealth {

// Exit codes are a stable contract for CI.
inline constexpr int kExitPass = 0;
inline constexpr int kExitGateFail = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

int exit_code_for(ErrorCode code) noexcept;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace xaihealth
