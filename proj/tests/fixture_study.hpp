#pragma once

#include <filesystem>

#include "xaihealth/io.hpp"
#include "xaihealth/sab.hpp"
#include "xaihealth/trust.hpp"

namespace testing {

// Copies the bundled study template and generates its SAB data.
inline std::filesystem::path make_fixture_study(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  const fs::path fixtures = XAIHEALTH_FIXTURES;
  const auto study = root / "study";
  fs::create_directories(study);
  fs::copy(fixtures / "study", study, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  auto sab = xaihealth::generate_sab(xaihealth::sab_config_from_json(xaihealth::io::read_json(fixtures / "sab_config.json")));
  xaihealth::write_sab(sab, study / "data");
  return study;
}

}  // namespace testing
