#pragma once

// HTTP service for trust elicitation and ALTAI questionnaires.
//
//   POST /api/sessions                    {user_id, study_id} -> 201 {session_id, num_cases}
//   GET  /api/sessions/{id}/next          ?keep_fraction=  -> CaseView or {"done": true, ...}
//   POST /api/sessions/{id}/judgments     {case_id, trusted, keep_fraction?} -> ack
//   GET  /api/sessions/{id}/status
//   GET  /api/altai/{phase}
//   POST /api/altai/answers               {answers: [...], user_id?}
//
// No response served while a session is open carries labels, correctness
// or trust metrics. All state lives on disk, so a restarted service picks
// up sessions where they stopped.

#include <filesystem>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "xaihealth/error.hpp"
#include "xaihealth/study.hpp"

namespace xaihealth {

inline constexpr const char* kAiDisclosure =
    "You are interacting with an AI system. The prediction and the highlighted regions were produced by a "
    "machine-learning model and its explanation method; they are decision support, not a diagnosis.";

/// The rendered case: input min-max scaled to [0,1] and the |attribution|
/// overlay for the predicted class after thresholding, scaled by its max.
/// Tensors are shown as rows x cols with cols = last dimension.
nlohmann::json render_case_view(const StudyContext& ctx, const Instance& instance, double keep_fraction);

/// HTTP status used for a library error code.
int http_status(ErrorCode code) noexcept;

class TrustService {
 public:
  TrustService(std::filesystem::path study_dir, std::filesystem::path ui_dir = {});
  ~TrustService();
  TrustService(const TrustService&) = delete;
  TrustService& operator=(const TrustService&) = delete;

  /// Binds (port 0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace xaihealth
