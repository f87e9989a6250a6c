#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace xaihealth {

struct TrustJudgment {
  std::string case_id;
  std::string user_id;
  bool trusted = false;
  std::string timestamp;
};

/// Model correctness crossed with the rater's trust decision.
///   tp: correct & trusted     fp: incorrect & trusted
///   fn: correct & distrusted  tn: incorrect & distrusted
struct TrustConfusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const noexcept { return tp + fp + fn + tn; }
  friend bool operator==(const TrustConfusion&, const TrustConfusion&) = default;
};

struct TrustMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

TrustConfusion build_confusion(std::span<const TrustJudgment> judgments,
                               const std::map<std::string, bool>& model_correct);

// Zero denominators yield 0 rather than an error.
TrustMetrics trust_metrics(const TrustConfusion& c);

// Field-wise arithmetic mean across users.
TrustMetrics aggregate_users(std::span<const TrustMetrics> per_user);

// Half-up rounding used for display; stored values keep full precision.
double round_half_up(double value, int decimals);

enum class SessionStatus { open, complete };

/// A rater's pass over an ordered list of cases, at most one judgment per
/// case. The session completes once every case is judged.
class TrustSession {
 public:
  TrustSession(std::string session_id, std::string user_id, std::vector<std::string> cases);

  const std::string& session_id() const noexcept { return session_id_; }
  const std::string& user_id() const noexcept { return user_id_; }
  const std::vector<std::string>& cases() const noexcept { return cases_; }
  const std::vector<TrustJudgment>& judgments() const noexcept { return judgments_; }
  SessionStatus status() const noexcept {
    return judgments_.size() == cases_.size() ? SessionStatus::complete : SessionStatus::open;
  }
  bool complete() const noexcept { return status() == SessionStatus::complete; }
  // First unjudged case, if any.
  std::optional<std::string> current_case() const;
  bool has_case(const std::string& case_id) const;

  void record(const TrustJudgment& judgment);

 private:
  std::string session_id_;
  std::string user_id_;
  std::vector<std::string> cases_;
  std::vector<TrustJudgment> judgments_;
};

/// Validates and appends; the updated session is returned.
TrustSession record_judgment(TrustSession session, const TrustJudgment& judgment);

/// Append-only JSONL persistence. The first line of `sessions/<id>.jsonl`
/// describes the session; each later line is a judgment or a view event.
/// Loading replays the file.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const noexcept { return dir_; }

  TrustSession create(const std::string& session_id, const std::string& user_id,
                      const std::vector<std::string>& cases, std::uint64_t shuffle_seed, const std::string& timestamp);
  // Persists before returning.
  TrustSession append_judgment(const TrustSession& session, const TrustJudgment& judgment,
                               std::optional<double> keep_fraction);
  void append_view(const std::string& session_id, const std::string& case_id, double keep_fraction,
                   const std::string& timestamp);

  std::optional<TrustSession> load(const std::string& session_id) const;
  std::vector<TrustSession> load_all() const;
  std::size_t count() const;

 private:
  std::filesystem::path path_for(const std::string& session_id) const;
  std::filesystem::path dir_;
};

}  // namespace xaihealth
