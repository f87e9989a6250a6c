#pragma once

// Append-only audit trail for a study.
//
// Each line of audit.log is one JSON object:
//   {"seq": n, "timestamp": ..., "actor": ..., "event": ..., "payload": {...},
//    "prev": <digest of entry n-1>, "digest": <sha256 hex>}
// where digest = sha256(prev | seq | timestamp | actor | event | payload.dump()).
// The chain makes edits to earlier entries detectable on load. Entries are
// never rewritten; sequence numbers start at 1 and increase by one.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace xaihealth {

struct AuditEvent {
  std::uint64_t seq = 0;
  std::string timestamp;
  std::string actor;
  std::string event;
  nlohmann::json payload;
  std::string prev;
  std::string digest;

  nlohmann::json to_json() const;
};

std::string sha256_hex(std::string_view data);
std::string audit_digest(const AuditEvent& e);

class AuditLog {
 public:
  /// Loads and verifies an existing log (AuditCorrupt on a broken chain);
  /// a missing file yields an empty log.
  static AuditLog open(std::filesystem::path path);

  const std::vector<AuditEvent>& events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }
  const std::string& head() const noexcept;

  /// Persists (with fsync) before returning the stored entry.
  const AuditEvent& append(std::string actor, std::string event, nlohmann::json payload, std::string timestamp);

 private:
  explicit AuditLog(std::filesystem::path path) : path_(std::move(path)) {}
  std::filesystem::path path_;
  std::vector<AuditEvent> events_;
};

}  // namespace xaihealth
