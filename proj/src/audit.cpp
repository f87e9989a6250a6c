#include "xaihealth/audit.hpp"

#include <openssl/evp.h>

#include <array>
#include <memory>

#include "xaihealth/error.hpp"
#include "xaihealth/io.hpp"

namespace xaihealth {
namespace {

using nlohmann::json;

const std::string kGenesis(64, '0');

}  // namespace

json AuditEvent::to_json() const {
  return json{{"seq", seq},         {"timestamp", timestamp}, {"actor", actor}, {"event", event},
              {"payload", payload}, {"prev", prev},           {"digest", digest}};
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1)
    throw Error(ErrorCode::Io, "sha256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xF]);
  }
  return out;
}

std::string audit_digest(const AuditEvent& e) {
  std::string material = e.prev;
  material += '|' + std::to_string(e.seq) + '|' + e.timestamp + '|' + e.actor + '|' + e.event + '|';
  material += e.payload.dump();
  return sha256_hex(material);
}

AuditLog AuditLog::open(std::filesystem::path path) {
  AuditLog log(std::move(path));
  const auto lines = io::read_lines(log.path_);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    AuditEvent e;
    try {
      auto j = json::parse(lines[i]);
      e.seq = j.at("seq").get<std::uint64_t>();
      e.timestamp = j.at("timestamp").get<std::string>();
      e.actor = j.at("actor").get<std::string>();
      e.event = j.at("event").get<std::string>();
      e.payload = j.at("payload");
      e.prev = j.at("prev").get<std::string>();
      e.digest = j.at("digest").get<std::string>();
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::AuditCorrupt, "line " + std::to_string(i + 1) + ": " + ex.what());
    }
    if (e.seq != i + 1) throw Error(ErrorCode::AuditCorrupt, "sequence gap at line " + std::to_string(i + 1));
    if (e.prev != log.head()) throw Error(ErrorCode::AuditCorrupt, "broken chain at seq " + std::to_string(e.seq));
    if (audit_digest(e) != e.digest)
      throw Error(ErrorCode::AuditCorrupt, "digest mismatch at seq " + std::to_string(e.seq));
    log.events_.push_back(std::move(e));
  }
  return log;
}

const std::string& AuditLog::head() const noexcept { return events_.empty() ? kGenesis : events_.back().digest; }

const AuditEvent& AuditLog::append(std::string actor, std::string event, json payload, std::string timestamp) {
  AuditEvent e;
  e.seq = events_.size() + 1;
  e.timestamp = std::move(timestamp);
  e.actor = std::move(actor);
  e.event = std::move(event);
  e.payload = std::move(payload);
  e.prev = head();
  e.digest = audit_digest(e);
  io::append_line(path_, e.to_json().dump());
  events_.push_back(std::move(e));
  return events_.back();
}

}  // namespace xaihealth
