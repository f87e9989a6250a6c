#include "xaihealth/trust.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "xaihealth/error.hpp"
#include "xaihealth/io.hpp"

namespace xaihealth {
namespace {

using nlohmann::json;

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

TrustConfusion build_confusion(std::span<const TrustJudgment> judgments,
                               const std::map<std::string, bool>& model_correct) {
  std::set<std::pair<std::string, std::string>> seen;
  TrustConfusion c;
  for (const auto& j : judgments) {
    if (!seen.emplace(j.user_id, j.case_id).second)
      throw Error(ErrorCode::DuplicateJudgment, "user '" + j.user_id + "' judged case '" + j.case_id + "' twice");
    auto it = model_correct.find(j.case_id);
    if (it == model_correct.end()) throw Error(ErrorCode::MissingOutcome, "no model outcome for case '" + j.case_id + "'");
    const bool correct = it->second;
    if (correct && j.trusted) ++c.tp;
    else if (!correct && j.trusted) ++c.fp;
    else if (correct) ++c.fn;
    else ++c.tn;
  }
  return c;
}

TrustMetrics trust_metrics(const TrustConfusion& c) {
  TrustMetrics m;
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

TrustMetrics aggregate_users(std::span<const TrustMetrics> per_user) {
  if (per_user.empty()) throw Error(ErrorCode::EmptyInput, "no users to aggregate");
  TrustMetrics mean;
  for (const auto& m : per_user) {
    mean.precision += m.precision;
    mean.recall += m.recall;
    mean.f1 += m.f1;
  }
  const double n = static_cast<double>(per_user.size());
  mean.precision /= n;
  mean.recall /= n;
  mean.f1 /= n;
  return mean;
}

double round_half_up(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  // The small nudge keeps values such as 0.09515 (stored as 0.0951499...)
  // rounding the way they read.
  return std::floor(value * scale + 0.5 + 1e-9) / scale;
}

TrustSession::TrustSession(std::string session_id, std::string user_id, std::vector<std::string> cases)
    : session_id_(std::move(session_id)), user_id_(std::move(user_id)), cases_(std::move(cases)) {
  std::set<std::string> unique(cases_.begin(), cases_.end());
  if (unique.size() != cases_.size()) throw Error(ErrorCode::InvalidConfig, "session case list has duplicates");
}

std::optional<std::string> TrustSession::current_case() const {
  for (const auto& c : cases_) {
    auto judged = std::any_of(judgments_.begin(), judgments_.end(), [&](const auto& j) { return j.case_id == c; });
    if (!judged) return c;
  }
  return std::nullopt;
}

bool TrustSession::has_case(const std::string& case_id) const {
  return std::find(cases_.begin(), cases_.end(), case_id) != cases_.end();
}

void TrustSession::record(const TrustJudgment& judgment) {
  if (!has_case(judgment.case_id))
    throw Error(ErrorCode::UnknownCase, "case '" + judgment.case_id + "' is not part of session " + session_id_);
  for (const auto& j : judgments_) {
    if (j.case_id == judgment.case_id)
      throw Error(ErrorCode::DuplicateJudgment, "case '" + judgment.case_id + "' already judged");
  }
  if (complete()) throw Error(ErrorCode::SessionComplete, "session " + session_id_ + " is complete");
  if (judgment.user_id != user_id_)
    throw Error(ErrorCode::InvalidConfig, "judgment user does not own session " + session_id_);
  judgments_.push_back(judgment);
}

TrustSession record_judgment(TrustSession session, const TrustJudgment& judgment) {
  session.record(judgment);
  return session;
}

std::filesystem::path SessionStore::path_for(const std::string& session_id) const {
  return dir_ / (session_id + ".jsonl");
}

TrustSession SessionStore::create(const std::string& session_id, const std::string& user_id,
                                  const std::vector<std::string>& cases, std::uint64_t shuffle_seed,
                                  const std::string& timestamp) {
  TrustSession session(session_id, user_id, cases);
  if (std::filesystem::exists(path_for(session_id)))
    throw Error(ErrorCode::InvalidConfig, "session " + session_id + " already exists");
  json header{{"type", "session"},  {"session_id", session_id},     {"user_id", user_id},
              {"cases", cases},     {"shuffle_seed", shuffle_seed}, {"timestamp", timestamp}};
  io::append_line(path_for(session_id), header.dump());
  return session;
}

TrustSession SessionStore::append_judgment(const TrustSession& session, const TrustJudgment& judgment,
                                           std::optional<double> keep_fraction) {
  auto updated = record_judgment(session, judgment);
  json line{{"type", "judgment"},
            {"case_id", judgment.case_id},
            {"user_id", judgment.user_id},
            {"trusted", judgment.trusted},
            {"timestamp", judgment.timestamp}};
  if (keep_fraction) line["keep_fraction"] = *keep_fraction;
  io::append_line(path_for(session.session_id()), line.dump());
  return updated;
}

void SessionStore::append_view(const std::string& session_id, const std::string& case_id, double keep_fraction,
                               const std::string& timestamp) {
  json line{{"type", "view"}, {"case_id", case_id}, {"keep_fraction", keep_fraction}, {"timestamp", timestamp}};
  io::append_line(path_for(session_id), line.dump());
}

std::optional<TrustSession> SessionStore::load(const std::string& session_id) const {
  const auto path = path_for(session_id);
  if (!std::filesystem::exists(path)) return std::nullopt;
  auto lines = io::read_lines(path);
  if (lines.empty()) throw Error(ErrorCode::AuditCorrupt, path.string() + " is empty");
  try {
    auto header = json::parse(lines.front());
    TrustSession session(header.at("session_id").get<std::string>(), header.at("user_id").get<std::string>(),
                         header.at("cases").get<std::vector<std::string>>());
    for (std::size_t i = 1; i < lines.size(); ++i) {
      auto rec = json::parse(lines[i]);
      if (rec.at("type") != "judgment") continue;
      session.record(TrustJudgment{rec.at("case_id").get<std::string>(), rec.at("user_id").get<std::string>(),
                                   rec.at("trusted").get<bool>(), rec.value("timestamp", std::string{})});
    }
    return session;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::AuditCorrupt, path.string() + ": " + e.what());
  }
}

std::vector<TrustSession> SessionStore::load_all() const {
  std::vector<std::string> ids;
  if (std::filesystem::exists(dir_)) {
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
      if (entry.path().extension() == ".jsonl") ids.push_back(entry.path().stem().string());
    }
  }
  std::sort(ids.begin(), ids.end());
  std::vector<TrustSession> out;
  for (const auto& id : ids) out.push_back(*load(id));
  return out;
}

std::size_t SessionStore::count() const {
  std::size_t n = 0;
  if (!std::filesystem::exists(dir_)) return 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) n += entry.path().extension() == ".jsonl";
  return n;
}

}  // namespace xaihealth
