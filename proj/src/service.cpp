#include "xaihealth/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <optional>

#include "xaihealth/error.hpp"
#include "xaihealth/io.hpp"

namespace xaihealth {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kPlaceholderPage =
    "<!doctype html><html><head><meta charset=\"utf-8\"><title>xaihealth</title></head>"
    "<body><p>The trust-elicitation UI is not installed. Start the service with <code>--ui &lt;dir&gt;</code> "
    "to serve it; the JSON API is available under <code>/api</code>.</p></body></html>";

std::vector<std::vector<double>> as_rows(std::span<const double> v, const Shape& shape) {
  const std::size_t cols = shape.back();
  const std::size_t rows = v.size() / cols;
  std::vector<std::vector<double>> out(rows, std::vector<double>(cols));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r][c] = v[r * cols + c];
  return out;
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, status, json{{"error", code}, {"message", message}});
}

json parse_body(const httplib::Request& req) {
  auto body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) throw Error(ErrorCode::InvalidConfig, "request body must be a JSON object");
  return body;
}

double parse_fraction(const std::string& text) {
  double v = 0.0;
  try {
    std::size_t used = 0;
    v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw Error(ErrorCode::BadFraction, "keep_fraction '" + text + "' is not a number");
  }
  if (!(v > 0.0 && v <= 1.0)) throw Error(ErrorCode::BadFraction, "keep_fraction must lie in (0, 1]");
  return v;
}

}  // namespace

json render_case_view(const StudyContext& ctx, const Instance& instance, double keep_fraction) {
  const auto& shape = instance.input.shape();
  auto x = instance.input.to_doubles();
  const auto scores = ctx.model.scores(x, shape);
  const auto predicted = argmax(scores);

  std::vector<double> image(x.size(), 0.0);
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (*hi > *lo) {
    for (std::size_t i = 0; i < x.size(); ++i) image[i] = (x[i] - *lo) / (*hi - *lo);
  }

  auto a = ctx.explainer->attribute(ctx.model, x, shape, predicted, instance.id);
  for (auto& v : a) v = std::abs(v);
  auto overlay = thresholded(a, keep_fraction);
  const double peak = *std::max_element(overlay.begin(), overlay.end());
  if (peak > 0.0)
    for (auto& v : overlay) v /= peak;

  const auto& names = ctx.config.trust.class_names;
  std::string prediction = predicted < names.size() ? names[predicted] : "class " + std::to_string(predicted);
  return json{{"case_id", instance.id},
              {"image", as_rows(image, shape)},
              {"overlay", as_rows(overlay, shape)},
              {"prediction", prediction},
              {"keep_fraction", keep_fraction},
              {"explainer", ctx.explainer->id()},
              {"ai_disclosure", kAiDisclosure}};
}

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UnknownStudy:
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownCase: return 404;
    case ErrorCode::WrongPhase:
    case ErrorCode::DuplicateJudgment:
    case ErrorCode::SessionComplete:
    case ErrorCode::StalePhaseResult: return 409;
    case ErrorCode::InvalidConfig:
    case ErrorCode::BadFraction:
    case ErrorCode::ConfigurationIncomplete:
    case ErrorCode::IncompleteBank: return 400;
    default: return 500;
  }
}

struct TrustService::Impl {
  fs::path study_dir;
  fs::path ui_dir;
  httplib::Server server;
  std::mutex mu;  // one writer: study state, audit log and session logs
  std::unique_ptr<Study> study;
  std::map<std::string, double> keep_fraction;  // per-session slider position

  Study& open_study() {
    if (!study) study = std::make_unique<Study>(Study::open(study_dir));
    return *study;
  }

  TrustSession load_session(const std::string& id) {
    auto s = open_study().sessions().load(id);
    if (!s) throw Error(ErrorCode::UnknownSession, "no session '" + id + "'");
    return std::move(*s);
  }

  double fraction_for(const std::string& session_id) {
    auto it = keep_fraction.find(session_id);
    return it != keep_fraction.end() ? it->second : open_study().config().trust.keep_fraction;
  }

  const Instance& find_case(const std::string& case_id) {
    const auto& ds = open_study().context().dataset;
    for (const auto& inst : ds.instances)
      if (inst.id == case_id) return inst;
    throw Error(ErrorCode::UnknownCase, "case '" + case_id + "' is not in the study dataset");
  }

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  // Serialises handlers and maps library errors to HTTP statuses.
  Handler guarded(Handler h) {
    return [this, h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu);
      try {
        h(req, res);
      } catch (const Error& e) {
        send_error(res, http_status(e.code()), error_name(e.code()), e.what());
      } catch (const json::exception& e) {
        send_error(res, 400, "InvalidConfig", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "Internal", e.what());
      }
    };
  }

  void create_session(const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    const auto user = body.at("user_id").get<std::string>();
    const auto study_id = body.at("study_id").get<std::string>();
    auto& s = open_study();
    if (study_id != s.config().study_id) throw Error(ErrorCode::UnknownStudy, "no study '" + study_id + "'");
    s.set_actor(user);
    auto rec = s.create_session(user);
    s.set_actor("service");
    send_json(res, 201, json{{"session_id", rec.session_id}, {"num_cases", rec.num_cases}});
  }

  void next_case(const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    auto session = load_session(id);
    if (req.has_param("keep_fraction")) keep_fraction[id] = parse_fraction(req.get_param_value("keep_fraction"));
    auto current = session.current_case();
    if (!current) {
      send_json(res, 200, json{{"done", true},
                               {"session_id", id},
                               {"judged", session.judgments().size()},
                               {"total", session.cases().size()}});
      return;
    }
    const double kf = fraction_for(id);
    auto view = render_case_view(open_study().context(), find_case(*current), kf);
    view["done"] = false;
    view["session_id"] = id;
    view["position"] = session.judgments().size() + 1;
    view["total"] = session.cases().size();
    open_study().sessions().append_view(id, *current, kf, open_study().now());
    send_json(res, 200, view);
  }

  void submit_judgment(const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const auto body = parse_body(req);
    const auto case_id = body.at("case_id").get<std::string>();
    if (!body.at("trusted").is_boolean()) throw Error(ErrorCode::InvalidConfig, "'trusted' must be a boolean");
    std::optional<double> kf;
    if (body.contains("keep_fraction") && !body["keep_fraction"].is_null()) {
      kf = body["keep_fraction"].get<double>();
      if (!(*kf > 0.0 && *kf <= 1.0)) throw Error(ErrorCode::BadFraction, "keep_fraction must lie in (0, 1]");
    }
    auto session = load_session(id);
    if (!session.has_case(case_id))
      throw Error(ErrorCode::UnknownCase, "case '" + case_id + "' is not part of session " + id);
    auto current = session.current_case();
    if (current && *current != case_id) {
      const bool judged = std::any_of(session.judgments().begin(), session.judgments().end(),
                                      [&](const TrustJudgment& j) { return j.case_id == case_id; });
      if (!judged) {
        send_error(res, 409, "OutOfOrder", "case '" + case_id + "' is not the current case; sessions are forward-only");
        return;
      }
    }
    TrustJudgment j{case_id, session.user_id(), body["trusted"].get<bool>(), open_study().now()};
    auto updated = open_study().sessions().append_judgment(session, j, kf ? kf : std::optional(fraction_for(id)));
    send_json(res, 200, json{{"ok", true},
                             {"session_id", id},
                             {"case_id", case_id},
                             {"judged", updated.judgments().size()},
                             {"total", updated.cases().size()},
                             {"status", updated.complete() ? "complete" : "open"}});
  }

  void status(const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    auto session = load_session(id);
    send_json(res, 200, json{{"session_id", id},
                             {"user_id", session.user_id()},
                             {"status", session.complete() ? "complete" : "open"},
                             {"judged", session.judgments().size()},
                             {"total", session.cases().size()}});
  }

  void altai_items(const httplib::Request& req, httplib::Response& res) {
    const std::string name = req.matches[1];
    auto phase = parse_phase(name);
    if (!phase) throw Error(ErrorCode::InvalidConfig, "unknown phase '" + name + "'");
    auto& s = open_study();
    const auto& bank = s.context().bank;
    auto items = altai::apply_answers(altai::items_for_phase(*phase, bank), s.state().altai_answers);
    json out_items = json::array();
    for (const auto& it : items) {
      out_items.push_back(json{{"item_id", it.item_id},
                               {"requirement", altai::requirement_name(it.requirement)},
                               {"requirement_number", altai::requirement_number(it.requirement)},
                               {"question", it.question},
                               {"answer", altai::answer_name(it.answer)},
                               {"evidence", it.evidence}});
    }
    json reqs = json::array();
    for (auto r : altai::required_for(*phase)) reqs.push_back(altai::requirement_number(r));
    send_json(res, 200, json{{"phase", phase_name(*phase)},
                             {"requirements", reqs},
                             {"items", out_items},
                             {"verdict", altai::verdict_to_json(altai::evaluate_checklist(items, *phase))}});
  }

  void altai_answers(const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    auto answers = altai::answers_from_json(body.at("answers"));
    auto& s = open_study();
    const auto& bank = s.context().bank;
    json problems = json::array();
    for (const auto& a : answers) {
      const bool known = std::any_of(bank.begin(), bank.end(), [&](const altai::Item& i) { return i.item_id == a.item_id; });
      const bool needs = a.answer == altai::Answer::yes || a.answer == altai::Answer::not_applicable;
      if (!known) problems.push_back(json{{"item_id", a.item_id}, {"problem", "unknown item"}});
      else if (needs && a.evidence.find_first_not_of(" \t\r\n") == std::string::npos)
        problems.push_back(json{{"item_id", a.item_id}, {"problem", "evidence required for yes/not_applicable"}});
    }
    if (!problems.empty()) {
      send_json(res, 400, json{{"error", "InvalidConfig"}, {"message", "answers rejected"}, {"items", problems}});
      return;
    }
    s.set_actor(body.value("user_id", std::string("service")));
    s.record_altai_answers(answers);
    s.set_actor("service");
    const auto phase = s.state().phase;
    send_json(res, 200, json{{"recorded", answers.size()},
                             {"phase", phase_name(phase)},
                             {"verdict", altai::verdict_to_json(checklist_for(phase, bank, s.state().altai_answers))}});
  }

  void routes() {
    server.Post("/api/sessions", guarded([this](auto& q, auto& r) { create_session(q, r); }));
    server.Get(R"(/api/sessions/([^/]+)/next)", guarded([this](auto& q, auto& r) { next_case(q, r); }));
    server.Post(R"(/api/sessions/([^/]+)/judgments)", guarded([this](auto& q, auto& r) { submit_judgment(q, r); }));
    server.Get(R"(/api/sessions/([^/]+)/status)", guarded([this](auto& q, auto& r) { status(q, r); }));
    server.Get(R"(/api/altai/([^/]+))", guarded([this](auto& q, auto& r) { altai_items(q, r); }));
    server.Post("/api/altai/answers", guarded([this](auto& q, auto& r) { altai_answers(q, r); }));
    if (!ui_dir.empty() && fs::is_directory(ui_dir)) {
      server.set_mount_point("/", ui_dir.string());
    } else {
      server.Get("/", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(kPlaceholderPage, "text/html");
      });
    }
  }
};

TrustService::TrustService(fs::path study_dir, fs::path ui_dir) : impl_(std::make_unique<Impl>()) {
  impl_->study_dir = std::move(study_dir);
  impl_->ui_dir = std::move(ui_dir);
  load_study_config(impl_->study_dir);  // fail fast on a missing study
  impl_->routes();
}

TrustService::~TrustService() = default;

int TrustService::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::Io, "cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void TrustService::run() { impl_->server.listen_after_bind(); }

void TrustService::stop() { impl_->server.stop(); }

}  // namespace xaihealth
