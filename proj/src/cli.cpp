#include "xaihealth/cli.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iomanip>

#include "xaihealth/io.hpp"
#include "xaihealth/sab.hpp"
#include "xaihealth/service.hpp"
#include "xaihealth/simd/kernels.hpp"
#include "xaihealth/study.hpp"

namespace xaihealth {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

TrustService* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

Phase require_phase(const std::string& name) {
  auto p = parse_phase(name);
  if (!p) throw Error(ErrorCode::InvalidConfig, "unknown phase '" + name + "'");
  return *p;
}

void print_result(std::ostream& out, const PhaseResult& r) {
  out << phase_name(r.phase) << " (attempt " << r.attempt << ")\n";
  for (const auto& g : r.gates) out << "  " << g.line() << "\n";
  if (r.altai) {
    out << "  altai pass=" << (r.altai->pass ? "true" : "false");
    if (!r.altai->blocking.empty()) {
      out << " blocking=";
      for (std::size_t i = 0; i < r.altai->blocking.size(); ++i) out << (i ? "," : "") << r.altai->blocking[i];
    }
    out << "\n";
  }
  out << "  verdict: " << (r.pass ? "PASS" : "FAIL");
  for (std::size_t i = 0; i < r.reasons.size(); ++i) out << (i ? ", " : " (") << r.reasons[i];
  if (!r.reasons.empty()) out << ")";
  out << "\n";
}

void print_trust_table(std::ostream& out, const json& metrics) {
  out << "  user            precision  recall  f1\n";
  auto row = [&](const std::string& name, const json& m) {
    out << "  " << std::left << std::setw(16) << name << std::right << std::setw(9)
        << m["display"]["precision"].get<std::string>() << std::setw(8) << m["display"]["recall"].get<std::string>()
        << std::setw(8) << m["display"]["f1"].get<std::string>() << "\n";
  };
  for (const auto& u : metrics["per_user"]) row(u["user_id"].get<std::string>(), u);
  row("mean", metrics["mean"]);
}

// A state copy positioned at `phase` so a phase can be evaluated without
// being recorded.
StudyState dry_state(const Study& study, Phase phase) {
  StudyState s = study.state();
  s.phase = phase;
  return s;
}

int cmd_sab_generate(const std::string& config, const std::string& out_dir, std::ostream& out) {
  auto cfg = sab_config_from_json(io::read_json(config));
  auto sab = generate_sab(cfg);
  write_sab(sab, out_dir);
  out << "wrote " << sab.dataset.size() << " cases (grid " << cfg.grid << ") to " << out_dir << "\n";
  return kExitPass;
}

int cmd_eval_machine(const std::string& dir, const std::string& csv, std::ostream& out) {
  auto study = Study::open(dir);
  auto r = run_phase1(dry_state(study, Phase::MachineCentred), study.context());
  print_result(out, r);
  for (const char* name : {"sensitivity_avg", "sensitivity_max", "fidelity_f1", "localisation", "complexity_entropy"}) {
    if (r.metrics.contains(name))
      out << "  " << name << " mean=" << r.metrics[name]["mean"].get<double>()
          << " std=" << r.metrics[name]["std"].get<double>() << "\n";
  }
  if (!csv.empty()) {
    auto rows = phase1_csv_rows(r);
    io::write_atomic(csv, metrics_csv(rows));
    out << "  per-instance scores written to " << csv << "\n";
  }
  return r.pass ? kExitPass : kExitGateFail;
}

int cmd_eval_trust(const std::string& dir, std::ostream& out) {
  auto study = Study::open(dir);
  auto r = run_phase2(dry_state(study, Phase::HumanCentred), study.context(), study.sessions().load_all());
  print_result(out, r);
  print_trust_table(out, r.metrics);
  return r.pass ? kExitPass : kExitGateFail;
}

int cmd_altai_check(const std::string& dir, const std::string& phase_name_arg, std::ostream& out) {
  auto study = Study::open(dir);
  study.sync_altai_answers();
  const auto phase = require_phase(phase_name_arg);
  const auto& ctx = study.context();
  auto items = altai::apply_answers(altai::items_for_phase(phase, ctx.bank), study.state().altai_answers);
  auto v = altai::evaluate_checklist(items, phase);
  out << phase_name(phase) << " requirements:";
  for (auto r : altai::required_for(phase)) out << " " << altai::requirement_number(r);
  out << "\n";
  for (const auto& it : items) {
    const bool blocking = std::find(v.blocking.begin(), v.blocking.end(), it.item_id) != v.blocking.end();
    out << "  " << (blocking ? "[BLOCK] " : "[ok]    ") << it.item_id << " (" << altai::requirement_name(it.requirement)
        << "): " << altai::answer_name(it.answer) << "\n";
  }
  out << "  verdict: " << (v.pass ? "PASS" : "FAIL") << "\n";
  return v.pass ? kExitPass : kExitGateFail;
}

int cmd_study_run(const std::string& dir, const std::string& until, std::ostream& out) {
  auto study = Study::open(dir);
  study.sync_altai_answers();
  std::optional<Phase> stop_after;
  if (!until.empty()) stop_after = require_phase(until);
  int code = kExitPass;
  while (study.state().phase != Phase::Operation) {
    const auto phase = study.state().phase;
    if (phase == Phase::HumanCentred && study.sessions().load_all().empty()) {
      out << "HumanCentred: waiting for trust sessions (start `xaihealth serve`)\n";
      break;
    }
    PhaseResult r;
    try {
      r = study.run_current_phase();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoCompleteSessions) throw;
      out << "HumanCentred: waiting for complete trust sessions\n";
      break;
    }
    study.advance(r);
    print_result(out, r);
    if (phase == Phase::HumanCentred) print_trust_table(out, r.metrics);
    if (!r.pass) {
      out << "study returned to PreEvaluation (attempt " << study.state().attempt << ")\n";
      code = kExitGateFail;
      break;
    }
    if (stop_after && *stop_after == phase) break;
  }
  out << "current phase: " << phase_name(study.state().phase) << "\n";
  if (!study.state().results.empty()) out << "report: " << study.write_report().string() << "\n";
  return code;
}

int cmd_monitor(const std::string& dir, const std::string& data, std::ostream& out) {
  auto study = Study::open(dir);
  study.sync_altai_answers();
  fs::path manifest = fs::is_directory(data) ? fs::path(data) / "manifest.json" : fs::path(data);
  auto ds = load_dataset(manifest);
  auto d = study.monitor(ds);
  out << "accuracy=" << std::fixed << std::setprecision(6) << d.accuracy << " baseline=" << d.baseline_accuracy
      << " drop=" << d.accuracy_drop << " band=" << d.accuracy_band << "\n"
      << "mean_lle=" << d.mean_lle << " gate=" << d.lle_gate << "\n"
      << (d.flagged ? "DRIFT: " : "ok: ") << d.recommendation << "\n";
  out.unsetf(std::ios::fixed);
  return d.flagged ? kExitGateFail : kExitPass;
}

int cmd_report(const std::string& dir, const std::string& out_path, std::ostream& out) {
  auto study = Study::open(dir);
  auto path = study.write_report(out_path);
  out << path.string() << "\n";
  return kExitPass;
}

int cmd_serve(const std::string& dir, int port, const std::string& host, const std::string& ui, std::ostream& out) {
  TrustService service(dir, ui);
  const int bound = service.bind(host, port);
  out << "serving " << dir << " on http://" << host << ":" << bound << "\n" << std::flush;
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  service.run();
  g_service = nullptr;
  return kExitPass;
}

}  // namespace

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ExternalModelFailure:
    case ErrorCode::ProcessDied:
    case ErrorCode::ProtocolViolation:
    case ErrorCode::Timeout:
    case ErrorCode::AuditCorrupt:
    case ErrorCode::Io: return kExitRuntime;
    default: return kExitUsage;
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Phased evaluation of explainable clinical AI"};
  app.require_subcommand(1);
  std::string study_dir, config, out_path, phase, until, data, csv, ui, host = "127.0.0.1", isa;
  int port = 8080;
  app.add_option("--isa", isa, "force a kernel set (scalar, avx2)");

  auto* sab = app.add_subcommand("sab", "synthetic attribution benchmark");
  sab->require_subcommand(1);
  auto* sab_gen = sab->add_subcommand("generate", "write a SAB dataset and its transparent model");
  sab_gen->add_option("--config", config, "SAB config JSON")->required();
  sab_gen->add_option("--out", out_path, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a phase without recording it");
  eval->require_subcommand(1);
  auto* eval_machine = eval->add_subcommand("machine", "machine-centred metrics and gates");
  eval_machine->add_option("--study", study_dir)->required();
  eval_machine->add_option("--csv", csv, "write per-instance scores");
  auto* eval_trust = eval->add_subcommand("trust", "trust metrics from recorded sessions");
  eval_trust->add_option("--study", study_dir)->required();

  auto* altai_cmd = app.add_subcommand("altai", "ALTAI checklist");
  altai_cmd->require_subcommand(1);
  auto* altai_check = altai_cmd->add_subcommand("check", "evaluate the checklist for a phase");
  altai_check->add_option("--study", study_dir)->required();
  altai_check->add_option("--phase", phase)->required();

  auto* study_cmd = app.add_subcommand("study", "run the phased workflow");
  study_cmd->require_subcommand(1);
  auto* study_run = study_cmd->add_subcommand("run", "run phases in order, recording results");
  study_run->add_option("--study", study_dir)->required();
  study_run->add_option("--until", until, "stop after this phase");

  auto* monitor = app.add_subcommand("monitor", "Operation-phase drift check");
  monitor->add_option("--study", study_dir)->required();
  monitor->add_option("--data", data, "dataset directory or manifest")->required();

  auto* report = app.add_subcommand("report", "write report.json");
  report->add_option("--study", study_dir)->required();
  report->add_option("--out", out_path);

  auto* serve = app.add_subcommand("serve", "HTTP API for trust sessions and ALTAI");
  serve->add_option("--study", study_dir)->required();
  serve->add_option("--port", port)->required();
  serve->add_option("--host", host);
  serve->add_option("--ui", ui, "directory with the built UI");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitPass : kExitUsage;
  }

  try {
    if (!isa.empty() && !(isa == "scalar" ? simd::set_isa(simd::Isa::scalar)
                                          : isa == "avx2" && simd::set_isa(simd::Isa::avx2))) {
      err << "error: kernel set '" << isa << "' is not available on this CPU\n";
      return kExitUsage;
    }
    if (*sab_gen) return cmd_sab_generate(config, out_path, out);
    if (*eval_machine) return cmd_eval_machine(study_dir, csv, out);
    if (*eval_trust) return cmd_eval_trust(study_dir, out);
    if (*altai_check) return cmd_altai_check(study_dir, phase, out);
    if (*study_run) return cmd_study_run(study_dir, until, out);
    if (*monitor) return cmd_monitor(study_dir, data, out);
    if (*report) return cmd_report(study_dir, out_path, out);
    if (*serve) return cmd_serve(study_dir, port, host, ui, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"xaihealth"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace xaihealth
