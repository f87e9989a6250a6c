#include "xaihealth/external_model.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <nlohmann/json.hpp>

#include "xaihealth/error.hpp"

namespace xaihealth {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

void write_fully(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    auto n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::ProcessDied, std::string("write to external model failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

}  // namespace

ExternalModel::ExternalModel(ExternalCommand command) : command_(std::move(command)) {
  if (command_.argv.empty()) throw Error(ErrorCode::InvalidModel, "external model needs a command");
}

ExternalModel::~ExternalModel() { shutdown(); }

void ExternalModel::start() {
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0 || ::pipe2(out_pipe, O_CLOEXEC) != 0)
    throw Error(ErrorCode::ExternalModelFailure, std::string("pipe: ") + std::strerror(errno));

  std::vector<char*> argv;
  for (auto& a : command_.argv) argv.push_back(a.data());
  argv.push_back(nullptr);
  const std::string wd = command_.working_directory.string();

  pid_t pid = ::fork();
  if (pid < 0) throw Error(ErrorCode::ExternalModelFailure, std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    if (!wd.empty() && ::chdir(wd.c_str()) != 0) ::_exit(126);
    ::execvp(argv[0], argv.data());
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  // A dead child must surface as EPIPE on write, not as a process-wide SIGPIPE.
  ::signal(SIGPIPE, SIG_IGN);
}

void ExternalModel::shutdown() noexcept {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    int status = 0;
    // Closing stdin lets a well-behaved scorer exit; give it a moment first.
    for (int i = 0; i < 20; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        return;
      }
      ::usleep(5000);
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

std::string ExternalModel::read_line() {
  const auto deadline = Clock::now() + command_.timeout;
  for (;;) {
    auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    if (remaining <= 0) throw Error(ErrorCode::Timeout, "no response within " + std::to_string(command_.timeout.count()) + " ms");
    pollfd pfd{from_child_, POLLIN, 0};
    int rc = ::poll(&pfd, 1, static_cast<int>(remaining));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::ExternalModelFailure, std::string("poll: ") + std::strerror(errno));
    }
    if (rc == 0) continue;
    char chunk[4096];
    auto n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::ProcessDied, std::string("read: ") + std::strerror(errno));
    }
    if (n == 0) throw Error(ErrorCode::ProcessDied, "external model closed its output stream");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::vector<double> ExternalModel::query(std::span<const double> data, const Shape& shape) {
  std::lock_guard lock(mutex_);
  if (broken_) throw Error(ErrorCode::ProcessDied, "external model handle is no longer usable");
  if (pid_ < 0) start();

  const std::uint64_t id = next_id_++;
  json request{{"id", id}, {"shape", shape}, {"data", std::vector<double>(data.begin(), data.end())}};
  try {
    write_fully(to_child_, request.dump() + "\n");
    const std::string line = read_line();
    json response;
    try {
      response = json::parse(line);
    } catch (const json::parse_error&) {
      throw Error(ErrorCode::ProtocolViolation, "unparseable response line: " + line.substr(0, 120));
    }
    if (!response.is_object() || !response.contains("id") || !response["id"].is_number_unsigned() ||
        response["id"].get<std::uint64_t>() != id)
      throw Error(ErrorCode::ProtocolViolation, "response id does not match request id " + std::to_string(id));
    if (!response.contains("scores") || !response["scores"].is_array())
      throw Error(ErrorCode::ProtocolViolation, "response lacks a scores array");
    std::vector<double> scores;
    for (const auto& v : response["scores"]) {
      if (!v.is_number()) throw Error(ErrorCode::ProtocolViolation, "non-numeric score");
      scores.push_back(v.get<double>());
    }
    if (scores.size() != command_.num_classes)
      throw Error(ErrorCode::ProtocolViolation, "expected " + std::to_string(command_.num_classes) + " scores, got " +
                                                    std::to_string(scores.size()));
    return scores;
  } catch (const Error&) {
    broken_ = true;
    shutdown();
    throw;
  }
}

std::vector<double> query_external(ExternalModel& handle, const Tensor& input) {
  return handle.query(input.to_doubles(), input.shape());
}

}  // namespace xaihealth
