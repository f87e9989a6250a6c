#pragma once

#include <sys/types.h>

#include <cstdint>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "xaihealth/model.hpp"

namespace xaihealth {

/// Handle to a black-box scorer running as a child process. Requests are
/// one JSON object per line on the child's stdin; responses one per line
/// on its stdout:
///
///   request:  {"id": <u64>, "shape": [<ints>], "data": [<floats>]}
///   response: {"id": <same u64>, "scores": [<floats>]}
///
/// One request is in flight per handle. After a timeout or protocol error
/// the child is killed and the handle stays unusable (ProcessDied).
class ExternalModel {
 public:
  explicit ExternalModel(ExternalCommand command);
  ~ExternalModel();
  ExternalModel(const ExternalModel&) = delete;
  ExternalModel& operator=(const ExternalModel&) = delete;

  std::vector<double> query(std::span<const double> data, const Shape& shape);

  std::uint64_t requests_sent() const noexcept { return next_id_ - 1; }

 private:
  void start();
  void shutdown() noexcept;
  std::string read_line();

  ExternalCommand command_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  bool broken_ = false;
  std::uint64_t next_id_ = 1;
  std::string buffer_;
  std::mutex mutex_;
};

std::vector<double> query_external(ExternalModel& handle, const Tensor& input);

}  // namespace xaihealth
