#pragma once

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "xaihealth/dataset.hpp"
#include "xaihealth/model.hpp"
#include "xaihealth/tensor.hpp"

namespace testing {

namespace fs = std::filesystem;

// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "xh") {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(++counter) + "-" +
             std::to_string(std::random_device{}()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline xaihealth::Instance instance(std::string id, std::vector<double> x, std::size_t label = 0) {
  const auto d = x.size();
  return xaihealth::Instance{std::move(id), xaihealth::Tensor::from_doubles({d}, x), label, std::nullopt,
                             std::nullopt};
}

inline xaihealth::ModelSpec random_linear(std::mt19937_64& rng, std::size_t classes, std::size_t d) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> w(classes * d), b(classes);
  for (auto& v : w) v = n(rng);
  for (auto& v : b) v = n(rng);
  return xaihealth::make_linear(classes, d, std::move(w), std::move(b));
}

inline xaihealth::ModelSpec random_mlp(std::mt19937_64& rng, std::vector<std::size_t> widths) {
  std::normal_distribution<double> n(0.0, 1.0);
  xaihealth::ModelSpec spec;
  spec.kind = xaihealth::ModelKind::mlp;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    xaihealth::DenseLayer l;
    l.inputs = widths[i];
    l.outputs = widths[i + 1];
    l.weights.resize(l.inputs * l.outputs);
    l.bias.resize(l.outputs);
    for (auto& v : l.weights) v = n(rng);
    for (auto& v : l.bias) v = n(rng);
    spec.layers.push_back(std::move(l));
  }
  spec.validate();
  return spec;
}

}  // namespace testing
