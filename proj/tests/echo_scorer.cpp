// Test double for the external model protocol. Modes:
//   echo      scores = data
//   wrong-id  answers with id + 1
//   sleep     never answers
//   die       exits on the first request
//   garbage   answers with a non-JSON line
//   short     answers with one score
#include <chrono>
#include <iostream>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "echo";
  std::string line;
  while (std::getline(std::cin, line)) {
    auto req = nlohmann::json::parse(line);
    const auto id = req["id"].get<std::uint64_t>();
    if (mode == "die") return 3;
    if (mode == "sleep") {
      std::this_thread::sleep_for(std::chrono::seconds(30));
      return 0;
    }
    if (mode == "garbage") {
      std::cout << "not json" << std::endl;
      continue;
    }
    nlohmann::json resp{{"id", mode == "wrong-id" ? id + 1 : id}, {"scores", req["data"]}};
    if (mode == "short") resp["scores"] = {1.0};
    std::cout << resp.dump() << std::endl;
  }
  return 0;
}
