// Copyright 2026 The factlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FACTLAB_MANIFEST_HPP_
#define FACTLAB_MANIFEST_HPP_

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "factlab/util.hpp"

namespace factlab {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// One per run directory: the command, its fully resolved configuration,
/// seeds, input hashes and produced artifacts.
struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::string> input_hashes;   // path -> sha256
  std::vector<std::string> artifacts;                // relative paths
  std::string started;
  std::string finished;

  void add_input(const std::filesystem::path& path) {
    input_hashes[path.string()] = sha256_file(path);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["tool_version"] = std::string(kToolVersion);
    j["command"] = command;
    j["config"] = config;
    j["seeds"] = seeds;
    j["inputs"] = input_hashes;
    j["artifacts"] = artifacts;
    j["started"] = started;
    j["finished"] = finished;
    return j;
  }

  void save(const std::filesystem::path& path) const {
    write_text_file(path, to_json().dump(2) + "\n");
  }
};

}  // namespace factlab

#endif  // FACTLAB_MANIFEST_HPP_
