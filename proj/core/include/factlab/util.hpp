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

#ifndef FACTLAB_UTIL_HPP_
#define FACTLAB_UTIL_HPP_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace factlab {

/// Invalid user-supplied configuration or parameters. CLI exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// File system or format failure. CLI exit code 2.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite value or other numeric failure. CLI exit code 2.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Whitespace tokenizer; skips runs of spaces/tabs.
std::vector<std::string_view> split_ws(std::string_view line);

/// Hex SHA-256 of a byte buffer / file (for run manifests).
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// UTC wall clock as e.g. "2026-03-14T09:26:53Z".
std::string iso8601_now();

/// Shortest decimal form that round-trips a double (CSV/JSON output).
std::string format_double(double v);

}  // namespace factlab

#endif  // FACTLAB_UTIL_HPP_
