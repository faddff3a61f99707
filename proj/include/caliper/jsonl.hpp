// Copyright 2026 The Caliper Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CALIPER_JSONL_HPP_
#define CALIPER_JSONL_HPP_

#include <fstream>
#include <string>
#include <vector>

#include "caliper/common.hpp"
#include "json.hpp"

namespace caliper {

// Canonical single-line rendering: compact separators, keys in sorted order
// (nlohmann's default object ordering). Round-tripping a canonical line
// reproduces it byte for byte.
template <typename T>
std::string to_jsonl_line(const T& value) {
  nlohmann::json j = value;
  return j.dump();
}

template <typename T>
T from_jsonl_line(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line);
  return j.template get<T>();
}

template <typename T>
std::vector<T> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<T> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(from_jsonl_line<T>(line));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

template <typename T>
void write_jsonl(const std::string& path, const std::vector<T>& values) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  for (const T& v : values) {
    out << to_jsonl_line(v) << '\n';
  }
}

}  // namespace caliper

#endif  // CALIPER_JSONL_HPP_
