// Copyright 2026 The SeqPE Authors
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

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "seqpe/nn.hpp"

namespace seqpe {

inline constexpr int kContainerFormatVersion = 1;

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

// Binary container shared by checkpoints and precomputed tables.
//
//   "SEQPECK1"                  8-byte magic
//   u32  format version
//   u64  metadata length, then metadata as compact JSON (sorted keys)
//   u64  record count, then per record:
//          u32 name length, UTF-8 name
//          u32 rank, u64 dims[rank]
//          f64 payload, row-major
//
// All integers and floats are little-endian.
struct Container {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<NamedArray> arrays;

  const NamedArray& find(std::string_view name) const;
};

std::string encode_container(const Container& c);
Container decode_container(std::string_view bytes);
void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

// 16 hex digits of FNV-1a 64 over `text`.
std::string config_hash(std::string_view text);

// Container holding every parameter, plus format_version and config_hash.
Container snapshot_parameters(const ParameterList& params, nlohmann::json metadata, std::string_view config_text);
// Copies values by name; every parameter must be present with a matching shape.
void restore_parameters(const Container& c, const ParameterList& params);

}  // namespace seqpe
