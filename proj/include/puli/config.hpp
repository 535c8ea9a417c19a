// Copyright 2026 The PULI Authors. All Rights Reserved.
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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "puli/forge.hpp"
#include "puli/gateway.hpp"
#include "puli/trainloop.hpp"

namespace puli {

/// Everything a command can be configured with. Every field has a default;
/// `seed` feeds the train, synth and forge seeds.
struct RunConfig {
  std::uint64_t seed = 0;
  TrainConfig train;
  SynthConfig synth;
  LlmForgeConfig forge;
  GatewayConfig gateway;
  std::string prompts_dir;  // empty: bundled prompts

  /// Copies `seed` into the per-module configs.
  void apply_seed();
  std::filesystem::path prompts_path() const;
};

/// Sectioned key = value text ('#' and ';' start comments). Unknown sections
/// or keys throw ConfigError. The [run] and [inputs] sections written into
/// manifests are accepted; only run.seed is read back.
RunConfig read_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);
/// Every key with its current value, in a fixed order.
void write_config(const RunConfig& config, std::ostream& out);

/// Git blob id: SHA-1 over "blob <size>\0" followed by the bytes.
std::string git_blob_hash(std::string_view bytes);
std::string git_blob_hash_file(const std::filesystem::path& path);

/// Config snapshot plus the command line and the content hashes of the
/// inputs. Directory inputs hash every regular file below them.
void write_manifest(const std::filesystem::path& path, const RunConfig& config,
                    const std::string& command,
                    const std::map<std::string, std::filesystem::path>& inputs);

}  // namespace puli
