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

#include "puli/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <openssl/evp.h>

#include "puli/error.hpp"

namespace puli {

void RunConfig::apply_seed() {
  train.seed = seed;
  synth.seed = seed;
  forge.seed = seed;
}

std::filesystem::path RunConfig::prompts_path() const {
  return prompts_dir.empty() ? default_prompts_dir() : std::filesystem::path(prompts_dir);
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto text = trim(value);
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw ConfigError(fmt::format("{}: '{}' is not a valid number", key, value));
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  // from_chars for double is missing from older standard libraries.
  const auto text = trim(value);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (text.empty() || used != text.size()) {
    throw ConfigError(fmt::format("{}: '{}' is not a valid number", key, value));
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  const auto v = trim(value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, value));
}

std::vector<std::string> split_list(const std::string& value, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, sep)) {
    if (auto t = trim(item); !t.empty()) out.push_back(t);
  }
  return out;
}

struct Binding {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, const std::string& name, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Binding size_binding(std::string section, std::string key, T RunConfig::*outer,
                     std::size_t T::*field) {
  return {section, key,
          [outer, field](RunConfig& c, const std::string& n, const std::string& v) {
            c.*outer.*field = parse_number<std::size_t>(n, v);
          },
          [outer, field](const RunConfig& c) { return fmt::format("{}", c.*outer.*field); }};
}

template <typename T>
Binding double_binding(std::string section, std::string key, T RunConfig::*outer,
                       double T::*field) {
  return {section, key,
          [outer, field](RunConfig& c, const std::string& n, const std::string& v) {
            c.*outer.*field = parse_double(n, v);
          },
          [outer, field](const RunConfig& c) { return fmt::format("{}", c.*outer.*field); }};
}

template <typename T>
Binding string_binding(std::string section, std::string key, T RunConfig::*outer,
                       std::string T::*field) {
  return {section, key,
          [outer, field](RunConfig& c, const std::string&, const std::string& v) {
            c.*outer.*field = trim(v);
          },
          [outer, field](const RunConfig& c) { return c.*outer.*field; }};
}

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = [] {
    std::vector<Binding> b;
    b.push_back({"run", "seed",
                 [](RunConfig& c, const std::string& n, const std::string& v) {
                   c.seed = parse_number<std::uint64_t>(n, v);
                 },
                 [](const RunConfig& c) { return fmt::format("{}", c.seed); }});

    using TC = TrainConfig;
    b.push_back(size_binding("train", "epochs", &RunConfig::train, &TC::epochs));
    b.push_back(double_binding("train", "lambda", &RunConfig::train, &TC::lambda));
    b.push_back(double_binding("train", "learning_rate", &RunConfig::train, &TC::learning_rate));
    b.push_back(size_binding("train", "k_unlabeled", &RunConfig::train, &TC::k_unlabeled));
    b.push_back({"train", "backend",
                 [](RunConfig& c, const std::string& n, const std::string& v) {
                   const auto s = trim(v);
                   if (s == "surrogate") {
                     c.train.backend = BackendKind::kSurrogate;
                   } else if (s == "remote") {
                     c.train.backend = BackendKind::kRemote;
                   } else {
                     throw ConfigError(fmt::format("{}: expected surrogate or remote", n));
                   }
                 },
                 [](const RunConfig& c) {
                   return std::string(c.train.backend == BackendKind::kRemote ? "remote" : "surrogate");
                 }});
    auto dims = [&](const char* key, std::size_t PolicyDims::*field) {
      b.push_back({"train", key,
                   [field](RunConfig& c, const std::string& n, const std::string& v) {
                     c.train.dims.*field = parse_number<std::size_t>(n, v);
                   },
                   [field](const RunConfig& c) { return fmt::format("{}", c.train.dims.*field); }});
    };
    dims("observer_dim", &PolicyDims::observer_dim);
    dims("presenter_dim", &PolicyDims::presenter_dim);
    dims("hidden_width", &PolicyDims::hidden_width);
    dims("layers", &PolicyDims::layers);
    b.push_back(size_binding("train", "max_summary_tokens", &RunConfig::train, &TC::max_summary_tokens));
    b.push_back({"train", "pseudo_target",
                 [](RunConfig& c, const std::string& n, const std::string& v) {
                   const auto s = trim(v);
                   if (s == "dialogue") {
                     c.train.pseudo_target = PseudoTarget::kDialogueLabel;
                   } else if (s == "self") {
                     c.train.pseudo_target = PseudoTarget::kSelfGenerated;
                   } else {
                     throw ConfigError(fmt::format("{}: expected dialogue or self", n));
                   }
                 },
                 [](const RunConfig& c) {
                   return std::string(c.train.pseudo_target == PseudoTarget::kSelfGenerated ? "self"
                                                                                            : "dialogue");
                 }});
    b.push_back({"train", "lambda_sweep",
                 [](RunConfig& c, const std::string& n, const std::string& v) {
                   c.train.lambda_sweep.clear();
                   for (const auto& item : split_list(v, ',')) {
                     c.train.lambda_sweep.push_back(parse_double(n, item));
                   }
                 },
                 [](const RunConfig& c) { return fmt::format("{}", fmt::join(c.train.lambda_sweep, ", ")); }});

    b.push_back({"observer", "n_buckets",
                 [](RunConfig& c, const std::string& n, const std::string& v) {
                   c.train.observer.n_buckets = parse_number<std::uint32_t>(n, v);
                 },
                 [](const RunConfig& c) { return fmt::format("{}", c.train.observer.n_buckets); }});
    b.push_back({"observer", "learning_rate",
                 [](RunConfig& c, const std::string& n, const std::string& v) {
                   c.train.observer.learning_rate = parse_double(n, v);
                 },
                 [](const RunConfig& c) { return fmt::format("{}", c.train.observer.learning_rate); }});
    b.push_back({"observer", "epochs_per_fit",
                 [](RunConfig& c, const std::string& n, const std::string& v) {
                   c.train.observer.epochs_per_fit = parse_number<std::size_t>(n, v);
                 },
                 [](const RunConfig& c) { return fmt::format("{}", c.train.observer.epochs_per_fit); }});
    b.push_back({"observer", "batch_size",
                 [](RunConfig& c, const std::string& n, const std::string& v) {
                   c.train.observer.batch_size = parse_number<std::size_t>(n, v);
                 },
                 [](const RunConfig& c) { return fmt::format("{}", c.train.observer.batch_size); }});
    b.push_back({"observer", "balance_classes",
                 [](RunConfig& c, const std::string& n, const std::string& v) {
                   c.train.observer.balance_classes = parse_bool(n, v);
                 },
                 [](const RunConfig& c) {
                   return std::string(c.train.observer.balance_classes ? "true" : "false");
                 }});
    b.push_back({"presenter", "n_buckets",
                 [](RunConfig& c, const std::string& n, const std::string& v) {
                   c.train.presenter.n_buckets = parse_number<std::uint32_t>(n, v);
                 },
                 [](const RunConfig& c) { return fmt::format("{}", c.train.presenter.n_buckets); }});

    using SC = SynthConfig;
    b.push_back(size_binding("synth", "n_dialogues", &RunConfig::synth, &SC::n_dialogues));
    b.push_back(size_binding("synth", "rounds_per_dialogue", &RunConfig::synth, &SC::rounds_per_dialogue));
    b.push_back(size_binding("synth", "tokens_per_round", &RunConfig::synth, &SC::tokens_per_round));
    b.push_back(size_binding("synth", "drift_lo", &RunConfig::synth, &SC::drift_lo));
    b.push_back(size_binding("synth", "drift_hi", &RunConfig::synth, &SC::drift_hi));
    b.push_back(double_binding("synth", "drift_mix", &RunConfig::synth, &SC::drift_mix));
    b.push_back(size_binding("synth", "hidden_drift_per_dialogue", &RunConfig::synth,
                             &SC::hidden_drift_per_dialogue));
    b.push_back(size_binding("synth", "dialogues_per_proposal", &RunConfig::synth,
                             &SC::dialogues_per_proposal));
    b.push_back(size_binding("synth", "validation_count", &RunConfig::synth, &SC::validation_count));
    b.push_back(size_binding("synth", "test_count", &RunConfig::synth, &SC::test_count));
    auto words = [&](const char* key, std::vector<std::string> SC::*field, char sep) {
      b.push_back({"synth", key,
                   [field, sep](RunConfig& c, const std::string&, const std::string& v) {
                     c.synth.*field = split_list(v, sep);
                   },
                   [field, sep](const RunConfig& c) {
                     return fmt::format("{}", fmt::join(c.synth.*field, sep == ',' ? ", " : " "));
                   }});
    };
    words("on_topic_vocab", &SC::on_topic_vocab, ' ');
    words("drift_vocab", &SC::drift_vocab, ' ');
    words("roles", &SC::roles, ',');

    using FC = LlmForgeConfig;
    b.push_back(size_binding("forge", "rounds_per_dialogue", &RunConfig::forge, &FC::rounds_per_dialogue));
    b.push_back(size_binding("forge", "dialogues_per_paper", &RunConfig::forge, &FC::dialogues_per_paper));
    b.push_back(double_binding("forge", "validation_fraction", &RunConfig::forge, &FC::validation_fraction));
    b.push_back(double_binding("forge", "test_fraction", &RunConfig::forge, &FC::test_fraction));
    b.push_back(size_binding("forge", "parallel_papers", &RunConfig::forge, &FC::parallel_papers));

    using GC = GatewayConfig;
    b.push_back(string_binding("gateway", "endpoint", &RunConfig::gateway, &GC::endpoint));
    b.push_back(string_binding("gateway", "embeddings_endpoint", &RunConfig::gateway, &GC::embeddings_endpoint));
    b.push_back(string_binding("gateway", "summarizer_model", &RunConfig::gateway, &GC::summarizer_model));
    b.push_back(string_binding("gateway", "forge_model", &RunConfig::gateway, &GC::forge_model));
    b.push_back(string_binding("gateway", "judge_model", &RunConfig::gateway, &GC::judge_model));
    b.push_back(string_binding("gateway", "presenter_model", &RunConfig::gateway, &GC::presenter_model));
    b.push_back(string_binding("gateway", "observer_model", &RunConfig::gateway, &GC::observer_model));
    b.push_back(string_binding("gateway", "embedding_model", &RunConfig::gateway, &GC::embedding_model));
    b.push_back(double_binding("gateway", "temperature", &RunConfig::gateway, &GC::temperature));
    b.push_back(size_binding("gateway", "max_tokens", &RunConfig::gateway, &GC::max_tokens));
    b.push_back({"gateway", "max_attempts",
                 [](RunConfig& c, const std::string& n, const std::string& v) {
                   c.gateway.max_attempts = parse_number<int>(n, v);
                 },
                 [](const RunConfig& c) { return fmt::format("{}", c.gateway.max_attempts); }});
    b.push_back({"gateway", "backoff_ms",
                 [](RunConfig& c, const std::string& n, const std::string& v) {
                   c.gateway.backoff_base = std::chrono::milliseconds(parse_number<long>(n, v));
                 },
                 [](const RunConfig& c) { return fmt::format("{}", c.gateway.backoff_base.count()); }});
    b.push_back(size_binding("gateway", "max_in_flight", &RunConfig::gateway, &GC::max_in_flight));

    b.push_back({"paths", "prompts_dir",
                 [](RunConfig& c, const std::string&, const std::string& v) { c.prompts_dir = trim(v); },
                 [](const RunConfig& c) { return c.prompts_dir; }});
    return b;
  }();
  return table;
}

}  // namespace

RunConfig read_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
  }
  RunConfig config;
  std::map<std::pair<std::string, std::string>, const Binding*> index;
  std::set<std::string> known_sections;
  for (const auto& b : bindings()) {
    index[{b.section, b.key}] = &b;
    known_sections.insert(b.section);
  }

  for (const auto& [section, children] : tree) {
    if (children.empty() && !children.data().empty()) {
      throw ConfigError(fmt::format("config key '{}' is outside any section", section));
    }
    if (section == "inputs") continue;
    if (!known_sections.contains(section)) {
      throw ConfigError(fmt::format("unknown config section [{}]", section));
    }
    for (const auto& [key, node] : children) {
      if (section == "run" && key == "command") continue;
      auto it = index.find({section, key});
      if (it == index.end()) throw ConfigError(fmt::format("unknown config key {}.{}", section, key));
      it->second->set(config, section + "." + key, node.data());
    }
  }
  config.apply_seed();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config {}", path.string()));
  return read_config(in);
}

void write_config(const RunConfig& config, std::ostream& out) {
  std::string current;
  for (const auto& b : bindings()) {
    if (b.section != current) {
      if (!current.empty()) out << '\n';
      out << '[' << b.section << "]\n";
      current = b.section;
    }
    out << b.key << " = " << b.get(config) << '\n';
  }
}

std::string git_blob_hash(std::string_view bytes) {
  const auto header = fmt::format("blob {}", bytes.size());
  std::string blob = header;
  blob.push_back('\0');
  blob.append(bytes);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(blob.data(), blob.size(), digest, &length, EVP_sha1(), nullptr) != 1) {
    throw Error("SHA-1 digest failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string git_blob_hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot read {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return git_blob_hash(buf.str());
}

void write_manifest(const std::filesystem::path& path, const RunConfig& config,
                    const std::string& command,
                    const std::map<std::string, std::filesystem::path>& inputs) {
  std::ostringstream out;
  out << "# run manifest: load with --config to reproduce\n";
  write_config(config, out);
  // The [run] section comes first; the command goes right after the seed.
  std::string text = out.str();
  const auto seed_line = text.find("\nseed = ");
  text.insert(text.find('\n', seed_line + 1) + 1, fmt::format("command = {}\n", command));
  std::map<std::string, std::string> hashes;
  for (const auto& [name, p] : inputs) {
    if (std::filesystem::is_directory(p)) {
      std::set<std::filesystem::path> files;
      for (const auto& entry : std::filesystem::recursive_directory_iterator(p)) {
        if (entry.is_regular_file()) files.insert(entry.path());
      }
      for (const auto& f : files) {
        hashes[name + "/" + std::filesystem::relative(f, p).generic_string()] = git_blob_hash_file(f);
      }
    } else {
      hashes[name] = git_blob_hash_file(p);
    }
  }
  if (!hashes.empty()) {
    text += "\n[inputs]\n";
    for (const auto& [name, h] : hashes) text += fmt::format("{} = {}\n", name, h);
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(fmt::format("cannot write manifest {}", path.string()));
  file << text;
}

}  // namespace puli
