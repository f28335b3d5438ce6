// Copyright 2026 The fleetwatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <set>
#include <string>

#include <yaml-cpp/yaml.h>

#include "fleet/scenario.hpp"
#include "fleet/service.hpp"

namespace fleet {

/// Service configuration document:
///
///   bind: 127.0.0.1
///   port: 8080
///   store: ./store
///   display_offset_minutes: -360
///   tokens:
///     - {token: tok-205, device_id: CI-205-DDE}
inline ServiceConfig parse_service_config(const std::string& text, const std::string& source = "<config>") {
  detail::YamlReader rd(source);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ScenarioError(source, e.mark.line + 1, e.msg);
  }
  rd.expect_map(root, "config");
  rd.check_keys(root, {"bind", "port", "store", "display_offset_minutes", "tokens"}, "config");
  ServiceConfig cfg;
  cfg.bind_address = rd.optional<std::string>(root, "bind", "config").value_or(cfg.bind_address);
  cfg.port = rd.optional<int>(root, "port", "config").value_or(cfg.port);
  if (cfg.port < 0 || cfg.port > 65535) rd.fail(root["port"], "config.port: out of range");
  cfg.store_path = rd.optional<std::string>(root, "store", "config").value_or(cfg.store_path);
  cfg.display_offset_minutes =
      rd.optional<int>(root, "display_offset_minutes", "config").value_or(cfg.display_offset_minutes);
  if (cfg.display_offset_minutes < -14 * 60 || cfg.display_offset_minutes > 14 * 60)
    rd.fail(root["display_offset_minutes"], "config.display_offset_minutes: out of range");

  const auto tokens = root["tokens"];
  if (!tokens.IsDefined()) rd.fail(root, "config: missing required key 'tokens'");
  rd.expect_seq(tokens, "config.tokens");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string what = "config.tokens[" + std::to_string(i) + "]";
    rd.expect_map(tokens[i], what);
    rd.check_keys(tokens[i], {"token", "device_id"}, what);
    AuthToken t{rd.required<std::string>(tokens[i], "token", what),
                rd.required<std::string>(tokens[i], "device_id", what)};
    if (t.token.empty()) rd.fail(tokens[i], what + ": token must be non-empty");
    if (!seen.insert(t.token).second) rd.fail(tokens[i], what + ": duplicate token '" + t.token + "'");
    cfg.tokens.push_back(std::move(t));
  }
  return cfg;
}

inline ServiceConfig load_service_config(const std::filesystem::path& path) {
  return parse_service_config(read_text_file(path), path.string());
}

}  // namespace fleet
