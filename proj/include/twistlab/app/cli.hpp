#pragma once

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "twistlab/app/config.hpp"

namespace twistlab::app {

struct ParseOutcome {
  RunConfig config;
  bool help = false;
  std::string help_text;
};

inline std::string help_text(const std::string& command) {
  std::ostringstream out;
  out << "twistlab " << tool_version << "\n\n";
  if (const auto* c = find_command(command)) {
    out << "usage: twistlab " << c->name << " [--key value ...] [--config FILE] [--preset NAME]\n\n"
        << c->summary << "\n\noptions:\n";
    for (const auto& k : c->keys) out << "  --" << k.name << " (default " << k.fallback << ")  " << k.help << "\n";
  } else {
    out << "usage: twistlab COMMAND [--key value ...] [--config FILE] [--preset NAME]\n\ncommands:\n";
    for (const auto& c : commands()) out << "  " << c.name << "  " << c.summary << "\n";
    out << "\npresets:\n";
    for (const auto& p : presets()) out << "  " << p.name << "  " << p.command << ": " << p.description << "\n";
  }
  out << "\ncommon options:\n";
  for (const auto& k : common_keys()) {
    out << "  --" << k.name << " (default " << (k.fallback.empty() ? "-" : k.fallback) << ")  " << k.help << "\n";
  }
  out << "  --config FILE  flat key = value file; command-line flags take precedence\n"
      << "  --preset NAME  pin parameters to a figure preset\n";
  return out.str();
}

// Parses the command line (and an optional config file) into a RunConfig.
// Precedence: built-in defaults < preset < config file < flags.
inline ParseOutcome parse_config(const std::vector<std::string>& args) {
  CLI::App app{"twistlab"};
  app.set_help_flag();
  app.allow_config_extras(false);
  app.positionals_at_end(false);

  bool help = false;
  std::string command, preset;
  app.add_flag("--help", help);
  app.add_option("command", command);
  app.add_option("--preset", preset);
  app.set_config("--config", "", "flat key = value configuration file");

  std::set<std::string> all_keys;
  for (const auto& c : commands())
    for (const auto& k : c.keys) all_keys.insert(k.name);
  for (const auto& k : common_keys()) all_keys.insert(k.name);

  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  for (const auto& key : all_keys) {
    std::string names = "--" + key;
    if (key.find('_') != std::string::npos) {
      std::string dashed = key;
      for (auto& ch : dashed)
        if (ch == '_') ch = '-';
      names += ",--" + dashed;
    }
    options[key] = app.add_option(names, values[key])->allow_extra_args(false);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  ParseOutcome out;
  if (help) {
    out.help = true;
    out.help_text = help_text(command);
    return out;
  }

  const Preset* pre = nullptr;
  if (!preset.empty()) {
    pre = find_preset(preset);
    if (!pre) throw UsageError("unknown preset '" + preset + "'");
    if (!command.empty() && command != pre->command) {
      throw UsageError("preset '" + preset + "' belongs to command '" + pre->command + "'");
    }
    command = pre->command;
  }
  if (command.empty()) throw UsageError("missing command; try --help");
  const CommandSpec* spec = find_command(command);
  if (!spec) throw UsageError("unknown command '" + command + "'");

  RunConfig& cfg = out.config;
  cfg.command = command;
  cfg.preset = preset;
  std::set<std::string> allowed;
  for (const auto& k : spec->keys) {
    allowed.insert(k.name);
    cfg.parameters[k.name] = k.fallback;
  }
  if (pre)
    for (const auto& [k, v] : pre->values) cfg.parameters[k] = v;

  std::map<std::string, std::string> common;
  for (const auto& k : common_keys()) common[k.name] = k.fallback;
  for (const auto& [key, opt] : options) {
    if (opt->count() == 0) continue;
    if (common.count(key)) {
      common[key] = values[key];
    } else if (allowed.count(key)) {
      cfg.parameters[key] = values[key];
    } else {
      throw UsageError("option '--" + key + "' is not valid for command '" + command + "'");
    }
  }

  cfg.output_dir = common["out"];
  if (cfg.output_dir.empty()) throw UsageError("parameter 'out' must not be empty");
  cfg.formats.clear();
  for (const auto& f : split(common["formats"], ',')) cfg.formats.push_back(to_choice("formats", f, {"csv", "json"}));
  long seed = to_long("seed", common["seed"]);
  if (seed < 0) throw UsageError("parameter 'seed' must be non-negative");
  cfg.seed = static_cast<std::uint64_t>(seed);
  cfg.threads_spec = common["threads"];
  cfg.threads = resolve_threads(cfg.threads_spec);
  cfg.plot = to_bool("plot", common["plot"]);
  return out;
}

inline ParseOutcome parse_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return parse_config(args);
}

}  // namespace twistlab::app
