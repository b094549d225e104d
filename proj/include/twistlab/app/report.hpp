#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "twistlab/app/config.hpp"

namespace twistlab::app {

using json = nlohmann::ordered_json;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shortest representation that round-trips to the same double.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

inline std::string fmt(long v) { return std::to_string(v); }
inline std::string fmt(int v) { return std::to_string(v); }
inline std::string fmt(unsigned long v) { return std::to_string(v); }

// JSON numbers for finite values, null otherwise.
inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct CsvTable {
  std::string name;  // file stem
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  template <class... T>
  void add(const T&... cells) {
    rows.push_back({cell(cells)...});
  }

 private:
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(double v) { return fmt(v); }
  static std::string cell(long v) { return fmt(v); }
  static std::string cell(int v) { return fmt(v); }
  static std::string cell(unsigned long v) { return fmt(v); }
  static std::string cell(bool v) { return v ? "true" : "false"; }
};

struct Provenance {
  std::string quantity;
  std::string anchor;
};

struct ReportEnvelope {
  json config_echo;
  json results = json::object();
  std::vector<Provenance> provenance;
  std::vector<CsvTable> tables;
  std::string plot_script;  // gnuplot commands, empty when not requested

  json to_json() const {
    json j;
    j["schema"] = 1;
    j["tool_version"] = tool_version;
    j["config_echo"] = config_echo;
    j["results"] = results;
    json prov = json::array();
    for (const auto& p : provenance) prov.push_back({{"quantity", p.quantity}, {"anchor", p.anchor}});
    j["provenance"] = prov;
    json files = json::array();
    for (const auto& t : tables) files.push_back(t.name + ".csv");
    j["csv_files"] = files;
    return j;
  }
};

inline json echo(const RunConfig& cfg) {
  json j;
  j["command"] = cfg.command;
  j["preset"] = cfg.preset.empty() ? json(nullptr) : json(cfg.preset);
  json params = json::object();
  for (const auto& [k, v] : cfg.parameters) params[k] = v;
  j["parameters"] = params;
  j["output_dir"] = cfg.output_dir;
  j["formats"] = cfg.formats;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  return j;
}

inline std::string render_csv(const CsvTable& t) {
  std::string out;
  for (std::size_t i = 0; i < t.header.size(); ++i) out += (i ? "," : "") + t.header[i];
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + row[i];
    out += '\n';
  }
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f << content;
  f.close();
  if (!f) throw IoError("failed writing '" + path.string() + "'");
}

// Writes the CSV tables (when requested) and always the JSON envelope.
inline std::vector<std::string> write_report(const ReportEnvelope& env, const RunConfig& cfg) {
  namespace fs = std::filesystem;
  fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  std::vector<std::string> written;
  if (cfg.wants("csv")) {
    for (const auto& t : env.tables) {
      auto p = dir / (t.name + ".csv");
      write_file(p, render_csv(t));
      written.push_back(p.string());
    }
  }
  auto json_path = dir / (cfg.command + ".json");
  write_file(json_path, env.to_json().dump(2) + "\n");
  written.push_back(json_path.string());
  if (cfg.plot && !env.plot_script.empty()) {
    auto p = dir / (cfg.command + ".gp");
    write_file(p, env.plot_script);
    written.push_back(p.string());
  }
  return written;
}

}  // namespace twistlab::app
