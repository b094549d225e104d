#include <cstdio>
#include <iostream>

#include "twistlab/app/cli.hpp"
#include "twistlab/app/execute.hpp"
#include "twistlab/app/report.hpp"

namespace app = twistlab::app;

namespace {

int report_error(app::ExitCode code, const std::string& kind, const std::string& message) {
  app::json j;
  j["error"] = kind;
  j["message"] = message;
  j["exit_code"] = static_cast<int>(code);
  std::cerr << j.dump() << "\n";
  return static_cast<int>(code);
}

}  // namespace

int main(int argc, char** argv) {
  app::Context ctx;
  try {
    auto parsed = app::parse_config(argc, argv);
    if (parsed.help) {
      std::cout << parsed.help_text;
      return 0;
    }
    auto env = app::execute(parsed.config, ctx);
    for (const auto& path : app::write_report(env, parsed.config)) std::cout << path << "\n";
    return 0;
  } catch (const app::UsageError& e) {
    return report_error(app::ExitCode::usage, "usage", e.what());
  } catch (const twistlab::Error& e) {
    auto code = ctx.dispatching ? app::ExitCode::domain : app::ExitCode::usage;
    return report_error(code, std::string(twistlab::to_string(e.kind())), e.what());
  } catch (const app::IoError& e) {
    return report_error(app::ExitCode::io, "io", e.what());
  } catch (const std::exception& e) {
    return report_error(app::ExitCode::domain, "internal", e.what());
  }
}
