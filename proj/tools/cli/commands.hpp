#pragma once

#include "config.hpp"

#include <nashverify/harness.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace nashverify::cli {

/// Exit codes shared by every command.
enum ExitCode : int { kExitOk = 0, kExitDataFailure = 1, kExitUsage = 2 };

/// Entry point behind main(). `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Turns a validated config into runnable pipeline inputs: judge kinds follow
/// the mode, fixtures are loaded, endpoints are attached.
Pipeline build_pipeline(RunConfig& config, std::size_t threads);

/// "instances=N aborted=A accuracy=X mean_fallback_rate=Y", accuracy is
/// "n/a" when no instance has a gold answer.
std::string summary_line(const std::vector<TraceRecord>& traces);

}  // namespace nashverify::cli
