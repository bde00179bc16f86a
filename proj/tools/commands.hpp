#pragma once

#include <flownet/document.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace flownet::cli {

enum ExitCode : int {
  kOk = 0,
  kChecksFailed = 1,
  kParse = 2,
  kDivergence = 3,
  kIo = 4,
  kNumerical = 5,
  kTrainingDivergence = 6,
};

/// Runs the command line (args excludes the program name). Reports go to
/// out as key=value lines, diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct CheckResult {
  std::string name;
  enum class Status { pass, fail, skip } status = Status::pass;
  std::string detail;
};

struct CheckOptions {
  std::uint64_t seed = 0;
};

inline const std::vector<std::string> kAllChecks = {"conservation", "kkt",     "lyapunov",
                                                    "gradcheck",    "control", "passivity"};

/// Runs the named suites on a document whose network was built without law
/// validation. Unknown names raise ValidationError.
std::vector<CheckResult> run_checks(const NetworkDocument& doc, const std::vector<std::string>& names,
                                    const CheckOptions& options);

std::uint64_t default_seed();

}  // namespace flownet::cli
