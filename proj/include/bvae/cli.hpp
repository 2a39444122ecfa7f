#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace bvae::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kTrainingAborted = 3,
  kVersionMismatch = 4,
  kTestSetMismatch = 5,
};

/// Default output root when --out is not given (falls back to ./runs).
inline constexpr const char* kOutputRootEnv = "BVAE_OUTPUT_ROOT";

/// Entry point shared by the executable and the tests. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Creates <root>/<prefix>-<UTC timestamp>, adding -2, -3, ... when the name
/// is taken. Never returns an existing directory.
std::filesystem::path create_run_directory(const std::filesystem::path& root, const std::string& prefix);

}  // namespace bvae::cli
