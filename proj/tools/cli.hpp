#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pki::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;  // gradcheck found a tensor over tolerance
inline constexpr int kExitUsage = 2;        // bad flags, bad config file, refused overwrite
inline constexpr int kExitRuntime = 3;      // I/O, malformed data, protocol violations

// Default output root for `run` when --out is absent.
inline constexpr const char* kOutRootEnv = "PKI_OUT_ROOT";

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pki::cli
