#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace segauc::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailed = 1;
inline constexpr int kBadInput = 2;
inline constexpr int kProviderFailure = 3;

/// Entry point for `segauc <run|probe|verify|report> ...`. `args` excludes the
/// program name.
int main(const std::vector<std::string>& args, std::ostream& out,
         std::ostream& err);

}  // namespace segauc::cli
