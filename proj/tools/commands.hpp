#pragma once

#include "config.hpp"
#include "output.hpp"

#include <string>

namespace multibal::cli {

inline constexpr const char *kToolVersion = MULTIBAL_VERSION;

/// Runs a finalized configuration, writes its artifacts and `<out>/manifest.json`.
Manifest execute(const RunConfig &cfg);

struct ReplayReport {
    Manifest original;
    Manifest rerun;
    std::vector<std::string> mismatches;  // metric keys whose values differ
    std::size_t compared = 0;
};

/// Re-executes a manifest's configuration into `out_dir` and compares metrics exactly.
ReplayReport replay(const std::string &manifest_path, const std::string &out_dir);

}  // namespace multibal::cli
