#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace drm::cli {

/// Runs one `drm` invocation. `args` excludes the program name. Returns the
/// process exit code: 0 on success, 1 on a library error, 2 on a usage error.
/// Failures are reported on `err` as one JSON object per line.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// `{"error":{"kind":...,"message":...}}` (plus `"example"` when >= 0).
std::string error_json(const std::string& kind, const std::string& message, long example = -1);

/// Expands `--config <file>`: each `key=value` line of the file becomes
/// `--key value` unless the flag is already on the command line. Values
/// `true`/`false` toggle boolean flags. `#` starts a comment.
std::vector<std::string> expand_config(const std::vector<std::string>& args);

}  // namespace drm::cli
