#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vsret::cli {

/// Runs the `vsret` command line. Returns the process exit code: 0 on
/// success, 1 on validation or usage errors, 2 on I/O failures.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// FNV-1a over `text`, as 8 lowercase hex digits.
std::string short_hash(const std::string& text);

/// Minimal SVG line chart of numeric CSV columns against `x_column`.
std::string render_svg(const std::string& csv, const std::string& x_column, const std::vector<std::string>& y_columns,
                       const std::string& title);

}  // namespace vsret::cli
