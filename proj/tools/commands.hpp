#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fmn/attack.hpp"

namespace fmn::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kNoResult = 1;
inline constexpr int kInputError = 2;

/// Entry point shared by the `fmn` binary and the tests.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Per-sample results CSV: comment lines, then `index,label,success,norm,iterations`.
std::string results_to_csv(const std::vector<AttackResult>& results, const Dataset& data,
                           const std::vector<std::string>& comments);

struct ResultRow {
  std::size_t index = 0;
  std::size_t label = 0;
  bool success = false;
  double norm = 0.0;
  std::int64_t iterations = 0;
};

struct ResultsFile {
  std::vector<std::string> comments;  // without the leading "# "
  std::vector<ResultRow> rows;
};

ResultsFile parse_results_csv(const std::string& text);

}  // namespace fmn::cli
