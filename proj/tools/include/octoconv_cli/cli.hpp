// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "octoconv/group.hpp"

namespace octoconv::cli {

/// Process exit codes. Each failure also prints one stderr line starting
/// with `octoconv: error[<kind>]:`.
enum ExitCode : int {
  kOk = 0,
  kUsageError = 1,        // bad flags, config or input files
  kEquivarianceViolation = 2,
  kNonFiniteLoss = 3,
  kIoError = 4,           // output could not be written
};

/// Runs the command line in-process; argv[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct BenchRow {
  std::string layer;
  std::string input_shape;
  double gconv_ms = 0.0;
  double expanded_ms = 0.0;
};

struct BenchResult {
  GroupName group = GroupName::kO;
  std::vector<BenchRow> rows;
  double gconv_total_ms = 0.0;
  double expanded_total_ms = 0.0;
  double ratio() const { return gconv_total_ms / expanded_total_ms; }
};

/// Times every conv layer of the desk model for `group`: the group
/// convolution (filter expansion + conv) against a plain conv with an
/// already expanded bank of the same size. Medians over `repeats`.
BenchResult bench_desk_layers(GroupName group, std::size_t batch, std::size_t repeats, std::uint64_t seed);

}  // namespace octoconv::cli
