#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "blindeval/annotation.hpp"

namespace blindeval::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kUsage = 2 };

/// Runs the command line `args` (without the program name). Diagnostics go
/// to `err`, summaries to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int main(int argc, char** argv);

/// Loads filled spreadsheets (*.tsv, rater = file stem, timestamp = file
/// modification time) and annotation exports (*.jsonl) in argument order.
std::vector<AnnotationRecord> load_annotations(const std::vector<std::filesystem::path>& paths);

}  // namespace blindeval::cli
