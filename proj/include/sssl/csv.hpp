#pragma once

#include <string>
#include <vector>

#include "sssl/types.hpp"

namespace sssl {

struct LoadedCsv {
  Dataset data;  // features + target labels, row order preserved
  std::vector<std::string> feature_names;
  std::string target_name;
};

// Reads a numeric CSV with a mandatory header row. The delimiter is detected
// among comma / semicolon / tab. `target_column` selects the label column by
// name; the empty string means the last column. Errors carry row and column
// positions.
LoadedCsv load_csv(const std::string& path, const std::string& target_column = "");

// Writes a dataset in the same format (comma-delimited, header row).
void write_csv(const std::string& path, const Dataset& data,
               const std::vector<std::string>& feature_names, const std::string& target_name);

}  // namespace sssl
