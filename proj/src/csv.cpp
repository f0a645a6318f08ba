#include "sssl/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sssl {
namespace {

char detect_delimiter(const std::string& header) {
  const char candidates[] = {',', ';', '\t'};
  char best = ',';
  std::size_t best_count = 0;
  for (char c : candidates) {
    const std::size_t count = static_cast<std::size_t>(std::count(header.begin(), header.end(), c));
    if (count > best_count) {
      best_count = count;
      best = c;
    }
  }
  return best;
}

std::string strip(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '"')) s.pop_back();
  std::size_t start = 0;
  while (start < s.size() && (s[start] == ' ' || s[start] == '"' || s[start] == '\xef' ||
                              s[start] == '\xbb' || s[start] == '\xbf')) {
    ++start;
  }
  return s.substr(start);
}

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, delim)) out.push_back(field);
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

double parse_cell(const std::string& raw, std::size_t row, std::size_t col) {
  const std::string cell = strip(raw);
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw std::runtime_error("load_csv: non-numeric cell \"" + raw + "\" at row " +
                             std::to_string(row) + ", column " + std::to_string(col));
  }
  return value;
}

}  // namespace

LoadedCsv load_csv(const std::string& path, const std::string& target_column) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);

  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("load_csv: empty file " + path);
  const char delim = detect_delimiter(header);

  std::vector<std::string> names;
  for (auto& raw : split_line(header, delim)) names.push_back(strip(raw));
  if (names.size() < 2) {
    throw std::runtime_error("load_csv: header must name at least one feature and the target");
  }

  // Empty or the literal "last" (when no column carries that name) selects
  // the final column.
  std::size_t target_idx = names.size() - 1;
  if (!target_column.empty()) {
    auto it = std::find(names.begin(), names.end(), target_column);
    if (it != names.end()) {
      target_idx = static_cast<std::size_t>(it - names.begin());
    } else if (target_column != "last") {
      throw std::runtime_error("load_csv: target column \"" + target_column + "\" not found");
    }
  }

  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (strip(line).empty()) continue;
    auto cells = split_line(line, delim);
    if (cells.size() != names.size()) {
      throw std::runtime_error("load_csv: row " + std::to_string(row_no) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(names.size()));
    }
    std::vector<double> parsed(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      parsed[c] = parse_cell(cells[c], row_no, c + 1);
    }
    rows.push_back(std::move(parsed));
  }
  if (rows.empty()) throw std::runtime_error("load_csv: no data rows in " + path);

  const Index n = static_cast<Index>(rows.size());
  const Index d = static_cast<Index>(names.size() - 1);
  Matrix x(n, d);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    Index col = 0;
    for (std::size_t c = 0; c < names.size(); ++c) {
      if (c == target_idx) {
        y(i) = rows[static_cast<std::size_t>(i)][c];
      } else {
        x(i, col++) = rows[static_cast<std::size_t>(i)][c];
      }
    }
  }

  LoadedCsv out;
  out.data = Dataset(std::move(x), std::move(y));
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (c != target_idx) out.feature_names.push_back(names[c]);
  }
  out.target_name = names[target_idx];
  return out;
}

void write_csv(const std::string& path, const Dataset& data,
               const std::vector<std::string>& feature_names, const std::string& target_name) {
  if (!data.y) throw std::invalid_argument("write_csv: dataset has no labels");
  if (static_cast<Index>(feature_names.size()) != data.feature_dim()) {
    throw std::invalid_argument("write_csv: feature name count mismatch");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  for (const auto& name : feature_names) out << name << ',';
  out << target_name << '\n';
  char buf[64];
  for (Index i = 0; i < data.size(); ++i) {
    for (Index j = 0; j < data.feature_dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g,", data.x(i, j));
      out << buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g\n", (*data.y)(i));
    out << buf;
  }
  if (!out) throw std::runtime_error("write_csv: write failed for " + path);
}

}  // namespace sssl
