#include "wdro/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "wdro/cost.hpp"
#include "wdro/error.hpp"

namespace wdro {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ValidationError("row " + std::to_string(row) + ", column '" + column +
                          "': not a finite decimal number: '" + cell + "'");
  }
  return v;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ValidationError("column '" + name + "' not found in CSV header");
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

Dataset parse_dataset(const std::string& csv_text, const ColumnSchema& schema) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) throw ValidationError("CSV is empty (no header row)");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const std::vector<std::string> header = split(line);

  std::optional<std::size_t> label_col;
  std::optional<std::size_t> target_col;
  if (schema.label) label_col = column_index(header, *schema.label);
  if (schema.target) target_col = column_index(header, *schema.target);

  std::vector<std::size_t> feature_cols;
  if (schema.features.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c != label_col && c != target_col) feature_cols.push_back(c);
    }
  } else {
    for (const auto& f : schema.features) feature_cols.push_back(column_index(header, f));
  }
  if (feature_cols.empty()) throw ValidationError("CSV has no feature columns");

  std::vector<Sample> samples;
  int max_label = 1;
  std::size_t row = 1;  // header is row 1
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != header.size()) {
      throw ValidationError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                            " cells, header has " + std::to_string(header.size()));
    }
    Sample s;
    s.x.reserve(feature_cols.size());
    for (std::size_t c : feature_cols) s.x.push_back(parse_number(cells[c], row, header[c]));
    if (label_col) {
      const double lv = parse_number(cells[*label_col], row, header[*label_col]);
      if (lv != std::floor(lv) || lv < 1.0 || lv > 1e9) {
        throw ValidationError("row " + std::to_string(row) + ": label " + cells[*label_col] +
                              " is not an integer in 1..J (labels are 1-based)");
      }
      s.y = static_cast<int>(lv);
      max_label = std::max(max_label, s.y);
    }
    if (target_col) s.target = parse_number(cells[*target_col], row, header[*target_col]);
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw ValidationError("CSV has a header but no data rows");

  const int J = schema.num_labels.value_or(max_label);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].y > J) {
      throw ValidationError("row " + std::to_string(i + 2) + ": label " + std::to_string(samples[i].y) +
                            " outside 1.." + std::to_string(J));
    }
  }
  return Dataset(std::move(samples), J);
}

Dataset load_dataset(const std::string& path, const ColumnSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open dataset file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str(), schema);
}

std::optional<double> median_pairwise_distance(const Dataset& data) {
  if (data.size() < 2) return std::nullopt;
  std::vector<double> d;
  d.reserve(data.size() * (data.size() - 1) / 2);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = i + 1; j < data.size(); ++j) d.push_back(distance(data[i].x, data[j].x));
  }
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  double med = d[mid];
  if (d.size() % 2 == 0) {
    med = 0.5 * (med + *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return med;
}

}  // namespace wdro
