#include "caml/harness/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace caml::harness {

namespace {

bool parse_i64(const std::string& s, long long* out = nullptr) {
  if (s.empty()) return false;
  long long v = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last) {
    // Seeds may exceed int64; retry unsigned.
    unsigned long long u = 0;
    const auto res2 = std::from_chars(first, last, u);
    if (res2.ec != std::errc{} || res2.ptr != last) return false;
    if (out) *out = static_cast<long long>(u);
    return true;
  }
  if (out) *out = v;
  return true;
}

bool parse_f64(const std::string& s, double* out = nullptr) {
  if (s.empty()) return false;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return false;
  if (out) *out = v;
  return true;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

const CsvSchema& curves_schema() {
  static const CsvSchema schema{"curves",
                                {{"update", ColType::integer},
                                 {"mean_return", ColType::real},
                                 {"std_return", ColType::real},
                                 {"learner", ColType::text},
                                 {"query_id", ColType::integer},
                                 {"seed", ColType::integer}}};
  return schema;
}

const CsvSchema& endpoints_schema() {
  static const CsvSchema schema{"endpoints",
                                {{"learner", ColType::text},
                                 {"query_id", ColType::integer},
                                 {"seed", ColType::integer},
                                 {"update", ColType::integer},
                                 {"episode", ColType::integer},
                                 {"end_x", ColType::real},
                                 {"end_y", ColType::real}}};
  return schema;
}

const CsvSchema& bandit_schema() {
  static const CsvSchema schema{"bandit",
                                {{"learner", ColType::text},
                                 {"query_id", ColType::integer},
                                 {"seed", ColType::integer},
                                 {"pull", ColType::integer},
                                 {"medoid_index", ColType::integer},
                                 {"episode_return", ColType::real},
                                 {"chosen", ColType::integer}}};
  return schema;
}

const CsvSchema& assignment_schema() {
  static const CsvSchema schema{"assignment",
                                {{"index", ColType::integer},
                                 {"label", ColType::integer},
                                 {"is_medoid", ColType::integer}}};
  return schema;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("csv file not found: " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    rows.push_back(split_line(line));
  }
  return rows;
}

void validate_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  const auto rows = read_csv(path);
  const auto fail = [&](const std::string& msg) {
    throw std::invalid_argument("csv schema check (" + schema.name + ") failed for " +
                                path.string() + ": " + msg);
  };
  if (rows.empty()) fail("missing header");
  if (rows[0].size() != schema.columns.size()) fail("wrong column count in header");
  for (std::size_t c = 0; c < schema.columns.size(); ++c)
    if (rows[0][c] != schema.columns[c].first)
      fail("header column " + std::to_string(c) + " is '" + rows[0][c] + "', expected '" +
           schema.columns[c].first + "'");
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != schema.columns.size())
      fail("row " + std::to_string(r) + " has wrong cell count");
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
      const std::string& cell = rows[r][c];
      bool ok = true;
      switch (schema.columns[c].second) {
        case ColType::integer: ok = parse_i64(cell); break;
        case ColType::real: ok = parse_f64(cell); break;
        case ColType::text: ok = !cell.empty(); break;
      }
      if (!ok)
        fail("row " + std::to_string(r) + ", column '" + schema.columns[c].first +
             "': cannot parse '" + cell + "'");
    }
  }
}

DistanceMatrix read_distance_csv(const std::filesystem::path& path, std::vector<int>* ids) {
  const auto rows = read_csv(path);
  const auto fail = [&](const std::string& msg) {
    throw std::invalid_argument("distance csv check failed for " + path.string() + ": " + msg);
  };
  if (rows.empty()) fail("missing header");
  if (rows[0].empty() || rows[0][0] != "id") fail("header must start with 'id'");
  const int n = static_cast<int>(rows[0].size()) - 1;
  if (n < 1) fail("no ids in header");
  if (static_cast<int>(rows.size()) != n + 1) fail("expected one row per id");

  std::vector<int> header_ids(n);
  for (int c = 0; c < n; ++c) {
    long long v = 0;
    if (!parse_i64(rows[0][c + 1], &v)) fail("header id is not an integer: " + rows[0][c + 1]);
    header_ids[c] = static_cast<int>(v);
  }
  DistanceMatrix d(n);
  for (int r = 0; r < n; ++r) {
    const auto& row = rows[r + 1];
    if (static_cast<int>(row.size()) != n + 1) fail("row " + std::to_string(r + 1) + " malformed");
    long long row_id = 0;
    if (!parse_i64(row[0], &row_id) || static_cast<int>(row_id) != header_ids[r])
      fail("row id mismatch at row " + std::to_string(r + 1));
    for (int c = 0; c < n; ++c) {
      double v = 0.0;
      if (!parse_f64(row[c + 1], &v)) fail("bad value at row " + std::to_string(r + 1));
      d.at(r, c) = v;
    }
  }
  validate_distance_matrix(d);
  if (ids) *ids = header_ids;
  return d;
}

}  // namespace caml::harness
