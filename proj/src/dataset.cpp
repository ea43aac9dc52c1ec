#include "randomlab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace randomlab {
namespace {

// Splits one CSV record. Handles quoted fields with embedded commas and
// doubled quotes; no multi-line fields (none of our writers produce them).
std::vector<std::string> split_csv_record(const std::string& line,
                                          const std::string& where) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  check(!quoted, "csv: unterminated quote in " + where);
  fields.push_back(cur);
  return fields;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& raw, const std::string& where) {
  const std::string tok = trim(raw);
  check(!tok.empty(), "csv: empty cell in " + where);
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  check(end == tok.c_str() + tok.size(),
        "csv: non-numeric cell '" + tok + "' in " + where);
  check(std::isfinite(v), "csv: non-finite value in " + where);
  return v;
}

long parse_integer(const std::string& raw, const std::string& where) {
  const std::string tok = trim(raw);
  check(!tok.empty(), "csv: empty cell in " + where);
  char* end = nullptr;
  const long v = std::strtol(tok.c_str(), &end, 10);
  check(end == tok.c_str() + tok.size(),
        "csv: non-integer cell '" + tok + "' in " + where);
  return v;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void format_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

}  // namespace

Network::Network(int n, std::vector<std::pair<int, int>> edge_list) : n_(n) {
  check(n >= 0, "network: negative size");
  for (auto& [a, b] : edge_list) {
    check(a != b, "network: self-loop at unit " + std::to_string(a));
    check(a >= 0 && a < n && b >= 0 && b < n,
          "network: edge endpoint out of range: (" + std::to_string(a) + "," +
              std::to_string(b) + ")");
    if (a > b) std::swap(a, b);
  }
  std::sort(edge_list.begin(), edge_list.end());
  edge_list.erase(std::unique(edge_list.begin(), edge_list.end()),
                  edge_list.end());
  edges_ = std::move(edge_list);
  neighbors_.assign(static_cast<std::size_t>(n), {});
  for (const auto& [a, b] : edges_) {
    neighbors_[static_cast<std::size_t>(a)].push_back(b);
    neighbors_[static_cast<std::size_t>(b)].push_back(a);
  }
  for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
}

Eigen::VectorXd Network::exposures(const Eigen::VectorXi& z) const {
  check(static_cast<int>(z.size()) == n_,
        "network: assignment length does not match network size");
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n_);
  for (const auto& [a, b] : edges_) {
    e[a] += z[b];
    e[b] += z[a];
  }
  return e;
}

void ExperimentData::validate() const {
  const int nn = n();
  check(nn >= 2, "dataset: need at least two units");
  check(static_cast<int>(treatments.size()) == nn,
        "dataset: treatment length mismatch");
  check(covariates.rows() == nn, "dataset: covariate row count mismatch");
  for (int i = 0; i < nn; ++i) {
    check(treatments[i] == 0 || treatments[i] == 1,
          "dataset: non-binary treatment at row " + std::to_string(i));
  }
  check(outcomes.allFinite(), "dataset: non-finite outcome");
  check(covariates.size() == 0 || covariates.allFinite(),
        "dataset: non-finite covariate");
  if (!cluster_ids.empty()) {
    check(static_cast<int>(cluster_ids.size()) == nn,
          "dataset: cluster id length mismatch");
  }
  if (network.has_value()) {
    check(network->size() == nn, "dataset: network size mismatch");
  }
}

ExperimentData ExperimentData::create(Eigen::VectorXd outcomes,
                                      Eigen::VectorXi treatments,
                                      Eigen::MatrixXd covariates,
                                      std::vector<int> cluster_ids,
                                      std::optional<Network> network) {
  ExperimentData d;
  d.outcomes = std::move(outcomes);
  d.treatments = std::move(treatments);
  d.covariates = std::move(covariates);
  d.cluster_ids = std::move(cluster_ids);
  d.network = std::move(network);
  d.validate();
  return d;
}

ExperimentData load_csv(const std::string& path, const CsvSchema& schema) {
  const auto lines = read_lines(path);
  check(!lines.empty(), "csv: empty file: " + path);
  const auto header = split_csv_record(lines[0], "header");
  std::vector<std::string> names;
  names.reserve(header.size());
  for (const auto& h : header) names.push_back(trim(h));

  auto column_of = [&](const std::string& name) {
    for (std::size_t c = 0; c < names.size(); ++c) {
      if (names[c] == name) return static_cast<int>(c);
    }
    fail("csv: missing column '" + name + "' in " + path);
  };

  const int y_col = column_of(schema.outcome);
  const int z_col = column_of(schema.treatment);
  const int c_col = schema.cluster.empty() ? -1 : column_of(schema.cluster);

  std::vector<int> x_cols;
  if (!schema.covariates.empty()) {
    for (const auto& name : schema.covariates) x_cols.push_back(column_of(name));
  } else {
    for (std::size_t c = 0; c < names.size(); ++c) {
      const int ci = static_cast<int>(c);
      if (ci != y_col && ci != z_col && ci != c_col) x_cols.push_back(ci);
    }
  }

  std::vector<std::vector<std::string>> rows;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    auto fields = split_csv_record(lines[li], "row " + std::to_string(li));
    check(fields.size() == names.size(),
          "csv: row " + std::to_string(li) + " has " +
              std::to_string(fields.size()) + " fields, expected " +
              std::to_string(names.size()));
    rows.push_back(std::move(fields));
  }
  const int n = static_cast<int>(rows.size());
  check(n >= 2, "csv: need at least two data rows in " + path);

  Eigen::VectorXd y(n);
  Eigen::VectorXi z(n);
  Eigen::MatrixXd x(n, static_cast<int>(x_cols.size()));
  std::vector<int> clusters;
  if (c_col >= 0) clusters.resize(static_cast<std::size_t>(n));

  for (int i = 0; i < n; ++i) {
    const std::string where = "row " + std::to_string(i + 1);
    y[i] = parse_number(rows[i][y_col], where + " (" + schema.outcome + ")");
    const double zv =
        parse_number(rows[i][z_col], where + " (" + schema.treatment + ")");
    check(zv == 0.0 || zv == 1.0, "dataset: non-binary treatment in " + where);
    z[i] = static_cast<int>(zv);
    for (std::size_t j = 0; j < x_cols.size(); ++j) {
      x(i, static_cast<int>(j)) =
          parse_number(rows[i][x_cols[j]], where + " (" + names[x_cols[j]] + ")");
    }
    if (c_col >= 0) {
      clusters[static_cast<std::size_t>(i)] = static_cast<int>(
          parse_integer(rows[i][c_col], where + " (" + schema.cluster + ")"));
    }
  }
  return ExperimentData::create(std::move(y), std::move(z), std::move(x),
                                std::move(clusters));
}

void write_csv(const std::string& path, const ExperimentData& data,
               const CsvSchema& schema) {
  data.validate();
  std::vector<std::string> x_names = schema.covariates;
  if (x_names.empty()) {
    for (int j = 0; j < data.p(); ++j) x_names.push_back("X" + std::to_string(j + 1));
  }
  check(static_cast<int>(x_names.size()) == data.p(),
        "csv: covariate name count does not match data");

  std::string out;
  out += schema.outcome + "," + schema.treatment;
  for (const auto& x : x_names) out += "," + x;
  const bool with_cluster = !data.cluster_ids.empty();
  if (with_cluster) {
    out += "," + (schema.cluster.empty() ? std::string("C") : schema.cluster);
  }
  out += "\n";
  for (int i = 0; i < data.n(); ++i) {
    format_double(out, data.outcomes[i]);
    out += ",";
    out += std::to_string(data.treatments[i]);
    for (int j = 0; j < data.p(); ++j) {
      out += ",";
      format_double(out, data.covariates(i, j));
    }
    if (with_cluster) {
      out += "," + std::to_string(data.cluster_ids[static_cast<std::size_t>(i)]);
    }
    out += "\n";
  }
  std::ofstream f(path);
  check(f.good(), "cannot write file: " + path);
  f << out;
  check(f.good(), "failed writing file: " + path);
}

Network load_edges(const std::string& path, int n, int index_base) {
  check(index_base == 0 || index_base == 1, "edges: index base must be 0 or 1");
  const auto lines = read_lines(path);
  check(!lines.empty(), "edges: empty file: " + path);

  auto looks_numeric = [](const std::string& s) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    char* end = nullptr;
    std::strtol(t.c_str(), &end, 10);
    return end == t.c_str() + t.size();
  };

  std::vector<std::pair<int, int>> edge_list;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    const auto fields = split_csv_record(lines[li], "edge row " + std::to_string(li));
    check(fields.size() == 2, "edges: row " + std::to_string(li) +
                                  " needs exactly two columns");
    if (li == 0 && !(looks_numeric(fields[0]) && looks_numeric(fields[1]))) {
      continue;  // header row
    }
    const std::string where = "edge row " + std::to_string(li);
    const long a = parse_integer(fields[0], where) - index_base;
    const long b = parse_integer(fields[1], where) - index_base;
    edge_list.emplace_back(static_cast<int>(a), static_cast<int>(b));
  }
  return Network(n, std::move(edge_list));
}

}  // namespace randomlab
