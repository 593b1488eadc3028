#pragma once

// Text I/O: dense matrix format ("N M" header then N rows of M values),
// edge-list format ("# nodes N" header, then "i j w" lines with i < j),
// and flat key = value records used for sidecar metadata and configs.

#include <gtopo/graph_core.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace gtopo {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shortest representation that round-trips an IEEE double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = 0.0;
  std::sscanf(buf, "%lf", &back);
  if (back == v) {
    for (int prec = 1; prec < 17; ++prec) {
      char shorter[40];
      std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
      std::sscanf(shorter, "%lf", &back);
      if (back == v) return shorter;
    }
  }
  return buf;
}

inline void write_matrix(std::ostream& os, const Matrix& m) {
  os << m.rows() << " " << m.cols() << "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << " ";
      os << format_double(m(i, j));
    }
    os << "\n";
  }
}

inline void write_matrix(const std::string& path, const Matrix& m) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  write_matrix(os, m);
  if (!os) throw IoError("write failed: " + path);
}

inline Matrix read_matrix(std::istream& is, const std::string& what = "matrix") {
  Eigen::Index rows = 0, cols = 0;
  if (!(is >> rows >> cols) || rows <= 0 || cols <= 0)
    throw IoError("bad " + what + " header (expected 'N M')");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      if (!(is >> m(i, j)))
        throw IoError("truncated " + what + " body");
  return m;
}

inline Matrix read_matrix(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  return read_matrix(is, path);
}

inline void write_edge_list(std::ostream& os, const Graph& g, double tol = 0.0) {
  os << "# nodes " << g.n_nodes() << "\n";
  for (int i = 0; i < g.n_nodes(); ++i)
    for (int j = i + 1; j < g.n_nodes(); ++j)
      if (g.adjacency(i, j) > tol)
        os << i << " " << j << " " << format_double(g.adjacency(i, j)) << "\n";
}

inline void write_edge_list(const std::string& path, const Graph& g) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  write_edge_list(os, g);
  if (!os) throw IoError("write failed: " + path);
}

inline Graph read_edge_list(std::istream& is, const std::string& what = "edge list") {
  std::string line;
  int n = -1;
  Matrix adj;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string hash, word;
      ls >> hash >> word >> n;
      if (word != "nodes" || n <= 0) throw IoError("bad header in " + what);
      adj = Matrix::Zero(n, n);
      continue;
    }
    if (n < 0) throw IoError(what + ": missing '# nodes N' header");
    int i = 0, j = 0;
    double w = 0.0;
    if (!(ls >> i >> j)) throw IoError(what + ": bad edge line: " + line);
    if (!(ls >> w)) w = 1.0;
    if (i < 0 || j < 0 || i >= n || j >= n)
      throw IoError(what + ": node index out of range: " + line);
    adj(i, j) = w;
    adj(j, i) = w;
  }
  if (n < 0) throw IoError(what + ": missing '# nodes N' header");
  return make_graph(std::move(adj));
}

inline Graph read_edge_list(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  return read_edge_list(is, path);
}

// --- flat key = value records (sidecars, configs). '#' starts a comment;
// "[section]" lines prefix keys as "section.key". ---

using KeyValues = std::map<std::string, std::string>;

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline KeyValues read_key_values(std::istream& is) {
  KeyValues kv;
  std::string line, section;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("bad key=value line: " + line);
    std::string key = trim(line.substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline KeyValues read_key_values_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  return read_key_values(is);
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace gtopo
