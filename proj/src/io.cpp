#include "esa/io.hpp"

#include "esa/error.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

namespace esa {

namespace fs = std::filesystem;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot write " + tmp.string());
    out << content;
    out.close();
    if (!out) throw InvalidInput("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw InvalidInput("cannot move output into place at " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> cells;
};

struct Csv {
  std::string file;
  std::vector<std::string> header;
  std::vector<CsvRow> rows;

  std::size_t column(const std::string& name, bool required = true) const {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == name) return c;
    }
    if (required) throw ParseError(file + ": missing column '" + name + "'");
    return header.size();
  }
  bool has(const std::string& name) const { return column(name, false) < header.size(); }
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Csv load_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  Csv csv;
  csv.file = path.string();
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::vector<std::string> cells = split(t);
    if (csv.header.empty()) {
      csv.header = std::move(cells);
      continue;
    }
    if (cells.size() != csv.header.size())
      throw ParseError(csv.file + ":" + std::to_string(no) + ": expected " + std::to_string(csv.header.size()) +
                       " fields, found " + std::to_string(cells.size()));
    csv.rows.push_back({no, std::move(cells)});
  }
  if (csv.header.empty()) throw ParseError(csv.file + ": empty file (no header)");
  return csv;
}

double to_double(const Csv& csv, const CsvRow& row, std::size_t col) {
  const std::string& s = row.cells[col];
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
    throw ParseError(csv.file + ":" + std::to_string(row.line) + ": '" + s + "' is not a number (column " +
                     csv.header[col] + ")");
  return v;
}

std::size_t to_index(const Csv& csv, const CsvRow& row, std::size_t col) {
  const std::string& s = row.cells[col];
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || v < 0)
    throw ParseError(csv.file + ":" + std::to_string(row.line) + ": '" + s + "' is not a non-negative integer (column " +
                     csv.header[col] + ")");
  return static_cast<std::size_t>(v);
}

using Curve = std::vector<std::pair<double, double>>;

// Puts one curve onto the uniform grid with m points.
std::vector<double> to_grid(Curve c, std::size_t m, const std::string& what) {
  std::sort(c.begin(), c.end());
  for (std::size_t a = 1; a < c.size(); ++a) {
    if (c[a].first == c[a - 1].first) throw ParseError(what + ": duplicate t value " + format_double(c[a].first));
  }
  if (c.size() < 2 || c.front().first != 0.0 || c.back().first != 1.0)
    throw ParseError(what + ": t must run from 0 to 1");
  const TimeGrid grid(m);
  bool on_grid = c.size() == m;
  for (std::size_t a = 0; on_grid && a < m; ++a) on_grid = std::abs(c[a].first - grid.at(a)) <= 1e-12;
  std::vector<double> out(m);
  if (on_grid) {
    for (std::size_t a = 0; a < m; ++a) out[a] = c[a].second;
    return out;
  }
  std::size_t seg = 0;
  for (std::size_t a = 0; a < m; ++a) {
    const double t = grid.at(a);
    while (seg + 2 < c.size() && c[seg + 1].first < t) ++seg;
    const double t0 = c[seg].first;
    const double t1 = c[seg + 1].first;
    const double w = (t - t0) / (t1 - t0);
    out[a] = c[seg].second + w * (c[seg + 1].second - c[seg].second);
  }
  return out;
}

template <class T>
void check_dense(const std::map<std::size_t, T>& m, const std::string& file, const std::string& what) {
  std::size_t expect = 0;
  for (const auto& [key, v] : m) {
    if (key != expect) throw ParseError(file + ": " + what + " indices must be 0.." + std::to_string(m.size() - 1));
    ++expect;
  }
}

}  // namespace

Panel read_panel_csv(const fs::path& path) {
  const Csv csv = load_csv(path);
  const std::size_t ci = csv.column("i");
  const std::size_t cj = csv.column("j");
  const std::size_t ct = csv.column("t");
  const std::size_t cv = csv.column("value");
  std::map<std::size_t, std::map<std::size_t, Curve>> curves;
  for (const auto& row : csv.rows) {
    const double v = to_double(csv, row, cv);
    if (!std::isfinite(v)) throw ParseError(csv.file + ":" + std::to_string(row.line) + ": value is not finite");
    curves[to_index(csv, row, ci)][to_index(csv, row, cj)].emplace_back(to_double(csv, row, ct), v);
  }
  if (curves.empty()) throw ParseError(csv.file + ": no data rows");
  check_dense(curves, csv.file, "observation");
  std::size_t m = 0;
  std::size_t k = curves.begin()->second.size();
  for (const auto& [i, row] : curves) {
    check_dense(row, csv.file, "component");
    if (row.size() != k) throw ParseError(csv.file + ": observation " + std::to_string(i) + " has a different component count");
    for (const auto& [j, c] : row) m = std::max(m, c.size());
  }
  if (m < 3) throw ParseError(csv.file + ": curves need at least 3 samples");
  const TimeGrid grid(m);
  Panel out;
  for (const auto& [i, row] : curves) {
    std::vector<SampledFunction> r;
    for (const auto& [j, c] : row) {
      r.emplace_back(grid, to_grid(c, m, csv.file + " (i=" + std::to_string(i) + ", j=" + std::to_string(j) + ")"));
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string panel_csv(const Panel& panel) {
  std::string s = "i,j,t,value\n";
  for (std::size_t i = 0; i < panel.size(); ++i) {
    for (std::size_t j = 0; j < panel[i].size(); ++j) {
      const auto& f = panel[i][j];
      for (std::size_t a = 0; a < f.values().size(); ++a) {
        s += std::to_string(i) + ',' + std::to_string(j) + ',' + format_double(f.grid().at(a)) + ',' +
             format_double(f[a]) + '\n';
      }
    }
  }
  return s;
}

std::vector<SampledFunction> read_functions_csv(const fs::path& path) {
  const Csv csv = load_csv(path);
  const std::size_t cj = csv.column("j");
  const std::size_t ct = csv.column("t");
  const std::size_t cv = csv.column("value");
  std::map<std::size_t, Curve> curves;
  for (const auto& row : csv.rows)
    curves[to_index(csv, row, cj)].emplace_back(to_double(csv, row, ct), to_double(csv, row, cv));
  if (curves.empty()) throw ParseError(csv.file + ": no data rows");
  check_dense(curves, csv.file, "component");
  std::size_t m = 0;
  for (const auto& [j, c] : curves) m = std::max(m, c.size());
  if (m < 3) throw ParseError(csv.file + ": curves need at least 3 samples");
  std::vector<SampledFunction> out;
  for (const auto& [j, c] : curves)
    out.emplace_back(TimeGrid(m), to_grid(c, m, csv.file + " (j=" + std::to_string(j) + ")"));
  return out;
}

std::string functions_csv(const std::vector<SampledFunction>& fs) {
  std::string s = "j,t,value\n";
  for (std::size_t j = 0; j < fs.size(); ++j) {
    for (std::size_t a = 0; a < fs[j].values().size(); ++a)
      s += std::to_string(j) + ',' + format_double(fs[j].grid().at(a)) + ',' + format_double(fs[j][a]) + '\n';
  }
  return s;
}

std::string warps_csv(const std::vector<std::vector<Warp>>& warps) {
  std::string s = "i,j,t,value\n";
  for (std::size_t i = 0; i < warps.size(); ++i) {
    for (std::size_t j = 0; j < warps[i].size(); ++j) {
      const Warp& g = warps[i][j];
      for (std::size_t a = 0; a < g.values().size(); ++a)
        s += std::to_string(i) + ',' + std::to_string(j) + ',' + format_double(g.grid().at(a)) + ',' +
             format_double(g[a]) + '\n';
    }
  }
  return s;
}

std::string observation_warps_csv(const std::vector<Warp>& warps) {
  std::string s = "i,t,value\n";
  for (std::size_t i = 0; i < warps.size(); ++i) {
    for (std::size_t a = 0; a < warps[i].values().size(); ++a)
      s += std::to_string(i) + ',' + format_double(warps[i].grid().at(a)) + ',' + format_double(warps[i][a]) + '\n';
  }
  return s;
}

std::vector<std::vector<Warp>> read_warps_csv(const fs::path& path) {
  const Panel p = read_panel_csv(path);
  std::vector<std::vector<Warp>> out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::vector<Warp> row;
    for (std::size_t j = 0; j < p[i].size(); ++j) {
      try {
        row.emplace_back(p[i][j].grid(), p[i][j].values());
      } catch (const InvalidWarp& e) {
        throw ParseError(path.string() + " (i=" + std::to_string(i) + ", j=" + std::to_string(j) + "): " + e.what());
      }
    }
    out.push_back(std::move(row));
  }
  return out;
}

SiteTable read_sites_csv(const fs::path& path) {
  const Csv csv = load_csv(path);
  const std::size_t cj = csv.column("j");
  std::vector<std::size_t> coords{csv.column("x"), csv.column("y")};
  if (csv.has("z")) coords.push_back(csv.column("z"));
  const bool labelled = csv.has("label");
  std::map<std::size_t, std::pair<std::vector<double>, std::string>> rows;
  for (const auto& row : csv.rows) {
    std::vector<double> s;
    for (std::size_t c : coords) s.push_back(to_double(csv, row, c));
    const std::size_t j = to_index(csv, row, cj);
    if (rows.count(j)) throw ParseError(csv.file + ":" + std::to_string(row.line) + ": duplicate site j=" + std::to_string(j));
    rows[j] = {std::move(s), labelled ? row.cells[csv.column("label")] : std::string()};
  }
  if (rows.empty()) throw ParseError(csv.file + ": no sites");
  check_dense(rows, csv.file, "site");
  SiteTable t;
  std::vector<std::vector<double>> sites;
  for (auto& [j, r] : rows) {
    sites.push_back(r.first);
    if (labelled) t.labels.push_back(r.second);
  }
  t.layout = SpatialLayout(std::move(sites));
  return t;
}

std::string sites_csv(const SpatialLayout& layout, const std::vector<std::string>& labels) {
  const bool three = layout.dimension() == 3;
  std::string s = three ? "j,x,y,z" : "j,x,y";
  if (!labels.empty()) s += ",label";
  s += '\n';
  for (std::size_t j = 0; j < layout.size(); ++j) {
    s += std::to_string(j);
    for (double c : layout.sites()[j]) s += ',' + format_double(c);
    if (!labels.empty()) s += ',' + labels[j];
    s += '\n';
  }
  return s;
}

MvSample read_sample(const fs::path& panel, const fs::path& sites) {
  MvSample s;
  s.funcs = read_panel_csv(panel);
  SiteTable t = read_sites_csv(sites);
  s.layout = std::move(t.layout);
  s.labels = std::move(t.labels);
  s.validate();
  return s;
}

std::string variogram_csv(const EmpiricalVariogram& emp, const std::optional<VariogramModel>& model) {
  std::string s = "bin_center,count,estimate,fitted_value\n";
  for (std::size_t b = 0; b < emp.size(); ++b) {
    const double fitted = model ? (*model)(emp.centers[b]) : std::nan("");
    s += format_double(emp.centers[b]) + ',' + std::to_string(emp.counts[b]) + ',' + format_double(emp.estimates[b]) +
         ',' + format_double(fitted) + '\n';
  }
  return s;
}

}  // namespace esa
