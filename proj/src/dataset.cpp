#include "shel/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "shel/error.hpp"

namespace shel {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& path, long line_no, const std::string& s) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(path, line_no, "cannot parse number '" + s + "'");
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool looks_like_coords(const std::string& header) {
  const auto fields = split_csv(header);
  return fields.size() >= 3 && !fields.empty() && fields[0] == "id";
}

}  // namespace

void ObservedDataset::validate() const {
  const int nn = n();
  if (nn == 0) throw ValidationError("dataset is empty");
  if (!z.allFinite()) throw ValidationError("z contains NaN/Inf");
  if (X.rows() != nn) throw DimensionMismatch("X rows do not match n");
  if (!X.allFinite()) throw ValidationError("X contains NaN/Inf");
  if (has_sigma2()) {
    if (sigma2.size() != nn) throw DimensionMismatch("sigma2 length does not match n");
    for (int i = 0; i < nn; ++i)
      if (!(sigma2[i] > 0.0))
        throw ValidationError("row " + std::to_string(i) + " (id " + ids[i] +
                              "): sigma2 must be positive");
  }
  if (has_offset() && offset.size() != nn)
    throw DimensionMismatch("offset length does not match n");
  if (has_graph() && graph.n() != nn)
    throw DimensionMismatch("graph size does not match n");
  if (has_coords() && coords.rows() != nn)
    throw DimensionMismatch("coordinate rows do not match n");
  std::set<std::string> uniq(ids.begin(), ids.end());
  if (static_cast<int>(uniq.size()) != nn)
    throw ValidationError("location ids are not unique");
}

ObservedDataset load_dataset(const std::string& data_path,
                             const std::string& spatial_path,
                             const DatasetOptions& opts) {
  std::ifstream in(data_path);
  if (!in) throw DataError("cannot open data file: " + data_path);

  std::string line;
  long line_no = 0;
  if (!std::getline(in, line)) throw ParseError(data_path, 1, "empty file");
  ++line_no;
  const auto header = split_csv(line);
  if (header.empty()) throw ParseError(data_path, 1, "empty header");

  int col_id = -1, col_z = -1, col_sigma2 = -1, col_births = -1, col_offset = -1;
  std::vector<int> cov_cols;
  std::vector<std::string> cov_names;
  for (int j = 0; j < static_cast<int>(header.size()); ++j) {
    const std::string& h = header[j];
    if (h == "id") col_id = j;
    else if (h == "z") col_z = j;
    else if (h == "sigma2") col_sigma2 = j;
    else if (h == "births") col_births = j;
    else if (h == "offset") col_offset = j;
    else {
      cov_cols.push_back(j);
      cov_names.push_back(h);
    }
  }
  if (col_z < 0) throw ParseError(data_path, 1, "missing required column 'z'");
  if (col_births >= 0 && col_offset >= 0)
    throw ValidationError("columns 'births' and 'offset' are mutually exclusive");

  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != header.size())
      throw ParseError(data_path, line_no,
                       "expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()));
    rows.push_back(std::move(fields));
  }
  const int n = static_cast<int>(rows.size());
  if (n == 0) throw ParseError(data_path, line_no, "no data rows");

  ObservedDataset ds;
  ds.z.resize(n);
  if (col_sigma2 >= 0) ds.sigma2.resize(n);
  if (col_offset >= 0) ds.offset.resize(n);
  Eigen::VectorXd births;
  if (col_births >= 0) births.resize(n);
  Eigen::MatrixXd cov(n, static_cast<Eigen::Index>(cov_cols.size()));
  ds.ids.resize(n);
  for (int i = 0; i < n; ++i) {
    const long ln = i + 2;
    ds.ids[i] = (col_id >= 0) ? rows[i][col_id] : std::to_string(i);
    ds.z[i] = parse_double(data_path, ln, rows[i][col_z]);
    if (col_sigma2 >= 0) ds.sigma2[i] = parse_double(data_path, ln, rows[i][col_sigma2]);
    if (col_offset >= 0) ds.offset[i] = parse_double(data_path, ln, rows[i][col_offset]);
    if (col_births >= 0) births[i] = parse_double(data_path, ln, rows[i][col_births]);
    for (size_t k = 0; k < cov_cols.size(); ++k)
      cov(i, static_cast<Eigen::Index>(k)) =
          parse_double(data_path, ln, rows[i][cov_cols[k]]);
  }

  if (col_births >= 0) {
    if ((births.array() <= 0.0).any())
      throw ValidationError("births must be positive");
    if (!opts.births_offset)
      throw ValidationError("data file has a 'births' column; enable births_offset");
    const double rate = ds.z.sum() / births.sum();
    ds.expected = births * rate;
    ds.offset = ds.expected.array().log().matrix();
  }

  // intercept handling: prepend ones unless some column already is all ones
  bool have_ones = false;
  for (Eigen::Index j = 0; j < cov.cols(); ++j)
    if ((cov.col(j).array() == 1.0).all()) have_ones = true;
  if (opts.add_intercept && !have_ones) {
    ds.X.resize(n, cov.cols() + 1);
    ds.X.col(0).setOnes();
    ds.X.rightCols(cov.cols()) = cov;
    ds.covariate_names.push_back("intercept");
    ds.covariate_names.insert(ds.covariate_names.end(), cov_names.begin(),
                              cov_names.end());
  } else {
    if (cov.cols() == 0) throw ValidationError("design matrix has no columns");
    ds.X = cov;
    ds.covariate_names = cov_names;
  }

  if (!spatial_path.empty()) {
    std::string kind = opts.spatial_kind;
    if (kind == "auto") {
      std::ifstream sp(spatial_path);
      if (!sp) throw DataError("cannot open spatial file: " + spatial_path);
      std::string first;
      std::getline(sp, first);
      kind = looks_like_coords(first) ? "coords" : "edges";
    }
    if (kind == "edges")
      ds.graph = load_edge_list(spatial_path, n);
    else if (kind == "coords")
      ds.coords = load_coordinates(spatial_path, ds.ids);
    else if (kind != "none")
      throw ConfigError("unknown spatial_kind '" + kind + "'");
  }

  ds.validate();
  return ds;
}

LatticeGraph load_edge_list(const std::string& path, int n) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open edge list: " + path);
  std::vector<std::pair<int, int>> edges;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream ss(s);
    long a, b;
    if (!(ss >> a >> b))
      throw ParseError(path, line_no, "expected two integer node ids");
    std::string rest;
    if (ss >> rest) throw ParseError(path, line_no, "trailing content '" + rest + "'");
    edges.emplace_back(static_cast<int>(a), static_cast<int>(b));
  }
  try {
    return LatticeGraph(n, std::move(edges));
  } catch (const ValidationError& e) {
    throw DataError(path + ": " + e.what());
  }
}

Eigen::MatrixXd load_coordinates(const std::string& path,
                                 const std::vector<std::string>& ids) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open coordinates file: " + path);
  std::string line;
  long line_no = 0;
  if (!std::getline(in, line)) throw ParseError(path, 1, "empty file");
  ++line_no;
  const auto header = split_csv(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "x" || header[2] != "y")
    throw ParseError(path, 1, "expected header id,x,y");

  std::map<std::string, std::pair<double, double>> by_id;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (f.size() < 3) throw ParseError(path, line_no, "expected id,x,y");
    if (!by_id.emplace(f[0], std::make_pair(parse_double(path, line_no, f[1]),
                                            parse_double(path, line_no, f[2])))
             .second)
      throw ValidationError("duplicate coordinate id '" + f[0] + "'");
  }
  Eigen::MatrixXd coords(static_cast<Eigen::Index>(ids.size()), 2);
  for (size_t i = 0; i < ids.size(); ++i) {
    const auto it = by_id.find(ids[i]);
    if (it == by_id.end())
      throw ValidationError("no coordinates for id '" + ids[i] + "'");
    coords(static_cast<Eigen::Index>(i), 0) = it->second.first;
    coords(static_cast<Eigen::Index>(i), 1) = it->second.second;
  }
  return coords;
}

void write_dataset(const ObservedDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "id,z";
  if (data.has_sigma2()) out << ",sigma2";
  if (data.has_offset()) out << ",offset";
  for (const auto& name : data.covariate_names) out << "," << name;
  out << "\n";
  for (int i = 0; i < data.n(); ++i) {
    out << data.ids[i] << "," << fmt(data.z[i]);
    if (data.has_sigma2()) out << "," << fmt(data.sigma2[i]);
    if (data.has_offset()) out << "," << fmt(data.offset[i]);
    for (int j = 0; j < data.m(); ++j) out << "," << fmt(data.X(i, j));
    out << "\n";
  }
}

}  // namespace shel
