#include "rci/dataset.hpp"
#include "rci/errors.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace rci {

ObservedDataset::ObservedDataset(Eigen::MatrixXd x, Eigen::VectorXd y, Eigen::VectorXd z)
    : x_(std::move(x)), y_(std::move(y)), z_(std::move(z)) {
  if (y_.size() != x_.rows() || z_.size() != x_.rows())
    throw DimensionError("dataset columns have different lengths");
  for (Eigen::Index i = 0; i < z_.size(); ++i) {
    if (z_[i] != 0.0 && z_[i] != 1.0)
      throw InvalidArgument("treatment must be 0 or 1 (row " + std::to_string(i) + ")");
    arm_rows_[z_[i] > 0.5 ? 1 : 0].push_back(i);
  }
}

double ObservedDataset::arm_frequency(int z) const {
  if (size() == 0) return 0.0;
  return static_cast<double>(arm_size(z)) / static_cast<double>(size());
}

void ObservedDataset::require_both_arms() const {
  if (arm_size(0) == 0 || arm_size(1) == 0)
    throw PositivityError("dataset needs at least one treated and one control row");
}

ObservedDataset ObservedDataset::with_covariates(Eigen::MatrixXd x) const {
  if (x.rows() != size()) throw DimensionError("replacement covariates have wrong row count");
  return ObservedDataset(std::move(x), y_, z_);
}

ObservedDataset ObservedDataset::subset(const std::vector<Eigen::Index>& rows) const {
  Eigen::MatrixXd x(rows.size(), dim());
  Eigen::VectorXd y(rows.size()), z(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    x.row(k) = x_.row(rows[k]);
    y[k] = y_[rows[k]];
    z[k] = z_[rows[k]];
  }
  return ObservedDataset(std::move(x), std::move(y), std::move(z));
}

bool ObservedDataset::operator==(const ObservedDataset& other) const {
  return x_.rows() == other.x_.rows() && x_.cols() == other.x_.cols() && x_ == other.x_ &&
         y_ == other.y_ && z_ == other.z_;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(std::ostream& os, const ObservedDataset& data) {
  os << "z,y";
  for (Eigen::Index j = 0; j < data.dim(); ++j) os << ",x" << (j + 1);
  os << '\n';
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    os << data.treatment(i) << ',' << format_double(data.y()[i]);
    for (Eigen::Index j = 0; j < data.dim(); ++j) os << ',' << format_double(data.x()(i, j));
    os << '\n';
  }
}

void write_csv(const std::string& path, const ObservedDataset& data) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_csv(os, data);
  if (!os) throw IoError("failed writing " + path);
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && (s[b] == ' ' || s[b] == '\t')) ++b;
  return s.substr(b);
}

double parse_number(const std::string& text, const std::string& source, std::size_t row,
                    const std::string& column) {
  const std::string t = trim(text);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE)
    throw ParseError(source + ": row " + std::to_string(row) + ", column " + column +
                     ": cannot parse '" + t + "' as a number");
  return v;
}

} // namespace

ObservedDataset read_csv(std::istream& is, const std::string& source) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError(source + ": empty file, header expected");
  // Strip a UTF-8 byte order mark if present.
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  std::vector<std::string> header = split_fields(line);
  for (auto& h : header) h = trim(h);

  long zcol = -1, ycol = -1;
  std::vector<std::size_t> xcols;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == "z") zcol = static_cast<long>(j);
    else if (header[j] == "y") ycol = static_cast<long>(j);
    else xcols.push_back(j);
  }
  if (zcol < 0) throw ParseError(source + ": column z not found");
  if (ycol < 0) throw ParseError(source + ": column y not found");

  std::vector<double> xs, ys, zs;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size())
      throw ParseError(source + ": row " + std::to_string(row) + ": expected " +
                       std::to_string(header.size()) + " fields, found " +
                       std::to_string(fields.size()));
    const double z = parse_number(fields[zcol], source, row, "z");
    if (z != 0.0 && z != 1.0)
      throw ParseError(source + ": row " + std::to_string(row) + ", column z: treatment must be 0 or 1");
    zs.push_back(z);
    ys.push_back(parse_number(fields[ycol], source, row, "y"));
    for (std::size_t j : xcols) xs.push_back(parse_number(fields[j], source, row, header[j]));
  }

  const auto n = static_cast<Eigen::Index>(ys.size());
  const auto d = static_cast<Eigen::Index>(xcols.size());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = xs[i * d + j];
  return ObservedDataset(std::move(x), Eigen::Map<Eigen::VectorXd>(ys.data(), n),
                         Eigen::Map<Eigen::VectorXd>(zs.data(), n));
}

ObservedDataset read_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  return read_csv(is, path);
}

} // namespace rci
