#include "kinlang/targets.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>

#include "kinlang/rng.hpp"

namespace kinlang {

void Potential::check_dim(const Vector& x, const char* op) const {
  if (static_cast<std::size_t>(x.size()) != dim()) {
    throw std::invalid_argument(std::string(op) + ": expected dimension " + std::to_string(dim()) +
                                ", got " + std::to_string(x.size()));
  }
}

ZeroPotential::ZeroPotential(std::size_t d) : d_(d) {
  if (d == 0) throw std::invalid_argument("ZeroPotential: dimension must be at least 1");
}

double ZeroPotential::value(const Vector& x) const {
  check_dim(x, "ZeroPotential::value");
  return 0.0;
}

Vector ZeroPotential::gradient(const Vector& x) const {
  check_dim(x, "ZeroPotential::gradient");
  return Vector::Zero(x.size());
}

QuadraticPotential::QuadraticPotential(Vector diag) : diag_(std::move(diag)) {
  if (diag_.size() == 0) throw std::invalid_argument("make_quadratic: empty diagonal");
  for (Eigen::Index i = 0; i < diag_.size(); ++i) {
    if (!(diag_[i] > 0.0) || !std::isfinite(diag_[i])) {
      throw std::invalid_argument("make_quadratic: diagonal entries must be positive");
    }
  }
}

double QuadraticPotential::value(const Vector& x) const {
  check_dim(x, "QuadraticPotential::value");
  return 0.5 * x.dot(diag_.cwiseProduct(x));
}

Vector QuadraticPotential::gradient(const Vector& x) const {
  check_dim(x, "QuadraticPotential::gradient");
  return diag_.cwiseProduct(x);
}

std::optional<ConvexityBounds> QuadraticPotential::bounds() const {
  return ConvexityBounds{diag_.minCoeff(), diag_.maxCoeff()};
}

QuadraticPotential make_quadratic(const Vector& diag) { return QuadraticPotential(diag); }

Vector default_quadratic_diag(std::size_t d) {
  if (d == 0) throw std::invalid_argument("default_quadratic_diag: dimension must be at least 1");
  if (d == 1) return Vector::Ones(1);
  return Vector::LinSpaced(static_cast<Eigen::Index>(d), 1.0, 4.0);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

LogisticPotential::LogisticPotential(Eigen::MatrixXd features, Vector labels, double delta)
    : features_(std::move(features)), labels_(std::move(labels)), delta_(delta) {
  if (features_.rows() == 0 || features_.cols() == 0) {
    throw std::invalid_argument("LogisticPotential: empty feature matrix");
  }
  if (labels_.size() != features_.rows()) {
    throw std::invalid_argument("LogisticPotential: label count does not match feature rows");
  }
  for (Eigen::Index i = 0; i < labels_.size(); ++i) {
    if (labels_[i] != 1.0 && labels_[i] != -1.0) {
      throw std::invalid_argument("LogisticPotential: labels must be +1 or -1");
    }
  }
  if (!(delta_ >= 0.0) || !std::isfinite(delta_)) {
    throw std::invalid_argument("LogisticPotential: delta must be non-negative");
  }
  const Eigen::MatrixXd gram = features_.transpose() * features_;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  bounds_ = {delta_, delta_ + 0.25 * eig.eigenvalues().maxCoeff()};
}

double LogisticPotential::value(const Vector& theta) const {
  check_dim(theta, "LogisticPotential::value");
  const Vector margins = labels_.cwiseProduct(features_ * theta);
  double sum = 0.5 * delta_ * theta.squaredNorm();
  for (Eigen::Index i = 0; i < margins.size(); ++i) sum += softplus(-margins[i]);
  return sum;
}

Vector LogisticPotential::gradient(const Vector& theta) const {
  check_dim(theta, "logistic_grad");
  const Vector margins = labels_.cwiseProduct(features_ * theta);
  Vector weights(margins.size());
  for (Eigen::Index i = 0; i < margins.size(); ++i) {
    weights[i] = labels_[i] * sigmoid(-margins[i]);
  }
  return delta_ * theta - features_.transpose() * weights;
}

Vector logistic_grad(const LogisticPotential& p, const Vector& theta) {
  return p.gradient(theta);
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& raw, double& out) {
  const std::string cell = trim(raw);
  if (cell.empty()) return false;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

}  // namespace

Dataset parse_dataset(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool first_content = true;
  Dataset ds;
  std::vector<std::vector<double>> rows;

  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
      line.erase(0, 3);
    }
    if (trim(line).empty()) continue;
    const auto cells = split_cells(line);
    std::vector<double> values(cells.size());
    bool numeric = true;
    std::size_t bad_cell = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (!parse_number(cells[i], values[i])) {
        numeric = false;
        bad_cell = i + 1;
        break;
      }
    }
    if (first_content) {
      first_content = false;
      if (!numeric) {
        ds.header_skipped = true;
        width = cells.size();
        continue;
      }
    }
    if (!numeric) {
      throw DataError("line " + std::to_string(line_no) + ": non-numeric cell in column " +
                          std::to_string(bad_cell),
                      line_no);
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width) {
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                          " columns, found " + std::to_string(cells.size()),
                      line_no);
    }
    if (width < 2) {
      throw DataError("line " + std::to_string(line_no) + ": need a label and at least one feature",
                      line_no);
    }
    const double label = values[0];
    if (label != 1.0 && label != -1.0 && label != 0.0) {
      throw DataError("line " + std::to_string(line_no) + ": label must be -1, +1, 0 or 1",
                      line_no);
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw DataError("dataset is empty", line_no);

  bool has_zero = false;
  bool has_minus = false;
  for (const auto& r : rows) {
    has_zero |= r[0] == 0.0;
    has_minus |= r[0] == -1.0;
  }
  if (has_zero && has_minus) {
    throw DataError("labels mix the {0,1} and {-1,+1} conventions", line_no);
  }

  ds.rows = rows.size();
  ds.cols = width - 1;
  ds.features.resize(static_cast<Eigen::Index>(ds.rows), static_cast<Eigen::Index>(ds.cols));
  ds.labels.resize(static_cast<Eigen::Index>(ds.rows));
  ds.labels_mapped_from_01 = has_zero;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double label = rows[i][0];
    ds.labels[static_cast<Eigen::Index>(i)] = label == 0.0 ? -1.0 : label;
    for (std::size_t j = 0; j < ds.cols; ++j) {
      ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j + 1];
    }
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path.string(), 0);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

Dataset make_synthetic_dataset(std::size_t m, std::size_t d, std::uint64_t seed) {
  if (m == 0 || d == 0) throw std::invalid_argument("make_synthetic_dataset: empty shape");
  PhiloxStream rng(seed, 0, 0, StreamTag::dataset);
  Dataset ds;
  ds.rows = m;
  ds.cols = d;
  const auto rows = static_cast<Eigen::Index>(m);
  const auto cols = static_cast<Eigen::Index>(d);
  Vector truth(cols);
  for (Eigen::Index j = 0; j < cols; ++j) truth[j] = rng.normal();
  ds.features.resize(rows, cols);
  ds.labels.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) ds.features(i, j) = rng.normal();
    const double p = sigmoid(ds.features.row(i).dot(truth));
    ds.labels[i] = rng.uniform() < p ? 1.0 : -1.0;
  }
  return ds;
}

}  // namespace kinlang
