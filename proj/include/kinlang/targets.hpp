#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace kinlang {

using Vector = Eigen::VectorXd;

/// Strong convexity m and gradient Lipschitz constant M of f.
struct ConvexityBounds {
  double m;
  double big_m;
};

/// Target potential f; the sampled density is proportional to exp(-f).
/// Implementations are immutable, so concurrent evaluation is safe.
class Potential {
 public:
  virtual ~Potential() = default;
  virtual std::size_t dim() const = 0;
  virtual double value(const Vector& x) const = 0;
  virtual Vector gradient(const Vector& x) const = 0;
  virtual std::optional<ConvexityBounds> bounds() const { return std::nullopt; }
  virtual std::string name() const = 0;

 protected:
  void check_dim(const Vector& x, const char* op) const;
};

/// f = 0. The free (Ornstein-Uhlenbeck) limit of every sampler.
class ZeroPotential final : public Potential {
 public:
  explicit ZeroPotential(std::size_t d);
  std::size_t dim() const override { return d_; }
  double value(const Vector& x) const override;
  Vector gradient(const Vector& x) const override;
  std::string name() const override { return "zero"; }

 private:
  std::size_t d_;
};

/// f(x) = 1/2 sum_i a_i x_i^2 with every a_i > 0.
class QuadraticPotential final : public Potential {
 public:
  explicit QuadraticPotential(Vector diag);
  std::size_t dim() const override { return static_cast<std::size_t>(diag_.size()); }
  double value(const Vector& x) const override;
  Vector gradient(const Vector& x) const override;
  std::optional<ConvexityBounds> bounds() const override;
  std::string name() const override { return "quadratic"; }
  const Vector& diag() const { return diag_; }

 private:
  Vector diag_;
};

QuadraticPotential make_quadratic(const Vector& diag);

/// Default diagonal for `--target quadratic` without `--diag`: d values evenly
/// spaced on [1, 4].
Vector default_quadratic_diag(std::size_t d);

/// Ridge-regularised logistic regression,
/// f(theta) = delta/2 |theta|^2 + sum_i log(1 + exp(-y_i x_i^T theta)).
class LogisticPotential final : public Potential {
 public:
  /// features is m x d, labels are +-1, delta >= 0 (strongly convex only when > 0).
  LogisticPotential(Eigen::MatrixXd features, Vector labels, double delta);

  std::size_t dim() const override { return static_cast<std::size_t>(features_.cols()); }
  double value(const Vector& theta) const override;
  Vector gradient(const Vector& theta) const override;
  /// m = delta, M = delta + lambda_max(X^T X) / 4 (a loose bound).
  std::optional<ConvexityBounds> bounds() const override { return bounds_; }
  std::string name() const override { return "logistic"; }

  const Eigen::MatrixXd& features() const { return features_; }
  const Vector& labels() const { return labels_; }
  double delta() const { return delta_; }

 private:
  Eigen::MatrixXd features_;
  Vector labels_;
  double delta_;
  ConvexityBounds bounds_{};
};

/// log(1 + e^z) without overflow.
double softplus(double z);
/// 1 / (1 + e^{-z}) without overflow.
double sigmoid(double z);

Vector logistic_grad(const LogisticPotential& p, const Vector& theta);

/// Raised for malformed data files; carries the 1-based line number.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct Dataset {
  Eigen::MatrixXd features;
  Vector labels;
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool header_skipped = false;
  /// True when the file used {0, 1} labels and they were mapped to {-1, +1}.
  bool labels_mapped_from_01 = false;
};

/// Reads a comma-separated file whose first column is the label.
Dataset load_dataset(const std::filesystem::path& path);
Dataset parse_dataset(const std::string& text);

/// Standard-normal features and labels drawn from a logistic model with a
/// standard-normal true weight vector. Same shape contract as load_dataset.
Dataset make_synthetic_dataset(std::size_t m, std::size_t d, std::uint64_t seed);

}  // namespace kinlang
