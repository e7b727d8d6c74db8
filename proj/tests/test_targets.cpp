#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <Eigen/Eigenvalues>

#include "kinlang/rng.hpp"
#include "kinlang/targets.hpp"

using namespace kinlang;

namespace {

// Central-difference gradient, the oracle for every analytic gradient here.
Vector fd_gradient(const Potential& f, const Vector& x, double eps) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector a = x, b = x;
    a[i] += eps;
    b[i] -= eps;
    g[i] = (f.value(a) - f.value(b)) / (2 * eps);
  }
  return g;
}

Vector normal_vector(std::size_t d, double scale, RandomSource& rng) {
  Vector v(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = scale * rng.normal();
  return v;
}

std::size_t data_error_line(const std::string& text) {
  try {
    parse_dataset(text);
  } catch (const DataError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_CASE("quadratic potential") {
  const QuadraticPotential one = make_quadratic(Vector::Ones(1));
  Vector x(1);
  x << 3.0;
  CHECK(one.value(x) == 4.5);
  CHECK(one.gradient(x)[0] == 3.0);
  CHECK(one.bounds()->m == 1.0);
  CHECK(one.bounds()->big_m == 1.0);

  Vector d(2);
  d << 1.0, 4.0;
  const QuadraticPotential q = make_quadratic(d);
  CHECK(q.bounds()->m == 1.0);
  CHECK(q.bounds()->big_m == 4.0);

  Vector bad(2);
  bad << 1.0, 0.0;
  CHECK_THROWS_AS(make_quadratic(bad), std::invalid_argument);
  CHECK_THROWS_AS(make_quadratic(Vector()), std::invalid_argument);
  CHECK_THROWS_AS(q.gradient(Vector::Zero(3)), std::invalid_argument);
}

TEST_CASE("default diagonal") {
  CHECK(default_quadratic_diag(1)[0] == 1.0);
  const Vector d = default_quadratic_diag(4);
  CHECK(d[0] == 1.0);
  CHECK(d[1] == doctest::Approx(2.0));
  CHECK(d[3] == 4.0);
}

TEST_CASE("zero potential") {
  const ZeroPotential z(3);
  CHECK(z.value(Vector::Ones(3)) == 0.0);
  CHECK(z.gradient(Vector::Ones(3)).isZero(0));
  CHECK_FALSE(z.bounds().has_value());
}

TEST_CASE("gradients agree with central differences") {
  PhiloxStream rng(21, 0, 0, StreamTag::selftest);
  const Dataset ds = make_synthetic_dataset(50, 5, 3);
  const LogisticPotential lg(ds.features, ds.labels, 0.1);
  const QuadraticPotential q = make_quadratic(default_quadratic_diag(5));
  for (int k = 0; k < 100; ++k) {
    const Vector x = normal_vector(5, 1.0, rng);
    const Vector gq = q.gradient(x);
    CHECK((gq - fd_gradient(q, x, 1e-5)).norm() <= 1e-5 * std::max(1.0, gq.norm()));
    const Vector gl = lg.gradient(x);
    CHECK((gl - fd_gradient(lg, x, 1e-5)).norm() <= 1e-5 * std::max(1.0, gl.norm()));
  }
}

TEST_CASE("logistic gradient at 20 random points, relative error below 1e-6") {
  PhiloxStream rng(22, 0, 0, StreamTag::selftest);
  const Dataset ds = make_synthetic_dataset(50, 5, 4);
  const LogisticPotential lg(ds.features, ds.labels, 0.1);
  for (int k = 0; k < 20; ++k) {
    const Vector x = normal_vector(5, 0.5, rng);
    const Vector g = logistic_grad(lg, x);
    CHECK((g - fd_gradient(lg, x, 1e-5)).norm() / g.norm() < 1e-6);
  }
}

TEST_CASE("logistic gradient examples") {
  const Dataset ds = make_synthetic_dataset(30, 4, 5);
  const LogisticPotential lg(ds.features, ds.labels, 0.1);
  Vector want = Vector::Zero(4);
  for (Eigen::Index i = 0; i < 30; ++i) want -= ds.labels[i] * ds.features.row(i).transpose() / 2;
  CHECK((lg.gradient(Vector::Zero(4)) - want).norm() < 1e-13);

  // One datum x = e1, y = +1, no ridge: grad = -e1 s(-theta_1).
  Eigen::MatrixXd x1(1, 2);
  x1 << 1.0, 0.0;
  const LogisticPotential one(x1, Vector::Ones(1), 0.0);
  Vector th(2);
  th << 0.7, -2.0;
  CHECK(one.gradient(th)[0] == doctest::Approx(-1.0 / (1.0 + std::exp(0.7))));
  CHECK(one.gradient(th)[1] == 0.0);
  th << 800.0, 0.0;
  CHECK(std::abs(one.gradient(th)[0]) < 1e-300);
  CHECK(std::isfinite(one.value(th)));

  CHECK_THROWS_AS(lg.gradient(Vector::Zero(3)), std::invalid_argument);
}

TEST_CASE("logistic bounds") {
  const Dataset ds = make_synthetic_dataset(40, 3, 6);
  const LogisticPotential lg(ds.features, ds.labels, 0.25);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ds.features.transpose() * ds.features);
  CHECK(lg.bounds()->m == 0.25);
  CHECK(lg.bounds()->big_m == doctest::Approx(0.25 + eig.eigenvalues().maxCoeff() / 4));
}

TEST_CASE("logistic value stays finite for |theta| <= 1e3") {
  PhiloxStream rng(23, 0, 0, StreamTag::selftest);
  const Dataset ds = make_synthetic_dataset(50, 5, 7);
  const LogisticPotential lg(ds.features, ds.labels, 0.1);
  for (int k = 0; k < 200; ++k) {
    Vector x = normal_vector(5, 1.0, rng);
    x *= 1e3 / x.norm();
    CHECK(std::isfinite(lg.value(x)));
    CHECK(lg.gradient(x).allFinite());
  }
}

TEST_CASE("softplus and sigmoid") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
  CHECK(softplus(1000.0) == 1000.0);
  CHECK(softplus(-1000.0) == 0.0);
  CHECK(softplus(-30.0) == doctest::Approx(std::exp(-30.0)).epsilon(1e-12));
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(1000.0) == 1.0);
  CHECK(sigmoid(-1000.0) == 0.0);
}

TEST_CASE("parse_dataset") {
  SUBCASE("two rows") {
    const Dataset ds = parse_dataset("1,0.5,1.0\n-1,0.0,2.0");
    CHECK(ds.rows == 2);
    CHECK(ds.cols == 2);
    CHECK(ds.labels[0] == 1.0);
    CHECK(ds.labels[1] == -1.0);
    CHECK(ds.features(0, 0) == 0.5);
    CHECK(ds.features(1, 1) == 2.0);
    CHECK_FALSE(ds.header_skipped);
    CHECK_FALSE(ds.labels_mapped_from_01);
  }
  SUBCASE("0/1 labels are mapped") {
    const Dataset ds = parse_dataset("1,0.5\n0,0.1\n");
    CHECK(ds.labels[0] == 1.0);
    CHECK(ds.labels[1] == -1.0);
    CHECK(ds.labels_mapped_from_01);
  }
  SUBCASE("header, BOM and CRLF") {
    const Dataset ds = parse_dataset("\xEF\xBB\xBFlabel,a,b\r\n1,2,3\r\n-1,4,5\r\n");
    CHECK(ds.header_skipped);
    CHECK(ds.rows == 2);
    CHECK(ds.features(1, 1) == 5.0);
  }
  SUBCASE("errors carry line numbers") {
    CHECK(data_error_line("1,0.5,1.0\n-1,0.0\n") == 2);
    CHECK(data_error_line("1,0.5\n1,abc\n") == 2);
    CHECK(data_error_line("h,a\n1,1\n1,2,3\n") == 3);
    CHECK(data_error_line("1,0.5\n2,0.5\n") == 2);
    CHECK_THROWS_AS(parse_dataset(""), DataError);
    CHECK_THROWS_AS(parse_dataset("label,a\n"), DataError);
    CHECK_THROWS_AS(parse_dataset("1,1\n0,1\n-1,1\n"), DataError);
  }
}

TEST_CASE("load_dataset reads files") {
  const auto path = std::filesystem::temp_directory_path() / "kinlang_test_targets.csv";
  {
    std::ofstream out(path);
    out << "y,f1,f2\n1,0.5,1.0\n-1,0.0,2.0\n";
  }
  const Dataset ds = load_dataset(path);
  CHECK(ds.rows == 2);
  CHECK(ds.cols == 2);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_dataset(path), DataError);
}

TEST_CASE("synthetic dataset") {
  const Dataset a = make_synthetic_dataset(50, 5, 9);
  const Dataset b = make_synthetic_dataset(50, 5, 9);
  CHECK(a.rows == 50);
  CHECK(a.cols == 5);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  CHECK((a.labels.array().abs() == 1.0).all());
  CHECK(make_synthetic_dataset(50, 5, 10).features != a.features);
}
