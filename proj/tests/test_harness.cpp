#include <doctest.h>

#include <cmath>
#include <sstream>

#include "kinlang/harness.hpp"

using namespace kinlang;

namespace {

std::vector<ErrorRow> power_law(double c, double p, const std::vector<double>& hs,
                                const std::vector<double>& noise = {}) {
  std::vector<ErrorRow> rows;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    ErrorRow r;
    r.h = hs[i];
    r.s_value = c * std::pow(hs[i], p) * (noise.empty() ? 1.0 : 1.0 + noise[i]);
    rows.push_back(r);
  }
  return rows;
}

std::string strip_wall_time(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + '\n';
  return out;
}

}  // namespace

TEST_CASE("method names round trip") {
  for (Method m : all_methods()) CHECK(parse_method(method_name(m)) == m);
  CHECK(all_methods().size() == 7);
  CHECK(parse_method_list("sort,sofa,strang").size() == 3);
  CHECK_THROWS_AS(parse_method("euler"), std::invalid_argument);
  CHECK_THROWS_AS(parse_method_list("sort,,sofa"), std::invalid_argument);
  CHECK(noise_family(Method::obabo) == NoiseFamily::half_exp_pairs);
  CHECK(noise_family(Method::sofa) == NoiseFamily::triple);
}

TEST_CASE("step_count") {
  CHECK(step_count(50.0, 0.025) == 2000);
  CHECK(step_count(1.0, 0.1) == 10);
  CHECK_THROWS_AS(step_count(1.0, 0.3), std::invalid_argument);
  CHECK_THROWS_AS(step_count(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("left-point is exact on the free flow: S = 0") {
  const ZeroPotential f(3);
  const DynamicsParams p = DynamicsParams::make(2.0, 1.0);
  const ErrorRow r = strong_error(Method::left_point, f, p, 5.0, 0.1, 16, 3);
  CHECK(r.s_value < 1e-12);
  CHECK(r.N == 50);
  CHECK(r.samples == 16);
}

TEST_CASE("strong error estimates from disjoint seeds agree") {
  const QuadraticPotential f = make_quadratic(default_quadratic_diag(4));
  const DynamicsParams p = DynamicsParams::make(2.0, 1.0);
  for (Method m : {Method::strang, Method::sort}) {
    const ErrorRow a = strong_error(m, f, p, 5.0, 0.1, 200, 101);
    const ErrorRow b = strong_error(m, f, p, 5.0, 0.1, 200, 202);
    CHECK(a.s_value > 0.0);
    CHECK(a.std_err > 0.0);
    CHECK(std::abs(a.s_value - b.s_value) < 4.0 * std::hypot(a.std_err, b.std_err));
  }
}

TEST_CASE("strong error is identical across thread counts") {
  const QuadraticPotential f = make_quadratic(default_quadratic_diag(3));
  const DynamicsParams p = DynamicsParams::make(2.0, 1.0);
  for (Method m : all_methods()) {
    RunOptions one, four;
    four.threads = 4;
    const ErrorRow a = strong_error(m, f, p, 2.0, 0.1, 24, 5, one);
    const ErrorRow b = strong_error(m, f, p, 2.0, 0.1, 24, 5, four);
    CHECK(a.s_value == b.s_value);
    CHECK(a.std_err == b.std_err);
  }
}

TEST_CASE("strong error argument errors") {
  const QuadraticPotential f = make_quadratic(Vector::Ones(2));
  const DynamicsParams p = DynamicsParams::make(2.0, 1.0);
  CHECK_THROWS_AS(strong_error(Method::sort, f, p, 1.0, 0.3, 8, 1), std::invalid_argument);
  CHECK_THROWS_AS(strong_error(Method::sort, f, p, 1.0, 0.1, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(strong_error(Method::strang, f, DynamicsParams::make(0.0, 1.0), 1.0, 0.1, 8, 1),
                  std::invalid_argument);
}

TEST_CASE("divergence is reported with its step") {
  Vector d(2);
  d << 1.0, 400.0;
  const QuadraticPotential f = make_quadratic(d);
  const DynamicsParams p = DynamicsParams::make(2.0, 1.0);
  try {
    strong_error(Method::strang, f, p, 40.0, 0.4, 4, 1);
    FAIL("expected a divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.step() > 0);
    CHECK(e.step() <= 100);
  }
}

TEST_CASE("fit_order") {
  const std::vector<double> hs = {0.4, 0.2, 0.1, 0.05, 0.025};
  SUBCASE("exact power law") {
    const OrderFit fit = fit_order(power_law(1.0, 1.5, hs));
    CHECK(fit.slope == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.used == 5);
  }
  SUBCASE("1% multiplicative noise") {
    PhiloxStream rng(41, 0, 0, StreamTag::selftest);
    for (int k = 0; k < 50; ++k) {
      std::vector<double> noise;
      for (std::size_t i = 0; i < hs.size(); ++i) noise.push_back(0.01 * rng.normal());
      const OrderFit fit = fit_order(power_law(3.0, 2.0, hs, noise));
      CHECK(fit.slope >= 1.9);
      CHECK(fit.slope <= 2.1);
    }
  }
  SUBCASE("zero rows are excluded") {
    auto rows = power_law(2.0, 1.0, hs);
    rows[1].s_value = 0.0;
    const OrderFit fit = fit_order(rows);
    CHECK(fit.used == 4);
    CHECK(fit.excluded == 1);
    CHECK(fit.slope == doctest::Approx(1.0));
    rows[2].s_value = rows[3].s_value = 0.0;
    CHECK_THROWS_AS(fit_order(rows), std::invalid_argument);
  }
  SUBCASE("too few rows") {
    CHECK_THROWS_AS(fit_order(power_law(1.0, 1.0, {0.2, 0.1})), std::invalid_argument);
  }
}

TEST_CASE("stationary moments") {
  const QuadraticPotential f = make_quadratic(Vector::Ones(1));
  SUBCASE("u = 2 gives Var(v) near 2") {
    const DynamicsParams p = DynamicsParams::make(2.0, 2.0);
    const MomentReport r = stationary_moments(Method::sort, f, p, 0.05, 2000, 100000, 3);
    CHECK(r.var_v[0] == doctest::Approx(2.0).epsilon(0.05));
    CHECK(r.var_x[0] == doctest::Approx(1.0).epsilon(0.05));
    CHECK(r.batches == 20);
    CHECK(r.var_x_err[0] > 0.0);
  }
  SUBCASE("left-point bias shrinks with h") {
    const DynamicsParams p = DynamicsParams::make(2.0, 1.0);
    const MomentReport coarse = stationary_moments(Method::left_point, f, p, 0.2, 500, 200000, 4);
    const MomentReport fine = stationary_moments(Method::left_point, f, p, 0.05, 2000, 200000, 4);
    CHECK(std::abs(coarse.var_x[0] - 1.0) > std::abs(fine.var_x[0] - 1.0));
  }
}

TEST_CASE("sample_chains") {
  const QuadraticPotential f = make_quadratic(Vector::Ones(2));
  const DynamicsParams p = DynamicsParams::make(2.0, 1.0);
  const auto a = sample_chains(Method::sofa, f, p, 0.1, 50, 5, 9);
  RunOptions par;
  par.threads = 3;
  const auto b = sample_chains(Method::sofa, f, p, 0.1, 50, 5, 9, par);
  REQUIRE(a.size() == 5);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].x == b[i].x);
    CHECK(a[i].v == b[i].v);
  }
  CHECK(a[0].x != a[1].x);
}

TEST_CASE("study validation") {
  StudyConfig cfg;
  cfg.T = 1.0;
  cfg.h_grid = {0.2, 0.1};
  cfg.n = 4;
  cfg.methods = {Method::sort};
  CHECK_NOTHROW(validate(cfg));
  cfg.h_grid = {0.1, 0.2};
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
  cfg.h_grid = {0.3};
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
  cfg.h_grid = {0.2};
  cfg.n = 1;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
  cfg.n = 4;
  cfg.methods.clear();
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
}

TEST_CASE("run_study streams rows in order and is reproducible") {
  const QuadraticPotential f = make_quadratic(default_quadratic_diag(3));
  StudyConfig cfg;
  cfg.T = 2.0;
  cfg.h_grid = {0.4, 0.2, 0.1};
  cfg.n = 8;
  cfg.seed = 11;
  cfg.methods = {Method::sort, Method::left_point};

  std::ostringstream streamed;
  write_csv_header(streamed);
  const StudyResult a = run_study(cfg, f, [&](const ErrorRow& r) { write_csv_row(streamed, r); });
  REQUIRE(a.rows.size() == 6);
  CHECK(a.rows[0].method == Method::sort);
  CHECK(a.rows[0].h == 0.4);
  CHECK(a.rows[2].h == 0.1);
  CHECK(a.rows[3].method == Method::left_point);
  REQUIRE(a.fits.size() == 2);
  CHECK(a.fits[0].ok);

  cfg.run.threads = 3;
  std::ostringstream again;
  write_csv_header(again);
  for (const ErrorRow& r : run_study(cfg, f).rows) write_csv_row(again, r);
  CHECK(strip_wall_time(streamed.str()) == strip_wall_time(again.str()));
}

TEST_CASE("csv format") {
  std::ostringstream out;
  write_csv_header(out);
  ErrorRow r;
  r.method = Method::randomized_midpoint;
  r.h = 0.1;
  r.N = 500;
  r.samples = 64;
  r.s_value = 0.25;
  r.std_err = 0.0;
  r.wall_time_s = 1.5;
  write_csv_row(out, r);
  CHECK(out.str() ==
        "method,h,N,samples,s_value,std_err,wall_time_s\n"
        "randomized-midpoint,0.10000000000000001,500,64,0.25,0,1.5\n");
}

TEST_CASE("initial state") {
  const DynamicsParams p = DynamicsParams::make(2.0, 3.0);
  const PhaseState a = initial_state(4, p, 1, 0, {});
  const PhaseState b = initial_state(4, p, 1, 0, {});
  CHECK(a.x == b.x);
  CHECK(initial_state(4, p, 1, 1, {}).x != a.x);
  RunOptions opts;
  opts.x0_var = 0.0;
  opts.v0_var = 0.0;
  const PhaseState z = initial_state(4, p, 1, 0, opts);
  CHECK(z.x.isZero(0));
  CHECK(z.v.isZero(0));
}
