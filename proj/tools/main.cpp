#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "kinlang/harness.hpp"
#include "kinlang/selftest.hpp"
#include "kinlang/targets.hpp"

namespace {

using namespace kinlang;

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;

// Raised for flag values that parse but make no sense together.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string target = "quadratic";
  std::size_t dim = 10;
  std::string diag;
  std::string data;
  double delta = 0.1;
  double gamma = 2.0;
  double u = 1.0;
  std::string methods;
  double T = 50.0;
  std::string h;
  std::size_t samples = 64;
  std::string seed;
  std::size_t threads = 0;
  std::string out;
  std::size_t inner_steps = kDefaultInnerSteps;
  bool phase_norm = false;
};

std::vector<double> parse_doubles(const std::string& list, const char* flag) {
  std::vector<double> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = list.find(',', start);
    const std::string cell =
        list.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
      throw UsageError(std::string(flag) + ": '" + cell + "' is not a number");
    }
    out.push_back(value);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::uint64_t parse_seed(const std::string& text, const char* source) {
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw UsageError(std::string(source) + ": '" + text + "' is not a decimal 64-bit seed");
  }
  return value;
}

std::uint64_t resolve_seed(const Options& o) {
  if (!o.seed.empty()) return parse_seed(o.seed, "--seed");
  if (const char* env = std::getenv("KINLANG_SEED"); env != nullptr && *env != '\0') {
    return parse_seed(env, "KINLANG_SEED");
  }
  return 1;
}

std::unique_ptr<Potential> build_target(const Options& o, std::uint64_t seed) {
  if (o.target == "quadratic") {
    if (!o.data.empty()) throw UsageError("--data only applies to --target logistic");
    Vector diag;
    if (o.diag.empty()) {
      diag = default_quadratic_diag(o.dim);
    } else {
      const auto values = parse_doubles(o.diag, "--diag");
      diag = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
    }
    return std::make_unique<QuadraticPotential>(diag);
  }
  if (o.target == "logistic") {
    if (!o.diag.empty()) throw UsageError("--diag only applies to --target quadratic");
    Dataset ds;
    if (o.data.empty()) {
      ds = make_synthetic_dataset(50, o.dim, seed);
      std::cerr << "note: no --data given, using a synthetic dataset (50 rows, " << o.dim
                << " features)\n";
    } else {
      ds = load_dataset(o.data);
      if (ds.labels_mapped_from_01) std::cerr << "note: labels {0,1} mapped to {-1,+1}\n";
    }
    return std::make_unique<LogisticPotential>(ds.features, ds.labels, o.delta);
  }
  throw UsageError("--target must be quadratic or logistic");
}

RunOptions run_options(const Options& o) {
  RunOptions r;
  r.threads = o.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : o.threads;
  r.inner_steps = o.inner_steps;
  r.phase_norm = o.phase_norm;
  return r;
}

void check_common(const Options& o) {
  if (o.dim == 0) throw UsageError("--dim must be at least 1");
  if (!(o.gamma > 0.0)) throw UsageError("--gamma must be positive");
  if (!(o.u > 0.0)) throw UsageError("--u must be positive");
  if (!(o.delta > 0.0)) throw UsageError("--delta must be positive");
  if (o.inner_steps == 0) throw UsageError("--inner-steps must be at least 1");
}

// Output stream chosen after validation so a bad invocation leaves no file.
struct Sink {
  std::ofstream file;
  std::ostream* stream = &std::cout;
  bool to_stdout = true;

  void open(const std::string& path) {
    if (path.empty()) return;
    file.open(path, std::ios::out | std::ios::trunc);
    if (!file) throw UsageError("cannot open --out file " + path);
    stream = &file;
    to_stdout = false;
  }
};

void print_fits(std::ostream& out, const StudyResult& res) {
  char line[160];
  std::snprintf(line, sizeof line, "%-20s %8s %10s %8s\n", "method", "slope", "intercept", "r2");
  out << line;
  for (const auto& f : res.fits) {
    if (f.ok) {
      std::snprintf(line, sizeof line, "%-20s %8.3f %10.3f %8.4f\n",
                    std::string(method_name(f.method)).c_str(), f.fit.slope, f.fit.intercept,
                    f.fit.r_squared);
    } else {
      std::snprintf(line, sizeof line, "%-20s %8s  (%s)\n",
                    std::string(method_name(f.method)).c_str(), "n/a", f.error.c_str());
    }
    out << line;
    if (f.ok && f.fit.excluded > 0) {
      out << "warning: " << method_name(f.method) << ": " << f.fit.excluded
          << " row(s) with S = 0 excluded from the fit\n";
    }
  }
}

int cmd_study(const Options& o) {
  check_common(o);
  const std::uint64_t seed = resolve_seed(o);
  StudyConfig cfg;
  cfg.T = o.T;
  cfg.h_grid = parse_doubles(o.h.empty() ? "0.4,0.2,0.1,0.05,0.025" : o.h, "--h");
  cfg.n = o.samples;
  cfg.seed = seed;
  cfg.methods = o.methods.empty() ? all_methods() : parse_method_list(o.methods);
  cfg.gamma = o.gamma;
  cfg.u = o.u;
  cfg.run = run_options(o);
  validate(cfg);
  const auto pot = build_target(o, seed);

  Sink sink;
  sink.open(o.out);
  write_csv_header(*sink.stream);
  sink.stream->flush();
  const StudyResult res = run_study(cfg, *pot, [&](const ErrorRow& row) {
    write_csv_row(*sink.stream, row);
    sink.stream->flush();
  });
  print_fits(sink.to_stdout ? std::cerr : std::cout, res);
  return 0;
}

int cmd_estimate(const Options& o) {
  check_common(o);
  const std::uint64_t seed = resolve_seed(o);
  if (o.methods.empty()) throw UsageError("estimate needs --methods with one method");
  const auto methods = parse_method_list(o.methods);
  if (methods.size() != 1) throw UsageError("estimate takes exactly one method");
  if (o.h.empty()) throw UsageError("estimate needs --h");
  const auto hs = parse_doubles(o.h, "--h");
  if (hs.size() != 1) throw UsageError("estimate takes exactly one --h value");
  if (o.samples < 2) throw UsageError("--samples must be at least 2");
  step_count(o.T, hs[0]);
  const DynamicsParams p = DynamicsParams::make(o.gamma, o.u);
  const auto pot = build_target(o, seed);

  Sink sink;
  sink.open(o.out);
  const ErrorRow row = strong_error(methods[0], *pot, p, o.T, hs[0], o.samples, seed,
                                    run_options(o));
  write_csv_header(*sink.stream);
  write_csv_row(*sink.stream, row);
  return 0;
}

int cmd_sample(const Options& o) {
  check_common(o);
  const std::uint64_t seed = resolve_seed(o);
  if (o.methods.empty()) throw UsageError("sample needs --methods with one method");
  const auto methods = parse_method_list(o.methods);
  if (methods.size() != 1) throw UsageError("sample takes exactly one method");
  if (o.h.empty()) throw UsageError("sample needs --h");
  const auto hs = parse_doubles(o.h, "--h");
  if (hs.size() != 1) throw UsageError("sample takes exactly one --h value");
  if (o.samples < 1) throw UsageError("--samples must be at least 1");
  const std::size_t steps = step_count(o.T, hs[0]);
  const DynamicsParams p = DynamicsParams::make(o.gamma, o.u);
  const auto pot = build_target(o, seed);

  Sink sink;
  sink.open(o.out);
  const auto states = sample_chains(methods[0], *pot, p, hs[0], steps, o.samples, seed,
                                    run_options(o));
  std::ostream& out = *sink.stream;
  const std::size_t d = pot->dim();
  out << "chain";
  for (std::size_t i = 0; i < d; ++i) out << ",x" << i;
  for (std::size_t i = 0; i < d; ++i) out << ",v" << i;
  out << '\n';
  char buf[64];
  for (std::size_t c = 0; c < states.size(); ++c) {
    out << c;
    for (Eigen::Index i = 0; i < states[c].x.size(); ++i) {
      std::snprintf(buf, sizeof buf, ",%.17g", states[c].x[i]);
      out << buf;
    }
    for (Eigen::Index i = 0; i < states[c].v.size(); ++i) {
      std::snprintf(buf, sizeof buf, ",%.17g", states[c].v[i]);
      out << buf;
    }
    out << '\n';
  }
  return 0;
}

int cmd_selftest(const std::string& suite, const std::string& budget_name) {
  selftest::Budget budget;
  if (budget_name == "fast") {
    budget = selftest::Budget::fast;
  } else if (budget_name == "full") {
    budget = selftest::Budget::full;
  } else {
    throw UsageError("--budget must be fast or full");
  }
  if (!suite.empty()) {
    bool known = false;
    for (const auto& name : selftest::suite_names()) known |= name == suite;
    if (!known) throw UsageError("unknown --suite '" + suite + "'");
  }
  bool all_passed = true;
  for (const auto& r : selftest::run(suite, budget)) {
    std::cout << r.name << ": " << (r.passed ? "PASS" : "FAIL") << "  (" << r.summary << ")\n";
    for (const auto& f : r.failures) std::cout << "  FAIL " << f << '\n';
    all_passed &= r.passed;
  }
  return all_passed ? 0 : kExitFailure;
}

void add_run_flags(CLI::App* cmd, Options& o) {
  cmd->set_help_flag("--help", "print this help and exit");
  cmd->add_option("--target", o.target, "quadratic or logistic")->capture_default_str();
  cmd->add_option("--dim", o.dim, "dimension (quadratic, synthetic logistic)")
      ->capture_default_str();
  cmd->add_option("--diag", o.diag, "quadratic diagonal, comma separated (default: evenly spaced on [1,4])");
  cmd->add_option("--data", o.data, "logistic dataset CSV, label in the first column");
  cmd->add_option("--delta", o.delta, "logistic ridge parameter")->capture_default_str();
  cmd->add_option("--gamma", o.gamma, "friction")->capture_default_str();
  cmd->add_option("--u", o.u, "inverse mass")->capture_default_str();
  cmd->add_option("--methods", o.methods,
                  "comma separated: left-point,strang,obabo,randomized-midpoint,log-ode,sort,sofa");
  cmd->add_option("--T", o.T, "time horizon")->capture_default_str();
  cmd->add_option("--h", o.h, "step sizes, comma separated, decreasing");
  cmd->add_option("--samples", o.samples, "independent paths or chains")->capture_default_str();
  cmd->add_option("--seed", o.seed, "64-bit decimal seed (fallback: KINLANG_SEED, then 1)");
  cmd->add_option("--threads", o.threads, "worker threads (default: all cores)");
  cmd->add_option("--out", o.out, "output CSV (default: standard output)");
  cmd->add_option("--inner-steps", o.inner_steps, "RK4 sub-steps for log-ode")
      ->capture_default_str();
  cmd->add_flag("--phase-norm", o.phase_norm, "measure strong error on (x, v)");
}

}  // namespace

int main(int argc, char** argv) {
#ifdef KINLANG_INJECT_SORT_FAULT
  kinlang::testing::set_sort_fault(true);
#endif
  CLI::App app{"Underdamped Langevin integrators and strong-error study"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  Options o;
  std::string suite;
  std::string budget = "full";
  auto* study = app.add_subcommand("study", "sweep methods and step sizes, fit strong orders");
  auto* estimate = app.add_subcommand("estimate", "strong error of one method at one step size");
  auto* sample = app.add_subcommand("sample", "final states of independent chains");
  auto* self = app.add_subcommand("selftest", "built-in identity, distribution and order checks");
  add_run_flags(study, o);
  add_run_flags(estimate, o);
  add_run_flags(sample, o);
  self->add_option("--suite", suite, "run only this suite");
  self->add_option("--budget", budget, "fast or full")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*study) return cmd_study(o);
    if (*estimate) return cmd_estimate(o);
    if (*sample) return cmd_sample(o);
    return cmd_selftest(suite, budget);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}
