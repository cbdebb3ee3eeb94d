// rgn_cli: condition numbers, RGN solves, the pencil experiments and
// seeded self-checks.
//
// Exit codes: 0 success, 1 solver failure, 2 input error.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rgn/checks.hpp"
#include "rgn/io.hpp"
#include "rgn/rgn.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kSolverFailure = 1;
constexpr int kInputError = 2;

enum class Precision { binary64, quad };

Precision parse_precision(const std::string& s) {
  if (s == "double") return Precision::binary64;
  if (s == "quad") {
#if defined(RGN_HAVE_FLOAT128)
    return Precision::quad;
#else
    throw rgn::InvalidInput("quad precision is not available in this build");
#endif
  }
  throw rgn::InvalidInput("unknown precision '" + s + "'");
}

int run_condition(const std::string& dec_path) {
  const rgn::ProductPoint<double> x = rgn::io::read_decomposition(dec_path);
  const auto rep = rgn::condition_number(x);
  std::cout << "kappa " << rgn::io::format_double(rep.kappa) << '\n';
  std::cout << "sigma_min " << rgn::io::format_double(rep.sigma_min) << '\n';
  std::cout << "columns " << rep.full_spectrum.size() << '\n';
  std::cout << "spectrum";
  for (double v : rep.full_spectrum) std::cout << ' ' << rgn::io::format_double(v);
  std::cout << '\n';
  return kOk;
}

template <rgn::Real T>
int run_solve_in(const rgn::Tensor<double>& a, const rgn::ProductPoint<double>& x0, int max_iters, double grad_tol,
                 const std::string& trace_path, const std::string& out_path) {
  const rgn::Tensor<T> target(a.shape, [&] {
    rgn::Vector<T> d;
    for (double v : a.data) d.push_back(T(v));
    return d;
  }());
  rgn::SolverConfig<T> cfg;
  cfg.max_iters = max_iters;
  cfg.grad_tol = T(grad_tol);
  rgn::SolveResult<T> res = rgn::solve(target, rgn::cast_point<double, T>(x0), cfg);
  rgn::rebase_errors(res.trace, res.point);
  rgn::io::write_trace_csv(trace_path, res.trace);
  if (!out_path.empty()) rgn::io::write_decomposition(out_path, rgn::cast_point<T, double>(res.point));
  const auto& last = res.trace.records.back();
  std::cout << "status " << rgn::to_string(res.trace.status) << '\n';
  std::cout << "iterations " << last.iter << '\n';
  std::cout << "residual " << rgn::io::format_double(last.residual_norm) << '\n';
  std::cout << "kappa " << rgn::io::format_double(last.kappa) << '\n';
  if (!res.trace.message.empty()) std::cerr << res.trace.message << '\n';
  return rgn::converged(res.trace.status) ? kOk : kSolverFailure;
}

int run_solve(const std::string& tensor_path, const std::string& init_path, int max_iters, double grad_tol,
              const std::string& trace_path, const std::string& out_path, Precision prec) {
  if (max_iters < 0) throw rgn::InvalidInput("--max-iters must be nonnegative");
  if (!(grad_tol >= 0)) throw rgn::InvalidInput("--grad-tol must be nonnegative");
  const rgn::Tensor<double> a = rgn::io::read_tensor(tensor_path);
  const rgn::ProductPoint<double> x0 = rgn::io::read_decomposition(init_path);
  if (!(a.shape == x0.shape())) throw rgn::InvalidInput("tensor and initial decomposition have different shapes");
#if defined(RGN_HAVE_FLOAT128)
  if (prec == Precision::quad)
    return run_solve_in<rgn::float128>(a, x0, max_iters, grad_tol, trace_path, out_path);
#endif
  (void)prec;
  return run_solve_in<double>(a, x0, max_iters, grad_tol, trace_path, out_path);
}

double nan_or(const std::optional<double>& v) { return v ? *v : std::numeric_limits<double>::quiet_NaN(); }

template <rgn::Real T>
int run_experiment_in(const rgn::ExperimentSpec& spec, const std::filesystem::path& dir) {
  const std::vector<rgn::ExperimentRun<T>> runs = rgn::run_experiment<T>(spec);
  std::vector<rgn::io::BoundsRow> rows;
  std::ostringstream summary;
  summary << "s,regime,status,iterations,kappa_star,residual_star,error_floor,fitted_order,fitted_rate\n";
  std::ostringstream wedin;
  wedin << "s,lhs,rhs,ratio,z_dot_u14\n";
  bool all_ok = true;

  for (const auto& run : runs) {
    const std::string tag = "s" + std::to_string(run.s);
    rgn::io::write_decomposition((dir / ("start_" + tag + ".json")).string(), rgn::cast_point<T, double>(run.start));
    auto emit = [&](const rgn::RegimeRun<T>& reg, const char* regime) {
      const std::string stem = "trace_" + tag + "_" + regime;
      rgn::io::write_trace_csv((dir / (stem + ".csv")).string(), reg.result.trace);
      rgn::io::write_decomposition((dir / ("xstar_" + tag + "_" + regime + ".json")).string(),
                                   rgn::cast_point<T, double>(reg.result.point));
      const auto& sm = reg.summary;
      summary << run.s << ',' << regime << ',' << rgn::to_string(reg.result.trace.status) << ','
              << reg.result.trace.records.back().iter << ',' << rgn::io::format_double(sm.kappa_star) << ','
              << rgn::io::format_double(sm.residual_star) << ',' << rgn::io::format_double(sm.floor) << ','
              << rgn::io::format_double(sm.order ? sm.order->order : std::numeric_limits<double>::quiet_NaN()) << ','
              << rgn::io::format_double(nan_or(sm.ratio)) << '\n';
      if (!rgn::converged(reg.result.trace.status)) all_ok = false;
    };
    if (run.linear) emit(*run.linear, "linear");
    if (run.quadratic) emit(*run.quadratic, "quadratic");

    const rgn::RegimeRun<T>& main = run.linear ? *run.linear : *run.quadratic;
    rgn::io::BoundsRow row;
    row.s = run.s;
    row.kappa_star = main.summary.kappa_star;
    row.residual_star = main.summary.residual_star;
    row.C_hat = run.bounds.C_hat;
    row.E_hat = run.bounds.E_hat;
    row.theoretical_rate = run.bounds.theoretical_linear_rate;
    row.fitted_rate = nan_or(main.summary.ratio);
    row.fitted_order = main.summary.order ? main.summary.order->order : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(row);

    if (spec.kind == rgn::ExperimentKind::adversarial) {
      const double lhs = run.wedin ? run.wedin->lhs : std::numeric_limits<double>::quiet_NaN();
      const double rhs = run.wedin ? run.wedin->rhs : std::numeric_limits<double>::quiet_NaN();
      wedin << run.s << ',' << rgn::io::format_double(lhs) << ',' << rgn::io::format_double(rhs) << ','
            << rgn::io::format_double(lhs / rhs) << ',' << rgn::io::format_double(run.z_dot_u14) << '\n';
    }
  }
  rgn::io::write_text((dir / "bounds.csv").string(), rgn::io::bounds_csv(rows));
  rgn::io::write_text((dir / "summary.csv").string(), summary.str());
  if (spec.kind == rgn::ExperimentKind::adversarial) rgn::io::write_text((dir / "wedin.csv").string(), wedin.str());
  std::cout << summary.str();
  return all_ok ? kOk : kSolverFailure;
}

int run_experiment(rgn::ExperimentSpec spec, const std::string& out_dir, Precision prec) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw rgn::InvalidInput("cannot create output directory " + out_dir + ": " + ec.message());
#if defined(RGN_HAVE_FLOAT128)
  if (prec == Precision::quad) return run_experiment_in<rgn::float128>(spec, out_dir);
#endif
  (void)prec;
  return run_experiment_in<double>(spec, out_dir);
}

int run_check(const std::string& property, std::uint64_t seed) {
  rgn::CheckReport rep;
  if (property == "taylor") rep = rgn::check_taylor(seed);
  else if (property == "retraction") rep = rgn::check_retraction(seed);
  else if (property == "wedin") rep = rgn::check_wedin(seed);
  else if (property == "weyl") rep = rgn::check_weyl(seed);
  else if (property == "gradient") rep = rgn::check_gradient(seed);
  else throw rgn::InvalidInput("unknown property '" + property + "'");
  std::cout << (rep.passed ? "PASS " : "FAIL ") << rep.summary << '\n';
  return rep.passed ? kOk : kSolverFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Riemannian Gauss-Newton for CP decompositions on the Segre product manifold"};
  app.require_subcommand(1);

  std::string dec_path;
  auto* condition = app.add_subcommand("condition", "Print the condition number of a decomposition");
  condition->add_option("--dec", dec_path, "Decomposition JSON file")->required();

  std::string tensor_path, init_path, trace_path, solve_out, solve_prec = "double";
  int max_iters = 100;
  double grad_tol = 1e-12;
  auto* solve = app.add_subcommand("solve", "Run RGN from an initial decomposition");
  solve->add_option("--tensor", tensor_path, "Target tensor JSON file")->required();
  solve->add_option("--init", init_path, "Initial decomposition JSON file")->required();
  solve->add_option("--max-iters", max_iters, "Iteration cap");
  solve->add_option("--grad-tol", grad_tol, "Stop when the Riemannian gradient norm falls below this");
  solve->add_option("--trace", trace_path, "Output trace CSV")->required();
  solve->add_option("--out", solve_out, "Write the final decomposition here");
  solve->add_option("--precision", solve_prec, "double or quad");

  rgn::ExperimentSpec spec;
  std::string kind = "random", s_list = "0,1,3,5", out_dir, exp_prec = "quad";
  auto* experiment = app.add_subcommand("experiment", "Run the pencil-family convergence experiments");
  experiment->add_option("--kind", kind, "random or adversarial")->check(CLI::IsMember({"random", "adversarial"}));
  experiment->add_option("--s", s_list, "Comma-separated values of s");
  experiment->add_option("--seed", spec.seed, "Random seed");
  std::optional<double> start_pert;
  experiment->add_option("--start-pert", start_pert, "Start perturbation magnitude");
  experiment->add_option("--data-pert", spec.data_perturbation, "Data perturbation magnitude");
  experiment->add_flag("--zero-residual", spec.zero_residual, "Only solve against the exact target");
  experiment->add_option("--max-iters", spec.max_iters, "Iteration cap per solve");
  experiment->add_option("--precision", exp_prec, "quad or double");
  experiment->add_option("--out", out_dir, "Output directory")->required();

  std::string property;
  std::uint64_t check_seed = 1;
  auto* check = app.add_subcommand("check", "Run a seeded property check");
  check->add_option("--property", property, "taylor, retraction, wedin, weyl or gradient")
      ->required()
      ->check(CLI::IsMember({"taylor", "retraction", "wedin", "weyl", "gradient"}));
  check->add_option("--seed", check_seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*condition) return run_condition(dec_path);
    if (*solve)
      return run_solve(tensor_path, init_path, max_iters, grad_tol, trace_path, solve_out, parse_precision(solve_prec));
    if (*experiment) {
      spec.kind = kind == "adversarial" ? rgn::ExperimentKind::adversarial : rgn::ExperimentKind::random;
      spec.s_values.clear();
      std::stringstream ss(s_list);
      for (std::string item; std::getline(ss, item, ',');) {
        std::size_t used = 0;
        int v = -1;
        try {
          v = std::stoi(item, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != item.size() || v < 0) throw rgn::InvalidInput("--s: bad value '" + item + "'");
        spec.s_values.push_back(v);
      }
      spec.start_perturbation = start_pert.value_or(spec.zero_residual ? rgn::default_zero_residual_start_perturbation
                                                                      : rgn::default_start_perturbation);
      if (spec.max_iters < 0) throw rgn::InvalidInput("--max-iters must be nonnegative");
      return run_experiment(spec, out_dir, parse_precision(exp_prec));
    }
    if (*check) return run_check(property, check_seed);
  } catch (const rgn::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kInputError;
  } catch (const rgn::InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const rgn::Error& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return kSolverFailure;
  }
  return kInputError;
}
