#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rgn/io.hpp"
#include "test_support.hpp"

using rgn::ProductPoint;
using rgn::Tensor;
using rgn::Vector;
using namespace testing_support;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "rgn_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

rgn::ExperimentSpec small_spec(rgn::ExperimentKind kind) {
  rgn::ExperimentSpec spec;
  spec.kind = kind;
  spec.s_values = {0, 1};
  spec.bounds.lipschitz_samples = 8;
  spec.bounds.taylor_directions = 2;
  return spec;
}

}  // namespace

TEST(Pencil, OrthogonalEntries) {
  const auto pf = rgn::make_pencil<double>(0);
  int nonzero = 0;
  for (double v : pf.tensor.data)
    if (v != 0) ++nonzero;
  EXPECT_EQ(nonzero, 2);
  EXPECT_EQ(pf.tensor.data[0], 1.0);
  EXPECT_EQ(pf.tensor.data[13], 1.0);
}

TEST(Pencil, ClosedFormEntries) {
  for (int s : {1, 2, 3, 5}) {
    const auto pf = rgn::make_pencil<double>(s);
    const double h = std::ldexp(1.0, -s);
    const oracle::Vec a{-h, 1, 0}, e2{0, 1, 0};
    const auto want = oracle::cp_triple_loop({{a, a, a}, {e2, e2, e2}});
    for (std::size_t j = 0; j < 27; ++j) EXPECT_EQ(pf.tensor.data[j], want[j]) << "s=" << s << " j=" << j;
  }
  EXPECT_EQ(rgn::make_pencil<double>(1).tensor.data[0], -0.125);
}

TEST(Pencil, ShapeAndConditioning) {
  for (int s = 0; s <= 5; ++s) {
    const auto pf = rgn::make_pencil<double>(s);
    EXPECT_EQ(pf.point.rank(), 2u);
    EXPECT_EQ(pf.point.shape(), cube3());
    const auto j = rgn::jacobian(pf.point);
    EXPECT_EQ(j.cols(), 14u);
    EXPECT_GT(rgn::smallest_singular_value(j), 0.0);
  }
  EXPECT_NEAR(rgn::condition_number(rgn::make_pencil<double>(3).point).kappa, 1.5e3, 0.05e3);
  EXPECT_THROW(rgn::make_pencil<double>(-1), rgn::InvalidInput);
}

TEST(Adversarial, FiniteDifferenceGradientIsSteepest) {
  rgn::Rng rng(1);
  const auto pf = rgn::make_pencil<double>(1);
  const rgn::PseudoinverseGapFunctional<double> f(pf.point, rng.gaussian_vector<double>(27));
  Vector<double> base = rgn::random_unit_tangent(f.basis(), rng).coords;
  for (double& v : base) v *= 1e-3;
  const auto g = f.gradient(base, 1e-6);
  const double ng = rgn::norm2(g);
  ASSERT_GT(ng, 0.0);
  Vector<double> gu = g;
  for (double& v : gu) v /= ng;
  const double along = f.directional_derivative(base, gu, 1e-6);
  double best = 0;
  for (int k = 0; k < 50; ++k) {
    const auto d = rgn::random_unit_tangent(f.basis(), rng).coords;
    best = std::max(best, f.directional_derivative(base, d, 1e-6));
  }
  EXPECT_GE(along, 0.99 * best);
  EXPECT_NEAR(along, ng, 1e-3 * ng);
}

TEST(Adversarial, DirectionIsSmallestSingularVector) {
  auto spec = small_spec(rgn::ExperimentKind::adversarial);
  const auto runs = rgn::adversarial_experiment<double>(spec);
  ASSERT_EQ(runs.size(), 2u);
  for (const auto& run : runs) {
    // ‖Jᵀz‖ equals ς_min only when z is the matching left singular vector.
    const auto j = rgn::jacobian(run.start);
    const auto jtz = rgn::matTvec(j, std::span<const double>(run.data_direction));
    const double sigma_min = rgn::smallest_singular_value(j);
    EXPECT_NEAR(rgn::norm2(jtz), sigma_min, 1e-8);
    EXPECT_NEAR(std::abs(run.z_dot_u14), 1.0, 1e-8);
    const auto u = rgn::smallest_left_singular_vector(run.start);
    EXPECT_NEAR(std::abs(rgn::dot(std::span<const double>(u), std::span<const double>(run.data_direction))), 1.0,
                1e-8);
    ASSERT_TRUE(run.wedin.has_value());
    EXPECT_TRUE(run.wedin->holds(1e-8));
  }
  // Sharpness at s = 0.
  EXPECT_GE(runs[0].wedin->lhs / runs[0].wedin->rhs, 0.1);
}

TEST(RandomExperiment, RegimesAndResiduals) {
  auto spec = small_spec(rgn::ExperimentKind::random);
  const auto runs = rgn::random_experiment<double>(spec);
  for (const auto& run : runs) {
    ASSERT_TRUE(run.linear && run.quadratic);
    EXPECT_TRUE(rgn::converged(run.quadratic->result.trace.status));
    EXPECT_LE(run.quadratic->result.trace.records.back().residual_norm, 1e-12 * run.pencil.tensor.norm());
    EXPECT_EQ(run.start.rank(), 2u);
    EXPECT_NEAR(rgn::distance(run.start, run.pencil.point), spec.start_perturbation, 1e-3 * spec.start_perturbation);
  }
  EXPECT_THROW(rgn::adversarial_experiment<double>(spec), rgn::InvalidInput);
  spec.s_values.clear();
  EXPECT_THROW(rgn::random_experiment<double>(spec), rgn::InvalidInput);
}

TEST(RandomExperiment, ZeroResidualSkipsLinear) {
  auto spec = small_spec(rgn::ExperimentKind::random);
  spec.zero_residual = true;
  spec.start_perturbation = rgn::default_zero_residual_start_perturbation;
  const auto runs = rgn::random_experiment<double>(spec);
  for (const auto& run : runs) {
    EXPECT_FALSE(run.linear.has_value());
    ASSERT_TRUE(run.quadratic.has_value());
  }
}

TEST(RandomExperiment, Deterministic) {
  const auto spec = small_spec(rgn::ExperimentKind::random);
  const auto a = rgn::random_experiment<double>(spec);
  const auto b = rgn::random_experiment<double>(spec);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(rgn::io::trace_csv(a[i].linear->result.trace), rgn::io::trace_csv(b[i].linear->result.trace));
    EXPECT_EQ(rgn::io::trace_csv(a[i].quadratic->result.trace), rgn::io::trace_csv(b[i].quadratic->result.trace));
    EXPECT_EQ(a[i].bounds.C_hat, b[i].bounds.C_hat);
  }
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  auto a = rgn::Rng::stream(42, 1), b = rgn::Rng::stream(42, 1), c = rgn::Rng::stream(42, 2);
  const auto x = a.next_u64();
  EXPECT_EQ(x, b.next_u64());
  EXPECT_NE(x, c.next_u64());
  rgn::Rng g(7);
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    const double v = g.gaussian();
    sum += v;
    sq += v * v;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.05);
  EXPECT_NEAR(sq / n, 1.0, 0.05);
}

TEST(Io, PencilTensorRoundTrip) {
  const auto p = temp_path("a0.json");
  const auto a = rgn::make_pencil<double>(0).tensor;
  rgn::io::write_tensor(p.string(), a);
  const auto b = rgn::io::read_tensor(p.string());
  EXPECT_EQ(b.shape, a.shape);
  EXPECT_EQ(b.data, a.data);
}

TEST(Io, RandomTensorRoundTripIsBitExact) {
  rgn::Rng rng(3);
  const rgn::Shape shape({4, 5, 10});
  Vector<double> d = rng.gaussian_vector<double>(200);
  for (std::size_t k = 0; k < d.size(); k += 7) d[k] *= std::pow(10.0, double(k % 40) - 20.0);
  const Tensor<double> a(shape, d);
  const auto p = temp_path("r.json");
  rgn::io::write_tensor(p.string(), a);
  const auto b = rgn::io::read_tensor(p.string());
  ASSERT_EQ(b.data.size(), 200u);
  for (std::size_t k = 0; k < 200; ++k) EXPECT_EQ(std::bit_cast<std::uint64_t>(b.data[k]), std::bit_cast<std::uint64_t>(d[k]));
}

TEST(Io, DecompositionRoundTripKeepsSigns) {
  const auto x = ProductPoint<double>::from_factors(
      cube3(), {{{-1.5, 0.25, 3}, {0.1, -0.2, -0.3}, {-1e-300, 2, -7}}, {{0, 1, 0}, {-0.0, 1, 0}, {0, -1, 0}}});
  const auto p = temp_path("dec.json");
  rgn::io::write_decomposition(p.string(), x);
  const auto y = rgn::io::read_decomposition(p.string());
  ASSERT_EQ(y.rank(), 2u);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_EQ(y.term(i).factor(k)[j], x.term(i).factor(k)[j]);
        EXPECT_EQ(std::signbit(y.term(i).factor(k)[j]), std::signbit(x.term(i).factor(k)[j]));
      }
}

TEST(Io, MalformedJsonReportsLineAndColumn) {
  const auto p = temp_path("bad.json");
  write(p, "{\n  \"dims\": [3, 3, 3],\n  \"data\": [1, 2,, 3]\n}\n");
  try {
    rgn::io::read_tensor(p.string());
    FAIL() << "expected a parse error";
  } catch (const rgn::ParseError& e) {
    EXPECT_NE(e.location().find(":3:"), std::string::npos) << e.location();
  }
}

TEST(Io, FieldErrorsNameTheField) {
  const auto p = temp_path("short.json");
  write(p, R"({"dims": [3, 3, 3], "data": [1, 2, 3]})");
  try {
    rgn::io::read_tensor(p.string());
    FAIL();
  } catch (const rgn::ParseError& e) {
    EXPECT_NE(e.location().find(".data"), std::string::npos);
  }
  write(p, R"({"dims": [3, 3, 3], "data": [1, 2, "x"]})");
  try {
    rgn::io::read_tensor(p.string());
    FAIL();
  } catch (const rgn::ParseError& e) {
    EXPECT_NE(e.location().find(".data[2]"), std::string::npos);
  }
  write(p, R"({"rank": 2, "factors": [[[1,0,0],[1,0,0],[1,0,0]]]})");
  EXPECT_THROW(rgn::io::read_decomposition(p.string()), rgn::ParseError);
  write(p, R"({"rank": 2, "factors": [[[1,0,0],[1,0,0],[1,0,0]], [[1,0,0],[1,0],[1,0,0]]]})");
  EXPECT_THROW(rgn::io::read_decomposition(p.string()), rgn::ParseError);
  write(p, R"({"factors": []})");
  EXPECT_THROW(rgn::io::read_decomposition(p.string()), rgn::ParseError);
  EXPECT_THROW(rgn::io::read_tensor(temp_path("missing.json").string()), rgn::ParseError);
}

TEST(Io, CsvHeaders) {
  EXPECT_STREQ(rgn::io::trace_csv_header, "iter,error,residual,grad_norm,step_norm,sigma_min,kappa");
  EXPECT_STREQ(rgn::io::bounds_csv_header,
               "s,kappa_star,residual_star,C_hat,E_hat,theoretical_rate,fitted_rate,fitted_order");
  const auto pf = rgn::make_pencil<double>(0);
  const auto res = rgn::solve(pf.tensor, pf.point);
  const std::string csv = rgn::io::trace_csv(res.trace);
  std::istringstream in(csv);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, rgn::io::trace_csv_header);
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 6);
  EXPECT_EQ(row.substr(0, 6), "0,nan,");
}

TEST(Io, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 0.0}) EXPECT_EQ(std::stod(rgn::io::format_double(v)), v);
  EXPECT_EQ(rgn::io::format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(rgn::io::format_double(-std::numeric_limits<double>::infinity()), "-inf");
}
