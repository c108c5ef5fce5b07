#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "mqrlr/gaussian.hpp"
#include "mqrlr/scenario.hpp"

using namespace mqrlr;

namespace {

MqrModel intercept_only_model(const QuantileGrid& grid, std::vector<double> levels) {
  return MqrModel{grid, std::move(levels), {}, NormStats{{}, {}},
                  RegPair{0.0, 0.0},      {}, {},           {}};
}

MqrModel standard_normal_model() {
  QuantileGrid grid = QuantileGrid::regular19();
  std::vector<double> levels;
  for (std::size_t j = 0; j < grid.size(); ++j)
    levels.push_back(normal_quantile(grid.alpha(j)));
  return intercept_only_model(grid, std::move(levels));
}

// exact moments of the piecewise-linear quantile function: integrate Q and
// Q^2 segment by segment; both integrals have closed forms on each segment
std::pair<double, double> qf_mean_sd(const ContinuousQF& qf) {
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i + 1 < qf.knot_alpha.size(); ++i) {
    const double da = qf.knot_alpha[i + 1] - qf.knot_alpha[i];
    const double a = qf.knot_value[i], b = qf.knot_value[i + 1];
    m1 += da * 0.5 * (a + b);
    m2 += da * (a * a + a * b + b * b) / 3.0;
  }
  return {m1, std::sqrt(m2 - m1 * m1)};
}

}  // namespace

TEST_CASE("build_qf: interpolation and linear tail extension") {
  ContinuousQF qf = build_qf({0.25, 0.75}, {1.0, 3.0});
  CHECK(qf(0.5) == doctest::Approx(2.0));
  CHECK(qf(0.0) == doctest::Approx(0.0));
  CHECK(qf(1.0) == doctest::Approx(4.0));
  CHECK_FALSE(qf.repaired_crossing);
  CHECK_THROWS_AS(qf(-0.1), std::domain_error);
  CHECK_THROWS_AS(qf(1.1), std::domain_error);
  CHECK_THROWS_AS(build_qf({0.5}, {1.0}), DataError);
}

TEST_CASE("build_qf: constant fans stay constant") {
  ContinuousQF qf = build_qf({0.1, 0.5, 0.9}, {3.5, 3.5, 3.5});
  for (double u : {0.0, 0.123, 0.5, 0.77, 1.0}) CHECK(qf(u) == doctest::Approx(3.5));
}

TEST_CASE("build_qf: grid points reproduce fan values exactly") {
  QuantileGrid grid = QuantileGrid::regular19();
  std::vector<double> vals;
  for (std::size_t j = 0; j < grid.size(); ++j)
    vals.push_back(std::pow(static_cast<double>(j), 1.3) - 4.0);
  ContinuousQF qf = build_qf(grid.alphas(), vals);
  for (std::size_t j = 0; j < grid.size(); ++j)
    CHECK(qf(grid.alpha(j)) == vals[j]);
  for (std::size_t i = 1; i < qf.knot_value.size(); ++i)
    CHECK(qf.knot_value[i] >= qf.knot_value[i - 1]);
}

TEST_CASE("build_qf: crossed input is rearranged and flagged") {
  ContinuousQF qf = build_qf({0.2, 0.5, 0.8}, {2.0, 1.0, 3.0});
  CHECK(qf.repaired_crossing);
  CHECK(qf(0.2) == doctest::Approx(1.0));
  CHECK(qf(0.5) == doctest::Approx(2.0));
  for (std::size_t i = 1; i < qf.knot_value.size(); ++i)
    CHECK(qf.knot_value[i] >= qf.knot_value[i - 1]);
}

TEST_CASE("sample_paths: identical seeds give bitwise-identical sets") {
  MqrModel m = standard_normal_model();
  TimeSeries hist({0.0});
  ScenarioSet a = sample_paths(m, hist, 3, 50, 77);
  ScenarioSet b = sample_paths(m, hist, 3, 50, 77);
  ScenarioSet c = sample_paths(m, hist, 3, 50, 78);
  REQUIRE(a.values.size() == b.values.size());
  CHECK(std::memcmp(a.values.data(), b.values.data(),
                    a.values.size() * sizeof(double)) == 0);
  CHECK(a.values != c.values);
}

TEST_CASE("sample_paths: one-step draws match the interpolated distribution") {
  MqrModel m = standard_normal_model();
  TimeSeries hist({0.0});
  const int S = 100000;
  ScenarioSet scen = sample_paths(m, hist, 1, S, 2029);

  const ContinuousQF qf = build_qf(predict_fan(m, {}));
  const auto [exp_mean, exp_sd] = qf_mean_sd(qf);
  CHECK(std::fabs(exp_mean) < 1e-12);  // symmetric fan

  double mean = 0.0;
  for (double v : scen.values) mean += v;
  mean /= S;
  double ss = 0.0;
  for (double v : scen.values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (S - 1));
  CHECK(std::fabs(mean - exp_mean) < 0.02);
  CHECK(std::fabs(sd - exp_sd) < 0.02);

  // inverse-transform check: empirical CDF at each fan value is close to alpha
  std::vector<double> sorted(scen.values);
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t j = 0; j < m.grid.size(); ++j) {
    const double q = m.intercepts[j];
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), q);
    const double ecdf = static_cast<double>(it - sorted.begin()) / S;
    CHECK(std::fabs(ecdf - m.grid.alpha(j)) < 0.01);
  }
}

TEST_CASE("sample_paths: fixed-u hook iterates conditional medians") {
  // AR(1)-looking model built by hand on a lag-1 covariate
  QuantileGrid grid({0.25, 0.5, 0.75});
  MqrModel m{grid,
             {-0.6, 0.1, 0.8},
             {0.3, 0.3, 0.3},
             NormStats{{0.0}, {1.0}},
             RegPair{0.0, 0.0},
             {"lag_1"},
             {1.0, 1.0, 1.0},
             {1}};
  TimeSeries hist({2.0});
  SimulateOptions opts;
  opts.fixed_uniform = 0.5;
  ScenarioSet scen = sample_paths(m, hist, 4, 3, 9, opts);

  double x = 2.0;
  for (int k = 0; k < 4; ++k) {
    const double median = 0.1 + 0.3 * x;  // intercept + slope * lag
    for (std::size_t s = 0; s < scen.n_paths; ++s)
      CHECK(scen.at(s, k) == doctest::Approx(median).epsilon(1e-12));
    x = median;
  }
}

TEST_CASE("sample_paths: pooled and per-path agree for intercept-only models") {
  MqrModel m = standard_normal_model();
  TimeSeries hist({0.0});
  SimulateOptions pooled;
  pooled.pooled = true;
  ScenarioSet a = sample_paths(m, hist, 3, 40, 5);
  ScenarioSet b = sample_paths(m, hist, 3, 40, 5, pooled);
  for (std::size_t i = 0; i < a.values.size(); ++i)
    CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-12));
}

TEST_CASE("sample_paths: clamp keeps values inside the band, quantiles monotone") {
  MqrModel m = standard_normal_model();
  TimeSeries hist({0.0});
  SimulateOptions opts;
  opts.clamp = {{-0.5, 0.75}};
  ScenarioSet scen = sample_paths(m, hist, 2, 500, 11, opts);
  for (double v : scen.values) {
    CHECK(v >= -0.5);
    CHECK(v <= 0.75);
  }
  QuantileFan fan = quantiles_from_paths(scen, m.grid, 2);
  for (std::size_t j = 1; j < fan.values.size(); ++j)
    CHECK(fan.values[j] >= fan.values[j - 1]);
  SimulateOptions bad;
  bad.clamp = {{2.0, 1.0}};
  CHECK_THROWS_AS(sample_paths(m, hist, 2, 5, 11, bad), DataError);
}

TEST_CASE("sample_paths: validates history against the model lags") {
  QuantileGrid grid({0.25, 0.5, 0.75});
  MqrModel m{grid, {0, 1, 2}, {0.1, 0.1, 0.1}, NormStats{{0.0}, {1.0}},
             RegPair{}, {"lag_3"}, {1, 1, 1}, {3}};
  CHECK_THROWS_AS(sample_paths(m, TimeSeries({1.0, 2.0}), 1, 1, 0), DataError);
  CHECK_NOTHROW(sample_paths(m, TimeSeries({1.0, 2.0, 3.0}), 2, 4, 0));
  MqrModel bad{grid, {0, 1, 2}, {0.1, 0.1, 0.1}, NormStats{{0.0}, {1.0}},
               RegPair{}, {"exog"}, {1, 1, 1}, {}};
  CHECK_THROWS_AS(sample_paths(bad, TimeSeries({1.0}), 1, 1, 0), DataError);
}

TEST_CASE("quantiles_from_paths: order-statistic conventions") {
  ScenarioSet scen;
  scen.n_paths = 100;
  scen.n_steps = 1;
  for (int i = 100; i >= 1; --i) scen.values.push_back(i);

  QuantileGrid grid({0.25, 0.5, 0.75});
  QuantileFan fan = quantiles_from_paths(scen, grid, 1);
  CHECK(fan.values[1] == doctest::Approx(50.5));  // linear between order stats

  ScenarioSet one;
  one.n_paths = 1;
  one.n_steps = 2;
  one.values = {42.0, 43.0};
  QuantileFan single = quantiles_from_paths(one, grid, 2);
  for (double v : single.values) CHECK(v == 43.0);

  CHECK_THROWS_AS(quantiles_from_paths(one, grid, 3), DataError);
  CHECK_THROWS_AS(quantiles_from_paths(one, grid, 0), DataError);
}

TEST_CASE("scenario and fan CSV writers emit the documented columns") {
  MqrModel m = standard_normal_model();
  TimeSeries hist({0.0});
  ScenarioSet scen = sample_paths(m, hist, 2, 3, 4);

  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "mqrlr_scen_test";
  fs::create_directories(dir);
  const std::string spath = (dir / "scen.csv").string();
  write_scenarios_csv(spath, scen);
  std::ifstream in(spath);
  std::string header;
  std::getline(in, header);
  CHECK(header == "scenario_id,step,value");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 6);

  std::vector<QuantileFan> fans{quantiles_from_paths(scen, m.grid, 1),
                                quantiles_from_paths(scen, m.grid, 2)};
  const std::string fpath = (dir / "fan.csv").string();
  write_fans_csv(fpath, fans);
  std::ifstream fin(fpath);
  std::getline(fin, header);
  CHECK(header == "alpha,value,step");
}
