// Command-line front end: synthetic data generation, estimation,
// calibration, scenario simulation, backtesting and the AR(1) study.
// Subcommand flags override config-file values; MQRLR_OUT may override the
// output directory when --out is not given.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mqrlr/mqrlr.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::string cur;
  std::stringstream ss(text);
  while (std::getline(ss, cur, ',')) {
    if (cur.empty()) continue;
    out.push_back(mqrlr::detail::parse_double(cur, "list '" + text + "'"));
  }
  if (out.empty()) throw mqrlr::DataError("empty list '" + text + "'");
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (double v : parse_double_list(text)) out.push_back(static_cast<int>(v));
  return out;
}

struct Shared {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  double feas_tol = 1e-7;
  double opt_tol = 1e-9;
  int threads = 1;

  CLI::Option* o_out = nullptr;
  CLI::Option* o_seed = nullptr;
  CLI::Option* o_feas = nullptr;
  CLI::Option* o_opt = nullptr;
  CLI::Option* o_threads = nullptr;

  json config;

  void attach(CLI::App& app) {
    app.add_option("--config", config_path, "JSON configuration file");
    o_out = app.add_option("--out", out_dir, "output directory");
    o_seed = app.add_option("--seed", seed, "root seed for every substream");
    o_feas = app.add_option("--feas-tol", feas_tol, "LP feasibility tolerance");
    o_opt = app.add_option("--opt-tol", opt_tol, "LP optimality tolerance");
    o_threads = app.add_option("--threads", threads, "parallel workers");
  }

  // precedence: explicit flag, then MQRLR_OUT (output dir only), then the
  // config file, then the built-in default
  void resolve() {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in)
        throw mqrlr::DataError("cannot open config file '" + config_path + "'");
      in >> config;
    }
    if (!o_out->count()) {
      if (const char* env = std::getenv("MQRLR_OUT"); env && *env)
        out_dir = env;
      else if (config.contains("out"))
        out_dir = config["out"].get<std::string>();
    }
    if (!o_seed->count() && config.contains("seed"))
      seed = config["seed"].get<std::uint64_t>();
    if (!o_feas->count() && config.contains("feas_tol"))
      feas_tol = config["feas_tol"].get<double>();
    if (!o_opt->count() && config.contains("opt_tol"))
      opt_tol = config["opt_tol"].get<double>();
    if (!o_threads->count() && config.contains("threads"))
      threads = config["threads"].get<int>();
    if (!(feas_tol > 0.0) || !(opt_tol > 0.0))
      throw mqrlr::DataError("tolerances must be positive");
    if (threads < 1) throw mqrlr::DataError("threads must be at least 1");
    fs::create_directories(out_dir);
  }

  mqrlr::SolveOptions solver() const {
    mqrlr::SolveOptions opts;
    opts.feas_tol = feas_tol;
    opts.opt_tol = opt_tol;
    return opts;
  }

  std::string path(const std::string& name) const {
    return (fs::path(out_dir) / name).string();
  }

  // per-option fallback to a config key
  template <class T>
  void fill(CLI::Option* opt, const char* key, T& value) const {
    if (!opt->count() && config.contains(key)) value = config[key].get<T>();
  }
};

mqrlr::QuantileGrid grid_from(const std::string& alphas_text, const json& config,
                              CLI::Option* opt) {
  if (opt->count()) return mqrlr::QuantileGrid(parse_double_list(alphas_text));
  if (config.contains("alphas"))
    return mqrlr::QuantileGrid(config["alphas"].get<std::vector<double>>());
  return mqrlr::QuantileGrid::regular19();
}

std::vector<int> lags_from(const std::string& lags_text, int lags_upto,
                           const json& config, CLI::Option* o_lags,
                           CLI::Option* o_upto) {
  if (o_lags->count()) return parse_int_list(lags_text);
  if (o_upto->count()) {
    std::vector<int> lags;
    for (int l = 1; l <= lags_upto; ++l) lags.push_back(l);
    return lags;
  }
  if (config.contains("lags")) return config["lags"].get<std::vector<int>>();
  if (config.contains("lags_upto")) {
    std::vector<int> lags;
    for (int l = 1; l <= config["lags_upto"].get<int>(); ++l) lags.push_back(l);
    return lags;
  }
  return {1};
}

mqrlr::TimeSeries load_series(const std::string& path) {
  mqrlr::SeriesFile file = mqrlr::read_series_csv(path);
  return mqrlr::TimeSeries(std::move(file.values), std::move(file.timestamps));
}

void write_coefficients_csv(const std::string& path, const mqrlr::MqrModel& m) {
  std::ofstream out(path);
  if (!out) throw mqrlr::DataError("cannot open output file '" + path + "'");
  out << "alpha,covariate,value\n";
  for (std::size_t j = 0; j < m.grid.size(); ++j) {
    out << mqrlr::format_double(m.grid.alpha(j)) << ",intercept,"
        << mqrlr::format_double(m.intercepts[j]) << '\n';
    for (std::size_t p = 0; p < m.n_covariates(); ++p)
      out << mqrlr::format_double(m.grid.alpha(j)) << ','
          << m.covariate_labels[p] << ','
          << mqrlr::format_double(m.coef(p, j)) << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-quantile regression with interquantile smoothing"};
  app.require_subcommand(1);
  app.fallthrough();

  Shared shared;
  shared.attach(app);

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "generate a synthetic AR(1) series CSV");
  double s_beta0 = 0.0, s_beta1 = 0.3, s_sigma = 1.0;
  int s_n = 400;
  std::string s_output;
  auto* o_beta0 = synth->add_option("--beta0", s_beta0, "AR(1) intercept");
  auto* o_beta1 = synth->add_option("--beta1", s_beta1, "AR(1) slope, |b1| < 1");
  auto* o_sigma = synth->add_option("--sigma", s_sigma, "innovation sd");
  auto* o_n = synth->add_option("--n", s_n, "series length");
  synth->add_option("--output", s_output, "output CSV (default <out>/synth.csv)");

  // ---- estimate ----
  auto* est = app.add_subcommand("estimate", "fit the multi-quantile model");
  std::string e_data, e_alphas, e_lags, e_dump, e_model_out, e_coef_out;
  double e_lambda = 0.0, e_gamma = 0.0;
  int e_lags_upto = 1;
  est->add_option("--data", e_data, "input series CSV")->required();
  auto* o_el = est->add_option("--lambda", e_lambda, "adaLASSO strength");
  auto* o_eg = est->add_option("--gamma", e_gamma, "curvature strength");
  auto* o_ea = est->add_option("--alphas", e_alphas, "comma list of levels");
  auto* o_elags = est->add_option("--lags", e_lags, "comma list of lags");
  auto* o_eupto = est->add_option("--lags-upto", e_lags_upto, "use lags 1..N");
  est->add_option("--dump-lp", e_dump, "write the final-stage LP as text");
  est->add_option("--model-out", e_model_out, "model file (default <out>/model.txt)");
  est->add_option("--coef-out", e_coef_out,
                  "coefficient CSV (default <out>/coefficients.csv)");

  // ---- calibrate ----
  auto* cal = app.add_subcommand("calibrate", "grid-search the regularization pair");
  std::string c_data, c_alphas, c_lags, c_metric = "mae", c_lambdas, c_gammas;
  int c_window = 240, c_windows = 100, c_horizon = 1, c_paths = 1000,
      c_lags_upto = 1;
  cal->add_option("--data", c_data, "input series CSV")->required();
  cal->add_option("--metric", c_metric, "selection metric: sic or mae")
      ->check(CLI::IsMember({"sic", "mae"}));
  auto* o_cl = cal->add_option("--lambdas", c_lambdas, "comma list of lambdas");
  auto* o_cg = cal->add_option("--gammas", c_gammas, "comma list of gammas");
  auto* o_cw = cal->add_option("--window", c_window, "training window H");
  auto* o_cn = cal->add_option("--n-windows", c_windows, "rolling evaluations");
  auto* o_ch = cal->add_option("--horizon", c_horizon, "forecast step K");
  auto* o_cp = cal->add_option("--paths", c_paths, "simulation paths for K > 1");
  auto* o_ca = cal->add_option("--alphas", c_alphas, "comma list of levels");
  auto* o_clags = cal->add_option("--lags", c_lags, "comma list of lags");
  auto* o_cupto = cal->add_option("--lags-upto", c_lags_upto, "use lags 1..N");

  // ---- simulate ----
  auto* sim = app.add_subcommand("simulate", "draw Monte Carlo scenario paths");
  std::string m_model, m_data;
  int m_steps = 4, m_paths = 1000;
  std::vector<double> m_clamp;
  bool m_pooled = false;
  sim->add_option("--model", m_model, "model file from estimate")->required();
  sim->add_option("--data", m_data, "history CSV the recursion starts from")
      ->required();
  auto* o_ms = sim->add_option("--steps", m_steps, "steps ahead K");
  auto* o_mp = sim->add_option("--paths", m_paths, "scenario count S");
  sim->add_option("--clamp", m_clamp, "clamp simulated values to [lo hi]")
      ->expected(2);
  sim->add_flag("--pooled", m_pooled,
                "pool per-path fans into one quantile function per step");

  // ---- backtest ----
  auto* bt = app.add_subcommand("backtest", "rolling-horizon evaluation");
  std::string b_data, b_alphas, b_lags;
  double b_lambda = 0.0, b_gamma = 0.0;
  int b_window = 240, b_windows = 100, b_horizon = 1, b_paths = 1000,
      b_lags_upto = 1;
  bt->add_option("--data", b_data, "input series CSV")->required();
  auto* o_bl = bt->add_option("--lambda", b_lambda, "adaLASSO strength");
  auto* o_bg = bt->add_option("--gamma", b_gamma, "curvature strength");
  auto* o_bw = bt->add_option("--window", b_window, "training window H");
  auto* o_bn = bt->add_option("--n-windows", b_windows, "rolling evaluations");
  auto* o_bh = bt->add_option("--horizon", b_horizon, "forecast step K");
  auto* o_bp = bt->add_option("--paths", b_paths, "simulation paths for K > 1");
  auto* o_ba = bt->add_option("--alphas", b_alphas, "comma list of levels");
  auto* o_blags = bt->add_option("--lags", b_lags, "comma list of lags");
  auto* o_bupto = bt->add_option("--lags-upto", b_lags_upto, "use lags 1..N");

  // ---- ar1study ----
  auto* ar = app.add_subcommand("ar1study", "controlled AR(1) replication study");
  double a_beta0 = 0.0, a_beta1 = 0.3, a_sigma = 1.0;
  int a_n = 400, a_reps = 200;
  std::string a_gammas, a_alphas;
  auto* o_ab0 = ar->add_option("--beta0", a_beta0, "AR(1) intercept");
  auto* o_ab1 = ar->add_option("--beta1", a_beta1, "AR(1) slope, |b1| < 1");
  auto* o_as = ar->add_option("--sigma", a_sigma, "innovation sd");
  auto* o_an = ar->add_option("--n", a_n, "series length per replication");
  auto* o_ar = ar->add_option("--replications", a_reps, "replication count");
  auto* o_agg = ar->add_option("--gamma-grid", a_gammas,
                               "comma list of CV candidates for gamma");
  auto* o_aa = ar->add_option("--alphas", a_alphas, "comma list of levels");

  CLI11_PARSE(app, argc, argv);

  try {
    shared.resolve();

    if (*synth) {
      shared.fill(o_beta0, "beta0", s_beta0);
      shared.fill(o_beta1, "beta1", s_beta1);
      shared.fill(o_sigma, "sigma", s_sigma);
      shared.fill(o_n, "n", s_n);
      mqrlr::Ar1StudyConfig cfg;
      cfg.beta0 = s_beta0;
      cfg.beta1 = s_beta1;
      cfg.sigma = s_sigma;
      cfg.n = s_n;
      cfg.replications = 1;
      cfg.seed = shared.seed;
      const mqrlr::TimeSeries series = mqrlr::generate_ar1(cfg, 0);
      const std::string path = s_output.empty() ? shared.path("synth.csv") : s_output;
      mqrlr::write_series_csv(path, series.values());
      std::cout << "wrote " << series.size() << " observations to " << path << "\n";
      return 0;
    }

    if (*est) {
      shared.fill(o_el, "lambda", e_lambda);
      shared.fill(o_eg, "gamma", e_gamma);
      const mqrlr::TimeSeries series = load_series(e_data);
      const auto lags = lags_from(e_lags, e_lags_upto, shared.config, o_elags, o_eupto);
      const mqrlr::QuantileGrid grid = grid_from(e_alphas, shared.config, o_ea);
      const mqrlr::DesignMatrix design = mqrlr::build_lag_matrix(series, lags);
      const mqrlr::RegPair theta{e_lambda, e_gamma};

      if (!e_dump.empty()) {
        auto [norm, stats] = mqrlr::normalize(design);
        std::vector<double> ones(design.cols() * grid.size(), 1.0);
        std::ofstream dump(e_dump);
        if (!dump) throw mqrlr::DataError("cannot open '" + e_dump + "'");
        mqrlr::build_lp(norm, grid, theta, ones).dump(dump);
      }

      const mqrlr::MqrModel model =
          mqrlr::estimate(design, grid, theta, shared.solver());
      const std::string model_path =
          e_model_out.empty() ? shared.path("model.txt") : e_model_out;
      const std::string coef_path =
          e_coef_out.empty() ? shared.path("coefficients.csv") : e_coef_out;
      mqrlr::save_model(model, model_path);
      write_coefficients_csv(coef_path, model);
      std::cout << model.label() << " fitted on " << design.rows() << " rows; model "
                << model_path << ", coefficients " << coef_path << "\n";
      return 0;
    }

    if (*cal) {
      shared.fill(o_cw, "window", c_window);
      shared.fill(o_cn, "n_windows", c_windows);
      shared.fill(o_ch, "horizon", c_horizon);
      shared.fill(o_cp, "paths", c_paths);
      std::vector<double> lambdas{0.0, 1.0, 20.0}, gammas{0.0, 1.0, 7.0};
      if (o_cl->count()) lambdas = parse_double_list(c_lambdas);
      else if (shared.config.contains("lambdas"))
        lambdas = shared.config["lambdas"].get<std::vector<double>>();
      if (o_cg->count()) gammas = parse_double_list(c_gammas);
      else if (shared.config.contains("gammas"))
        gammas = shared.config["gammas"].get<std::vector<double>>();

      mqrlr::RollingContext ctx{load_series(c_data),
                                lags_from(c_lags, c_lags_upto, shared.config,
                                          o_clags, o_cupto),
                                grid_from(c_alphas, shared.config, o_ca),
                                c_window,
                                {},
                                c_horizon,
                                c_paths,
                                shared.seed,
                                shared.threads,
                                0.05,
                                shared.solver()};
      const int tau0 = c_window - 1 + mqrlr::max_lag_of(ctx.lags);
      for (int w = 0; w < c_windows; ++w) ctx.eval_indices.push_back(tau0 + w);

      const auto metric =
          c_metric == "sic" ? mqrlr::CalibMetric::sic : mqrlr::CalibMetric::mae;
      const mqrlr::CalibrationReport report =
          mqrlr::grid_search(mqrlr::ThetaGrid{lambdas, gammas}, metric, ctx);
      mqrlr::write_heatmap_csv(shared.path("heatmap.csv"), report);
      mqrlr::write_calibration_csv(shared.path("calibration.csv"), report);
      std::cout << "best_by_sic lambda=" << report.best_by_sic.lambda
                << " gamma=" << report.best_by_sic.gamma << "\n";
      std::cout << "best_by_mae lambda=" << report.best_by_mae.lambda
                << " gamma=" << report.best_by_mae.gamma << "\n";
      std::cout << "selected (" << c_metric << ") lambda=" << report.selected.lambda
                << " gamma=" << report.selected.gamma << "\n";
      return 0;
    }

    if (*sim) {
      shared.fill(o_ms, "horizon", m_steps);
      shared.fill(o_mp, "paths", m_paths);
      const mqrlr::MqrModel model = mqrlr::load_model(m_model);
      const mqrlr::TimeSeries history = load_series(m_data);
      mqrlr::SimulateOptions opts;
      opts.pooled = m_pooled;
      if (m_clamp.size() == 2) opts.clamp = {{m_clamp[0], m_clamp[1]}};
      else if (shared.config.contains("clamp")) {
        const auto c = shared.config["clamp"].get<std::vector<double>>();
        if (c.size() != 2) throw mqrlr::DataError("config clamp needs [lo, hi]");
        opts.clamp = {{c[0], c[1]}};
      }
      const mqrlr::ScenarioSet scen =
          mqrlr::sample_paths(model, history, m_steps, m_paths, shared.seed, opts);
      mqrlr::write_scenarios_csv(shared.path("scenarios.csv"), scen);
      std::vector<mqrlr::QuantileFan> fans;
      for (int k = 1; k <= m_steps; ++k)
        fans.push_back(mqrlr::quantiles_from_paths(scen, model.grid, k));
      mqrlr::write_fans_csv(shared.path("fan.csv"), fans);
      std::cout << scen.n_paths << " paths x " << scen.n_steps << " steps; "
                << scen.crossing_repairs << " crossing repairs; wrote "
                << shared.path("scenarios.csv") << " and " << shared.path("fan.csv")
                << "\n";
      return 0;
    }

    if (*bt) {
      shared.fill(o_bl, "lambda", b_lambda);
      shared.fill(o_bg, "gamma", b_gamma);
      shared.fill(o_bw, "window", b_window);
      shared.fill(o_bn, "n_windows", b_windows);
      shared.fill(o_bh, "horizon", b_horizon);
      shared.fill(o_bp, "paths", b_paths);
      mqrlr::BacktestConfig cfg;
      cfg.window_h = b_window;
      cfg.n_windows = b_windows;
      cfg.horizon = b_horizon;
      cfg.lags = lags_from(b_lags, b_lags_upto, shared.config, o_blags, o_bupto);
      cfg.grid = grid_from(b_alphas, shared.config, o_ba);
      cfg.theta = mqrlr::RegPair{b_lambda, b_gamma};
      cfg.n_sim_paths = b_paths;
      cfg.seed = shared.seed;
      cfg.threads = shared.threads;
      cfg.solver = shared.solver();
      const mqrlr::BacktestReport report =
          mqrlr::run_backtest(load_series(b_data), cfg);
      mqrlr::write_backtest_csv(shared.path("backtest.csv"), report);
      mqrlr::write_probprob_csv(shared.path("probprob.csv"), report);
      mqrlr::write_backtest_summary_csv(shared.path("backtest_summary.csv"), report);
      std::cout << mqrlr::theta_label(b_lambda, b_gamma) << " horizon " << b_horizon
                << ": probability MAE " << mqrlr::format_score(report.mae * 100.0)
                << "%";
      if (std::isfinite(report.extreme_mae))
        std::cout << ", extreme-set MAE "
                  << mqrlr::format_score(report.extreme_mae * 100.0) << "%";
      std::cout << ", " << report.windows_failed << " failed windows\n";
      return 0;
    }

    if (*ar) {
      shared.fill(o_ab0, "beta0", a_beta0);
      shared.fill(o_ab1, "beta1", a_beta1);
      shared.fill(o_as, "sigma", a_sigma);
      shared.fill(o_an, "n", a_n);
      shared.fill(o_ar, "replications", a_reps);
      mqrlr::Ar1StudyConfig cfg;
      cfg.beta0 = a_beta0;
      cfg.beta1 = a_beta1;
      cfg.sigma = a_sigma;
      cfg.n = a_n;
      cfg.replications = a_reps;
      cfg.seed = shared.seed;
      cfg.threads = shared.threads;
      cfg.solver = shared.solver();
      if (o_agg->count()) cfg.gamma_grid = parse_double_list(a_gammas);
      else if (shared.config.contains("gamma_grid"))
        cfg.gamma_grid = shared.config["gamma_grid"].get<std::vector<double>>();
      if (o_aa->count()) cfg.grid = mqrlr::QuantileGrid(parse_double_list(a_alphas));
      else if (shared.config.contains("alphas"))
        cfg.grid = mqrlr::QuantileGrid(shared.config["alphas"].get<std::vector<double>>());

      const mqrlr::Ar1StudySummary study = mqrlr::run_ar1_study(cfg);
      if (study.failures > 0.05 * static_cast<double>(cfg.replications))
        throw mqrlr::DataError("ar1study: more than 5% of replications failed (" +
                               std::to_string(study.failures) + ")");
      mqrlr::write_slopes_csv(shared.path("slopes.csv"), study);
      std::ofstream sum(shared.path("ar1_summary.csv"));
      if (!sum) throw mqrlr::DataError("cannot open ar1_summary.csv");
      sum << "alpha,model,median,variance\n";
      for (std::size_t j = 0; j < study.alphas.size(); ++j) {
        sum << mqrlr::format_double(study.alphas[j]) << ",MQR-B1,"
            << mqrlr::format_double(study.median_b1[j]) << ','
            << mqrlr::format_double(study.var_b1[j]) << '\n';
        sum << mqrlr::format_double(study.alphas[j]) << ",MQR-LR,"
            << mqrlr::format_double(study.median_lr[j]) << ','
            << mqrlr::format_double(study.var_lr[j]) << '\n';
      }
      const std::size_t lo = 0, hi = study.alphas.size() - 1;
      std::cout << "replications " << cfg.replications - study.failures
                << " ok, " << study.failures << " failed\n";
      std::cout << "median slope at alpha=" << study.alphas[study.alphas.size() / 2]
                << ": MQR-B1 " << study.median_b1[study.alphas.size() / 2]
                << ", MQR-LR " << study.median_lr[study.alphas.size() / 2] << "\n";
      std::cout << "extreme-slope variance (alpha=" << study.alphas[lo]
                << "): MQR-B1 " << study.var_b1[lo] << ", MQR-LR " << study.var_lr[lo]
                << "\n";
      std::cout << "extreme-slope variance (alpha=" << study.alphas[hi]
                << "): MQR-B1 " << study.var_b1[hi] << ", MQR-LR " << study.var_lr[hi]
                << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
