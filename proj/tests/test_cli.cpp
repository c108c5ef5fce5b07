#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kCli = MQRLR_CLI_PATH;

struct RunResult {
  int exit_code;
  std::string out;
  std::string err;
};

RunResult run(const std::string& args, const fs::path& dir,
              const std::string& env_prefix = {}) {
  fs::create_directories(dir);
  const fs::path out_file = dir / "_stdout.txt";
  const fs::path err_file = dir / "_stderr.txt";
  const std::string cmd = env_prefix + kCli + " " + args + " > " +
                          out_file.string() + " 2> " + err_file.string();
  const int rc = std::system(cmd.c_str());
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  return RunResult{rc == 0 ? 0 : 1, slurp(out_file), slurp(err_file)};
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int line_count(const fs::path& p) {
  std::ifstream in(p);
  int n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mqrlr_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("synth writes the requested rows and is seed-deterministic") {
  const fs::path dir = fresh_dir("synth");
  auto r1 = run("synth --beta1 0.3 --n 400 --seed 7 --out " + dir.string(), dir);
  CHECK(r1.exit_code == 0);
  CHECK(line_count(dir / "synth.csv") == 401);  // header + 400 rows

  const std::string first = file_bytes(dir / "synth.csv");
  auto r2 = run("synth --beta1 0.3 --n 400 --seed 7 --out " + dir.string(), dir);
  CHECK(r2.exit_code == 0);
  CHECK(file_bytes(dir / "synth.csv") == first);

  auto bad = run("synth --beta1 1.5 --out " + dir.string(), dir);
  CHECK(bad.exit_code != 0);
  CHECK(bad.err.find("stationarity") != std::string::npos);
}

TEST_CASE("estimate labels the model from its regularization pair") {
  const fs::path dir = fresh_dir("estimate");
  REQUIRE(run("synth --n 150 --seed 3 --out " + dir.string(), dir).exit_code == 0);
  const std::string data = (dir / "synth.csv").string();
  const std::string alphas = " --alphas 0.25,0.5,0.75 --out " + dir.string();

  auto b1 = run("estimate --data " + data + " --lambda 0 --gamma 0" + alphas, dir);
  CHECK(b1.exit_code == 0);
  CHECK(b1.out.find("MQR-B1") != std::string::npos);

  auto b2 = run("estimate --data " + data + " --lambda 2 --gamma 0" + alphas, dir);
  CHECK(b2.out.find("MQR-B2") != std::string::npos);

  auto lr = run("estimate --data " + data + " --lambda 2 --gamma 1" + alphas, dir);
  CHECK(lr.out.find("MQR-LR") != std::string::npos);

  std::ifstream coef(dir / "coefficients.csv");
  std::string header;
  std::getline(coef, header);
  CHECK(header == "alpha,covariate,value");
}

TEST_CASE("estimate rejects an input without the value column") {
  const fs::path dir = fresh_dir("badcsv");
  {
    std::ofstream bad(dir / "bad.csv");
    bad << "when,load\n2020-01-01,1\n";
  }
  auto r = run("estimate --data " + (dir / "bad.csv").string() + " --out " +
                   dir.string(),
               dir);
  CHECK(r.exit_code != 0);
  CHECK(r.err.find("bad.csv") != std::string::npos);
  CHECK(r.err.find("value") != std::string::npos);
}

TEST_CASE("estimate is idempotent and leaves its input untouched") {
  const fs::path dir = fresh_dir("idempotent");
  REQUIRE(run("synth --n 150 --seed 11 --out " + dir.string(), dir).exit_code == 0);
  const std::string data = (dir / "synth.csv").string();
  const std::string input_before = file_bytes(dir / "synth.csv");

  const std::string cmd = "estimate --data " + data +
                          " --lambda 0.5 --gamma 0.5 --alphas 0.2,0.5,0.8 --out " +
                          dir.string();
  REQUIRE(run(cmd, dir).exit_code == 0);
  const std::string model1 = file_bytes(dir / "model.txt");
  REQUIRE(run(cmd, dir).exit_code == 0);
  CHECK(file_bytes(dir / "model.txt") == model1);
  CHECK(file_bytes(dir / "synth.csv") == input_before);
  CHECK(!model1.empty());
}

TEST_CASE("estimate honors --dump-lp") {
  const fs::path dir = fresh_dir("dump");
  REQUIRE(run("synth --n 60 --seed 5 --out " + dir.string(), dir).exit_code == 0);
  auto r = run("estimate --data " + (dir / "synth.csv").string() +
                   " --alphas 0.25,0.5,0.75 --dump-lp " + (dir / "lp.txt").string() +
                   " --out " + dir.string(),
               dir);
  CHECK(r.exit_code == 0);
  std::ifstream dump(dir / "lp.txt");
  std::string first;
  std::getline(dump, first);
  CHECK(first.rfind("minimize:", 0) == 0);
}

TEST_CASE("simulate is seed-deterministic and honors --clamp") {
  const fs::path dir = fresh_dir("simulate");
  REQUIRE(run("synth --n 200 --seed 9 --out " + dir.string(), dir).exit_code == 0);
  const std::string data = (dir / "synth.csv").string();
  REQUIRE(run("estimate --data " + data + " --alphas 0.1,0.5,0.9 --out " +
                  dir.string(),
              dir)
              .exit_code == 0);
  const std::string sim = "simulate --model " + (dir / "model.txt").string() +
                          " --data " + data + " --steps 3 --paths 200 --seed 21";

  REQUIRE(run(sim + " --out " + dir.string(), dir).exit_code == 0);
  const std::string bytes1 = file_bytes(dir / "scenarios.csv");
  REQUIRE(run(sim + " --out " + dir.string(), dir).exit_code == 0);
  CHECK(file_bytes(dir / "scenarios.csv") == bytes1);

  REQUIRE(run(sim + " --clamp -0.25 0.25 --out " + dir.string(), dir).exit_code == 0);
  std::ifstream in(dir / "scenarios.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "scenario_id,step,value");
  while (std::getline(in, line)) {
    const auto pos = line.rfind(',');
    const double v = std::strtod(line.c_str() + pos + 1, nullptr);
    CHECK(v >= -0.25);
    CHECK(v <= 0.25);
  }

  // S=1, K=1 gives exactly one data row
  REQUIRE(run("simulate --model " + (dir / "model.txt").string() + " --data " +
                  data + " --steps 1 --paths 1 --out " + dir.string(),
              dir)
              .exit_code == 0);
  CHECK(line_count(dir / "scenarios.csv") == 2);
}

TEST_CASE("backtest emits report files with the documented headers") {
  const fs::path dir = fresh_dir("backtest");
  REQUIRE(run("synth --n 200 --seed 13 --out " + dir.string(), dir).exit_code == 0);
  auto r = run("backtest --data " + (dir / "synth.csv").string() +
                   " --window 80 --n-windows 25 --alphas 0.25,0.5,0.75 --out " +
                   dir.string(),
               dir);
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("probability MAE") != std::string::npos);

  std::ifstream bt(dir / "backtest.csv");
  std::string header;
  std::getline(bt, header);
  CHECK(header == "window,step,y_true,q_0.25,q_0.5,q_0.75,flag_0.25,flag_0.5,flag_0.75");
  CHECK(line_count(dir / "backtest.csv") == 26);

  std::ifstream pp(dir / "probprob.csv");
  std::getline(pp, header);
  CHECK(header == "alpha,empirical_f");

  std::ifstream sm(dir / "backtest_summary.csv");
  std::getline(sm, header);
  CHECK(header == "model,horizon,lambda,gamma,sic,mae_percent");
}

TEST_CASE("calibrate writes the heatmap and prints both argmins") {
  const fs::path dir = fresh_dir("calibrate");
  REQUIRE(run("synth --n 160 --seed 17 --out " + dir.string(), dir).exit_code == 0);
  auto r = run("calibrate --data " + (dir / "synth.csv").string() +
                   " --lambdas 0,5 --gammas 0.5 --window 60 --n-windows 12" +
                   " --alphas 0.25,0.5,0.75 --out " + dir.string(),
               dir);
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("best_by_sic") != std::string::npos);
  CHECK(r.out.find("best_by_mae") != std::string::npos);
  // 2 cells x 2 metrics + header
  CHECK(line_count(dir / "heatmap.csv") == 5);
  CHECK(line_count(dir / "calibration.csv") == 3);
}

TEST_CASE("ar1study smoke run emits slope distributions and a summary") {
  const fs::path dir = fresh_dir("ar1study");
  auto r = run("ar1study --n 120 --replications 2 --alphas 0.25,0.5,0.75"
               " --gamma-grid 1 --seed 19 --out " + dir.string(),
               dir);
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("median slope") != std::string::npos);
  CHECK(line_count(dir / "slopes.csv") == 13);      // 2 reps x 3 levels x 2 models
  CHECK(line_count(dir / "ar1_summary.csv") == 7);  // 3 levels x 2 models
}

TEST_CASE("config file fills defaults and flags override it") {
  const fs::path dir = fresh_dir("config");
  REQUIRE(run("synth --n 150 --seed 23 --out " + dir.string(), dir).exit_code == 0);
  {
    std::ofstream cfg(dir / "cfg.json");
    cfg << "{\"lambda\": 2.0, \"alphas\": [0.25, 0.5, 0.75]}\n";
  }
  const std::string base = "estimate --data " + (dir / "synth.csv").string() +
                           " --config " + (dir / "cfg.json").string() + " --out " +
                           dir.string();
  auto from_config = run(base, dir);
  CHECK(from_config.exit_code == 0);
  CHECK(from_config.out.find("MQR-B2") != std::string::npos);

  auto overridden = run(base + " --lambda 0", dir);
  CHECK(overridden.exit_code == 0);
  CHECK(overridden.out.find("MQR-B1") != std::string::npos);
}

TEST_CASE("MQRLR_OUT overrides the output directory when --out is absent") {
  const fs::path dir = fresh_dir("envvar");
  const fs::path env_dir = dir / "via_env";
  auto r = run("synth --n 60 --seed 29", dir,
               "MQRLR_OUT=" + env_dir.string() + " ");
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(env_dir / "synth.csv"));
}

TEST_CASE("thread count does not change any output byte") {
  const fs::path dir = fresh_dir("threads");
  REQUIRE(run("synth --n 160 --seed 37 --out " + dir.string(), dir).exit_code == 0);
  const std::string base = "backtest --data " + (dir / "synth.csv").string() +
                           " --window 60 --n-windows 20 --alphas 0.25,0.5,0.75" +
                           " --seed 5 --out ";
  const fs::path d1 = dir / "t1", d4 = dir / "t4";
  REQUIRE(run(base + d1.string() + " --threads 1", dir).exit_code == 0);
  REQUIRE(run(base + d4.string() + " --threads 4", dir).exit_code == 0);
  for (const char* f : {"backtest.csv", "probprob.csv", "backtest_summary.csv"})
    CHECK(file_bytes(d1 / f) == file_bytes(d4 / f));
}
