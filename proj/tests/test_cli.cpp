#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ecnshrink/cli.hpp"
#include "ecnshrink/rng.hpp"
#include "support/fixtures.hpp"

using namespace ecns;
using Catch::Matchers::ContainsSubstring;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           fs::path("ecnshrink-test-" + std::to_string(::getpid()) + "-" +
                    std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string make_xs_table(long p, uint64_t seed, double pi0 = 0.6) {
  RngStream rng(seed, "cli-data");
  std::string out = "id\tx\ts\n";
  for (long j = 0; j < p; ++j) {
    double theta = rng.uniform() < pi0 ? 0.0 : 2.0 * rng.normal();
    double s = std::exp(0.2 * rng.normal());
    double x = theta + s * rng.normal();
    out += "g" + std::to_string(j) + "\t" + to_string17(x) + "\t" + to_string17(s) + "\n";
  }
  return out;
}

std::vector<std::string> tsv_column(const std::string& content, int col) {
  std::vector<std::string> out;
  std::istringstream in(content);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string field;
    for (int c = 0; c <= col; ++c) std::getline(ls, field, '\t');
    out.push_back(field);
  }
  return out;
}

}  // namespace

TEST_CASE("cmd_fit on a valid table writes a normalized fit file", "[cli][slow]") {
  TempDir dir;
  write_file(dir.file("data.tsv"), make_xs_table(800, 5));
  std::ostringstream err;
  int status = cmd_fit(dir.file("data.tsv"), "", dir.file("fit.json"), err);
  INFO(err.str());
  CHECK(status == kExitOk);
  auto fit = read_fit_file(dir.file("fit.json"));
  CHECK(fit.model == "cash");
  CHECK(std::abs(fit.pi.sum() - 1.0) <= 1e-12);
  CHECK(fit.omega.size() == 10);
  CHECK(fit.objective_trace.size() >= 2);
}

TEST_CASE("cmd_fit rejects malformed headers", "[cli]") {
  TempDir dir;
  write_file(dir.file("bad.tsv"), "id,x,s\na,1,1\n");
  std::ostringstream err;
  CHECK(cmd_fit(dir.file("bad.tsv"), "", dir.file("fit.json"), err) == kExitInputError);
  CHECK_THAT(err.str(), ContainsSubstring("header"));
}

TEST_CASE("cmd_fit surfaces the grid bound on wild z values", "[cli]") {
  TempDir dir;
  std::string table = "id\tz\n";
  RngStream rng(9, "z");
  for (int j = 0; j < 99; ++j) {
    table += "g" + std::to_string(j) + "\t" + to_string17(rng.normal()) + "\n";
  }
  table += "g99\t11.2\n";
  write_file(dir.file("z.tsv"), table);
  std::ostringstream err;
  CHECK(cmd_fit(dir.file("z.tsv"), "", dir.file("fit.json"), err) == kExitInputError);
  CHECK_THAT(err.str(), ContainsSubstring("grid"));
}

TEST_CASE("cmd_fit accepts z-only input and writes an ecn fit", "[cli][slow]") {
  TempDir dir;
  std::string table = "id\tz\n";
  RngStream rng(10, "z-ok");
  for (int j = 0; j < 500; ++j) {
    table += "g" + std::to_string(j) + "\t" + to_string17(rng.normal()) + "\n";
  }
  write_file(dir.file("z.tsv"), table);
  std::ostringstream err;
  int status = cmd_fit(dir.file("z.tsv"), "", dir.file("fit.json"), err);
  INFO(err.str());
  CHECK(status == kExitOk);
  auto fit = read_fit_file(dir.file("fit.json"));
  CHECK(fit.model == "ecn");
  CHECK(fit.pi.size() == 0);

  // Posterior on an ecn fit is a usage error.
  write_file(dir.file("data.tsv"), make_xs_table(100, 4));
  std::ostringstream err2;
  CHECK(cmd_posterior(dir.file("data.tsv"), dir.file("fit.json"), 0.1,
                      dir.file("post.tsv"), err2) == kExitInputError);
}

TEST_CASE("run config rejects unknown keys", "[cli]") {
  TempDir dir;
  write_file(dir.file("cfg.json"), R"({"lambda0": 5, "mystery": 1})");
  write_file(dir.file("data.tsv"), make_xs_table(100, 6));
  std::ostringstream err;
  CHECK(cmd_fit(dir.file("data.tsv"), dir.file("cfg.json"), dir.file("fit.json"), err) ==
        kExitInputError);
  CHECK_THAT(err.str(), ContainsSubstring("mystery"));
}

TEST_CASE("posterior round-trips the in-process computation", "[cli][slow]") {
  TempDir dir;
  write_file(dir.file("data.tsv"), make_xs_table(600, 7));
  std::ostringstream err;
  REQUIRE(cmd_fit(dir.file("data.tsv"), "", dir.file("fit.json"), err) == kExitOk);
  REQUIRE(cmd_posterior(dir.file("data.tsv"), dir.file("fit.json"), 0.1,
                        dir.file("post.tsv"), err) == kExitOk);

  // Recompute in process from the same fit file.
  auto table = read_input_table(dir.file("data.tsv"));
  auto ff = read_fit_file(dir.file("fit.json"));
  Dataset data = table.dataset();
  CashFit fit;
  fit.prior.sigma_grid = ff.sigma_grid;
  fit.prior.pi = ff.pi;
  fit.omega = NoiseCoefficients(ff.omega);
  fit.table = KernelTable(data, ff.sigma_grid, 10);
  auto summary = summarize_posterior(fit, data);

  auto qcol = tsv_column(read_file(dir.file("post.tsv")), 3);
  REQUIRE(qcol.size() == static_cast<std::size_t>(data.size()));
  for (long j = 0; j < data.size(); ++j) {
    REQUIRE(std::stod(qcol[j]) == summary.qvalue[j]);  // 17 digits round-trip
  }

  // level 1.0 marks everything significant.
  REQUIRE(cmd_posterior(dir.file("data.tsv"), dir.file("fit.json"), 1.0,
                        dir.file("post1.tsv"), err) == kExitOk);
  for (const auto& flag : tsv_column(read_file(dir.file("post1.tsv")), 6)) {
    REQUIRE(flag == "1");
  }
}

TEST_CASE("posterior under a pure-null fit flags nothing", "[cli]") {
  TempDir dir;
  write_file(dir.file("data.tsv"), make_xs_table(120, 8));
  FitFile ff;
  ff.model = "cash";
  ff.omega = Eigen::VectorXd::Zero(10);
  ff.sigma_grid = Eigen::VectorXd::Constant(1, 1.0);
  ff.pi.resize(2);
  ff.pi << 1.0, 0.0;
  ff.objective_trace = {0.0};
  write_file(dir.file("fit.json"), serialize_fit_file(ff));
  std::ostringstream err;
  REQUIRE(cmd_posterior(dir.file("data.tsv"), dir.file("fit.json"), 0.1,
                        dir.file("post.tsv"), err) == kExitOk);
  auto content = read_file(dir.file("post.tsv"));
  for (const auto& l : tsv_column(content, 2)) CHECK(std::stod(l) == 1.0);
  for (const auto& flag : tsv_column(content, 6)) CHECK(flag == "0");
}

TEST_CASE("diagnose emits a consistent histogram and curves", "[cli]") {
  TempDir dir;
  const long p = 400;
  write_file(dir.file("data.tsv"), make_xs_table(p, 12));
  FitFile ff;
  ff.model = "cash";
  ff.omega = Eigen::VectorXd::Zero(10);
  ff.sigma_grid = Eigen::VectorXd::Constant(1, 1.0);
  ff.pi.resize(2);
  ff.pi << 0.5, 0.5;
  ff.objective_trace = {0.0};
  write_file(dir.file("fit.json"), serialize_fit_file(ff));
  std::ostringstream err;
  REQUIRE(cmd_diagnose(dir.file("data.tsv"), dir.file("fit.json"), dir.file("diag.tsv"),
                       err) == kExitOk);

  auto content = read_file(dir.file("diag.tsv"));
  std::istringstream in(content);
  std::string line;
  std::getline(in, line);
  CHECK(line == "kind\tv1\tv2\tv3");
  long hist_total = 0;
  int hist_rows = 0, curve_rows = 0;
  std::vector<double> xs, phis, fs;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string kind, v1, v2, v3;
    std::getline(ls, kind, '\t');
    std::getline(ls, v1, '\t');
    std::getline(ls, v2, '\t');
    std::getline(ls, v3, '\t');
    if (kind == "hist") {
      ++hist_rows;
      hist_total += std::stol(v3);
    } else {
      REQUIRE(kind == "curve");
      ++curve_rows;
      xs.push_back(std::stod(v1));
      phis.push_back(std::stod(v2));
      fs.push_back(std::stod(v3));
    }
  }
  CHECK(hist_rows == 100);
  CHECK(curve_rows == 1000);
  CHECK(hist_total == p);  // every z lands in some bin

  // omega = 0 fit: the fitted density column equals the phi column, and the
  // trapezoid mass over the emitted samples is one.
  double mass = 0.0;
  for (int i = 0; i < 1000; ++i) {
    CHECK(fs[i] == phis[i]);
    if (i > 0) mass += 0.5 * (fs[i] + fs[i - 1]) * (xs[i] - xs[i - 1]);
  }
  CHECK_THAT(mass, Catch::Matchers::WithinAbs(1.0, 1e-3));
}

TEST_CASE("simulate writes deterministic replicate and summary tables", "[cli][slow]") {
  TempDir dir;
  write_file(dir.file("scenario.json"),
             R"({"g1": "Gaussian", "pi0": 1.0, "p": 300, "noise": {"type": "iid"},
                 "seed": 4, "replicates": 2})");
  std::ostringstream err;
  REQUIRE(cmd_simulate(dir.file("scenario.json"), dir.file("out1"), 0.1, std::nullopt, err) ==
          kExitOk);
  REQUIRE(cmd_simulate(dir.file("scenario.json"), dir.file("out2"), 0.1, std::nullopt, err) ==
          kExitOk);
  auto rep1 = read_file(dir.file("out1/replicates.tsv"));
  CHECK(rep1 == read_file(dir.file("out2/replicates.tsv")));
  CHECK(read_file(dir.file("out1/summary.tsv")) == read_file(dir.file("out2/summary.tsv")));

  // Pure-null scenario: TDP is zero everywhere.
  auto summary = read_file(dir.file("out1/summary.tsv"));
  for (const auto& t : tsv_column(summary, 6)) CHECK(std::stod(t) == 0.0);

  write_file(dir.file("bad.json"), R"({"g1": "Nope"})");
  CHECK(cmd_simulate(dir.file("bad.json"), dir.file("out3"), 0.1, std::nullopt, err) ==
        kExitInputError);
}
