#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "commands.hpp"
#include "worked_example.hpp"

using namespace selfres;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("selfres_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << text;
  return p;
}

int run(const std::string& cmd, cli::options opt) {
  std::ostringstream log, err;
  return cli::run(cmd, opt, log, err);
}

// Parses a CSV with no quoted cells.
std::vector<std::map<std::string, std::string>> read_csv(const fs::path& p) {
  std::ifstream f(p);
  std::string line;
  std::getline(f, line);
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string c; std::getline(ss, c, ',');) out.push_back(c);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  const auto header = split(line);
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(f, line)) {
    const auto cells = split(line);
    std::map<std::string, std::string> r;
    for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) r[header[i]] = cells[i];
    rows.push_back(r);
  }
  return rows;
}

int shell(const std::string& args) {
  const int status = std::system((std::string(SELFRES_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("seed ranges", "[cli]") {
  CHECK(cli::parse_seed_range("3..7") == std::pair<std::uint64_t, std::uint64_t>{3, 7});
  CHECK(cli::parse_seed_range("4") == std::pair<std::uint64_t, std::uint64_t>{4, 4});
  CHECK_THROWS_AS(cli::parse_seed_range("7..3"), config_error);
  CHECK_THROWS_AS(cli::parse_seed_range("a..b"), config_error);
  CHECK_THROWS_AS(cli::parse_seed_range("1..2x"), config_error);
}

TEST_CASE("bounds: one cell matches the solver", "[cli]") {
  const fs::path dir = scratch("bounds_one");
  cli::options opt;
  opt.config = write_config(dir, R"({"version": 1, "rules": ["CEMSR"], "epsilon": [0.01], "delta": [0.1],
                                     "eta": [0.1], "y1": [0.3]})");
  opt.out = dir / "out";
  REQUIRE(run("bounds", opt) == cli::exit_ok);
  const auto rows = read_csv(opt.out / "bounds.csv");
  REQUIRE(rows.size() == 1);
  const bounds_result r = k_min(bounds_query{0.01, 0.1, 0.1, belief{0.3}, rule::cemsr});
  CHECK(std::stod(rows[0].at("eps_prime")) == r.eps_prime);
  CHECK(std::stoul(rows[0].at("k_min")) == r.k_min);
  CHECK(rows[0].at("branch") == to_string(r.chosen));
  CHECK(rows[0].at("error").empty());
}

TEST_CASE("bounds output is byte-identical across runs", "[cli]") {
  const fs::path dir = scratch("bounds_det");
  cli::options a, b;
  a.out = dir / "a";
  b.out = dir / "b";
  a.format = b.format = "svg";
  REQUIRE(run("bounds", a) == cli::exit_ok);
  REQUIRE(run("bounds", b) == cli::exit_ok);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a.out)) {
    CHECK(slurp(e.path()) == slurp(b.out / e.path().filename()));
    ++files;
  }
  CHECK(files >= 3);
  // default grid: 2 rules x 3 eps x 3 delta x 3 eta x 99 priors
  CHECK(read_csv(a.out / "bounds.csv").size() == 2 * 3 * 3 * 3 * 99);
}

TEST_CASE("bounds: solver failures are reported per row", "[cli]") {
  const fs::path dir = scratch("bounds_fail");
  cli::options opt;
  // eta must lie in (0, 0.5)
  opt.config = write_config(dir, R"({"version": 1, "rules": ["CE"], "epsilon": [1e-3],
                                     "delta": [0.1], "eta": [0.1, 0.6], "y1": [0.5]})");
  opt.out = dir / "out";
  REQUIRE(run("bounds", opt) == cli::exit_ok);
  const auto rows = read_csv(opt.out / "bounds.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].at("error").empty());
  CHECK_FALSE(rows[1].at("error").empty());
  CHECK(rows[1].at("k_min").empty());
}

TEST_CASE("curves: Delta stays inside the bracket and D vanishes at 0", "[cli]") {
  const fs::path dir = scratch("curves");
  cli::options opt;
  opt.out = dir;
  REQUIRE(run("curves", opt) == cli::exit_ok);
  const auto rows = read_csv(dir / "d_curves.csv");
  REQUIRE(!rows.empty());
  std::size_t zeros = 0;
  for (const auto& r : rows) {
    const double d = std::stod(r.at("delta"));
    CHECK(d > std::stod(r.at("bracket_lo")));
    CHECK(d < std::stod(r.at("bracket_hi")));
    CHECK(std::isfinite(std::stod(r.at("D"))));
    if (d == 0.0) {
      CHECK(std::stod(r.at("D")) == 0.0);
      ++zeros;
    }
  }
  CHECK(zeros == 2 * 3 * 5);
}

TEST_CASE("curves: eps' drops about tenfold when eps does", "[cli]") {
  const fs::path dir = scratch("curves_scale");
  cli::options opt;
  opt.out = dir;
  REQUIRE(run("curves", opt) == cli::exit_ok);
  std::map<std::tuple<std::string, std::string, std::string>, std::map<double, double>> by_key;
  for (const auto& r : read_csv(dir / "eps_prime_curves.csv")) {
    REQUIRE(r.at("error").empty());
    by_key[{r.at("rule"), r.at("eta"), r.at("y1")}][std::stod(r.at("epsilon"))] = std::stod(r.at("eps_prime"));
  }
  std::size_t checked = 0;
  for (const auto& [key, m] : by_key) {
    const double y1 = std::stod(std::get<2>(key));
    const double eta = std::stod(std::get<1>(key));
    const double ratio = m.at(0.01) / m.at(0.001);
    if (std::get<0>(key) == "CE" && std::abs(y1 - eta) < 1e-9) {
      // the log term vanishes at y1 = eta, D is quadratic there
      CHECK(ratio == Catch::Approx(std::sqrt(10.0)).epsilon(0.01));
      continue;
    }
    if (y1 < 0.1 || y1 > 0.9) continue;
    if (std::get<0>(key) == "CE" && std::abs(y1 - eta) < 0.05) continue;
    CHECK(ratio > 10.0 / 1.5);
    CHECK(ratio < 10.0 * 1.5);
    ++checked;
  }
  CHECK(checked > 400);
}

TEST_CASE("simulate writes one transcript per seed, deterministically", "[cli]") {
  const fs::path dir = scratch("simulate");
  cli::options a;
  a.config = fs::path(SELFRES_SAMPLES) / "simulate.json";
  a.out = dir / "a";
  a.seeds = std::pair<std::uint64_t, std::uint64_t>{3, 6};
  cli::options b = a;
  b.out = dir / "b";
  REQUIRE(run("simulate", a) == cli::exit_ok);
  REQUIRE(run("simulate", b) == cli::exit_ok);
  CHECK(read_csv(a.out / "summary.csv").size() == 4);
  for (int s = 3; s <= 6; ++s) {
    const fs::path f = fs::path("transcripts") / ("seed_" + std::to_string(s) + ".json");
    REQUIRE(fs::exists(a.out / f));
    CHECK(slurp(a.out / f) == slurp(b.out / f));
  }
  CHECK(slurp(a.out / "summary.csv") == slurp(b.out / "summary.csv"));
}

TEST_CASE("simulate --bits rescales payouts", "[cli]") {
  const fs::path dir = scratch("bits");
  cli::options nats;
  nats.config = fs::path(SELFRES_SAMPLES) / "simulate.json";
  nats.out = dir / "nats";
  nats.seed = 1;
  cli::options bits = nats;
  bits.out = dir / "bits";
  bits.bits = true;
  REQUIRE(run("simulate", nats) == cli::exit_ok);
  REQUIRE(run("simulate", bits) == cli::exit_ok);
  const double n = std::stod(read_csv(nats.out / "summary.csv")[0].at("mechanism_cost"));
  const double b = std::stod(read_csv(bits.out / "summary.csv")[0].at("mechanism_cost"));
  CHECK(b == Catch::Approx(n / std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("audit at the solver's k passes", "[cli]") {
  const fs::path dir = scratch("audit");
  cli::options opt;
  opt.config = fs::path(SELFRES_SAMPLES) / "audit.json";
  opt.out = dir;
  CHECK(run("audit", opt) == cli::exit_ok);
  const io::json doc = io::read_json_file(dir / "audit.json");
  CHECK(doc["pass"] == true);
  CHECK(doc["k"].get<std::size_t>() >= 1);
}

TEST_CASE("audit without enough downstream agents fails the check", "[cli]") {
  const fs::path dir = scratch("audit_fail");
  // the two-agent example: agent 1 gains about 0.638 by reporting 0.99
  std::ofstream(dir / "s.json") << io::dump(io::to_json(worked::make()));
  cli::options opt;
  opt.config = write_config(dir, R"({"version": 1, "scenario": "s.json", "length": 2, "k": 1,
                                     "epsilon": 0.01})");
  opt.out = dir / "out";
  CHECK(run("audit", opt) == cli::exit_check);
}

TEST_CASE("equilibria sample passes its checks", "[cli]") {
  const fs::path dir = scratch("equilibria");
  cli::options opt;
  opt.config = fs::path(SELFRES_SAMPLES) / "equilibria.json";
  opt.out = dir;
  REQUIRE(run("equilibria", opt) == cli::exit_ok);
  const auto un = read_csv(dir / "uninformative.csv");
  REQUIRE(un.size() == 6);
  CHECK(std::stod(un[0].at("payoff")) > 0.0);
  for (std::size_t i = 1; i < un.size(); ++i) CHECK(un[i].at("payoff") == "0");
  for (const auto& r : read_csv(dir / "switching.csv")) CHECK(r.at("payoff") == "Infinity");
  for (const auto& r : read_csv(dir / "permutation.csv")) CHECK(r.at("ok") == "true");
}

TEST_CASE("amm-check residuals stay below 1e-9", "[cli]") {
  const fs::path dir = scratch("amm");
  cli::options opt;
  opt.config = fs::path(SELFRES_SAMPLES) / "amm.json";
  opt.out = dir;
  REQUIRE(run("amm-check", opt) == cli::exit_ok);
  const auto rows = read_csv(dir / "amm_check.csv");
  REQUIRE(rows.size() == 1);
  CHECK(std::stod(rows[0].at("max_residual")) < 1e-9);
  CHECK(fs::file_size(dir / "trades.jsonl") > 0);
}

TEST_CASE("configuration errors exit with 1", "[cli]") {
  const fs::path dir = scratch("errors");
  cli::options opt;
  opt.out = dir / "out";
  opt.config = dir / "missing.json";
  CHECK(run("bounds", opt) == cli::exit_error);
  opt.config = write_config(dir, R"({"version": 99})");
  CHECK(run("bounds", opt) == cli::exit_error);
  opt.config = write_config(dir, R"({"version": 1})");
  CHECK(run("simulate", opt) == cli::exit_error);
  CHECK(run("no-such-command", opt) == cli::exit_error);
  opt.config.clear();
  opt.format = "png";
  CHECK(run("bounds", opt) == cli::exit_error);
}

TEST_CASE("the binary honours the exit-code contract", "[cli]") {
  const fs::path dir = scratch("binary");
  const std::string out = " --out " + (dir / "o").string();
  CHECK(shell("bounds" + out) == 0);
  CHECK(fs::exists(dir / "o" / "bounds.csv"));
  CHECK(shell("bounds --config " + (dir / "nope.json").string() + out) == 1);
  CHECK(shell("simulate --config " + std::string(SELFRES_SAMPLES) + "/simulate.json --seeds 5..2" + out) == 1);
  CHECK(shell("simulate --config " + std::string(SELFRES_SAMPLES) + "/simulate.json --seeds 0..2" + out) == 0);
  CHECK(shell("bounds --format png" + out) == 1);
  CHECK(shell("") == 1);
}
