#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "ovcost/cli.hpp"

namespace fs = std::filesystem;
using Catch::Matchers::WithinAbs;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = ovc::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("ovcost_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name, const std::string& content) const {
    const auto p = path_ / name;
    std::ofstream(p, std::ios::binary) << content;
    return p.string();
  }
  std::string path(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Data rows of a report (comment lines and the column header dropped), split on commas.
std::vector<std::vector<std::string>> rows(const std::string& report) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(report);
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    out.push_back(cells);
  }
  return out;
}

std::string column_header(const std::string& report) {
  std::istringstream in(report);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.front() != '#') return line;
  }
  return {};
}

std::string header_value(const std::string& report, const std::string& key) {
  std::istringstream in(report);
  std::string line;
  const std::string prefix = "# " + key + ": ";
  while (std::getline(in, line)) {
    if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
  }
  return {};
}

const std::string kBern = R"({"source": {"bernoulli": "0.25"}, "cost": {"costs": [1, 2]}})";

}  // namespace

TEST_CASE("capacity command", "[cli]") {
  TempDir dir;
  SECTION("unit costs give one") {
    const auto r = run({"capacity", "--config", dir.file("c.json", R"({"cost": {"unit": 2}})")});
    REQUIRE(r.code == ovc::cli::kExitOk);
    CHECK_THAT(std::stod(header_value(r.out, "alpha_c")), WithinAbs(1.0, 1e-12));
  }
  SECTION("costs {1,2} give log2 of the golden ratio") {
    const auto r = run({"capacity", "--config", dir.file("c.json", kBern)});
    REQUIRE(r.code == ovc::cli::kExitOk);
    // y + y^2 = 1 with y = 2^-alpha.
    const double y = (std::sqrt(5.0) - 1.0) / 2.0;
    CHECK_THAT(std::stod(header_value(r.out, "alpha_c")), WithinAbs(-std::log2(y), 1e-9));
    CHECK(column_header(r.out) == "context,root,residual");
  }
  SECTION("non-uniform contexts are listed and rejected") {
    const auto r = run({"capacity", "--config",
                        dir.file("c.json", R"({"cost": {"K": 2, "table": {"": [1, 2], "0": [1, 2], "1": [1, 1]}}})")});
    CHECK(r.code == ovc::cli::kExitValidation);
    CHECK(r.err.find("context '1'") != std::string::npos);
  }
}

TEST_CASE("encode and decode round-trip a Bernoulli file", "[cli]") {
  TempDir dir;
  std::mt19937_64 rng(42);
  std::bernoulli_distribution coin(0.25);
  std::string symbols;
  for (int i = 0; i < 10000; ++i) symbols += coin(rng) ? '1' : '0';
  const auto input = dir.file("x.txt", symbols + "\n");
  const auto cfg = dir.file("c.json", kBern);

  for (const std::string format : {"text", "packed"}) {
    DYNAMIC_SECTION("format " << format) {
      const auto enc = dir.path("enc." + format);
      const auto e = run({"encode", "--config", cfg, "--n", "10", "--input", input, "--format", format, "--out", enc});
      REQUIRE(e.code == ovc::cli::kExitOk);
      const auto d = run({"decode", "--config", cfg, "--input", enc});
      REQUIRE(d.code == ovc::cli::kExitOk);
      CHECK(d.out == symbols + "\n");
    }
  }
  SECTION("streaming block length") {
    const auto enc = dir.path("enc.txt");
    REQUIRE(run({"encode", "--config", cfg, "--n", "2000", "--input", input, "--out", enc}).code == 0);
    CHECK(run({"decode", "--config", cfg, "--input", enc}).out == symbols + "\n");
  }
  SECTION("corrupted stream fails to decode") {
    const auto enc = dir.path("enc.txt");
    REQUIRE(run({"encode", "--config", cfg, "--n", "10", "--input", input, "--out", enc}).code == 0);
    std::string text = slurp(enc);
    text.erase(text.size() - 3);  // drop trailing code symbols
    const auto bad = dir.file("bad.txt", text + "\n");
    CHECK(run({"decode", "--config", cfg, "--input", bad}).code == ovc::cli::kExitValidation);
  }
}

TEST_CASE("encode validation and cost summary", "[cli]") {
  TempDir dir;
  const auto cfg = dir.file("c.json", kBern);
  CHECK(run({"encode", "--config", cfg, "--n", "4", "--input", dir.file("e.txt", "")}).code ==
        ovc::cli::kExitValidation);
  CHECK(run({"encode", "--config", cfg, "--n", "4", "--input", dir.file("e.txt", "0120")}).code ==
        ovc::cli::kExitValidation);
  CHECK(run({"encode", "--config", cfg, "--n", "3", "--input", dir.file("e.txt", "0101")}).code ==
        ovc::cli::kExitValidation);

  SECTION("unit costs: stream length equals total cost") {
    const auto unit = dir.file("u.json", R"({"source": {"bernoulli": "0.3"}, "cost": {"unit": 2}})");
    const auto r = run({"encode", "--config", unit, "--n", "4", "--input", dir.file("x.txt", "0110100011110000")});
    REQUIRE(r.code == 0);
    std::string stream;
    std::istringstream in(r.out);
    for (std::string line; std::getline(in, line);) {  // the stream is the only non-comment line
      if (!line.empty() && line.front() != '#') stream = line;
    }
    CHECK(static_cast<double>(stream.size()) == std::stod(header_value(r.out, "total_cost")));
    CHECK(std::to_string(stream.size()) == header_value(r.out, "code_symbols"));
  }
  SECTION("packed output needs a binary code alphabet") {
    const auto ternary = dir.file("t.json", R"({"source": {"bernoulli": "0.3"}, "cost": {"unit": 3}})");
    CHECK(run({"encode", "--config", ternary, "--n", "2", "--input", dir.file("x.txt", "0110"), "--format",
               "packed"})
              .code == ovc::cli::kExitValidation);
  }
}

TEST_CASE("overflow command", "[cli]") {
  TempDir dir;
  SECTION("matches a sum over the exported codebook") {
    const auto cfg =
        dir.file("c.json", R"({"source": {"bernoulli": "0.5"}, "cost": {"unit": 2}, "n": [2], "eta": 2})");
    const auto cb = dir.path("cb.txt");
    REQUIRE(run({"encode", "--config", cfg, "--input", dir.file("x.txt", "00"), "--export-codebook", cb}).code == 0);
    double oracle = 0.0;
    std::istringstream in(slurp(cb));
    std::string x;
    std::string w;
    double cost;
    int entries = 0;
    while (in >> x >> w >> cost) {
      ++entries;
      if (cost >= 3.0) oracle += 0.25;
    }
    REQUIRE(entries == 4);
    const auto r = run({"overflow", "--config", cfg});
    REQUIRE(r.code == 0);
    const auto body = rows(r.out);
    REQUIRE(body.size() == 1);
    CHECK(std::stod(body[0][2]) == oracle);
  }
  SECTION("huge threshold gives zero") {
    const auto cfg = dir.file("c.json", R"({"source": {"bernoulli": "0.25"}, "cost": {"costs": [1, 2]}, "n": [6],
                                             "eta": 1000})");
    const auto body = rows(run({"overflow", "--config", cfg}).out);
    REQUIRE(body.size() == 1);
    CHECK(std::stod(body[0][2]) == 0.0);
  }
  SECTION("Monte Carlo rows are reproducible and carry a CI") {
    const auto cfg = dir.file("c.json", R"({"source": {"bernoulli": "0.25"}, "cost": {"costs": [1, 2]},
                                             "n": [64], "R": 1.2})");
    const auto a = run({"overflow", "--config", cfg, "--mc", "--trials", "2000", "--seed", "9"});
    const auto b = run({"overflow", "--config", cfg, "--mc", "--trials", "2000", "--seed", "9"});
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    const auto body = rows(a.out);
    REQUIRE(body.size() == 1);
    CHECK(std::stod(body[0][3]) > 0.0);
  }
  CHECK(column_header(run({"overflow", "--config", dir.file("c.json", kBern), "--n", "4"}).out) ==
        "n,eta,measured,ci95,lemma1_rhs,lemma2_rhs,z,pass1,pass2");
}

TEST_CASE("verify-bounds command", "[cli]") {
  TempDir dir;
  const auto cfg = dir.file("c.json", R"({"source": {"bernoulli": "0.25"}, "cost": {"costs": [1, 2]},
                                           "n": [4, 8, 12], "R": 1.0, "z_rule": {"kind": "direct", "gamma": 0.1}})");
  SECTION("default suite passes") {
    const auto r = run({"verify-bounds", "--config", cfg});
    CHECK(r.code == ovc::cli::kExitOk);
    for (const auto& row : rows(r.out)) {
      CHECK(row[7] == "true");
      CHECK(row[8] == "true");
    }
  }
  SECTION("corrupted codebook: converse holds, certification fails") {
    const auto r = run({"verify-bounds", "--config", cfg, "--corrupt-codebook"});
    CHECK(r.code == ovc::cli::kExitBoundViolation);
    for (const auto& row : rows(r.out)) CHECK(row[8] == "true");
    CHECK(r.out.find("cost_bound_uncertified=3") != std::string::npos);
  }
  SECTION("z <= 0 is rejected") {
    const auto bad = dir.file("z.json", R"({"source": {"bernoulli": "0.25"}, "cost": {"costs": [1, 2]}, "n": [4],
                                             "R": 1.0, "z_rule": {"kind": "fixed", "z": 0}})");
    CHECK(run({"verify-bounds", "--config", bad}).code == ovc::cli::kExitValidation);
  }
  SECTION("Markov source with context costs") {
    const auto markov = dir.file("m.json", R"({"source": {"type": "markov", "initial": ["0.5", "0.5"],
        "transition": [["0.9", "0.1"], ["0.2", "0.8"]]},
        "cost": {"K": 2, "table": {"": [1, 2], "0": [1, 2], "1": [2, 1]}}, "n": [4, 8], "R": 0.7})");
    CHECK(run({"verify-bounds", "--config", markov}).code == ovc::cli::kExitOk);
  }
}

TEST_CASE("spectrum and threshold commands", "[cli]") {
  TempDir dir;
  // Entropy of Bern(0.25) in bits and the capacity of costs {1,2}, computed here.
  const double H = -(0.25 * std::log2(0.25) + 0.75 * std::log2(0.75));
  const double alpha = -std::log2((std::sqrt(5.0) - 1.0) / 2.0);

  SECTION("i.i.d. first-order bracket contains H/alpha") {
    const auto cfg = dir.file("c.json", kBern);
    const auto r = run({"threshold", "--config", cfg, "--n", "4096", "--epsilon", "0.5"});
    REQUIRE(r.code == 0);
    const auto body = rows(r.out);
    REQUIRE(body.size() == 1);
    CHECK(std::stod(body[0][4]) <= H / alpha + 0.01);
    CHECK(std::stod(body[0][5]) >= H / alpha - 0.01);
    CHECK_THAT(std::stod(body[0][7]), WithinAbs(H / alpha, 1e-9));
  }
  SECTION("second-order threshold at epsilon 0.5 is zero") {
    const auto cfg =
        dir.file("c.json", R"({"source": {"bernoulli": "0.25"}, "cost": {"unit": 2}, "kind": "second"})");
    const auto r = run({"threshold", "--config", cfg, "--n", "10000", "--epsilon", "0.5"});
    REQUIRE(r.code == 0);
    const auto body = rows(r.out);
    REQUIRE(body.size() == 1);
    CHECK_THAT(std::stod(body[0][6]), WithinAbs(0.0, 0.02));
    CHECK_THAT(std::stod(body[0][7]), WithinAbs(0.0, 1e-12));
  }
  SECTION("mixture threshold steps at the component weight") {
    const auto cfg = dir.file("c.json", R"({"source": {"type": "mixture", "components": [
        {"weight": "0.3", "source": {"bernoulli": "0.1"}},
        {"weight": "0.7", "source": {"bernoulli": "0.4"}}]}, "cost": {"unit": 2}, "n": [2048],
        "epsilon": [0.5, 0.9]})");
    const auto h = [](double p) { return -(p * std::log2(p) + (1 - p) * std::log2(1 - p)); };
    const auto body = rows(run({"threshold", "--config", cfg}).out);
    REQUIRE(body.size() == 2);
    CHECK_THAT(std::stod(body[0][6]), WithinAbs(h(0.4), 0.02));
    CHECK_THAT(std::stod(body[1][6]), WithinAbs(h(0.1), 0.02));
  }
  SECTION("spectrum rows and methods") {
    const auto cfg = dir.file("c.json", kBern);
    const auto exact = run({"spectrum", "--config", cfg, "--n", "16", "--exact"});
    REQUIRE(exact.code == 0);
    CHECK(column_header(exact.out) == "n,kind,a,abscissa,value,method,trials,seed");
    const auto body = rows(exact.out);
    CHECK(body.size() == 401);  // default grid [0, 4] step 0.01
    CHECK(body.front()[5] == "binomial");
    const auto mc = rows(run({"spectrum", "--config", cfg, "--n", "16", "--mc", "--trials", "500"}).out);
    CHECK(mc.front()[5] == "mc");
    CHECK(mc.front()[6] == "500");
  }
  SECTION("epsilon outside [0, 1) is rejected") {
    CHECK(run({"threshold", "--config", dir.file("c.json", kBern), "--epsilon", "1"}).code ==
          ovc::cli::kExitValidation);
  }
}

TEST_CASE("configuration handling", "[cli]") {
  TempDir dir;
  CHECK(run({}).code == ovc::cli::kExitValidation);
  CHECK(run({"bogus"}).code == ovc::cli::kExitValidation);
  CHECK(run({"capacity", "--config", dir.file("b.json", "{not json")}).code == ovc::cli::kExitValidation);
  CHECK(run({"capacity", "--config", dir.file("u.json", R"({"cost": {"unit": 2}, "mystery": 1})")}).code ==
        ovc::cli::kExitValidation);
  CHECK(run({"overflow", "--config", dir.file("s.json", R"({"cost": {"unit": 2}})")}).code ==
        ovc::cli::kExitValidation);
  CHECK(run({"spectrum", "--config", dir.file("g.json", kBern.substr(0, kBern.size() - 1) + R"(, "grid": [1, 0]})"),
             "--n", "8"})
            .code == ovc::cli::kExitValidation);
  CHECK(run({"capacity", "--exact", "--mc"}).code == ovc::cli::kExitValidation);

  SECTION("flags win over the config and are echoed") {
    const auto cfg = dir.file("c.json", R"({"source": {"bernoulli": "0.25"}, "cost": {"costs": [1, 2]},
                                             "n": [4, 8], "R": 1.0, "seed": 3})");
    const auto r = run({"overflow", "--config", cfg, "--n", "6", "--seed", "11"});
    REQUIRE(r.code == 0);
    const auto body = rows(r.out);
    REQUIRE(body.size() == 1);
    CHECK(body[0][0] == "6");
    const auto echo = header_value(r.out, "config");
    CHECK(echo.find("\"seed\":11") != std::string::npos);
    CHECK(echo.find("\"n\":[6]") != std::string::npos);
    CHECK(r.out.rfind("# ovcost " + std::string(ovc::cli::version()), 0) == 0);
  }
  SECTION("--out writes the report to a file") {
    const auto out = dir.path("cap.csv");
    const auto r = run({"capacity", "--config", dir.file("c.json", kBern), "--out", out});
    REQUIRE(r.code == 0);
    CHECK(r.out.empty());
    CHECK(column_header(slurp(out)) == "context,root,residual");
  }
}

TEST_CASE("every command is byte-identical on rerun", "[cli]") {
  TempDir dir;
  const auto cfg = dir.file("c.json", R"({"source": {"bernoulli": "0.25"}, "cost": {"costs": [1, 2]},
                                           "n": [8], "R": 1.0, "epsilon": [0.3], "grid": {"lo": 0, "hi": 3, "step": 0.05}})");
  const auto input = dir.file("x.txt", "0100000110000100");
  const std::vector<std::vector<std::string>> commands = {
      {"capacity"},
      {"encode", "--input", input},
      {"overflow"},
      {"overflow", "--mc", "--trials", "3000"},
      {"verify-bounds"},
      {"spectrum", "--mc", "--trials", "3000"},
      {"threshold", "--n", "64"},
  };
  for (const auto& cmd : commands) {
    DYNAMIC_SECTION(cmd.front() << " " << cmd.size()) {
      std::vector<std::string> args = cmd;
      args.insert(args.end(), {"--config", cfg, "--seed", "5"});
      auto a = args;
      a.insert(a.end(), {"--out", dir.path("a.out")});
      auto b = args;
      b.insert(b.end(), {"--out", dir.path("b.out")});
      REQUIRE(run(a).code == 0);
      REQUIRE(run(b).code == 0);
      CHECK(slurp(dir.path("a.out")) == slurp(dir.path("b.out")));
    }
  }
}
