#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "enl/config.hpp"
#include "enl/experiments.hpp"
#include "enl/hyperparams.hpp"

using namespace enl;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* tag) {
  const fs::path p = fs::temp_directory_path() / (std::string("enl_test_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig tiny_fig1(const fs::path& out) {
  Config c;
  c.set("kind", "fig1-autocorr");
  c.set("eta", "0.05");
  c.set("beta", "0.0");
  c.set("batch_size", "5");
  c.set("num_examples", "100");
  c.set("directions", "20");
  c.set("lambda_min", "0.01");
  c.set("lambda_max", "1.0");
  c.set("steps", "400");
  c.set("replicas", "2");
  c.set("seed", "7");
  c.set("out_dir", out.string());
  return ExperimentConfig::from_config(c);
}

}  // namespace

TEST_CASE("config: sections flatten, comments and blanks are skipped") {
  const Config c = Config::parse(
      "# top comment\n"
      "kind = theory-table\n"
      "\n"
      "[run]\n"
      "  steps = 1200   \n"
      "seed=3\n");
  CHECK(c.get_string("kind") == "theory-table");
  CHECK(c.get_long("run.steps") == 1200);
  CHECK(c.get_long("run.seed") == 3);
  CHECK_FALSE(c.has("steps"));
}

TEST_CASE("config: parse errors carry the line number") {
  CHECK_THROWS_WITH_AS(Config::parse("a=1\nnot a pair\n"),
                       doctest::Contains("line 2"), InvalidArgument);
  CHECK_THROWS_WITH_AS(Config::parse("[open\n"), doctest::Contains("line 1"),
                       InvalidArgument);
  CHECK_THROWS_WITH_AS(Config::parse("=3\n"), doctest::Contains("line 1"),
                       InvalidArgument);
}

TEST_CASE("config: typed getters validate the whole token") {
  Config c = Config::parse("a=12\nb=1.5e-3\nc=yes\nd=12x\n");
  CHECK(c.get_long("a") == 12);
  CHECK(c.get_double("b") == doctest::Approx(1.5e-3));
  CHECK(c.get_bool("c", false));
  CHECK_THROWS_AS(c.get_long("d"), InvalidArgument);
  CHECK_THROWS_AS(c.get_double("d"), InvalidArgument);
  CHECK_THROWS_AS(c.get_string("missing"), InvalidArgument);
  CHECK(c.get_long("missing", 9) == 9);
}

TEST_CASE("config: serialize is canonical and round-trips") {
  Config c = Config::parse("z=1\n[a]\nb=2\n");
  const std::string s = c.serialize();
  CHECK(s == "a.b=2\nz=1\n");
  CHECK(Config::parse(s).serialize() == s);
}

TEST_CASE("experiment config round-trips through its resolved form") {
  const fs::path out = fresh_dir("roundtrip");
  const ExperimentConfig a = tiny_fig1(out);
  const ExperimentConfig b = ExperimentConfig::from_config(a.to_config());
  CHECK(a.to_config().serialize() == b.to_config().serialize());
  CHECK(b.hp.batches_per_epoch == 20);
  CHECK(b.replicas == 2);
  CHECK(b.seed == 7);
}

TEST_CASE("experiment config validation rejects bad values") {
  const fs::path out = fresh_dir("validate");
  ExperimentConfig c = tiny_fig1(out);
  c.kind = "fig3-imaginary";
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = tiny_fig1(out);
  c.lambda_min = -1.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = tiny_fig1(out);
  c.replicas = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("same config and seed give hash-identical outputs") {
  const fs::path out1 = fresh_dir("det1");
  const fs::path out2 = fresh_dir("det2");
  ExperimentConfig a = tiny_fig1(out1);
  ExperimentConfig b = tiny_fig1(out2);
  const RunManifest m1 = run_experiment(a);
  const RunManifest m2 = run_experiment(b);
  REQUIRE(m1.outputs.size() == m2.outputs.size());
  REQUIRE(!m1.outputs.empty());
  for (std::size_t i = 0; i < m1.outputs.size(); ++i) {
    CHECK(m1.outputs[i].first == m2.outputs[i].first);
    CHECK(m1.outputs[i].second == m2.outputs[i].second);
    // The manifest hash matches the bytes actually on disk.
    CHECK(hash_file((out1 / m1.outputs[i].first).string()) ==
          m1.outputs[i].second);
  }
  // A different seed must change the stochastic outputs.
  ExperimentConfig c = tiny_fig1(fresh_dir("det3"));
  c.seed = 8;
  const RunManifest m3 = run_experiment(c);
  bool any_diff = false;
  for (std::size_t i = 0; i < m1.outputs.size(); ++i)
    any_diff = any_diff || m3.outputs[i].second != m1.outputs[i].second;
  CHECK(any_diff);
}

TEST_CASE("manifest records streams, outputs and the resolved config") {
  const fs::path out = fresh_dir("manifest");
  const RunManifest m = run_experiment(tiny_fig1(out));
  const std::string s = m.serialize();
  CHECK(s.find("enl-manifest 1") == 0);
  CHECK(s.find("stream ") != std::string::npos);
  CHECK(s.find("output fig1_autocorr.csv") != std::string::npos);
  CHECK(s.find("[config]") != std::string::npos);
  CHECK(s.find("kind=fig1-autocorr") != std::string::npos);
  CHECK(fs::exists(out / "manifest.txt"));
}

#ifdef ENL_CLI_PATH
TEST_CASE("cli exit codes: 0 on success, 2 on validation error") {
  const fs::path out = fresh_dir("cli");
  const fs::path cfg = out / "run.cfg";
  {
    std::ofstream f(cfg);
    f << "eta=0.05\nbeta=0\nbatch_size=5\nnum_examples=100\n"
         "directions=4\nlambda_min=0.1\nlambda_max=1\n";
  }
  const std::string base = std::string(ENL_CLI_PATH) + " theory-table --config " +
                           cfg.string() + " --out " + (out / "r").string();
  CHECK(std::system((base + " >/dev/null 2>&1").c_str()) == 0);
  CHECK(fs::exists(out / "r" / "theory_table.csv"));

  const fs::path bad = out / "bad.cfg";
  {
    std::ofstream f(bad);
    f << "eta=0.05\nbeta=0\nbatch_size=5\nnum_examples=100\n"
         "directions=0\nlambda_min=0.1\nlambda_max=1\n";
  }
  const int rc = std::system((std::string(ENL_CLI_PATH) +
                              " theory-table --config " + bad.string() +
                              " >/dev/null 2>&1")
                                 .c_str());
  CHECK(WEXITSTATUS(rc) == 2);
}
#endif
