#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynsolve/io.hpp"

using namespace dynsolve;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("dynsolve_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string sub(const std::string& name) const { return (path / name).string(); }
};

int run(const std::string& args) {
  const std::string cmd = std::string(DYNSOLVE_BIN) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

// small fast scenario shared by the cases below
std::string small_sim_flags(const TempDir& tmp, int seed) {
  return "simulate --model-dir " + tmp.sub("model") +
         " --patch-radius 12 --rate 100 --duration 0.6 --seed " +
         std::to_string(seed);
}

bool same_bytes(const std::string& a, const std::string& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  REQUIRE(fa.good());
  REQUIRE(fb.good());
  const std::string ca((std::istreambuf_iterator<char>(fa)), {});
  const std::string cb((std::istreambuf_iterator<char>(fb)), {});
  return ca == cb;
}

}  // namespace

TEST_CASE("cli pipeline: graph, simulate, solve, evaluate") {
  TempDir tmp;
  REQUIRE(run("graph --type grid --rows 6 --cols 6 --spacing 10 --sensors 8 "
              "--seed 3 -o " + tmp.sub("model")) == 0);
  CHECK(fs::exists(tmp.sub("model") + "/coarse_graph.json"));
  CHECK(fs::exists(tmp.sub("model") + "/leadfield_fine.dsmx"));

  REQUIRE(run(small_sim_flags(tmp, 3) + " -o " + tmp.sub("bundle")) == 0);
  CHECK(fs::exists(tmp.sub("bundle") + "/observations.dsmx"));
  CHECK(fs::exists(tmp.sub("bundle") + "/truth.dsmx"));
  CHECK(fs::exists(tmp.sub("bundle") + "/mask.json"));

  // achieved SNR echoed in meta
  {
    std::ifstream in(tmp.sub("bundle") + "/meta.json");
    json meta;
    in >> meta;
    CHECK(meta["achieved_snr"].get<double>() == doctest::Approx(5.0).epsilon(1e-6));
    CHECK(meta["config"]["phi"].get<double>() == doctest::Approx(0.95));
    CHECK(meta["config"]["b"].get<double>() == doctest::Approx(3.1));
  }

  for (const std::string method : {"mne", "fis", "smapem", "dmapem"}) {
    REQUIRE(run("solve --method " + method + " --bundle " + tmp.sub("bundle") +
                " --max-iters 8 -o " + tmp.sub(method)) == 0);
    CHECK(fs::exists(tmp.sub(method) + "/estimates.dsmx"));
    CHECK(fs::exists(tmp.sub(method) + "/ci_halfwidths.dsmx"));
  }
  CHECK(fs::exists(tmp.sub("dmapem") + "/trace.csv"));
  CHECK(fs::exists(tmp.sub("dmapem") + "/nu_map.dsmx"));
  CHECK(!fs::exists(tmp.sub("mne") + "/trace.csv"));

  // fis must equal dmapem --max-iters 1
  REQUIRE(run("solve --method dmapem --max-iters 1 --bundle " +
              tmp.sub("bundle") + " -o " + tmp.sub("dmap1")) == 0);
  CHECK(same_bytes(tmp.sub("fis") + "/estimates.dsmx",
                   tmp.sub("dmap1") + "/estimates.dsmx"));
  CHECK(same_bytes(tmp.sub("fis") + "/ci_halfwidths.dsmx",
                   tmp.sub("dmap1") + "/ci_halfwidths.dsmx"));

  REQUIRE(run("evaluate --bundle " + tmp.sub("bundle") + " --estimates " +
              tmp.sub("mne") + " " + tmp.sub("fis") + " " + tmp.sub("dmapem") +
              " -o " + tmp.sub("eval")) == 0);
  CHECK(fs::exists(tmp.sub("eval") + "/mne_roc.csv"));
  CHECK(fs::exists(tmp.sub("eval") + "/dmapem_report.json"));
  CHECK(fs::exists(tmp.sub("eval") + "/comparison.txt"));
  CHECK(fs::exists(tmp.sub("eval") + "/comparison.json"));
}

TEST_CASE("cli determinism: same seed, byte-identical outputs") {
  TempDir tmp;
  REQUIRE(run("graph --type grid --rows 5 --cols 5 --spacing 10 --sensors 6 "
              "--seed 11 -o " + tmp.sub("model")) == 0);
  REQUIRE(run(small_sim_flags(tmp, 7) + " -o " + tmp.sub("b1")) == 0);
  REQUIRE(run(small_sim_flags(tmp, 7) + " -o " + tmp.sub("b2")) == 0);
  CHECK(same_bytes(tmp.sub("b1") + "/truth.dsmx", tmp.sub("b2") + "/truth.dsmx"));
  CHECK(same_bytes(tmp.sub("b1") + "/observations.dsmx",
                   tmp.sub("b2") + "/observations.dsmx"));

  REQUIRE(run(small_sim_flags(tmp, 8) + " -o " + tmp.sub("b3")) == 0);
  CHECK(!same_bytes(tmp.sub("b1") + "/observations.dsmx",
                    tmp.sub("b3") + "/observations.dsmx"));
}

TEST_CASE("cli: evaluating truth against itself gives AUC 1") {
  TempDir tmp;
  REQUIRE(run("graph --type grid --rows 5 --cols 5 --spacing 10 --sensors 6 "
              "--seed 21 -o " + tmp.sub("model")) == 0);
  REQUIRE(run(small_sim_flags(tmp, 21) + " -o " + tmp.sub("bundle")) == 0);

  // hand-made estimates dir whose estimates are the truth
  fs::create_directories(tmp.sub("perfect"));
  fs::copy_file(tmp.sub("bundle") + "/truth.dsmx",
                tmp.sub("perfect") + "/estimates.dsmx");
  {
    std::ifstream in(tmp.sub("bundle") + "/meta.json");
    json bundle_meta;
    in >> bundle_meta;
    json meta;
    meta["method"] = "perfect";
    meta["truth_fingerprint"] = bundle_meta["truth_fingerprint"];
    std::ofstream out(tmp.sub("perfect") + "/meta.json");
    out << meta.dump(2) << "\n";
  }
  REQUIRE(run("evaluate --bundle " + tmp.sub("bundle") + " --estimates " +
              tmp.sub("perfect") + " -o " + tmp.sub("eval")) == 0);
  std::ifstream in(tmp.sub("eval") + "/perfect_report.json");
  json rep;
  in >> rep;
  CHECK(rep["auc"].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("cli exit codes") {
  TempDir tmp;
  SUBCASE("missing output parent -> 2") {
    CHECK(run("simulate --preset small-patch --seed 1 -o /nonexistent_root/x/y") ==
          2);
  }
  SUBCASE("bad method -> 1") {
    REQUIRE(run("graph --type grid --rows 4 --cols 4 --sensors 4 --seed 1 -o " +
                tmp.sub("model")) == 0);
    REQUIRE(run(small_sim_flags(tmp, 1) + " -o " + tmp.sub("bundle")) == 0);
    CHECK(run("solve --method nope --bundle " + tmp.sub("bundle") + " -o " +
              tmp.sub("out")) == 1);
  }
  SUBCASE("missing truth file -> 2") {
    REQUIRE(run("graph --type grid --rows 4 --cols 4 --sensors 4 --seed 1 -o " +
                tmp.sub("model")) == 0);
    REQUIRE(run(small_sim_flags(tmp, 1) + " -o " + tmp.sub("bundle")) == 0);
    fs::remove(tmp.sub("bundle") + "/truth.dsmx");
    CHECK(run("evaluate --bundle " + tmp.sub("bundle") + " --estimates " +
              tmp.sub("bundle") + " -o " + tmp.sub("eval")) == 2);
  }
  SUBCASE("simulate without preset or model dir -> 1") {
    CHECK(run("simulate --seed 1 -o " + tmp.sub("x")) == 1);
  }
  SUBCASE("fingerprint mismatch -> 1") {
    REQUIRE(run("graph --type grid --rows 4 --cols 4 --sensors 4 --seed 1 -o " +
                tmp.sub("model")) == 0);
    REQUIRE(run(small_sim_flags(tmp, 1) + " -o " + tmp.sub("b1")) == 0);
    REQUIRE(run(small_sim_flags(tmp, 2) + " -o " + tmp.sub("b2")) == 0);
    REQUIRE(run("solve --method mne --bundle " + tmp.sub("b1") + " -o " +
                tmp.sub("est")) == 0);
    CHECK(run("evaluate --bundle " + tmp.sub("b2") + " --estimates " +
              tmp.sub("est") + " -o " + tmp.sub("eval")) == 1);
  }
}

TEST_CASE("cli config file layering") {
  TempDir tmp;
  {
    std::ofstream cfg(tmp.sub("cfg.json"));
    cfg << R"({"rows": 4, "cols": 5, "sensors": 5, "spacing_mm": 8.0})";
  }
  REQUIRE(run("graph --config " + tmp.sub("cfg.json") + " --cols 6 --seed 2 -o " +
              tmp.sub("model")) == 0);
  // config file set rows=4; the explicit flag overrode cols to 6
  const Eigen::MatrixXd lf = read_dsmx(tmp.sub("model") + "/leadfield_coarse.dsmx");
  CHECK(lf.rows() == 5);       // sensors from config file
  CHECK(lf.cols() == 4 * 6);   // rows from file, cols from flag
}
