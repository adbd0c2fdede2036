#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <random>
#include <string>

#include "drivatt/analysis.hpp"
#include "drivatt/checkpoint.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("drivatt_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::string& args) {
  const std::string cmd = std::string(DRIVATT_EXE) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

json load_json(const fs::path& p) { return json::parse(slurp(p)); }

double record(const json& report, const std::string& scenario, const std::string& condition, const std::string& metric) {
  for (const auto& r : report["records"])
    if (r["scenario"] == scenario && r["condition"] == condition && r["metric"] == metric)
      return r["value"].is_null() ? std::nan("") : r["value"].get<double>();
  return std::nan("");
}

const std::string kDistraction =
    "synth-generate --seed 5 --sessions 6 --frames 120 --condition distraction --scale reduced --out ";

}  // namespace

TEST_CASE("synth-generate is deterministic and lists every file") {
  Workspace ws;
  REQUIRE(run(kDistraction + ws / "a") == 0);
  REQUIRE(run(kDistraction + ws / "b") == 0);
  const json manifest = load_json(ws / "a/manifest.json");
  CHECK(manifest["files"].size() == 6);
  std::size_t listed = 0;
  for (const auto& f : manifest["files"]) {
    const std::string name = f.is_string() ? f.get<std::string>() : f["file"].get<std::string>();
    CHECK(fs::exists(fs::path(ws / "a") / name));
    CHECK(slurp(fs::path(ws / "a") / name) == slurp(fs::path(ws / "b") / name));
    ++listed;
  }
  std::size_t on_disk = 0;
  for (const auto& e : fs::directory_iterator(ws / "a")) on_disk += e.path().extension() == ".drvs";
  CHECK(on_disk == listed);
  CHECK(manifest.contains("config_hash"));
}

TEST_CASE("usage errors exit with 1") {
  Workspace ws;
  CHECK(run("synth-generate --frames 0 --out " + ws / "x") == 1);
  CHECK(run("train --model unconditioned --condition intention --data " + ws / "x" + " --out " + ws / "m.json") == 1);
  CHECK(run("no-such-command") == 1);
  CHECK(run("calibrate --coarse maybe --report " + ws / "r.json") == 1);
}

TEST_CASE("train, evaluate and risk-map end to end") {
  Workspace ws;
  REQUIRE(run(kDistraction + ws / "d") == 0);
  const std::string train = "train --model cond-conv --condition distraction --data " + ws / "d" +
                            " --epochs 2 --per-split 2 --seed 3 --out ";
  REQUIRE(run(train + ws / "m1.json") == 0);
  REQUIRE(run(train + ws / "m2.json") == 0);
  const json h1 = load_json(ws / "m1.json.history.json"), h2 = load_json(ws / "m2.json.history.json");
  REQUIRE(h1["epochs"].size() >= 1);
  const double kl1 = h1["epochs"].back()["val"]["kl"].get<double>();
  const double kl2 = h2["epochs"].back()["val"]["kl"].get<double>();
  CHECK(std::abs(kl1 - kl2) <= 1e-9);
  CHECK(h1["meta"].contains("config_hash"));

  REQUIRE(run("evaluate --ckpt " + ws / "m1.json" + " --data " + ws / "d" + " --report " + ws / "e.json") == 0);
  const json e = load_json(ws / "e.json");
  CHECK(e["meta"].contains("config_hash"));
  CHECK(std::isfinite(record(e, "all", "all", "kl")));

  REQUIRE(run("risk-map --ckpt " + ws / "m1.json" + " --data " + ws / "d" + " --out " + ws / "risk.csv") == 0);
  CHECK_FALSE(drivatt::analysis::read_risk_table(ws / "risk.csv").empty());
  CHECK(slurp(ws / "risk.csv").rfind("# ", 0) == 0);
  REQUIRE(run("render-risk --table " + ws / "risk.csv" + " --out " + ws / "risk.ppm") == 0);
  CHECK(fs::file_size(ws / "risk.ppm") > 0);

  CHECK(run("train --model unconditioned --data " + ws / "d" + " --per-split 2 --epochs 1 --out " + ws / "u.json") ==
        0);
  CHECK(fs::exists(ws / "u.json.history.json"));
  CHECK(run("train --model cond-conv --condition distraction --data " + ws / "missing" + " --out " + ws / "x.json") ==
        2);
}

TEST_CASE("oracle checkpoint scores CC 1 and zero risk") {
  Workspace ws;
  REQUIRE(run(kDistraction + ws / "d") == 0);
  drivatt::checkpoint::save_reference(ws / "oracle.json", drivatt::checkpoint::Kind::reference_oracle,
                                      drivatt::ConditionType::distraction);
  REQUIRE(run("evaluate --split all --ckpt " + ws / "oracle.json" + " --data " + ws / "d" + " --report " + ws / "e.json") ==
          0);
  const json e = load_json(ws / "e.json");
  int cc_rows = 0;
  for (const auto& r : e["records"])
    if (r["metric"] == "cc") {
      CHECK(r["value"].get<double>() == doctest::Approx(1.0).epsilon(1e-9));
      ++cc_rows;
    }
  CHECK(cc_rows >= 2);
  REQUIRE(run("risk-map --ckpt " + ws / "oracle.json" + " --data " + ws / "d" + " --out " + ws / "r.csv") == 0);
  for (const auto& p : drivatt::analysis::read_risk_table(ws / "r.csv")) CHECK(p.risk == 0.0);
}

TEST_CASE("calibrate runs each ablation cell") {
  Workspace ws;
  REQUIRE(run("synth-generate --seed 2 --sessions 4 --frames 64 --condition intention --scale reduced --out " +
              ws / "c") == 0);
  REQUIRE(run("train --model calibration --coarse on --data " + ws / "c" + " --epochs 2 --seed 1 --out " +
              ws / "fine_on.json") == 0);
  REQUIRE(run("train --model calibration --coarse off --data " + ws / "c" + " --epochs 2 --seed 1 --out " +
              ws / "fine_off.json") == 0);
  for (const std::string coarse : {"on", "off"})
    for (const std::string fine : {"on", "off"}) {
      std::string cmd = "calibrate --data " + ws / "c" + " --coarse " + coarse + " --fine " + fine + " --report " +
                        ws / ("cal_" + coarse + fine + ".json");
      if (fine == "on") cmd += " --ckpt " + ws / ("fine_" + coarse + ".json");
      REQUIRE(run(cmd) == 0);
      CHECK(std::isfinite(record(load_json(ws / ("cal_" + coarse + fine + ".json")), "all", "all", "kl")));
    }
  const double raw = record(load_json(ws / "cal_offoff.json"), "all", "all", "kl");
  const double coarse = record(load_json(ws / "cal_onoff.json"), "all", "all", "kl");
  CHECK(raw > coarse);
  // A network trained on centred input cannot serve the raw cell.
  CHECK(run("calibrate --data " + ws / "c" + " --coarse off --fine on --ckpt " + ws / "fine_on.json" + " --report " +
            ws / "bad.json") == 2);
  CHECK(run("calibrate --data " + ws / "c" + " --coarse on --fine on --report " + ws / "bad.json") != 0);
}
