// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pvl/cli/cli.hpp"
#include "pvl/harness/report.hpp"
#include "pvl/protocol/dataset.hpp"

using namespace pvl;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("pvl_cli_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string &name) const { return (path / name).string(); }
};

std::vector<std::string> quick_run(const std::string &out) {
  return {"run", "--seed", "2", "--pretrain-epochs", "1", "--base-epochs", "1",
          "--inc-epochs", "1", "-o", out};
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit 2") {
  CHECK(invoke({}).code == cli::kExitUsage);
  CHECK(invoke({"frobnicate"}).code == cli::kExitUsage);
  CHECK(invoke({"run", "--no-such-flag"}).code == cli::kExitUsage);
  CHECK(invoke({"gen-data", "--noise-sigma", "-1", "-o", "x.pvds"}).code ==
        cli::kExitUsage);
  CHECK(invoke({"gen-data"}).code == cli::kExitUsage);
  CHECK(invoke({"run", "--method", "magic"}).code == cli::kExitUsage);
  CHECK(invoke({"--help"}).code == cli::kExitOk);
}

TEST_CASE("gen-data writes the preset and is byte-stable") {
  TempDir dir;
  auto r = invoke({"gen-data", "--preset", "cifar-mini", "--seed", "7", "-o", dir / "a.pvds"});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(r.out.find("grating-000") != std::string::npos);
  auto h = protocol::read_dataset_header(dir / "a.pvds");
  CHECK(h.classes == 56);
  CHECK(fs::exists(dir / "a.pvds.emb.csv"));
  REQUIRE(invoke({"gen-data", "--seed", "7", "-o", dir / "b.pvds"}).code == cli::kExitOk);
  CHECK(harness::read_text_file(dir / "a.pvds") == harness::read_text_file(dir / "b.pvds"));
  CHECK(harness::read_text_file(dir / "a.pvds.emb.csv") ==
        harness::read_text_file(dir / "b.pvds.emb.csv"));
  auto cub = invoke({"gen-data", "--preset", "cub-mini", "--seed", "7", "-o", dir / "c.pvds"});
  CHECK(cub.code == cli::kExitOk);
}

TEST_CASE("grad-check passes and detects an injected fault") {
  auto ok = invoke({"grad-check"});
  CHECK(ok.code == cli::kExitOk);
  auto bad = invoke({"grad-check", "--inject-fault", "softmax"});
  CHECK(bad.code == cli::kExitCheckFailed);
  CHECK(bad.out.find("softmax") != std::string::npos);
  CHECK(invoke({"grad-check", "--tol", "1e-12"}).code == cli::kExitCheckFailed);
  auto list = invoke({"grad-check", "--list"});
  CHECK(list.out.find("loss_ed") != std::string::npos);
}

TEST_CASE("run writes a report, csv, and summary") {
  TempDir dir;
  auto args = quick_run(dir / "r.json");
  args.insert(args.end(), {"--alpha", "0", "--beta", "0"});
  auto r = invoke(args);
  REQUIRE_MESSAGE(r.code == cli::kExitOk, r.err);
  CHECK(r.out.find("A_Avg") != std::string::npos);
  auto rep = harness::report_from_json(harness::read_text_file(dir / "r.json"));
  CHECK(rep.sessions.size() == 5);
  CHECK(rep.config.weights.alpha == 0.0);
  CHECK(rep.config.weights.beta == 0.0);
  CHECK(rep.config.seed == 2);
  auto rows = harness::csv_from_text(harness::read_text_file(dir / "r.csv"));
  CHECK(rows.size() == 5);

  auto merged = invoke({"report", dir / "r.json", dir / "r.json"});
  CHECK(merged.code == cli::kExitOk);
  CHECK(merged.out.find("median") != std::string::npos);
}

TEST_CASE("config file values sit between flags and defaults") {
  TempDir dir;
  {
    std::ofstream f(dir / "c.cfg");
    f << "# quick settings\nseed = 4\npretrain-epochs = 1\nbase-epochs = 1\n"
         "inc-epochs = 1\ngamma = 0.3\n";
  }
  auto r = invoke({"run", "--config", dir / "c.cfg", "--gamma", "0.2", "-o", dir / "r.json"});
  REQUIRE_MESSAGE(r.code == cli::kExitOk, r.err);
  auto rep = harness::report_from_json(harness::read_text_file(dir / "r.json"));
  CHECK(rep.config.seed == 4);
  CHECK(rep.config.base_epochs == 1);
  CHECK(rep.config.weights.gamma == 0.2);
  CHECK(rep.config.weights.tau == 2.0);

  {
    std::ofstream f(dir / "bad.cfg");
    f << "no-such-key = 1\n";
  }
  CHECK(invoke({"run", "--config", dir / "bad.cfg"}).code == cli::kExitUsage);
}

TEST_CASE("seed falls back to the environment") {
  TempDir dir;
  ::setenv("PRIVILEGE_SEED", "11", 1);
  auto r = invoke({"gen-data", "-o", dir / "e.pvds"});
  auto f = invoke({"gen-data", "--seed", "11", "-o", dir / "f.pvds"});
  ::unsetenv("PRIVILEGE_SEED");
  REQUIRE(r.code == cli::kExitOk);
  REQUIRE(f.code == cli::kExitOk);
  CHECK(harness::read_text_file(dir / "e.pvds") == harness::read_text_file(dir / "f.pvds"));
}

TEST_CASE("data problems exit 3") {
  TempDir dir;
  REQUIRE(invoke({"gen-data", "--samples-per-class", "10", "-o", dir / "small.pvds"}).code ==
          cli::kExitOk);
  auto r = invoke({"run", "--data", dir / "small.pvds", "-o", dir / "r.json"});
  CHECK(r.code == cli::kExitData);
  CHECK_FALSE(r.err.empty());
  harness::write_text_file(dir / "junk.json", "{not json");
  CHECK(invoke({"report", dir / "junk.json"}).code == cli::kExitData);
  harness::write_text_file(dir / "junk.pvds", "PVDS");
  CHECK(invoke({"run", "--data", dir / "junk.pvds"}).code == cli::kExitData);
}

} // TEST_SUITE
