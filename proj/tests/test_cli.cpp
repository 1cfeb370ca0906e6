#include <cstdlib>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include <doctest.h>

#include "helpers.hpp"

using testutil::TempDir;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out, err;
};

/// Runs the installed CLI with output capture. The binary path comes from the
/// build system, so these tests exercise the exact artifact that ships.
CliResult run_cli(const std::string& args, const fs::path& scratch) {
  const fs::path out_file = scratch / "stdout.txt", err_file = scratch / "stderr.txt";
  const std::string cmd = std::string(ACWE_CLI_PATH) + " " + args + " >" + out_file.string() +
                          " 2>" + err_file.string();
  const int status = std::system(cmd.c_str());
  CliResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = testutil::slurp(out_file);
  result.err = testutil::slurp(err_file);
  return result;
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  TempDir tmp;
  CHECK(run_cli("", tmp.path()).exit_code == 2);  // a subcommand is required
  CHECK(run_cli("no-such-command", tmp.path()).exit_code == 2);
  CHECK(run_cli("gen-data", tmp.path()).exit_code == 2);  // --out is required
  CHECK(run_cli("gen-data --out x --noise gaussian", tmp.path()).exit_code == 2);
  CHECK(run_cli("train --data x --out-ckpt y --mode 5", tmp.path()).exit_code == 2);
  CHECK(run_cli("--threads 0 gen-data --out x", tmp.path()).exit_code == 2);
  CHECK(run_cli("--help", tmp.path()).exit_code == 0);
}

TEST_CASE("runtime failures exit with code 1 and a message") {
  TempDir tmp;
  const CliResult train = run_cli(
      "train --data " + (tmp / "absent").string() + " --out-ckpt " + (tmp / "c.ckpt").string(),
      tmp.path());
  CHECK(train.exit_code == 1);
  CHECK(train.err.find("error:") != std::string::npos);

  const CliResult seg = run_cli("segment --ckpt " + (tmp / "absent.ckpt").string() +
                                    " --image x --out-mask y",
                                tmp.path());
  CHECK(seg.exit_code == 1);
}

TEST_CASE("the full command pipeline runs end to end") {
  TempDir tmp;
  const fs::path data = tmp / "data";
  const fs::path work = tmp / "work";
  fs::create_directories(work);

  // gen-data
  const CliResult gen = run_cli("gen-data --out " + data.string() +
                                    " --n-train 6 --n-test 10 --size 16 --n-structures 1"
                                    " --blur-sigma 0.5 --noise none --seed 3",
                                tmp.path());
  REQUIRE(gen.exit_code == 0);
  CHECK(gen.out.find("wrote 16 items") != std::string::npos);
  CHECK(fs::exists(data / "manifest.json"));
  CHECK(fs::exists(data / "config.resolved.json"));
  CHECK(fs::exists(data / "train_0005.img.f32"));
  CHECK(fs::exists(data / "test_0009.label.f32"));

  // the same seed reproduces the manifest and payloads byte for byte
  const fs::path data2 = tmp / "data2";
  REQUIRE(run_cli("gen-data --out " + data2.string() +
                      " --n-train 6 --n-test 10 --size 16 --n-structures 1"
                      " --blur-sigma 0.5 --noise none --seed 3",
                  tmp.path())
              .exit_code == 0);
  CHECK(testutil::slurp(data / "manifest.json") == testutil::slurp(data2 / "manifest.json"));
  CHECK(testutil::slurp(data / "train_0000.img.f32") ==
        testutil::slurp(data2 / "train_0000.img.f32"));

  // train (tiny recipe: the pipeline is under test, not the accuracy)
  const fs::path ckpt = work / "net.ckpt";
  const CliResult train = run_cli("train --data " + data.string() +
                                      " --mode 1 --epochs 1 --batch 2 --channels 2"
                                      " --time-steps 1 --seed 5 --out-ckpt " + ckpt.string(),
                                  tmp.path());
  REQUIRE(train.exit_code == 0);
  CHECK(fs::exists(ckpt));
  CHECK(fs::exists(work / "config.resolved.json"));
  CHECK(train.out.find("checkpoint:") != std::string::npos);
  const std::string log = testutil::slurp(work / "net.ckpt.log.jsonl");
  CHECK(count_lines(log) == 1);
  CHECK(log.find("\"phase\":\"main\"") != std::string::npos);

  // config file supplies defaults, command line wins
  std::ofstream(work / "cfg.json") << R"({"epochs":2,"channels":2,"time_steps":1,"batch":2})";
  const fs::path ckpt2 = work / "net2.ckpt";
  REQUIRE(run_cli("train --data " + data.string() + " --config " +
                      (work / "cfg.json").string() + " --seed 5 --out-ckpt " + ckpt2.string() +
                      " --log " + (work / "cfg_run.jsonl").string(),
                  tmp.path())
              .exit_code == 0);
  CHECK(count_lines(testutil::slurp(work / "cfg_run.jsonl")) == 2);

  REQUIRE(run_cli("train --data " + data.string() + " --config " +
                      (work / "cfg.json").string() + " --epochs 1 --seed 5 --out-ckpt " +
                      ckpt2.string() + " --log " + (work / "cfg_override.jsonl").string(),
                  tmp.path())
              .exit_code == 0);
  CHECK(count_lines(testutil::slurp(work / "cfg_override.jsonl")) == 1);

  // segment to PGM file and to stdout
  const CliResult seg = run_cli("segment --ckpt " + ckpt.string() + " --image " +
                                    (data / "test_0000.img.f32").string() + " --out-mask " +
                                    (work / "mask.pgm").string(),
                                tmp.path());
  REQUIRE(seg.exit_code == 0);
  CHECK(testutil::slurp(work / "mask.pgm").rfind("P5\n", 0) == 0);

  const CliResult seg_stdout = run_cli("segment --ckpt " + ckpt.string() + " --image " +
                                           (data / "test_0000.img.f32").string() +
                                           " --out-mask -",
                                       tmp.path());
  REQUIRE(seg_stdout.exit_code == 0);
  CHECK(seg_stdout.out.rfind("P5\n", 0) == 0);

  const CliResult seg_raw = run_cli("segment --ckpt " + ckpt.string() + " --image " +
                                        (data / "test_0000.img.f32").string() + " --out-mask " +
                                        (work / "mask.f32").string(),
                                    tmp.path());
  REQUIRE(seg_raw.exit_code == 0);
  CHECK(fs::exists(work / "mask.f32"));
  CHECK(fs::exists(work / "mask.f32.json"));

  // baseline over the first two test images
  const fs::path base_out = work / "baseline";
  const CliResult base = run_cli("baseline --data " + data.string() + " --out " +
                                     base_out.string() + " --max-iters 3 --max-images 2",
                                 tmp.path());
  REQUIRE(base.exit_code == 0);
  CHECK(base.out.find("baseline DSC") != std::string::npos);
  CHECK(count_lines(testutil::slurp(base_out / "records.jsonl")) == 2);
  CHECK(fs::exists(base_out / "dsc.csv"));
  CHECK(fs::exists(base_out / "test_0000.mask.f32"));
  CHECK(fs::exists(base_out / "test_0001.mask.f32"));

  // eval with a one-panel gallery
  const fs::path eval_out = work / "eval";
  const CliResult ev = run_cli("eval --ckpt " + ckpt.string() + " --data " + data.string() +
                                   " --out " + eval_out.string() + " --gallery 1",
                               tmp.path());
  REQUIRE(ev.exit_code == 0);
  CHECK(ev.out.find("DSC") != std::string::npos);
  CHECK(fs::exists(eval_out / "dsc.csv"));
  CHECK(fs::exists(eval_out / "dsc.md"));
  CHECK(fs::exists(eval_out / "gallery" / "case_000.pgm"));

  // bench with a single repeat warns about degenerate spread
  const fs::path bench_out = work / "bench";
  const CliResult bench = run_cli("bench --ckpt " + ckpt.string() + " --data " + data.string() +
                                      " --out " + bench_out.string() +
                                      " --repeats 1 --max-iters 2",
                                  tmp.path());
  REQUIRE(bench.exit_code == 0);
  CHECK(bench.out.find("ratio") != std::string::npos);
  CHECK(bench.err.find("single repeat") != std::string::npos);
  CHECK(fs::exists(bench_out / "timing.csv"));
  CHECK(fs::exists(bench_out / "timing.md"));
}
