#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cli.hpp"
#include "hemlets/data_io.hpp"
#include "hemlets/synthetic.hpp"

using namespace hemlets;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "hemlets");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const char* f) const { return (path / f).string(); }
};

void write_poses(const std::string& path, int n) {
  std::mt19937_64 rng(3);
  std::vector<PoseRecord> recs(n);
  for (int i = 0; i < n; ++i) {
    recs[i].id = "p" + std::to_string(i);
    recs[i].group = i % 2 ? "Walk" : "Sit";
    recs[i].pose3d = random_pose_mm(rng);
  }
  write_pose_file(path, recs);
}

}  // namespace

TEST_CASE("usage errors exit with the input error code") {
  CHECK(run({}).code == cli::kInputError);
  CHECK(run({"frobnicate"}).code == cli::kInputError);
  CHECK(run({"encode", "/nonexistent/poses.jsonl", "-o", "/tmp/x.bin"}).code == cli::kIoFailure);
  CHECK(run({"--help"}).code == cli::kOk);
}

TEST_CASE("encode then decode recovers the polarities, byte-identical across runs") {
  TempDir dir("hemlets_cli_encode");
  write_poses(dir / "poses.jsonl", 5);
  const auto a = run({"--threads", "1", "encode", dir / "poses.jsonl", "-o", dir / "a.bin", "--grid", "32",
                      "--volume", "16", "--bones-out", dir / "bones.json"});
  REQUIRE(a.code == cli::kOk);
  const auto b = run({"--threads", "1", "encode", dir / "poses.jsonl", "-o", dir / "b.bin", "--grid", "32",
                      "--volume", "16"});
  REQUIRE(b.code == cli::kOk);
  CHECK(slurp(dir / "a.bin") == slurp(dir / "b.bin"));
  CHECK(a.out.find("l_hip-l_knee") != std::string::npos);

  const auto d = run({"decode", dir / "a.bin", "-o", dir / "dec.jsonl", "--bones", dir / "bones.json"});
  CHECK(d.code == cli::kOk);
  CHECK(read_pose_file(dir / "dec.jsonl").size() == 5);

  CHECK(run({"encode", dir / "poses.jsonl", "-o", dir / "c.bin", "--grid", "0"}).code == cli::kInputError);
}

TEST_CASE("train-toy is byte-identical across single-threaded runs") {
  TempDir dir("hemlets_cli_train");
  const std::vector<std::string> common{"--seed", "5", "--threads", "1", "train-toy", "--epochs", "2",
                                        "--train-size", "16", "--val-size", "8", "--hidden", "8"};
  auto first = common, second = common;
  first.insert(first.end(), {"--log", dir / "a.jsonl", "--model", dir / "a.bin"});
  second.insert(second.end(), {"--log", dir / "b.jsonl", "--model", dir / "b.bin"});
  const auto a = run(first);
  const auto b = run(second);
  REQUIRE(a.code == cli::kOk);
  REQUIRE(b.code == cli::kOk);
  CHECK(a.out == b.out);
  CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
  CHECK(slurp(dir / "a.bin") == slurp(dir / "b.bin"));
  CHECK(run({"train-toy", "--lambda", "3", "--epochs", "1"}).code == cli::kInputError);
  CHECK(run({"train-toy", "--lr", "1e6", "--epochs", "20", "--train-size", "24", "--val-size", "8", "--hidden", "16",
                "--batch-size", "8", "--model", dir / "diverged.bin"})
            .code == cli::kNumericalFailure);
  CHECK(fs::exists(dir / "diverged.bin"));
}

TEST_CASE("eval, simulate-fbi, convert-ordinal and skin") {
  TempDir dir("hemlets_cli_misc");
  write_poses(dir / "gt.jsonl", 6);
  const auto e = run({"eval", dir / "gt.jsonl", dir / "gt.jsonl", "--grouped", "--json", dir / "r.json"});
  CHECK(e.code == cli::kOk);
  CHECK(e.out.find("Average") != std::string::npos);
  CHECK(run({"eval", dir / "gt.jsonl", dir / "gt.jsonl", "--auc-steps", "1"}).code == cli::kInputError);

  CHECK(run({"simulate-fbi", dir / "gt.jsonl", "-o", dir / "fbi.jsonl"}).code == cli::kOk);
  std::ifstream fbi(dir / "fbi.jsonl");
  CHECK(read_fbi_records(fbi).size() == 6);
  CHECK(run({"simulate-fbi", dir / "gt.jsonl", "-o", dir / "x.jsonl", "--high-error", "2"}).code ==
        cli::kInputError);

  {
    std::ofstream o(dir / "ord.jsonl");
    o << R"({"schema": "hemlets.ordinal", "version": 1})" << "\n"
      << R"({"id": "a", "pairs": [{"a": "l_hip", "b": "l_knee", "relation": "closer"}]})" << "\n";
  }
  CHECK(run({"convert-ordinal", dir / "ord.jsonl", "-o", dir / "ord_fbi.jsonl"}).code == cli::kOk);
  {
    std::ofstream o(dir / "broken.jsonl");
    o << "{not json\n";
  }
  CHECK(run({"convert-ordinal", dir / "broken.jsonl", "-o", dir / "y.jsonl"}).code == cli::kInputError);

  CHECK(run({"skin", "--random", "-o", dir / "m.obj", "--export-rig", dir / "rig.bin"}).code == cli::kOk);
  CHECK(fs::file_size(dir / "m.obj") > 0);
  CHECK(run({"skin", "--rig", dir / "rig.bin", "-o", dir / "n.obj"}).code == cli::kOk);
}
