#include <doctest.h>

#include <nlohmann/json.hpp>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "plan.hpp"
#include "staircase/transcript.hpp"
#include "support.hpp"

using namespace staircase;
using namespace staircase::tools;
using test_support::basic_config;
using test_support::read_file;

namespace {

// Unique scratch directory per test body, removed on scope exit.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("staircase_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  REQUIRE(out.good());
  out << j.dump(2) << "\n";
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("run with the built-in plan writes a stable results table") {
  TempDir dir;
  auto invoke = [&](const std::string& csv) {
    RunArgs args;
    args.use_defaults = true;
    args.csv = csv;
    std::ostringstream out, err;
    CHECK(cmd_run(args, out, err) == 0);
    CHECK(err.str().find("staircase-r0: ttft=") != std::string::npos);
    CHECK(err.str().find("normal-r0: ttft=") != std::string::npos);
    return read_file(csv);
  };

  std::string first = invoke(dir.file("one.csv"));
  std::string second = invoke(dir.file("two.csv"));
  CHECK(first == second);

  auto lines = split_lines(first);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] ==
        "run_id,mode,topology,first_chunk_size,redundancy,ttft_s,tps,"
        "agg_tokens,wall_s,prompt_tokens");
  CHECK(lines[1].rfind("staircase-r0,staircase,moa,8,2,", 0) == 0);
  CHECK(lines[2].rfind("normal-r0,normal,moa,8,2,", 0) == 0);
}

TEST_CASE("repetitions and a sweep expand the run matrix") {
  TempDir dir;
  RunArgs args;
  args.use_defaults = true;
  args.modes = {"staircase"};
  args.repetitions = 2;
  args.sweep_parameter = "first_chunk_size";
  args.sweep_values = {4, 8};
  args.csv = dir.file("sweep.csv");
  std::ostringstream out, err;
  REQUIRE(cmd_run(args, out, err) == 0);

  auto lines = split_lines(read_file(*args.csv));
  REQUIRE(lines.size() == 5);
  CHECK(lines[1].rfind("first_chunk_size=4-staircase-r0,staircase,moa,4,", 0) ==
        0);
  CHECK(lines[2].rfind("first_chunk_size=4-staircase-r1,", 0) == 0);
  CHECK(lines[3].rfind("first_chunk_size=8-staircase-r0,staircase,moa,8,", 0) ==
        0);
  CHECK(lines[4].rfind("first_chunk_size=8-staircase-r1,", 0) == 0);
  // Repetitions reseed the jitter, so the measurements must not be clones.
  CHECK(lines[1].substr(lines[1].find(",staircase,")) !=
        lines[2].substr(lines[2].find(",staircase,")));
}

TEST_CASE("parallel cells reproduce the serial results byte for byte") {
  TempDir dir;
  RunArgs args;
  args.use_defaults = true;
  args.sweep_parameter = "redundancy";
  args.sweep_values = {0, 1, 2};
  args.csv = dir.file("serial.csv");
  std::ostringstream out, err;
  REQUIRE(cmd_run(args, out, err) == 0);

  args.csv = dir.file("parallel.csv");
  args.parallel_cells = 4;
  std::ostringstream out2, err2;
  REQUIRE(cmd_run(args, out2, err2) == 0);

  CHECK(read_file(dir.file("serial.csv")) ==
        read_file(dir.file("parallel.csv")));
}

TEST_CASE("run reports unusable input instead of running") {
  std::ostringstream out, err;
  SUBCASE("no plan source") {
    CHECK(cmd_run(RunArgs{}, out, err) == 2);
    CHECK(err.str().find("--defaults") != std::string::npos);
  }
  SUBCASE("unknown mode") {
    RunArgs args;
    args.use_defaults = true;
    args.modes = {"sideways"};
    CHECK(cmd_run(args, out, err) == 2);
    CHECK(err.str().find("sideways") != std::string::npos);
  }
  SUBCASE("unknown sweep parameter") {
    RunArgs args;
    args.use_defaults = true;
    args.sweep_parameter = "warp_factor";
    args.sweep_values = {1};
    CHECK(cmd_run(args, out, err) == 2);
    CHECK(err.str().find("warp_factor") != std::string::npos);
  }
  SUBCASE("missing plan file") {
    RunArgs args;
    args.plan_path = "/nonexistent/plan.json";
    CHECK(cmd_run(args, out, err) == 2);
    CHECK(err.str().find("/nonexistent/plan.json") != std::string::npos);
  }
}

TEST_CASE("validate passes the built-in pipeline and refuses live ones") {
  SUBCASE("built-in pipeline agrees with the reference") {
    ValidateArgs args;
    args.use_defaults = true;
    std::ostringstream out, err;
    CHECK(cmd_validate(args, out, err) == 0);
    CHECK(out.str().find("[PASS] mode=staircase") != std::string::npos);
    CHECK(out.str().find("[PASS] mode=normal") != std::string::npos);
    CHECK(out.str().find("mismatches=0") != std::string::npos);
  }

  SUBCASE("live backends have no reference timeline") {
    TempDir dir;
    PipelineConfig config = basic_config({4, 5}, 6);
    config.aggregator.backend.kind = BackendKind::http;
    config.aggregator.backend.base_url = "http://127.0.0.1:9";
    config.aggregator.backend.model = "m";
    std::string path = dir.file("live.json");
    write_json_file(path, nlohmann::json(config));

    ValidateArgs args;
    args.config_path = path;
    std::ostringstream out, err;
    CHECK(cmd_validate(args, out, err) == 2);
    CHECK(err.str().find("no reference timeline") != std::string::npos);
  }
}

TEST_CASE("render prints prompts round by round") {
  SUBCASE("single round") {
    RenderArgs args;
    args.use_defaults = true;
    args.round = 2;
    std::ostringstream out, err;
    CHECK(cmd_render(args, out, err) == 0);
    CHECK(out.str().find("== round 2 ==") != std::string::npos);
    CHECK(out.str().find("== round 1 ==") == std::string::npos);
    CHECK(out.str().find("[system]") != std::string::npos);
    CHECK(out.str().find("[user]") != std::string::npos);
  }

  SUBCASE("all rounds") {
    RenderArgs args;
    args.use_defaults = true;
    std::ostringstream out, err;
    CHECK(cmd_render(args, out, err) == 0);
    CHECK(out.str().find("== round 1 ==") != std::string::npos);
    CHECK(out.str().find("== round 2 ==") != std::string::npos);
  }

  SUBCASE("a round that never happens") {
    RenderArgs args;
    args.use_defaults = true;
    args.round = 999;
    std::ostringstream out, err;
    CHECK(cmd_render(args, out, err) == 2);
    CHECK(err.str().find("no prompt for round 999") != std::string::npos);
  }

  SUBCASE("from a saved transcript") {
    TempDir dir;
    RunArgs run_args;
    run_args.use_defaults = true;
    run_args.modes = {"staircase"};
    run_args.csv = dir.file("ignored.csv");
    run_args.transcripts = dir.path.string();
    std::ostringstream run_out, run_err;
    REQUIRE(cmd_run(run_args, run_out, run_err) == 0);

    RenderArgs args;
    args.transcript_path = dir.file("staircase-r0.json");
    args.round = 1;
    std::ostringstream out, err;
    CHECK(cmd_render(args, out, err) == 0);
    CHECK(out.str().find("== round 1 ==") != std::string::npos);
  }
}

TEST_CASE("a plan file round-trips through the loader and the runner") {
  TempDir dir;
  BenchmarkPlan plan = default_plan();
  plan.repetitions = 2;
  plan.modes = {RunMode::staircase};
  plan.sweep = SweepSpec{"redundancy", {0, 2}};
  plan.output.csv = dir.file("plan.csv");
  std::string path = dir.file("plan.json");
  write_json_file(path, nlohmann::json(plan));

  BenchmarkPlan loaded = load_plan_file(path);
  CHECK(loaded.repetitions == 2);
  REQUIRE(loaded.modes.size() == 1);
  CHECK(loaded.modes[0] == RunMode::staircase);
  REQUIRE(loaded.sweep.has_value());
  CHECK(loaded.sweep->parameter == "redundancy");
  CHECK(loaded.sweep->values == std::vector<int>{0, 2});
  CHECK(loaded.config.query == plan.config.query);
  CHECK(loaded.output.csv == plan.output.csv);

  RunArgs args;
  args.plan_path = path;
  std::ostringstream out, err;
  REQUIRE(cmd_run(args, out, err) == 0);
  auto lines = split_lines(read_file(plan.output.csv));
  CHECK(lines.size() == 5);  // header + 2 cells x 1 mode x 2 reps
  CHECK(lines[1].rfind("redundancy=0-staircase-r0,", 0) == 0);
}

TEST_CASE("failed runs land in the error report") {
  TempDir dir;
  PipelineConfig config = basic_config({3, 4}, 5);
  config.aggregator.backend.kind = BackendKind::http;
  config.aggregator.backend.base_url = "http://127.0.0.1:9";
  config.aggregator.backend.model = "m";
  config.aggregator.backend.max_retries = 0;
  std::string path = dir.file("dead.json");
  write_json_file(path, nlohmann::json(config));

  RunArgs args;
  args.config_path = path;
  args.modes = {"staircase"};
  args.csv = dir.file("dead.csv");
  args.errors = dir.file("errors.json");
  std::ostringstream out, err;
  CHECK(cmd_run(args, out, err) == 1);
  CHECK(err.str().find("forcing time_scale 1.0") != std::string::npos);
  CHECK(err.str().find("FAILED") != std::string::npos);
  CHECK(err.str().find("1 of 1 runs failed") != std::string::npos);

  nlohmann::json failures =
      nlohmann::json::parse(read_file(dir.file("errors.json")));
  REQUIRE(failures.is_array());
  REQUIRE(failures.size() == 1);
  CHECK(failures[0]["run_id"] == "staircase-r0");
  CHECK(!failures[0]["error"].get<std::string>().empty());

  // No successful rows, so the table is just its header.
  CHECK(split_lines(read_file(dir.file("dead.csv"))).size() == 1);
}

TEST_CASE("streamed deltas reproduce the final text") {
  TempDir dir;
  RunArgs args;
  args.use_defaults = true;
  args.modes = {"staircase"};
  args.stream = true;
  args.transcripts = dir.path.string();
  std::ostringstream out, err;
  REQUIRE(cmd_run(args, out, err) == 0);

  nlohmann::json j =
      nlohmann::json::parse(read_file(dir.file("staircase-r0.json")));
  RunTranscript transcript = j;
  CHECK(out.str() == transcript.final_text + "\n");
  CHECK(err.str().find("== staircase-r0 ==") != std::string::npos);

  // Events written alongside start with a skippable header line.
  RunArgs with_events = args;
  with_events.stream = false;
  with_events.csv = dir.file("ev.csv");
  with_events.events = dir.path.string();
  std::ostringstream out2, err2;
  REQUIRE(cmd_run(with_events, out2, err2) == 0);
  auto lines = split_lines(read_file(dir.file("staircase-r0.events.jsonl")));
  REQUIRE(lines.size() > 2);
  nlohmann::json header = nlohmann::json::parse(lines[0]);
  CHECK(header["kind"] == "run_header");
  CHECK(header["run_id"] == "staircase-r0");
  std::ifstream events_in(dir.file("staircase-r0.events.jsonl"));
  auto events = read_events_jsonl(events_in);
  CHECK(events.size() == lines.size() - 1);
  CHECK(events.back().kind == EventKind::run_complete);
}
