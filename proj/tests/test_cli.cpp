#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "labelprop/json_io.hpp"

// Exercises the installed binary end to end: exit codes, stdout summaries,
// and the single-line JSON errors on stderr.

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

RunResult run_cli(const std::string& args, const fs::path& dir) {
    const fs::path out_file = dir / "stdout.txt";
    const fs::path err_file = dir / "stderr.txt";
    const std::string cmd = std::string(LP_CLI_PATH) + " " + args + " >" +
                            out_file.string() + " 2>" + err_file.string();
    const int status = std::system(cmd.c_str());
    RunResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = labelprop::read_text_file(out_file);
    result.err = labelprop::read_text_file(err_file);
    return result;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const char* tag) {
        path = fs::temp_directory_path() / (std::string("lp_cli_") + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_demo_config(const fs::path& path) {
    std::ofstream out(path);
    out << R"({
      "seed": 3,
      "paths": {"store": "store.jsonl", "heads_dir": "heads", "output_dir": "out"},
      "head": {"p": 8, "m": 2},
      "hyperparams": {"epochs": 8},
      "synth": {
        "num_classes": 4,
        "dim": 12,
        "spaces": ["space_a", "space_b"],
        "samples_per_class_per_split": {"representative": 3, "train": 12, "validation": 6},
        "cluster_sigma": 0.2
      }
    })";
}

}  // namespace

TEST_CASE("--help exits zero and lists the subcommands") {
    TempDir dir("help");
    const RunResult result = run_cli("--help", dir.path);
    CHECK(result.exit_code == 0);
    for (const char* sub :
         {"synth", "train", "label", "eval", "perturb", "report-savings"}) {
        CHECK(result.out.find(sub) != std::string::npos);
    }
}

TEST_CASE("subcommand --help documents its flags") {
    TempDir dir("subhelp");
    const RunResult result = run_cli("perturb --help", dir.path);
    CHECK(result.exit_code == 0);
    CHECK(result.out.find("--drop-rate") != std::string::npos);
    CHECK(result.out.find("--config") != std::string::npos);
}

TEST_CASE("unknown flags fail") {
    TempDir dir("badflag");
    CHECK(run_cli("synth --frobnicate", dir.path).exit_code != 0);
}

TEST_CASE("invalid configs produce one machine-parsable error line") {
    TempDir dir("badcfg");
    const fs::path config = dir.path / "config.json";
    {
        std::ofstream out(config);
        out << R"({"synth": {"num_classes": 4, "dim": 8, "spaces": ["a"],
                   "samples_per_class_per_split": {"train": 5},
                   "confusion_blend": 1.5}})";
    }
    const RunResult result = run_cli("synth --config " + config.string(), dir.path);
    CHECK(result.exit_code != 0);
    // Exactly one line, valid JSON, with an "error" key.
    const auto newline = result.err.find('\n');
    REQUIRE(newline != std::string::npos);
    CHECK(newline == result.err.size() - 1);
    const auto parsed = nlohmann::json::parse(result.err);
    CHECK(parsed.contains("error"));
    CHECK(parsed["error"].get<std::string>().find("confusion_blend") !=
          std::string::npos);
}

TEST_CASE("bad split fractions exit nonzero") {
    TempDir dir("fracs");
    const fs::path config = dir.path / "config.json";
    {
        std::ofstream out(config);
        out << R"({"paths": {"store": ")" << (dir.path / "s.jsonl").string()
            << R"("},
              "synth": {"num_classes": 3, "dim": 8, "spaces": ["a"],
                        "samples_per_class_per_split": {"train": 6},
                        "split_fractions": {"representative": 0.5, "train": 0.2}}})";
    }
    const RunResult result = run_cli("synth --config " + config.string(), dir.path);
    CHECK(result.exit_code != 0);
    const auto parsed = nlohmann::json::parse(result.err);
    CHECK(parsed["error"].get<std::string>().find("sum to 1") != std::string::npos);
}

TEST_CASE("split fractions re-split the generated store") {
    TempDir dir("fracs2");
    const fs::path config = dir.path / "config.json";
    {
        std::ofstream out(config);
        out << R"({"paths": {"store": ")" << (dir.path / "s.jsonl").string()
            << R"(", "output_dir": ")" << (dir.path / "out").string() << R"("},
              "synth": {"num_classes": 3, "dim": 8, "spaces": ["a"],
                        "samples_per_class_per_split": {"train": 10},
                        "split_fractions": {"representative": 0.2, "train": 0.7,
                                            "validation": 0.1}}})";
    }
    REQUIRE(run_cli("synth --config " + config.string(), dir.path).exit_code == 0);
    const auto store_text = labelprop::read_text_file(dir.path / "s.jsonl");
    const auto header = nlohmann::json::parse(
        store_text.substr(0, store_text.find('\n')));
    CHECK(header["splits"]["representative"].size() == 6);  // 0.2 * 10 per class
    CHECK(header["splits"]["train"].size() == 21);
    CHECK(header["splits"]["validation"].size() == 3);
}

TEST_CASE("full chain through the binary") {
    TempDir dir("chain");
    const fs::path config = dir.path / "config.json";
    write_demo_config(config);
    const std::string base = "--config " + config.string();

    const RunResult synth = run_cli("synth " + base, dir.path);
    REQUIRE(synth.exit_code == 0);
    CHECK(synth.out.find("checksum") != std::string::npos);

    // Same seed, same store checksum line.
    const RunResult synth2 = run_cli("synth " + base, dir.path);
    CHECK(synth2.out == synth.out);
    // A different seed changes it (flag overrides the config).
    const RunResult synth3 = run_cli("synth " + base + " --seed 99", dir.path);
    CHECK(synth3.exit_code == 0);
    CHECK(synth3.out != synth.out);
    // Regenerate with the config seed before training.
    REQUIRE(run_cli("synth " + base, dir.path).exit_code == 0);

    const RunResult train = run_cli("train " + base, dir.path);
    REQUIRE(train.exit_code == 0);
    CHECK(train.out.find("space_a") != std::string::npos);
    CHECK(fs::exists(dir.path / "heads" / "head_space_b.json"));

    const fs::path proposals = dir.path / "out" / "proposals.json";
    const fs::path labeled = dir.path / "out" / "labeled.json";
    const RunResult label = run_cli(
        "label " + base + " --proposals " + proposals.string() + " --out " +
            labeled.string(),
        dir.path);
    REQUIRE(label.exit_code == 0);

    const RunResult eval = run_cli(
        "eval " + base + " --labeled " + labeled.string() + " --truth " +
            (dir.path / "out" / "truth.json").string(),
        dir.path);
    REQUIRE(eval.exit_code == 0);
    CHECK(eval.out.find("accuracy=") != std::string::npos);
    CHECK(fs::exists(dir.path / "out" / "eval_report.json"));

    const RunResult drop = run_cli(
        "perturb " + base + " --in " + proposals.string() + " --out " +
            (dir.path / "out" / "dropped.json").string() + " --drop-rate 1.0",
        dir.path);
    REQUIRE(drop.exit_code == 0);
    const auto dropped =
        labelprop::parse_json_file(dir.path / "out" / "dropped.json");
    CHECK(dropped["annotations"].empty());
    CHECK_FALSE(dropped["images"].empty());
}

TEST_CASE("report-savings from a counts file") {
    TempDir dir("savings");
    const fs::path counts = dir.path / "counts.json";
    {
        std::ofstream out(counts);
        out << R"({"format":"counts/1","rows":[
          {"name":"row1","Simple":{"retrieved":10,"total":20},
           "Medium":{"retrieved":0,"total":0},
           "Complex":{"retrieved":0,"total":0}}]})";
    }
    const RunResult result = run_cli(
        "report-savings --counts " + counts.string() + " --out " +
            (dir.path / "rep").string(),
        dir.path);
    REQUIRE(result.exit_code == 0);
    CHECK(fs::exists(dir.path / "rep" / "savings_table.txt"));
    const std::string table =
        labelprop::read_text_file(dir.path / "rep" / "savings_table.txt");
    CHECK(table.find("50.0%") != std::string::npos);
}

TEST_CASE("missing inputs fail with a clean error") {
    TempDir dir("missing");
    const RunResult result =
        run_cli("train --config " + (dir.path / "nope.json").string(), dir.path);
    CHECK(result.exit_code != 0);
    CHECK(nlohmann::json::parse(result.err).contains("error"));
}
