#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "labelprop/json_io.hpp"
#include "labelprop/pipeline.hpp"

using namespace labelprop;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const char* tag) {
        path = fs::temp_directory_path() / (std::string("lp_pipe_") + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

PipelineConfig demo_config(const fs::path& dir, std::uint64_t seed = 5) {
    PipelineConfig config;
    config.seed = seed;
    config.store_path = dir / "store.jsonl";
    config.heads_dir = dir / "heads";
    config.output_dir = dir / "out";
    config.head.p = 8;
    config.head.m = 2;
    config.hyperparams.epochs = 10;
    config.synth.num_classes = 5;
    config.synth.dim = 16;
    config.synth.spaces = {"space_a", "space_b"};
    config.synth.samples_per_class_per_split = {
        {"representative", 3}, {"train", 15}, {"validation", 8}};
    config.synth.cluster_sigma = 0.3;
    config.synth.center_scale = 1.0;
    return config;
}

void run_chain(const PipelineConfig& config) {
    cmd_synth(config);
    cmd_train(config);
    cmd_label(config, config.output_dir / "proposals.json",
              config.output_dir / "labeled.json");
    cmd_eval(config, config.output_dir / "labeled.json",
             config.output_dir / "truth.json", config.output_dir);
}

}  // namespace

TEST_CASE("config files parse with overrides and reject unknown keys") {
    TempDir dir("config");
    const fs::path path = dir.path / "config.json";
    {
        std::ofstream out(path);
        out << R"({
          "seed": 11,
          "paths": {"store": "s.jsonl", "heads_dir": "h", "output_dir": "o"},
          "spaces": ["x"],
          "ensemble": false,
          "head": {"p": 4, "m": 3, "beta": 0.7},
          "hyperparams": {"learning_rate": 0.01, "epochs": 7, "optimizer": "sgd"},
          "hyperparams_per_space": {"x": {"epochs": 9}},
          "perturb": {"drop_rate": 0.25},
          "time_model": {"Simple": 1.0, "Medium": 2.0, "Complex": 3.0}
        })";
    }
    const PipelineConfig config = load_config(path);
    CHECK(config.seed == 11);
    CHECK(config.store_path == dir.path / "s.jsonl");
    CHECK(config.spaces == std::vector<std::string>{"x"});
    CHECK_FALSE(config.ensemble);
    CHECK(config.head.p == 4);
    CHECK(config.head.beta == 0.7);
    CHECK(config.hyperparams.epochs == 7);
    CHECK(config.hyperparams.optimizer == Optimizer::PlainSGD);
    CHECK(config.per_space_hyperparams.at("x").epochs == 9);
    CHECK(config.per_space_hyperparams.at("x").learning_rate == 0.01);
    CHECK(config.perturb.drop_rate == 0.25);
    CHECK(config.time_model.per_object_seconds.at(Complexity::Medium) == 2.0);

    {
        std::ofstream out(path);
        out << R"({"sede": 1})";
    }
    CHECK_THROWS_WITH_AS(load_config(path), doctest::Contains("unknown key"),
                         std::runtime_error);
}

TEST_CASE("synth -> train -> label -> eval end to end") {
    TempDir dir("chain");
    const PipelineConfig config = demo_config(dir.path);

    const std::string synth_summary = cmd_synth(config);
    CHECK(synth_summary.find("5 classes") != std::string::npos);
    CHECK(fs::exists(config.store_path));
    CHECK(fs::exists(config.output_dir / "truth.json"));
    CHECK(fs::exists(config.output_dir / "proposals.json"));

    cmd_train(config);
    CHECK(fs::exists(config.heads_dir / "head_space_a.json"));
    CHECK(fs::exists(config.heads_dir / "train_report_space_b.json"));
    CHECK(fs::exists(config.heads_dir / "ensemble.json"));
    // Every head file carries the same registry checksum.
    std::optional<std::uint64_t> sum_a, sum_b;
    load_head(config.heads_dir / "head_space_a.json", &sum_a);
    load_head(config.heads_dir / "head_space_b.json", &sum_b);
    REQUIRE(sum_a.has_value());
    CHECK(sum_a == sum_b);

    cmd_label(config, config.output_dir / "proposals.json",
              config.output_dir / "labeled.json");
    const AnnotationSet labeled =
        load_annotations(config.output_dir / "labeled.json");
    const AnnotationSet proposals =
        load_annotations(config.output_dir / "proposals.json");
    REQUIRE(labeled.annotations.size() == proposals.annotations.size());
    const std::size_t c = labeled.categories.size();
    for (std::size_t i = 0; i < labeled.annotations.size(); ++i) {
        REQUIRE(labeled.annotations[i].class_id.has_value());
        REQUIRE(labeled.annotations[i].confidence.has_value());
        CHECK(*labeled.annotations[i].confidence > 1.0 / static_cast<double>(c));
        // Geometry and image sections pass through byte-identically.
        CHECK(labeled.annotations[i].geometry.dump() ==
              proposals.annotations[i].geometry.dump());
        CHECK(labeled.images[i].id == proposals.images[i].id);
    }

    const std::string eval_summary =
        cmd_eval(config, config.output_dir / "labeled.json",
                 config.output_dir / "truth.json", config.output_dir);
    CHECK(fs::exists(config.output_dir / "eval_report.json"));
    CHECK(fs::exists(config.output_dir / "savings.txt"));
    const auto report = parse_json_file(config.output_dir / "eval_report.json");
    // Clean, separable data labels essentially perfectly.
    CHECK(report["overall"]["accuracy"].get<double>() >= 0.95);
    CHECK(eval_summary.find("accuracy=") != std::string::npos);
}

TEST_CASE("evaluating the truth against itself is perfect") {
    TempDir dir("self");
    const PipelineConfig config = demo_config(dir.path);
    cmd_synth(config);
    AnnotationSet truth = load_annotations(config.output_dir / "truth.json");
    for (auto& ann : truth.annotations) ann.confidence = 1.0;
    save_annotations(truth, config.output_dir / "self.json");
    cmd_eval(config, config.output_dir / "self.json",
             config.output_dir / "truth.json", config.output_dir);
    const auto report = parse_json_file(config.output_dir / "eval_report.json");
    CHECK(report["overall"]["accuracy"].get<double>() == 1.0);
    const auto savings = parse_json_file(config.output_dir / "savings.json");
    CHECK(savings["percent_saved"].get<double>() == 100.0);
}

TEST_CASE("representative crops self-retrieve after training") {
    TempDir dir("selfret");
    const PipelineConfig config = demo_config(dir.path);
    const std::string summary = cmd_synth(config);
    (void)summary;
    cmd_train(config);
    const EmbeddingStore store = load_store(config.store_path);
    const AnnotationSet reps = annotations_from_store(store, "representative", false);
    save_annotations(reps, config.output_dir / "rep_proposals.json");
    cmd_label(config, config.output_dir / "rep_proposals.json",
              config.output_dir / "rep_labeled.json");
    const AnnotationSet labeled =
        load_annotations(config.output_dir / "rep_labeled.json");
    const AnnotationSet rep_truth = annotations_from_store(store, "representative", true);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labeled.annotations.size(); ++i) {
        if (labeled.annotations[i].class_id == rep_truth.annotations[i].class_id) {
            ++correct;
        }
        CHECK(*labeled.annotations[i].confidence > 1.0 / 5.0);
    }
    CHECK(correct == labeled.annotations.size());
}

TEST_CASE("single-head config equals an ensemble of one") {
    TempDir dir("single");
    PipelineConfig config = demo_config(dir.path);
    cmd_synth(config);
    cmd_train(config);
    config.spaces = {"space_a"};
    config.ensemble = false;
    cmd_label(config, config.output_dir / "proposals.json",
              config.output_dir / "labeled_single.json");
    config.ensemble = true;
    cmd_label(config, config.output_dir / "proposals.json",
              config.output_dir / "labeled_ensemble1.json");
    CHECK(read_text_file(config.output_dir / "labeled_single.json") ==
          read_text_file(config.output_dir / "labeled_ensemble1.json"));
}

TEST_CASE("ensemble disabled with several spaces is an error") {
    TempDir dir("noens");
    PipelineConfig config = demo_config(dir.path);
    cmd_synth(config);
    cmd_train(config);
    config.ensemble = false;
    CHECK_THROWS_WITH_AS(cmd_label(config, config.output_dir / "proposals.json",
                                   config.output_dir / "x.json"),
                         doctest::Contains("exactly one space"), std::runtime_error);
}

TEST_CASE("missing embeddings are reported by proposal id") {
    TempDir dir("missing");
    const PipelineConfig config = demo_config(dir.path);
    cmd_synth(config);
    cmd_train(config);
    AnnotationSet proposals =
        load_annotations(config.output_dir / "proposals.json");
    Annotation orphan = proposals.annotations[0];
    orphan.id = "orphan_1";
    proposals.annotations.push_back(orphan);
    save_annotations(proposals, config.output_dir / "orphaned.json");
    CHECK_THROWS_WITH_AS(cmd_label(config, config.output_dir / "orphaned.json",
                                   config.output_dir / "x.json"),
                         doctest::Contains("orphan_1"), std::runtime_error);
}

TEST_CASE("eval reports ids missing from the truth set") {
    TempDir dir("join");
    const PipelineConfig config = demo_config(dir.path);
    cmd_synth(config);
    AnnotationSet truth = load_annotations(config.output_dir / "truth.json");
    AnnotationSet labeled = truth;
    Annotation extra = labeled.annotations[0];
    extra.id = "extra_ann";
    labeled.annotations.push_back(extra);
    save_annotations(labeled, config.output_dir / "labeled_extra.json");
    CHECK_THROWS_WITH_AS(cmd_eval(config, config.output_dir / "labeled_extra.json",
                                  config.output_dir / "truth.json",
                                  config.output_dir),
                         doctest::Contains("extra_ann"), std::runtime_error);
}

TEST_CASE("empty proposal sets label to empty output") {
    TempDir dir("empty");
    const PipelineConfig config = demo_config(dir.path);
    cmd_synth(config);
    cmd_train(config);
    AnnotationSet proposals =
        load_annotations(config.output_dir / "proposals.json");
    proposals.annotations.clear();
    save_annotations(proposals, config.output_dir / "none.json");
    cmd_label(config, config.output_dir / "none.json",
              config.output_dir / "none_labeled.json");
    CHECK(load_annotations(config.output_dir / "none_labeled.json")
              .annotations.empty());
}

TEST_CASE("the whole chain is deterministic") {
    TempDir dir_a("det_a");
    TempDir dir_b("det_b");
    run_chain(demo_config(dir_a.path, 12));
    run_chain(demo_config(dir_b.path, 12));
    for (const char* rel :
         {"store.jsonl", "heads/head_space_a.json", "heads/head_space_b.json",
          "heads/train_report_space_a.json", "heads/ensemble.json",
          "out/truth.json", "out/proposals.json", "out/labeled.json",
          "out/eval_report.json", "out/savings.json"}) {
        CHECK(read_text_file(dir_a.path / rel) == read_text_file(dir_b.path / rel));
    }
}

TEST_CASE("drop-rate sweep never increases retrieved totals") {
    TempDir dir("sweep");
    PipelineConfig config = demo_config(dir.path);
    cmd_synth(config);
    cmd_train(config);
    std::vector<double> retrieved_totals;
    for (const double rate : {0.0, 0.25, 0.5}) {
        config.perturb.drop_rate = rate;
        const auto tag = std::to_string(static_cast<int>(rate * 100));
        cmd_perturb(config, config.output_dir / "proposals.json",
                    config.output_dir / ("p" + tag + ".json"));
        cmd_label(config, config.output_dir / ("p" + tag + ".json"),
                  config.output_dir / ("l" + tag + ".json"));
        cmd_eval(config, config.output_dir / ("l" + tag + ".json"),
                 config.output_dir / "truth.json", config.output_dir / ("e" + tag));
        const auto savings =
            parse_json_file(config.output_dir / ("e" + tag) / "savings.json");
        retrieved_totals.push_back(savings["total_saved_seconds"].get<double>());
    }
    CHECK(retrieved_totals[0] >= retrieved_totals[1]);
    CHECK(retrieved_totals[1] >= retrieved_totals[2]);
    CHECK(retrieved_totals[2] > 0.0);
}

TEST_CASE("report-savings renders a counts file") {
    TempDir dir("counts");
    PipelineConfig config = demo_config(dir.path);
    const fs::path counts = dir.path / "counts.json";
    {
        std::ofstream out(counts);
        out << R"({"format":"counts/1","rows":[
          {"name":"demo","Simple":{"retrieved":2850,"total":4065},
           "Medium":{"retrieved":2425,"total":3203},
           "Complex":{"retrieved":179,"total":732}}]})";
    }
    cmd_report_savings(config, counts, config.output_dir);
    const std::string table =
        read_text_file(config.output_dir / "savings_table.txt");
    CHECK(table.find("demo") != std::string::npos);
    CHECK(table.find("67.5%") != std::string::npos);
    CHECK(fs::exists(config.output_dir / "savings_rows.json"));
}
