#pragma once

// Orchestration behind the CLI subcommands: synth -> train -> label -> eval,
// plus proposal perturbation and the savings report. Every function here is
// deterministic in the config (seeds included); wall-clock timing is only
// ever logged, never written to an output file.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "labelprop/annotations.hpp"
#include "labelprop/ensemble.hpp"
#include "labelprop/hopfield.hpp"
#include "labelprop/savings.hpp"
#include "labelprop/store.hpp"

namespace labelprop {

struct HeadShape {
    std::size_t p = 16;
    int m = 4;
    std::optional<double> beta;  // default 1/sqrt(p)
    double init_noise = 0.01;
};

struct PerturbSettings {
    double drop_rate = 0.0;
    double relabel_noise = 0.0;
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    std::filesystem::path store_path = "store.jsonl";
    std::filesystem::path heads_dir = "heads";
    std::filesystem::path output_dir = "out";
    std::vector<std::string> spaces;  // empty: every space in the store
    bool ensemble = true;
    HeadShape head;
    Hyperparams hyperparams;
    std::map<std::string, Hyperparams> per_space_hyperparams;
    PerturbSettings perturb;
    TimeModel time_model = TimeModel::defaults();
    SyntheticConfig synth;
    bool synth_seed_set = false;  // when false, synth.seed follows seed
    // Optional re-split after generation (stratified, seeded).
    std::map<std::string, double> synth_split_fractions;
};

// Precedence: flag > config file > default. Unknown keys are rejected.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config_json(const nlohmann::json& doc,
                                 const std::filesystem::path& base_dir);

// Per-purpose seeds derived from the master seed; stable across runs.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose,
                          std::string_view name);

// Ground-truth and class-agnostic proposal sets for one split of a store
// (one annotation per record id, geometry is a nominal full-crop box).
AnnotationSet annotations_from_store(const EmbeddingStore& store,
                                     const std::string& split, bool with_labels);

// Writes the store plus truth/proposal annotation sets for the validation
// split; returns a one-line summary.
std::string cmd_synth(const PipelineConfig& config);

// Trains one head per configured space (concurrently; results merged in
// space-name order), writes head files, per-epoch reports and the ensemble
// manifest; returns a summary.
std::string cmd_train(const PipelineConfig& config);

// Core of cmd_label: fills class_id/confidence on every proposal from the
// (single-head or ensemble) predictor; geometry and images pass through.
AnnotationSet label_annotations(const PipelineConfig& config,
                                const AnnotationSet& proposals,
                                const EmbeddingStore& store);

std::string cmd_label(const PipelineConfig& config,
                      const std::filesystem::path& proposals_path,
                      const std::filesystem::path& out_path);

struct EvalOutputs {
    EvalReport eval;
    SavingsReport savings;
};

EvalOutputs evaluate_annotation_sets(const AnnotationSet& labeled,
                                     const AnnotationSet& truth,
                                     const TimeModel& time_model);

std::string cmd_eval(const PipelineConfig& config,
                     const std::filesystem::path& labeled_path,
                     const std::filesystem::path& truth_path,
                     const std::filesystem::path& out_dir);

std::string cmd_perturb(const PipelineConfig& config,
                        const std::filesystem::path& in_path,
                        const std::filesystem::path& out_path);

std::string cmd_report_savings(const PipelineConfig& config,
                               const std::filesystem::path& counts_path,
                               const std::filesystem::path& out_dir);

}  // namespace labelprop
