#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "labelprop/json_io.hpp"
#include "labelprop/kernels.hpp"
#include "labelprop/pipeline.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> spaces;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "Pipeline config file (JSON)");
    cmd->add_option("--seed", args.seed, "Override the master seed");
    cmd->add_option("--spaces", args.spaces,
                    "Override the embedding spaces to use")
        ->delimiter(',');
}

labelprop::PipelineConfig make_config(const CommonArgs& args) {
    labelprop::PipelineConfig config;
    if (!args.config_path.empty()) {
        config = labelprop::load_config(args.config_path);
    }
    // Precedence: flag > config > default.
    if (args.seed) config.seed = *args.seed;
    if (!args.spaces.empty()) config.spaces = args.spaces;
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"labelprop — embedding-space label propagation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "labelprop 1.0");

    CommonArgs synth_args, train_args, label_args, eval_args, perturb_args,
        savings_args;
    std::string label_proposals, label_out;
    std::string eval_labeled, eval_truth, eval_out;
    std::string perturb_in, perturb_out;
    std::optional<double> perturb_drop, perturb_relabel;
    std::string savings_counts, savings_out;
    std::string synth_out, train_out;

    CLI::App* synth = app.add_subcommand(
        "synth", "Generate a synthetic embedding store plus truth/proposal sets");
    add_common(synth, synth_args);
    synth->add_option("--out", synth_out, "Store output path (overrides paths.store)");

    CLI::App* train = app.add_subcommand(
        "train", "Train one Hopfield head per embedding space");
    add_common(train, train_args);
    train->add_option("--out", train_out,
                      "Directory for head files (overrides paths.heads_dir)");

    CLI::App* label =
        app.add_subcommand("label", "Assign classes to proposal annotations");
    add_common(label, label_args);
    label->add_option("--proposals", label_proposals, "Proposal annotation file")
        ->required();
    label->add_option("--out", label_out, "Labeled annotation output path");

    CLI::App* eval = app.add_subcommand(
        "eval", "Score a labeled set against ground truth; writes metric and "
                "savings reports");
    add_common(eval, eval_args);
    eval->add_option("--labeled", eval_labeled, "Labeled annotation file")->required();
    eval->add_option("--truth", eval_truth, "Ground-truth annotation file")->required();
    eval->add_option("--out", eval_out, "Report output directory");

    CLI::App* perturb = app.add_subcommand(
        "perturb", "Drop and/or relabel a fraction of annotations");
    add_common(perturb, perturb_args);
    perturb->add_option("--in", perturb_in, "Input annotation file")->required();
    perturb->add_option("--out", perturb_out, "Output annotation file")->required();
    perturb->add_option("--drop-rate", perturb_drop, "Fraction of proposals to drop");
    perturb->add_option("--relabel-noise", perturb_relabel,
                        "Fraction of labels to scramble");

    CLI::App* savings = app.add_subcommand(
        "report-savings", "Annotation-time savings from retrieved/total counts");
    add_common(savings, savings_args);
    savings->add_option("--counts", savings_counts, "Counts file (counts/1 JSON)")
        ->required();
    savings->add_option("--out", savings_out, "Report output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        std::string summary;
        if (synth->parsed()) {
            auto config = make_config(synth_args);
            if (!synth_out.empty()) config.store_path = synth_out;
            summary = labelprop::cmd_synth(config);
        } else if (train->parsed()) {
            auto config = make_config(train_args);
            if (!train_out.empty()) config.heads_dir = train_out;
            summary = labelprop::cmd_train(config);
        } else if (label->parsed()) {
            auto config = make_config(label_args);
            const auto out = label_out.empty()
                                 ? (config.output_dir / "labeled.json").string()
                                 : label_out;
            summary = labelprop::cmd_label(config, label_proposals, out);
        } else if (eval->parsed()) {
            auto config = make_config(eval_args);
            const auto out = eval_out.empty() ? config.output_dir.string() : eval_out;
            summary = labelprop::cmd_eval(config, eval_labeled, eval_truth, out);
        } else if (perturb->parsed()) {
            auto config = make_config(perturb_args);
            if (perturb_drop) config.perturb.drop_rate = *perturb_drop;
            if (perturb_relabel) config.perturb.relabel_noise = *perturb_relabel;
            summary = labelprop::cmd_perturb(config, perturb_in, perturb_out);
        } else if (savings->parsed()) {
            auto config = make_config(savings_args);
            const auto out =
                savings_out.empty() ? config.output_dir.string() : savings_out;
            summary = labelprop::cmd_report_savings(config, savings_counts, out);
        }
        std::cout << summary << "\n";
    } catch (const std::exception& e) {
        // One machine-parsable line on the diagnostic stream.
        std::fprintf(stderr, "%s\n",
                     std::string("{\"error\":" + labelprop::json_quote(e.what()) + "}")
                         .c_str());
        return 1;
    }
    return 0;
}
