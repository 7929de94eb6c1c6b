#include "labelprop/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <future>
#include <set>
#include <sstream>
#include <stdexcept>

#include "labelprop/json_io.hpp"
#include "labelprop/rng.hpp"

namespace labelprop {

namespace {

bool debug_log_enabled() {
    const char* env = std::getenv("LABELPROP_LOG");
    return env && std::string_view(env) == "debug";
}

void log_debug(const std::string& msg) {
    if (debug_log_enabled()) std::fprintf(stderr, "[labelprop] %s\n", msg.c_str());
}

std::string sanitize_filename(const std::string& name) {
    std::string out = name;
    for (char& c : out) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '_' || c == '-';
        if (!ok) c = '_';
    }
    return out;
}

void reject_unknown_keys(const nlohmann::json& obj, const char* context,
                         std::initializer_list<std::string_view> known) {
    for (const auto& [key, value] : obj.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw std::runtime_error(std::string("config: unknown key '") + key +
                                     "' in " + context);
        }
    }
}

Hyperparams parse_hyperparams(const nlohmann::json& doc, Hyperparams base) {
    reject_unknown_keys(doc, "hyperparams",
                        {"learning_rate", "epochs", "batch_size", "lambda_inter",
                         "lambda_intra", "optimizer", "seed"});
    if (doc.contains("learning_rate")) base.learning_rate = doc["learning_rate"].get<double>();
    if (doc.contains("epochs")) base.epochs = doc["epochs"].get<int>();
    if (doc.contains("batch_size")) base.batch_size = doc["batch_size"].get<int>();
    if (doc.contains("lambda_inter")) base.lambda_inter = doc["lambda_inter"].get<double>();
    if (doc.contains("lambda_intra")) base.lambda_intra = doc["lambda_intra"].get<double>();
    if (doc.contains("seed")) base.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("optimizer")) {
        const auto name = doc["optimizer"].get<std::string>();
        if (name == "adam") {
            base.optimizer = Optimizer::AdamLike;
        } else if (name == "sgd") {
            base.optimizer = Optimizer::PlainSGD;
        } else {
            throw std::runtime_error("config: unknown optimizer '" + name +
                                     "' (expected adam|sgd)");
        }
    }
    return base;
}

SyntheticConfig parse_synth(const nlohmann::json& doc, bool* seed_set) {
    reject_unknown_keys(doc, "synth",
                        {"seed", "num_classes", "dim", "spaces",
                         "samples_per_class_per_split", "cluster_sigma",
                         "center_scale", "confusion_pairs", "confusion_blend",
                         "split_fractions"});
    SyntheticConfig synth;
    *seed_set = doc.contains("seed");
    if (*seed_set) synth.seed = doc["seed"].get<std::uint64_t>();
    synth.num_classes = require_field(doc, "num_classes", "synth").get<int>();
    synth.dim = require_field(doc, "dim", "synth").get<std::size_t>();
    synth.spaces =
        require_field(doc, "spaces", "synth").get<std::vector<std::string>>();
    for (const auto& [split, n] :
         require_field(doc, "samples_per_class_per_split", "synth").items()) {
        synth.samples_per_class_per_split[split] = n.get<std::size_t>();
    }
    if (doc.contains("cluster_sigma")) synth.cluster_sigma = doc["cluster_sigma"].get<double>();
    if (doc.contains("center_scale")) synth.center_scale = doc["center_scale"].get<double>();
    if (doc.contains("confusion_blend")) synth.confusion_blend = doc["confusion_blend"].get<double>();
    if (doc.contains("confusion_pairs")) {
        for (const auto& [space, pairs] : doc["confusion_pairs"].items()) {
            for (const auto& pair : pairs) {
                if (!pair.is_array() || pair.size() != 2) {
                    throw std::runtime_error("config: confusion pair must be [a,b]");
                }
                synth.confusion_pairs[space].emplace_back(pair[0].get<int>(),
                                                          pair[1].get<int>());
            }
        }
    }
    return synth;
}

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::filesystem::path& p) {
    return p.is_absolute() ? p : base / p;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose,
                          std::string_view name) {
    return SplitRng(seed).split(purpose).split(name).key();
}

PipelineConfig parse_config_json(const nlohmann::json& doc,
                                 const std::filesystem::path& base_dir) {
    reject_unknown_keys(doc, "config",
                        {"seed", "paths", "spaces", "ensemble", "head",
                         "hyperparams", "hyperparams_per_space", "perturb",
                         "time_model", "synth"});
    PipelineConfig config;
    if (doc.contains("seed")) config.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("paths")) {
        const auto& paths = doc["paths"];
        reject_unknown_keys(paths, "paths", {"store", "heads_dir", "output_dir"});
        if (paths.contains("store")) {
            config.store_path = resolve(base_dir, paths["store"].get<std::string>());
        }
        if (paths.contains("heads_dir")) {
            config.heads_dir = resolve(base_dir, paths["heads_dir"].get<std::string>());
        }
        if (paths.contains("output_dir")) {
            config.output_dir = resolve(base_dir, paths["output_dir"].get<std::string>());
        }
    }
    if (doc.contains("spaces")) {
        config.spaces = doc["spaces"].get<std::vector<std::string>>();
    }
    if (doc.contains("ensemble")) config.ensemble = doc["ensemble"].get<bool>();
    if (doc.contains("head")) {
        const auto& head = doc["head"];
        reject_unknown_keys(head, "head", {"p", "m", "beta", "init_noise"});
        if (head.contains("p")) config.head.p = head["p"].get<std::size_t>();
        if (head.contains("m")) config.head.m = head["m"].get<int>();
        if (head.contains("beta") && !head["beta"].is_null()) {
            config.head.beta = head["beta"].get<double>();
        }
        if (head.contains("init_noise")) {
            config.head.init_noise = head["init_noise"].get<double>();
        }
    }
    if (doc.contains("hyperparams")) {
        config.hyperparams = parse_hyperparams(doc["hyperparams"], Hyperparams{});
    }
    if (doc.contains("hyperparams_per_space")) {
        for (const auto& [space, hp] : doc["hyperparams_per_space"].items()) {
            config.per_space_hyperparams[space] =
                parse_hyperparams(hp, config.hyperparams);
        }
    }
    if (doc.contains("perturb")) {
        const auto& perturb = doc["perturb"];
        reject_unknown_keys(perturb, "perturb", {"drop_rate", "relabel_noise"});
        if (perturb.contains("drop_rate")) {
            config.perturb.drop_rate = perturb["drop_rate"].get<double>();
        }
        if (perturb.contains("relabel_noise")) {
            config.perturb.relabel_noise = perturb["relabel_noise"].get<double>();
        }
    }
    if (doc.contains("time_model")) {
        for (const auto& [name, secs] : doc["time_model"].items()) {
            config.time_model.per_object_seconds[complexity_from_string(name)] =
                secs.get<double>();
        }
    }
    if (doc.contains("synth")) {
        config.synth = parse_synth(doc["synth"], &config.synth_seed_set);
        if (doc["synth"].contains("split_fractions")) {
            for (const auto& [split, f] : doc["synth"]["split_fractions"].items()) {
                config.synth_split_fractions[split] = f.get<double>();
            }
        }
    }
    return config;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    return parse_config_json(parse_json_file(path), path.parent_path());
}

AnnotationSet annotations_from_store(const EmbeddingStore& store,
                                     const std::string& split,
                                     bool with_labels) {
    auto split_it = store.splits.find(split);
    if (split_it == store.splits.end()) {
        throw std::runtime_error("store has no split '" + split + "'");
    }
    // One annotation per record id; class/complexity read off any space's
    // record (ids carry one class across spaces).
    std::map<std::string, const EmbeddingRecord*> by_id;
    for (const auto& [space_name, data] : store.spaces) {
        for (const auto& rec : data.records) {
            if (split_it->second.count(rec.id)) by_id.emplace(rec.id, &rec);
        }
    }
    AnnotationSet set;
    std::vector<ClassInfo> classes = store.registry.classes();
    set.categories = ClassRegistry::from_classes(std::move(classes));
    for (const auto& [id, rec] : by_id) {
        ImageEntry img;
        img.id = "img_" + id;
        img.width = 224;
        img.height = 224;
        set.images.push_back(img);
        Annotation ann;
        ann.id = id;
        ann.image_id = img.id;
        ann.geometry = nlohmann::ordered_json::parse(R"({"bbox":[0,0,224,224]})");
        if (with_labels && rec->class_id) {
            ann.class_id = rec->class_id;
            ann.complexity = store.registry.at(*rec->class_id).complexity;
        }
        set.annotations.push_back(std::move(ann));
    }
    set.validate();
    return set;
}

std::string cmd_synth(const PipelineConfig& config) {
    SyntheticConfig synth = config.synth;
    if (!config.synth_seed_set) synth.seed = config.seed;
    EmbeddingStore store = synth_generate(synth);
    if (!config.synth_split_fractions.empty()) {
        store = split_assign(store, config.synth_split_fractions,
                             derive_seed(config.seed, "synth", "split"));
    }
    save_store(store, config.store_path);
    const AnnotationSet truth = annotations_from_store(store, "validation", true);
    save_annotations(truth, config.output_dir / "truth.json");
    AnnotationSet proposals = annotations_from_store(store, "validation", false);
    save_annotations(proposals, config.output_dir / "proposals.json");

    const std::uint64_t checksum =
        SplitRng::fnv1a64(read_text_file(config.store_path));
    std::size_t records = 0;
    for (const auto& [name, data] : store.spaces) records += data.records.size();
    std::ostringstream summary;
    summary << "store " << config.store_path.string() << ": "
            << store.spaces.size() << " spaces, " << store.registry.size()
            << " classes, " << records << " records, checksum "
            << std::hex << checksum;
    return summary.str();
}

namespace {

std::vector<std::string> resolve_spaces(const PipelineConfig& config,
                                        const EmbeddingStore& store) {
    std::vector<std::string> spaces = config.spaces;
    if (spaces.empty()) {
        for (const auto& [name, data] : store.spaces) spaces.push_back(name);
    } else {
        for (const auto& name : spaces) store.space(name);  // existence check
        std::sort(spaces.begin(), spaces.end());
    }
    return spaces;
}

std::string train_report_text(const std::string& space, const TrainReport& report) {
    std::string out = "{\"format\":\"trainreport/1\",\"space\":" + json_quote(space) +
                      ",\"epochs\":[";
    for (std::size_t i = 0; i < report.epochs.size(); ++i) {
        if (i) out += ',';
        const EpochStats& e = report.epochs[i];
        out += "{\"total\":" + fmt_double(e.total) + ",\"mse\":" + fmt_double(e.mse) +
               ",\"intra\":" + fmt_double(e.intra) +
               ",\"inter\":" + fmt_double(e.inter) +
               ",\"train_accuracy\":" + fmt_double(e.train_accuracy) + "}";
    }
    out += "]}\n";
    return out;
}

}  // namespace

std::string cmd_train(const PipelineConfig& config) {
    const EmbeddingStore store = load_store(config.store_path);
    const std::vector<std::string> spaces = resolve_spaces(config, store);
    if (spaces.empty()) throw std::runtime_error("no spaces to train on");

    struct SpaceResult {
        HopfieldHead head;
        TrainReport report;
    };
    auto train_one = [&](const std::string& space) {
        HopfieldHead head =
            init_head(store, space, config.head.p, config.head.m, config.head.beta,
                      derive_seed(config.seed, "init", space), config.head.init_noise);
        Hyperparams hp = config.hyperparams;
        auto override_it = config.per_space_hyperparams.find(space);
        if (override_it != config.per_space_hyperparams.end()) {
            hp = override_it->second;
        }
        hp.seed = derive_seed(config.seed, "train", space);
        auto [trained, report] = train_head(std::move(head), store, "train", hp);
        return SpaceResult{std::move(trained), std::move(report)};
    };

    // Heads are independent; fan out and merge in space-name order.
    std::vector<std::future<SpaceResult>> futures;
    futures.reserve(spaces.size());
    for (const auto& space : spaces) {
        futures.push_back(std::async(std::launch::async, train_one, space));
    }
    std::filesystem::create_directories(config.heads_dir);
    std::ostringstream summary;
    std::vector<std::string> head_files;
    for (std::size_t i = 0; i < spaces.size(); ++i) {
        SpaceResult result = futures[i].get();
        const std::string stem = sanitize_filename(spaces[i]);
        const std::string head_file = "head_" + stem + ".json";
        save_head(result.head, config.heads_dir / head_file,
                  store.registry.checksum());
        write_text_file(config.heads_dir / ("train_report_" + stem + ".json"),
                        train_report_text(spaces[i], result.report));
        head_files.push_back(head_file);
        log_debug("trained " + spaces[i] + " in " +
                  std::to_string(result.report.wall_seconds) + "s");
        if (i) summary << ", ";
        summary << spaces[i] << " acc=" << fmt_double(
            result.report.epochs.back().train_accuracy);
    }
    save_ensemble_manifest(head_files, store.registry,
                           config.heads_dir / "ensemble.json");
    return summary.str();
}

namespace {

EnsemblePredictor load_heads(const PipelineConfig& config,
                             const EmbeddingStore& store) {
    EnsemblePredictor ens;
    ens.registry = store.registry;
    if (config.spaces.empty()) {
        return load_ensemble(config.heads_dir / "ensemble.json", store.registry);
    }
    std::vector<std::string> spaces = config.spaces;
    std::sort(spaces.begin(), spaces.end());
    for (const auto& space : spaces) {
        const auto path =
            config.heads_dir / ("head_" + sanitize_filename(space) + ".json");
        std::optional<std::uint64_t> checksum;
        ens.heads.push_back(load_head(path, &checksum));
        if (checksum && *checksum != store.registry.checksum()) {
            throw std::runtime_error(path.string() +
                                     ": registry checksum mismatch with store");
        }
    }
    ens.validate();
    return ens;
}

}  // namespace

AnnotationSet label_annotations(const PipelineConfig& config,
                                const AnnotationSet& proposals,
                                const EmbeddingStore& store) {
    proposals.validate();
    if (proposals.categories.checksum() != store.registry.checksum()) {
        throw std::runtime_error(
            "proposal categories do not match the store registry");
    }
    EnsemblePredictor ens = load_heads(config, store);
    if (!config.ensemble && ens.heads.size() != 1) {
        throw std::runtime_error(
            "ensemble disabled but " + std::to_string(ens.heads.size()) +
            " heads configured; pick exactly one space");
    }

    // Per-space id -> record lookup for the spaces the predictor needs.
    std::map<std::string, std::map<std::string, const EmbeddingRecord*>> lookup;
    for (const HopfieldHead& head : ens.heads) {
        auto& by_id = lookup[head.space];
        for (const auto& rec : store.space(head.space).records) {
            by_id.emplace(rec.id, &rec);
        }
    }

    AnnotationSet out = proposals;
    for (Annotation& ann : out.annotations) {
        std::map<std::string, std::vector<double>> queries;
        for (const HopfieldHead& head : ens.heads) {
            const auto& by_id = lookup[head.space];
            auto it = by_id.find(ann.id);
            if (it == by_id.end()) {
                throw std::runtime_error("proposal '" + ann.id +
                                         "' has no embedding in space '" +
                                         head.space + "'");
            }
            queries[head.space] = it->second->vector;
        }
        const ScoreVector sv = ensemble_predict(ens, queries);
        ann.class_id = sv.predicted;
        ann.confidence = sv.scores[static_cast<std::size_t>(sv.predicted)];
    }
    return out;
}

std::string cmd_label(const PipelineConfig& config,
                      const std::filesystem::path& proposals_path,
                      const std::filesystem::path& out_path) {
    const EmbeddingStore store = load_store(config.store_path);
    const AnnotationSet proposals = load_annotations(proposals_path);
    const AnnotationSet labeled = label_annotations(config, proposals, store);
    save_annotations(labeled, out_path);
    return "labeled " + std::to_string(labeled.annotations.size()) +
           " proposals -> " + out_path.string();
}

EvalOutputs evaluate_annotation_sets(const AnnotationSet& labeled,
                                     const AnnotationSet& truth,
                                     const TimeModel& time_model) {
    labeled.validate();
    truth.validate();
    if (labeled.categories.checksum() != truth.categories.checksum()) {
        throw std::runtime_error(
            "labeled and truth sets disagree on categories");
    }
    std::map<std::string, const Annotation*> truth_by_id;
    for (const Annotation& ann : truth.annotations) truth_by_id.emplace(ann.id, &ann);

    const std::size_t c = truth.categories.size();
    std::vector<Prediction> preds;
    std::vector<std::string> missing;
    for (const Annotation& ann : labeled.annotations) {
        auto it = truth_by_id.find(ann.id);
        if (it == truth_by_id.end()) {
            missing.push_back(ann.id);
            continue;
        }
        if (!it->second->class_id) {
            throw std::runtime_error("truth annotation '" + ann.id +
                                     "' has no class label");
        }
        if (!ann.class_id) {
            throw std::runtime_error("labeled annotation '" + ann.id +
                                     "' has no class label");
        }
        Prediction pred;
        pred.record_id = ann.id;
        pred.truth = *it->second->class_id;
        pred.complexity = truth.categories.at(pred.truth).complexity;

        // Degenerate score vector: confidence mass on the predicted class,
        // the remainder spread evenly. Keeps predicted == argmax(scores).
        const double conf = ann.confidence.value_or(1.0);
        std::vector<double> scores(c, c > 1 ? (1.0 - conf) / static_cast<double>(c - 1)
                                            : 0.0);
        scores[static_cast<std::size_t>(*ann.class_id)] = conf;
        ScoreVector sv = ScoreVector::from_scores(std::move(scores));
        if (sv.predicted != *ann.class_id) {
            throw std::runtime_error(
                "annotation '" + ann.id + "': confidence " + fmt_double(conf) +
                " is too low to rank its own class first");
        }
        pred.scores = sv;
        pred.predicted = *ann.class_id;
        preds.push_back(std::move(pred));
    }
    if (!missing.empty()) {
        std::string msg = "labeled annotations missing from truth:";
        for (std::size_t i = 0; i < missing.size() && i < 5; ++i) {
            msg += " '" + missing[i] + "'";
        }
        if (missing.size() > 5) {
            msg += " (+" + std::to_string(missing.size() - 5) + " more)";
        }
        throw std::runtime_error(msg);
    }
    if (preds.empty()) throw std::runtime_error("no annotations to evaluate");

    EvalOutputs outputs;
    outputs.eval = evaluate(preds, truth.categories);
    outputs.savings = compute_savings(count_retrieved(preds), time_model);
    return outputs;
}

std::string cmd_eval(const PipelineConfig& config,
                     const std::filesystem::path& labeled_path,
                     const std::filesystem::path& truth_path,
                     const std::filesystem::path& out_dir) {
    const AnnotationSet labeled = load_annotations(labeled_path);
    const AnnotationSet truth = load_annotations(truth_path);
    const EvalOutputs outputs =
        evaluate_annotation_sets(labeled, truth, config.time_model);
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / "eval_report.json",
                    eval_report_json_text(outputs.eval, truth.categories));
    write_text_file(out_dir / "eval_report.txt",
                    render_eval_table("pipeline", outputs.eval));
    write_text_file(out_dir / "savings.json", savings_json_text(outputs.savings));
    write_text_file(out_dir / "savings.txt", render_savings(outputs.savings));
    std::ostringstream summary;
    summary << "accuracy=" << fmt_double(outputs.eval.overall.accuracy)
            << " map=" << fmt_double(outputs.eval.overall.map)
            << " percent_saved=" << fmt_double(outputs.savings.percent_saved);
    return summary.str();
}

std::string cmd_perturb(const PipelineConfig& config,
                        const std::filesystem::path& in_path,
                        const std::filesystem::path& out_path) {
    AnnotationSet set = load_annotations(in_path);
    const std::size_t before = set.annotations.size();
    set = perturb_proposals(set, config.perturb.drop_rate,
                            derive_seed(config.seed, "perturb", "drop"));
    if (config.perturb.relabel_noise > 0.0) {
        set = perturb_relabel(set, config.perturb.relabel_noise,
                              derive_seed(config.seed, "perturb", "relabel"));
    }
    save_annotations(set, out_path);
    return "kept " + std::to_string(set.annotations.size()) + " of " +
           std::to_string(before) + " annotations -> " + out_path.string();
}

std::string cmd_report_savings(const PipelineConfig& config,
                               const std::filesystem::path& counts_path,
                               const std::filesystem::path& out_dir) {
    const auto rows = load_counts_file(counts_path);
    std::vector<std::pair<std::string, SavingsReport>> reports;
    for (const auto& [name, counts] : rows) {
        reports.emplace_back(name, compute_savings(counts, config.time_model));
    }
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / "savings_table.txt", render_savings_table(reports));
    std::string json = "{\"format\":\"savings-rows/1\",\"rows\":[";
    for (std::size_t i = 0; i < reports.size(); ++i) {
        if (i) json += ',';
        std::string row = savings_json_text(reports[i].second);
        row.pop_back();  // newline
        // Splice the name into the row object.
        json += "{\"name\":" + json_quote(reports[i].first) + "," +
                row.substr(1);
    }
    json += "]}\n";
    write_text_file(out_dir / "savings_rows.json", json);
    return std::to_string(reports.size()) + " rows -> " +
           (out_dir / "savings_table.txt").string();
}

}  // namespace labelprop
