#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "labelprop/registry.hpp"
#include "labelprop/scores.hpp"

#include <json.hpp>

namespace labelprop {

struct Prediction {
    std::string record_id;
    ScoreVector scores;
    int predicted = 0;
    int truth = 0;
    std::optional<Complexity> complexity;
};

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

// One full family of metrics (used for the overall set and per stratum).
struct MetricsBlock {
    std::size_t count = 0;
    double accuracy = 0.0;
    // Micro averages; in closed-set single-label evaluation these all equal
    // accuracy by construction.
    double micro_precision = 0.0;
    double micro_recall = 0.0;
    double micro_f1 = 0.0;
    // Macro averages over classes with support >= 1.
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    std::map<int, ClassMetrics> per_class;
    std::vector<int> zero_support_classes;  // excluded from macro means
    std::map<int, double> per_class_ap;     // classes with >= 1 positive
    double map = 0.0;
};

struct EvalReport {
    MetricsBlock overall;
    std::map<Complexity, MetricsBlock> stratified;  // only when all preds tagged
};

// All-point average precision over a ranked list: sort by score descending
// (stable on ties), AP = sum_k precision@k * rel_k / (#relevant).
// Throws if no item is relevant.
double average_precision(const std::vector<std::pair<double, bool>>& ranked);

std::map<Complexity, std::vector<Prediction>> stratify(
    const std::vector<Prediction>& preds);

EvalReport evaluate(const std::vector<Prediction>& preds,
                    const ClassRegistry& registry);

nlohmann::json eval_report_json(const EvalReport& report,
                                const ClassRegistry& registry);
// Deterministic serialization of eval_report_json (17-digit numbers).
std::string eval_report_json_text(const EvalReport& report,
                                  const ClassRegistry& registry);
// Plain-text table: one metrics row plus a Simple/Medium/Complex/All block.
std::string render_eval_table(const std::string& label, const EvalReport& report);

}  // namespace labelprop
