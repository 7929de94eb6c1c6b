#include "labelprop/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "labelprop/json_io.hpp"

namespace labelprop {

namespace {

std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

MetricsBlock compute_block(const std::vector<Prediction>& preds,
                           const ClassRegistry& registry) {
    const std::size_t n = preds.size();
    const std::size_t c = registry.size();
    std::vector<std::size_t> tp(c, 0), fp(c, 0), support(c, 0);
    for (const Prediction& pred : preds) {
        if (!registry.contains(pred.truth)) {
            throw std::invalid_argument("prediction for '" + pred.record_id +
                                        "' has invalid truth class " +
                                        std::to_string(pred.truth));
        }
        if (!registry.contains(pred.predicted)) {
            throw std::invalid_argument("prediction for '" + pred.record_id +
                                        "' has invalid predicted class " +
                                        std::to_string(pred.predicted));
        }
        ++support[static_cast<std::size_t>(pred.truth)];
        if (pred.predicted == pred.truth) {
            ++tp[static_cast<std::size_t>(pred.truth)];
        } else {
            ++fp[static_cast<std::size_t>(pred.predicted)];
        }
    }

    MetricsBlock block;
    block.count = n;
    std::size_t correct = std::accumulate(tp.begin(), tp.end(), std::size_t{0});
    // Single-label closed set: every item gets exactly one prediction, so
    // micro precision, recall, F1 and accuracy are all the same division.
    block.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    block.micro_precision = block.accuracy;
    block.micro_recall = block.accuracy;
    block.micro_f1 = block.accuracy;

    double macro_p = 0.0, macro_r = 0.0, macro_f = 0.0;
    std::size_t macro_n = 0;
    for (std::size_t cls = 0; cls < c; ++cls) {
        if (support[cls] == 0) {
            block.zero_support_classes.push_back(static_cast<int>(cls));
            continue;
        }
        ClassMetrics cm;
        cm.support = support[cls];
        const std::size_t predicted_cls = tp[cls] + fp[cls];
        cm.precision = predicted_cls == 0
                           ? 0.0
                           : static_cast<double>(tp[cls]) /
                                 static_cast<double>(predicted_cls);
        cm.recall = static_cast<double>(tp[cls]) / static_cast<double>(support[cls]);
        cm.f1 = (cm.precision + cm.recall) > 0.0
                    ? 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall)
                    : 0.0;
        block.per_class[static_cast<int>(cls)] = cm;
        macro_p += cm.precision;
        macro_r += cm.recall;
        macro_f += cm.f1;
        ++macro_n;
    }
    if (macro_n > 0) {
        block.macro_precision = macro_p / static_cast<double>(macro_n);
        block.macro_recall = macro_r / static_cast<double>(macro_n);
        block.macro_f1 = macro_f / static_cast<double>(macro_n);
    }

    // Per-class AP over score-ranked lists; classes without positives are
    // excluded from mAP.
    double ap_sum = 0.0;
    std::size_t ap_n = 0;
    for (std::size_t cls = 0; cls < c; ++cls) {
        if (support[cls] == 0) continue;
        std::vector<std::pair<double, bool>> ranked;
        ranked.reserve(n);
        for (const Prediction& pred : preds) {
            if (pred.scores.scores.size() != c) {
                throw std::invalid_argument("prediction for '" + pred.record_id +
                                            "' has a score vector of length " +
                                            std::to_string(pred.scores.scores.size()) +
                                            ", expected " + std::to_string(c));
            }
            ranked.emplace_back(pred.scores.scores[cls],
                                pred.truth == static_cast<int>(cls));
        }
        const double ap = average_precision(ranked);
        block.per_class_ap[static_cast<int>(cls)] = ap;
        ap_sum += ap;
        ++ap_n;
    }
    if (ap_n > 0) block.map = ap_sum / static_cast<double>(ap_n);
    return block;
}

}  // namespace

double average_precision(const std::vector<std::pair<double, bool>>& ranked) {
    std::vector<std::size_t> idx(ranked.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return ranked[a].first > ranked[b].first;
    });
    std::size_t total_relevant = 0;
    for (const auto& [score, rel] : ranked) {
        if (rel) ++total_relevant;
    }
    if (total_relevant == 0) {
        throw std::invalid_argument("average_precision: no relevant items");
    }
    double hits = 0.0;
    double acc = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (ranked[idx[k]].second) {
            hits += 1.0;
            acc += hits / static_cast<double>(k + 1);
        }
    }
    return acc / static_cast<double>(total_relevant);
}

std::map<Complexity, std::vector<Prediction>> stratify(
    const std::vector<Prediction>& preds) {
    std::map<Complexity, std::vector<Prediction>> buckets;
    for (const Prediction& pred : preds) {
        if (!pred.complexity) {
            throw std::invalid_argument("prediction for '" + pred.record_id +
                                        "' has no complexity tag");
        }
        buckets[*pred.complexity].push_back(pred);
    }
    return buckets;
}

EvalReport evaluate(const std::vector<Prediction>& preds,
                    const ClassRegistry& registry) {
    if (preds.empty()) throw std::invalid_argument("evaluate: empty prediction list");
    EvalReport report;
    report.overall = compute_block(preds, registry);
    const bool all_tagged =
        std::all_of(preds.begin(), preds.end(),
                    [](const Prediction& p) { return p.complexity.has_value(); });
    if (all_tagged) {
        for (auto& [complexity, bucket] : stratify(preds)) {
            report.stratified[complexity] = compute_block(bucket, registry);
        }
    }
    return report;
}

namespace {

void append_block(std::string& out, const MetricsBlock& b,
                  const ClassRegistry& registry) {
    out += "{\"count\":" + std::to_string(b.count) +
           ",\"accuracy\":" + fmt_double(b.accuracy) +
           ",\"micro\":{\"precision\":" + fmt_double(b.micro_precision) +
           ",\"recall\":" + fmt_double(b.micro_recall) +
           ",\"f1\":" + fmt_double(b.micro_f1) +
           "},\"macro\":{\"precision\":" + fmt_double(b.macro_precision) +
           ",\"recall\":" + fmt_double(b.macro_recall) +
           ",\"f1\":" + fmt_double(b.macro_f1) + "},\"map\":" + fmt_double(b.map) +
           ",\"per_class\":[";
    bool first = true;
    for (const auto& [cls, cm] : b.per_class) {
        if (!first) out += ',';
        first = false;
        out += "{\"class_id\":" + std::to_string(cls) +
               ",\"name\":" + json_quote(registry.at(cls).name) +
               ",\"precision\":" + fmt_double(cm.precision) +
               ",\"recall\":" + fmt_double(cm.recall) +
               ",\"f1\":" + fmt_double(cm.f1) +
               ",\"support\":" + std::to_string(cm.support);
        auto ap_it = b.per_class_ap.find(cls);
        if (ap_it != b.per_class_ap.end()) {
            out += ",\"ap\":" + fmt_double(ap_it->second);
        }
        out += '}';
    }
    out += "],\"zero_support_classes\":[";
    for (std::size_t i = 0; i < b.zero_support_classes.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(b.zero_support_classes[i]);
    }
    out += "]}";
}

}  // namespace

std::string eval_report_json_text(const EvalReport& report,
                                  const ClassRegistry& registry) {
    std::string out = "{\"format\":\"evalreport/1\",\"overall\":";
    append_block(out, report.overall, registry);
    out += ",\"stratified\":{";
    bool first = true;
    for (const auto& [complexity, block] : report.stratified) {
        if (!first) out += ',';
        first = false;
        out += "\"" + std::string(to_string(complexity)) + "\":";
        append_block(out, block, registry);
    }
    out += "}}\n";
    return out;
}

nlohmann::json eval_report_json(const EvalReport& report,
                                const ClassRegistry& registry) {
    return nlohmann::json::parse(eval_report_json_text(report, registry));
}

std::string render_eval_table(const std::string& label,
                              const EvalReport& report) {
    std::string out;
    out += "Model                 mAP  Accuracy  Precision  Recall  F1-Score\n";
    const MetricsBlock& o = report.overall;
    char line[160];
    std::snprintf(line, sizeof(line), "%-18s  %5s  %8s  %9s  %6s  %8s\n",
                  label.c_str(), fmt3(o.map).c_str(), fmt3(o.accuracy).c_str(),
                  fmt3(o.macro_precision).c_str(), fmt3(o.macro_recall).c_str(),
                  fmt3(o.macro_f1).c_str());
    out += line;
    if (!report.stratified.empty()) {
        out += "\nmAP by complexity     S      M      C    All\n";
        auto strat_map = [&](Complexity cx) {
            auto it = report.stratified.find(cx);
            return it == report.stratified.end() ? std::string("    -")
                                                 : fmt3(it->second.map);
        };
        std::snprintf(line, sizeof(line), "%-18s  %5s  %5s  %5s  %5s\n",
                      label.c_str(), strat_map(Complexity::Simple).c_str(),
                      strat_map(Complexity::Medium).c_str(),
                      strat_map(Complexity::Complex).c_str(), fmt3(o.map).c_str());
        out += line;
    }
    return out;
}

}  // namespace labelprop
