#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "labelprop/metrics.hpp"
#include "labelprop/registry.hpp"

namespace labelprop {

// Measured per-object annotation cost by shape complexity, in seconds.
struct TimeModel {
    std::map<Complexity, double> per_object_seconds;

    static TimeModel defaults() {
        return TimeModel{{{Complexity::Simple, 2.27},
                          {Complexity::Medium, 2.44},
                          {Complexity::Complex, 2.82}}};
    }
    void validate() const;
};

struct StratumCounts {
    std::size_t retrieved = 0;           // correctly auto-labeled objects
    std::size_t ground_truth_total = 0;  // all objects in the stratum
};

struct RetrievalCounts {
    std::map<Complexity, StratumCounts> per;
    void validate() const;
};

struct SavingsRow {
    double saved_seconds = 0.0;
    double gt_seconds = 0.0;
};

struct SavingsReport {
    std::map<Complexity, SavingsRow> per;
    double total_saved_seconds = 0.0;
    double total_gt_seconds = 0.0;
    double percent_saved = 0.0;  // 100 * saved / gt, 0 when gt == 0
};

// retrieved = correct predictions per complexity; totals over all truths.
RetrievalCounts count_retrieved(const std::vector<Prediction>& preds);

SavingsReport compute_savings(const RetrievalCounts& counts, const TimeModel& tm);

// H:MM:SS with fractional seconds truncated toward zero.
std::string format_hms(double seconds);

// Columns: Simple, Medium, Complex, Total, % Saved; saved cells carry the
// ground-truth time in parentheses.
std::string render_savings(const SavingsReport& report);
std::string render_savings_table(
    const std::vector<std::pair<std::string, SavingsReport>>& rows);

std::string savings_json_text(const SavingsReport& report);

// Counts file ("counts/1"): named rows of per-complexity retrieved/total.
std::vector<std::pair<std::string, RetrievalCounts>> load_counts_file(
    const std::filesystem::path& path);

}  // namespace labelprop
