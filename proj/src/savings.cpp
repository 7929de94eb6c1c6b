#include "labelprop/savings.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "labelprop/json_io.hpp"

namespace labelprop {

void TimeModel::validate() const {
    for (Complexity cx : kAllComplexities) {
        auto it = per_object_seconds.find(cx);
        if (it == per_object_seconds.end() || !(it->second > 0.0)) {
            throw std::invalid_argument(
                "time model needs a positive per-object time for " +
                std::string(to_string(cx)));
        }
    }
}

void RetrievalCounts::validate() const {
    for (const auto& [cx, counts] : per) {
        if (counts.retrieved > counts.ground_truth_total) {
            throw std::invalid_argument(
                "retrieved count exceeds ground truth total for " +
                std::string(to_string(cx)));
        }
    }
}

RetrievalCounts count_retrieved(const std::vector<Prediction>& preds) {
    RetrievalCounts counts;
    for (Complexity cx : kAllComplexities) counts.per[cx];
    for (const Prediction& pred : preds) {
        if (!pred.complexity) {
            throw std::invalid_argument("prediction for '" + pred.record_id +
                                        "' has no complexity tag");
        }
        StratumCounts& sc = counts.per[*pred.complexity];
        ++sc.ground_truth_total;
        if (pred.predicted == pred.truth) ++sc.retrieved;
    }
    return counts;
}

SavingsReport compute_savings(const RetrievalCounts& counts, const TimeModel& tm) {
    counts.validate();
    tm.validate();
    SavingsReport report;
    for (Complexity cx : kAllComplexities) {
        const auto it = counts.per.find(cx);
        const StratumCounts sc = it == counts.per.end() ? StratumCounts{} : it->second;
        const double per_object = tm.per_object_seconds.at(cx);
        SavingsRow row;
        row.saved_seconds = static_cast<double>(sc.retrieved) * per_object;
        row.gt_seconds = static_cast<double>(sc.ground_truth_total) * per_object;
        report.total_saved_seconds += row.saved_seconds;
        report.total_gt_seconds += row.gt_seconds;
        report.per[cx] = row;
    }
    report.percent_saved =
        report.total_gt_seconds > 0.0
            ? 100.0 * report.total_saved_seconds / report.total_gt_seconds
            : 0.0;
    return report;
}

std::string format_hms(double seconds) {
    const auto whole = static_cast<long long>(seconds);  // truncate toward zero
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%lld:%02lld:%02lld", whole / 3600,
                  (whole % 3600) / 60, whole % 60);
    return buf;
}

namespace {

std::string saved_cell(const SavingsRow& row) {
    return format_hms(row.saved_seconds) + " (" + format_hms(row.gt_seconds) + ")";
}

std::string row_line(const std::string& name, const SavingsReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-12s %-19s %-19s %-19s %-19s %5.1f%%\n",
                  name.c_str(), saved_cell(r.per.at(Complexity::Simple)).c_str(),
                  saved_cell(r.per.at(Complexity::Medium)).c_str(),
                  saved_cell(r.per.at(Complexity::Complex)).c_str(),
                  (format_hms(r.total_saved_seconds) + " (" +
                   format_hms(r.total_gt_seconds) + ")")
                      .c_str(),
                  r.percent_saved);
    return buf;
}

constexpr const char* kTableHeader =
    "Dataset      Simple              Medium              Complex             "
    "Total               % Saved\n";

}  // namespace

std::string render_savings(const SavingsReport& report) {
    return std::string(kTableHeader) + row_line("-", report);
}

std::string render_savings_table(
    const std::vector<std::pair<std::string, SavingsReport>>& rows) {
    std::string out = kTableHeader;
    for (const auto& [name, report] : rows) out += row_line(name, report);
    return out;
}

std::string savings_json_text(const SavingsReport& report) {
    std::string out = "{\"format\":\"savings/1\",\"per_complexity\":{";
    bool first = true;
    for (Complexity cx : kAllComplexities) {
        if (!first) out += ',';
        first = false;
        const SavingsRow& row = report.per.at(cx);
        out += "\"" + std::string(to_string(cx)) +
               "\":{\"saved_seconds\":" + fmt_double(row.saved_seconds) +
               ",\"gt_seconds\":" + fmt_double(row.gt_seconds) + "}";
    }
    out += "},\"total_saved_seconds\":" + fmt_double(report.total_saved_seconds) +
           ",\"total_gt_seconds\":" + fmt_double(report.total_gt_seconds) +
           ",\"percent_saved\":" + fmt_double(report.percent_saved) + "}\n";
    return out;
}

std::vector<std::pair<std::string, RetrievalCounts>> load_counts_file(
    const std::filesystem::path& path) {
    const nlohmann::json doc = parse_json_file(path);
    if (require_field(doc, "format", "counts").get<std::string>() != "counts/1") {
        throw std::runtime_error(path.string() + ": unexpected format");
    }
    std::vector<std::pair<std::string, RetrievalCounts>> rows;
    for (const auto& row : require_field(doc, "rows", "counts")) {
        RetrievalCounts counts;
        for (Complexity cx : kAllComplexities) {
            const auto& cell = require_field(
                row, std::string(to_string(cx)).c_str(), "counts row");
            StratumCounts sc;
            sc.retrieved = require_field(cell, "retrieved", "counts cell")
                               .get<std::size_t>();
            sc.ground_truth_total =
                require_field(cell, "total", "counts cell").get<std::size_t>();
            counts.per[cx] = sc;
        }
        counts.validate();
        rows.emplace_back(
            require_field(row, "name", "counts row").get<std::string>(), counts);
    }
    return rows;
}

}  // namespace labelprop
