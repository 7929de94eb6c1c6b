#include "labelprop/ensemble.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "labelprop/json_io.hpp"

namespace labelprop {

void EnsemblePredictor::validate() const {
    if (heads.empty()) throw std::invalid_argument("ensemble has no heads");
    std::set<std::string> spaces;
    for (const HopfieldHead& head : heads) {
        head.validate();
        if (head.num_classes() != registry.size()) {
            throw std::invalid_argument(
                "head for space '" + head.space + "' has " +
                std::to_string(head.num_classes()) + " classes, registry has " +
                std::to_string(registry.size()));
        }
        if (!spaces.insert(head.space).second) {
            throw std::invalid_argument("duplicate head space '" + head.space + "'");
        }
    }
}

ScoreVector ensemble_predict(
    const EnsemblePredictor& ens,
    const std::map<std::string, std::vector<double>>& queries) {
    ens.validate();
    // Canonical evaluation order: space name.
    std::vector<const HopfieldHead*> order;
    for (const HopfieldHead& head : ens.heads) order.push_back(&head);
    std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
        return a->space < b->space;
    });

    const std::size_t c = ens.registry.size();
    std::vector<long double> acc(c, 0.0L);
    for (const HopfieldHead* head : order) {
        auto it = queries.find(head->space);
        if (it == queries.end()) {
            throw std::invalid_argument("missing query for space '" + head->space + "'");
        }
        const ScoreVector sv = predict(*head, it->second);
        for (std::size_t j = 0; j < c; ++j) acc[j] += sv.scores[j];
    }
    std::vector<double> mean(c);
    const auto n = static_cast<long double>(order.size());
    for (std::size_t j = 0; j < c; ++j) {
        mean[j] = static_cast<double>(acc[j] / n);
    }
    return ScoreVector::from_scores(std::move(mean));
}

void save_ensemble_manifest(const std::vector<std::string>& head_paths,
                            const ClassRegistry& registry,
                            const std::filesystem::path& path) {
    std::string out = "{\"format\":\"ensemble/1\",\"heads\":[";
    for (std::size_t i = 0; i < head_paths.size(); ++i) {
        if (i) out += ',';
        out += json_quote(head_paths[i]);
    }
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(registry.checksum()));
    out += "],\"registry_checksum\":\"";
    out += buf;
    out += "\"}\n";
    write_text_file(path, out);
}

EnsemblePredictor load_ensemble(const std::filesystem::path& manifest_path,
                                const ClassRegistry& registry) {
    const nlohmann::json doc = parse_json_file(manifest_path);
    if (require_field(doc, "format", "manifest").get<std::string>() != "ensemble/1") {
        throw std::runtime_error(manifest_path.string() + ": unexpected format");
    }
    const std::uint64_t expected = std::stoull(
        require_field(doc, "registry_checksum", "manifest").get<std::string>(),
        nullptr, 16);
    if (expected != registry.checksum()) {
        throw std::runtime_error(manifest_path.string() +
                                 ": registry checksum mismatch");
    }
    EnsemblePredictor ens;
    ens.registry = registry;
    const auto base = manifest_path.parent_path();
    for (const auto& rel : require_field(doc, "heads", "manifest")) {
        std::optional<std::uint64_t> head_sum;
        ens.heads.push_back(load_head(base / rel.get<std::string>(), &head_sum));
        if (head_sum && *head_sum != registry.checksum()) {
            throw std::runtime_error("head '" + rel.get<std::string>() +
                                     "' was trained against a different registry");
        }
    }
    ens.validate();
    return ens;
}

}  // namespace labelprop
