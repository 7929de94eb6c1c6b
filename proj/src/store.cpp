#include "labelprop/store.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "labelprop/json_io.hpp"
#include "labelprop/kernels.hpp"
#include "labelprop/rng.hpp"

namespace labelprop {

namespace {

constexpr const char* kStoreFormat = "embstore/1";

std::string class_name(int id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "class_%02d", id);
    return buf;
}

int split_index(std::string_view name) {
    for (int i = 0; i < 3; ++i) {
        if (kSplitNames[i] == name) return i;
    }
    throw std::invalid_argument("unknown split name '" + std::string(name) +
                                "' (expected representative|train|validation)");
}

}  // namespace

bool is_split_name(std::string_view s) {
    return s == "representative" || s == "train" || s == "validation";
}

void EmbeddingStore::validate() const {
    for (const auto& [name, data] : spaces) {
        std::unordered_set<std::string> seen_ids;
        if (data.dim == 0) {
            throw std::runtime_error("space '" + name + "' has dim 0");
        }
        for (const auto& rec : data.records) {
            if (rec.space != name) {
                throw std::runtime_error("record '" + rec.id +
                                         "' filed under wrong space");
            }
            if (rec.vector.size() != data.dim) {
                throw std::runtime_error(
                    "dimension mismatch for record '" + rec.id + "': got " +
                    std::to_string(rec.vector.size()) + ", space '" + name +
                    "' declares " + std::to_string(data.dim));
            }
            for (double v : rec.vector) {
                if (!std::isfinite(v)) {
                    throw std::runtime_error("record '" + rec.id +
                                             "' contains a non-finite value");
                }
            }
            if (rec.class_id && !registry.contains(*rec.class_id)) {
                throw std::runtime_error("record '" + rec.id +
                                         "' references unknown class id " +
                                         std::to_string(*rec.class_id));
            }
            if (!seen_ids.insert(rec.id).second) {
                throw std::runtime_error("duplicate record id '" + rec.id +
                                         "' in space '" + name + "'");
            }
        }
    }
    std::unordered_set<std::string> all_ids;
    for (const auto& [name, data] : spaces) {
        for (const auto& rec : data.records) all_ids.insert(rec.id);
    }
    std::unordered_set<std::string> assigned;
    for (const auto& [split, ids] : splits) {
        split_index(split);
        for (const auto& id : ids) {
            if (!all_ids.count(id)) {
                throw std::runtime_error("split '" + split +
                                         "' references unknown record id '" + id +
                                         "'");
            }
            if (!assigned.insert(id).second) {
                throw std::runtime_error("record id '" + id +
                                         "' appears in more than one split");
            }
        }
    }
}

const SpaceData& EmbeddingStore::space(const std::string& name) const {
    auto it = spaces.find(name);
    if (it == spaces.end()) {
        throw std::runtime_error("unknown space '" + name + "'");
    }
    return it->second;
}

std::optional<std::string> EmbeddingStore::split_of(
    const std::string& record_id) const {
    for (const auto& [split, ids] : splits) {
        if (ids.count(record_id)) return split;
    }
    return std::nullopt;
}

std::vector<const EmbeddingRecord*> EmbeddingStore::labeled_records(
    const std::string& space_name, const std::string& split) const {
    auto split_it = splits.find(split);
    const SpaceData& data = space(space_name);
    std::vector<const EmbeddingRecord*> out;
    if (split_it == splits.end()) return out;
    for (const auto& rec : data.records) {
        if (rec.class_id && split_it->second.count(rec.id)) {
            out.push_back(&rec);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// File format: JSON Lines. First line is the header object, every following
// line one record. Numbers carry 17 significant digits.
// ---------------------------------------------------------------------------

void save_store(const EmbeddingStore& store, const std::filesystem::path& path) {
    store.validate();
    std::string out;
    out += "{\"format\":\"";
    out += kStoreFormat;
    out += "\",\"registry\":[";
    bool first = true;
    for (const auto& c : store.registry.classes()) {
        if (!first) out += ',';
        first = false;
        out += "{\"id\":" + std::to_string(c.id) + ",\"name\":" + json_quote(c.name) +
               ",\"complexity\":\"" + std::string(to_string(c.complexity)) + "\"}";
    }
    out += "],\"spaces\":{";
    first = true;
    for (const auto& [name, data] : store.spaces) {
        if (!first) out += ',';
        first = false;
        out += json_quote(name) + ":" + std::to_string(data.dim);
    }
    out += "},\"splits\":{";
    for (int i = 0; i < 3; ++i) {
        if (i) out += ',';
        out += "\"";
        out += kSplitNames[i];
        out += "\":[";
        auto it = store.splits.find(kSplitNames[i]);
        if (it != store.splits.end()) {
            bool f2 = true;
            for (const auto& id : it->second) {
                if (!f2) out += ',';
                f2 = false;
                out += json_quote(id);
            }
        }
        out += ']';
    }
    out += "}}\n";

    for (const auto& [name, data] : store.spaces) {
        for (const auto& rec : data.records) {
            out += "{\"id\":" + json_quote(rec.id) +
                   ",\"space\":" + json_quote(rec.space) + ",\"vector\":";
            append_double_array(out, rec.vector);
            if (rec.class_id) {
                out += ",\"class_id\":" + std::to_string(*rec.class_id);
            }
            if (rec.image_id) {
                out += ",\"image_id\":" + json_quote(*rec.image_id);
            }
            if (rec.complexity) {
                out += ",\"complexity\":\"" +
                       std::string(to_string(*rec.complexity)) + "\"";
            }
            out += "}\n";
        }
    }
    write_text_file(path, out);
}

EmbeddingStore load_store(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::string line;
    std::size_t line_no = 0;
    // Header.
    if (!std::getline(in, line) || line.empty()) {
        throw std::runtime_error(path.string() + ": no records (empty file)");
    }
    ++line_no;
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path.string() + ": line 1: " + e.what());
    }
    if (require_field(header, "format", "header").get<std::string>() != kStoreFormat) {
        throw std::runtime_error(path.string() + ": unexpected format '" +
                                 header["format"].get<std::string>() + "'");
    }

    EmbeddingStore store;
    std::vector<ClassInfo> classes;
    for (const auto& c : require_field(header, "registry", "header")) {
        classes.push_back(ClassInfo{
            require_field(c, "id", "registry entry").get<int>(),
            require_field(c, "name", "registry entry").get<std::string>(),
            complexity_from_string(
                require_field(c, "complexity", "registry entry").get<std::string>())});
    }
    store.registry = ClassRegistry::from_classes(std::move(classes));
    for (const auto& [name, dim] : require_field(header, "spaces", "header").items()) {
        if (!dim.is_number_unsigned() || dim.get<std::size_t>() == 0) {
            throw std::runtime_error("space '" + name + "': dim must be a positive integer");
        }
        store.spaces[name].dim = dim.get<std::size_t>();
    }
    if (header.contains("splits")) {
        for (const auto& [split, ids] : header["splits"].items()) {
            split_index(split);
            auto& dst = store.splits[split];
            for (const auto& id : ids) dst.insert(id.get<std::string>());
        }
    }

    // Records.
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json rec_json;
        try {
            rec_json = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(path.string() + ": line " +
                                     std::to_string(line_no) + ": " + e.what());
        }
        const char* ctx = "record";
        EmbeddingRecord rec;
        rec.id = require_field(rec_json, "id", ctx).get<std::string>();
        rec.space = require_field(rec_json, "space", ctx).get<std::string>();
        auto space_it = store.spaces.find(rec.space);
        if (space_it == store.spaces.end()) {
            throw std::runtime_error(path.string() + ": line " +
                                     std::to_string(line_no) + ": record '" +
                                     rec.id + "' uses undeclared space '" +
                                     rec.space + "'");
        }
        rec.vector =
            require_field(rec_json, "vector", ctx).get<std::vector<double>>();
        if (rec_json.contains("class_id") && !rec_json["class_id"].is_null()) {
            rec.class_id = rec_json["class_id"].get<int>();
            if (!store.registry.contains(*rec.class_id)) {
                throw std::runtime_error(
                    path.string() + ": line " + std::to_string(line_no) +
                    ": record '" + rec.id + "' references unknown class id " +
                    std::to_string(*rec.class_id));
            }
        }
        if (rec_json.contains("image_id") && !rec_json["image_id"].is_null()) {
            rec.image_id = rec_json["image_id"].get<std::string>();
        }
        if (rec_json.contains("complexity") && !rec_json["complexity"].is_null()) {
            rec.complexity =
                complexity_from_string(rec_json["complexity"].get<std::string>());
        }
        if (rec.vector.size() != space_it->second.dim) {
            throw std::runtime_error(
                path.string() + ": line " + std::to_string(line_no) +
                ": dimension mismatch for record '" + rec.id + "': got " +
                std::to_string(rec.vector.size()) + ", space '" + rec.space +
                "' declares " + std::to_string(space_it->second.dim));
        }
        space_it->second.records.push_back(std::move(rec));
    }
    try {
        store.validate();
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
    return store;
}

// ---------------------------------------------------------------------------
// Synthetic generation
// ---------------------------------------------------------------------------

void SyntheticConfig::validate() const {
    if (num_classes < 1) throw std::invalid_argument("synth: num_classes must be >= 1");
    if (dim < 1) throw std::invalid_argument("synth: dim must be >= 1");
    if (spaces.empty()) throw std::invalid_argument("synth: need at least one space");
    {
        std::unordered_set<std::string> names(spaces.begin(), spaces.end());
        if (names.size() != spaces.size()) {
            throw std::invalid_argument("synth: duplicate space names");
        }
    }
    if (!(cluster_sigma > 0.0)) {
        throw std::invalid_argument("synth: cluster_sigma must be positive");
    }
    if (!(center_scale > 0.0)) {
        throw std::invalid_argument("synth: center_scale must be positive");
    }
    if (!(confusion_blend >= 0.0 && confusion_blend <= 1.0)) {
        throw std::invalid_argument("synth: confusion_blend must lie in [0,1]");
    }
    std::size_t total = 0;
    for (const auto& [split, n] : samples_per_class_per_split) {
        split_index(split);
        if (n == 0) {
            throw std::invalid_argument("synth: samples for split '" + split +
                                        "' must be positive");
        }
        total += n;
    }
    if (total == 0) {
        throw std::invalid_argument("synth: no samples requested");
    }
    std::set<std::pair<int, int>> seen_pairs;
    for (const auto& [space, pairs] : confusion_pairs) {
        if (std::find(spaces.begin(), spaces.end(), space) == spaces.end()) {
            throw std::invalid_argument("synth: confusion space '" + space +
                                        "' is not a generated space");
        }
        for (auto [a, b] : pairs) {
            if (a < 0 || b < 0 || a >= num_classes || b >= num_classes || a == b) {
                throw std::invalid_argument("synth: invalid confusion pair (" +
                                            std::to_string(a) + "," +
                                            std::to_string(b) + ")");
            }
            auto key = std::minmax(a, b);
            if (!seen_pairs.insert(key).second) {
                throw std::invalid_argument(
                    "synth: confusion pair (" + std::to_string(key.first) + "," +
                    std::to_string(key.second) + ") appears in more than one space");
            }
        }
    }
}

EmbeddingStore synth_generate(const SyntheticConfig& config) {
    config.validate();

    EmbeddingStore store;
    std::vector<ClassInfo> classes;
    for (int c = 0; c < config.num_classes; ++c) {
        classes.push_back(
            ClassInfo{c, class_name(c), kAllComplexities[c % 3]});
    }
    store.registry = ClassRegistry::from_classes(std::move(classes));
    for (int i = 0; i < 3; ++i) store.splits[kSplitNames[i]];

    SplitRng root(config.seed);
    for (const auto& space_name : config.spaces) {
        SplitRng srng = root.split(space_name);
        SpaceData& data = store.spaces[space_name];
        data.dim = config.dim;

        std::vector<std::vector<double>> centers(config.num_classes);
        for (int c = 0; c < config.num_classes; ++c) {
            centers[c] = srng.split("center", static_cast<std::uint64_t>(c))
                             .gaussian_vector(config.dim);
            kern::scale(centers[c].data(), config.center_scale, config.dim);
        }
        auto pairs_it = config.confusion_pairs.find(space_name);
        if (pairs_it != config.confusion_pairs.end()) {
            for (auto [c1, c2] : pairs_it->second) {
                // Pull both centers toward their midpoint; blend 1 merges them.
                std::vector<double> mid(config.dim);
                for (std::size_t i = 0; i < config.dim; ++i) {
                    mid[i] = 0.5 * (centers[c1][i] + centers[c2][i]);
                }
                for (int c : {c1, c2}) {
                    for (std::size_t i = 0; i < config.dim; ++i) {
                        centers[c][i] = (1.0 - config.confusion_blend) * centers[c][i] +
                                        config.confusion_blend * mid[i];
                    }
                }
            }
        }

        for (int c = 0; c < config.num_classes; ++c) {
            for (int s = 0; s < 3; ++s) {
                auto n_it = config.samples_per_class_per_split.find(kSplitNames[s]);
                if (n_it == config.samples_per_class_per_split.end()) continue;
                for (std::size_t i = 0; i < n_it->second; ++i) {
                    SplitRng nrng = srng.split("noise", static_cast<std::uint64_t>(c),
                                               static_cast<std::uint64_t>(s), i);
                    EmbeddingRecord rec;
                    char idbuf[64];
                    std::snprintf(idbuf, sizeof(idbuf), "%s_%s_%04zu",
                                  class_name(c).c_str(), kSplitNames[s], i);
                    rec.id = idbuf;
                    rec.space = space_name;
                    rec.vector = nrng.gaussian_vector(config.dim);
                    kern::scale(rec.vector.data(), config.cluster_sigma, config.dim);
                    kern::axpy(1.0, centers[c].data(), rec.vector.data(), config.dim);
                    rec.class_id = c;
                    rec.complexity = store.registry.at(c).complexity;
                    store.splits[kSplitNames[s]].insert(rec.id);
                    data.records.push_back(std::move(rec));
                }
            }
        }
    }
    store.validate();
    return store;
}

// ---------------------------------------------------------------------------
// Split assignment
// ---------------------------------------------------------------------------

EmbeddingStore split_assign(const EmbeddingStore& store,
                            const std::map<std::string, double>& fractions,
                            std::uint64_t seed) {
    double total = 0.0;
    double frac[3] = {0.0, 0.0, 0.0};
    for (const auto& [split, f] : fractions) {
        if (f < 0.0) throw std::invalid_argument("split fraction must be nonnegative");
        frac[split_index(split)] = f;
        total += f;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw std::invalid_argument("split fractions must sum to 1 (got " +
                                    fmt_double(total) + ")");
    }

    // Record ids grouped by class; the same id may appear in several spaces
    // but must carry one class.
    std::map<std::string, int> id_class;  // -1 = unlabeled
    for (const auto& [space_name, data] : store.spaces) {
        for (const auto& rec : data.records) {
            const int cls = rec.class_id.value_or(-1);
            auto [it, inserted] = id_class.emplace(rec.id, cls);
            if (!inserted && it->second != cls) {
                throw std::runtime_error("record id '" + rec.id +
                                         "' has conflicting class labels across spaces");
            }
        }
    }
    for (const auto& cls : store.registry.classes()) {
        for (const auto& [space_name, data] : store.spaces) {
            const bool present = std::any_of(
                data.records.begin(), data.records.end(), [&](const auto& r) {
                    return r.class_id && *r.class_id == cls.id;
                });
            if (!present) {
                throw std::runtime_error("class '" + cls.name +
                                         "' has no records in space '" +
                                         space_name + "'");
            }
        }
    }

    std::map<int, std::vector<std::string>> strata;  // id order: lexicographic
    for (const auto& [id, cls] : id_class) strata[cls].push_back(id);

    EmbeddingStore out = store;
    out.splits.clear();
    for (int i = 0; i < 3; ++i) out.splits[kSplitNames[i]];
    SplitRng root(seed);
    for (auto& [cls, ids] : strata) {
        SplitRng srng = root.split("split-assign",
                                   static_cast<std::uint64_t>(cls + 1));
        srng.shuffle(ids);
        const std::size_t n = ids.size();
        std::size_t counts[3];
        double rema[3];
        std::size_t assigned = 0;
        for (int s = 0; s < 3; ++s) {
            const double want = frac[s] * static_cast<double>(n);
            counts[s] = static_cast<std::size_t>(want);
            rema[s] = want - static_cast<double>(counts[s]);
            assigned += counts[s];
        }
        while (assigned < n) {  // largest remainder, ties to earlier split
            int best = 0;
            for (int s = 1; s < 3; ++s) {
                if (rema[s] > rema[best]) best = s;
            }
            ++counts[best];
            rema[best] = -1.0;
            ++assigned;
        }
        if (cls >= 0 && counts[0] == 0) {
            // Every class must seed the representative split.
            int donor = counts[1] >= counts[2] ? 1 : 2;
            if (counts[donor] == 0) donor = donor == 1 ? 2 : 1;
            if (counts[donor] == 0) {
                throw std::runtime_error(
                    "class " + std::to_string(cls) +
                    " has too few records to satisfy the representative minimum");
            }
            --counts[donor];
            ++counts[0];
        }
        std::size_t pos = 0;
        for (int s = 0; s < 3; ++s) {
            for (std::size_t i = 0; i < counts[s]; ++i, ++pos) {
                out.splits[kSplitNames[s]].insert(ids[pos]);
            }
        }
    }
    out.validate();
    return out;
}

}  // namespace labelprop
