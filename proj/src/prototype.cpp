#include "labelprop/prototype.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "labelprop/json_io.hpp"
#include "labelprop/kernels.hpp"
#include "labelprop/matrix.hpp"
#include "labelprop/rng.hpp"

namespace labelprop {

void PrototypeBank::validate() const {
    if (k < 1) throw std::invalid_argument("prototype bank: k must be >= 1");
    for (const auto& [cls, protos] : prototypes) {
        if (protos.empty() || protos.size() > static_cast<std::size_t>(k)) {
            throw std::runtime_error("class " + std::to_string(cls) +
                                     " has " + std::to_string(protos.size()) +
                                     " prototypes, expected 1.." + std::to_string(k));
        }
        for (const auto& p : protos) {
            if (p.size() != dim) {
                throw std::runtime_error("prototype dimension mismatch for class " +
                                         std::to_string(cls));
            }
            if (std::abs(l2_norm(p) - 1.0) > 1e-9) {
                throw std::runtime_error("prototype for class " +
                                         std::to_string(cls) + " is not unit norm");
            }
        }
    }
}

PrototypeBank build_prototypes(const EmbeddingStore& store,
                               const std::string& space, int k,
                               std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("build_prototypes: k must be >= 1");
    const SpaceData& data = store.space(space);

    PrototypeBank bank;
    bank.space = space;
    bank.dim = data.dim;
    bank.k = k;

    SplitRng root(seed);
    for (const auto& cls : store.registry.classes()) {
        std::vector<const EmbeddingRecord*> chosen;
        for (const auto* rec : store.labeled_records(space, "representative")) {
            if (*rec->class_id == cls.id &&
                chosen.size() < static_cast<std::size_t>(k)) {
                chosen.push_back(rec);
            }
        }
        // Train records only stand in when the class has no representatives.
        if (chosen.empty()) {
            std::vector<const EmbeddingRecord*> pool;
            for (const auto* rec : store.labeled_records(space, "train")) {
                if (*rec->class_id == cls.id) pool.push_back(rec);
            }
            SplitRng srng = root.split("prototype-sample",
                                       static_cast<std::uint64_t>(cls.id));
            srng.shuffle(pool);
            for (const auto* rec : pool) {
                if (chosen.size() >= static_cast<std::size_t>(k)) break;
                chosen.push_back(rec);
            }
        }
        if (chosen.empty()) {
            throw std::runtime_error("class '" + cls.name +
                                     "' has no labeled records in space '" +
                                     space + "'");
        }
        auto& dst = bank.prototypes[cls.id];
        for (const auto* rec : chosen) {
            dst.push_back(l2_normalized(rec->vector));
        }
    }
    bank.validate();
    return bank;
}

ScoreVector classify_cosine(const PrototypeBank& bank,
                            std::span<const double> query) {
    if (query.size() != bank.dim) {
        throw std::invalid_argument("classify_cosine: query has length " +
                                    std::to_string(query.size()) + ", bank dim is " +
                                    std::to_string(bank.dim));
    }
    const std::vector<double> q = l2_normalized(query);

    std::size_t num_classes = 0;
    for (const auto& [cls, _] : bank.prototypes) {
        num_classes = std::max(num_classes, static_cast<std::size_t>(cls) + 1);
    }
    std::vector<double> scores(num_classes, -1.0);
    for (const auto& [cls, protos] : bank.prototypes) {
        double best = -1.0;
        for (const auto& p : protos) {
            best = std::max(best, kern::dot(q.data(), p.data(), q.size()));
        }
        scores[static_cast<std::size_t>(cls)] = best;
    }
    return ScoreVector::from_scores(std::move(scores));
}

void save_bank(const PrototypeBank& bank, const std::filesystem::path& path) {
    bank.validate();
    std::string out;
    out += "{\"format\":\"protobank/1\",\"space\":" + json_quote(bank.space) +
           ",\"dim\":" + std::to_string(bank.dim) +
           ",\"k\":" + std::to_string(bank.k) + "}\n";
    for (const auto& [cls, protos] : bank.prototypes) {
        for (const auto& p : protos) {
            out += "{\"class_id\":" + std::to_string(cls) + ",\"vector\":";
            append_double_array(out, p);
            out += "}\n";
        }
    }
    write_text_file(path, out);
}

PrototypeBank load_bank(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.empty()) {
        throw std::runtime_error(path.string() + ": empty prototype bank file");
    }
    nlohmann::json header = nlohmann::json::parse(line);
    if (require_field(header, "format", "header").get<std::string>() != "protobank/1") {
        throw std::runtime_error(path.string() + ": unexpected format");
    }
    PrototypeBank bank;
    bank.space = require_field(header, "space", "header").get<std::string>();
    bank.dim = require_field(header, "dim", "header").get<std::size_t>();
    bank.k = require_field(header, "k", "header").get<int>();
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(path.string() + ": line " +
                                     std::to_string(line_no) + ": " + e.what());
        }
        bank.prototypes[require_field(rec, "class_id", "prototype").get<int>()]
            .push_back(require_field(rec, "vector", "prototype")
                           .get<std::vector<double>>());
    }
    bank.validate();
    return bank;
}

}  // namespace labelprop
