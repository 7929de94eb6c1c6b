#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "labelprop/scores.hpp"
#include "labelprop/store.hpp"

namespace labelprop {

// Fixed per-class prototype vectors; the untrained baseline the Hopfield
// heads are measured against.
struct PrototypeBank {
    std::string space;
    std::size_t dim = 0;
    int k = 5;
    std::map<int, std::vector<std::vector<double>>> prototypes;  // unit norm

    void validate() const;
};

// Picks up to k prototypes per class: representative-split records first
// (record order), topped up with a seeded uniform sample of train-split
// records. Vectors are L2-normalized.
PrototypeBank build_prototypes(const EmbeddingStore& store,
                               const std::string& space, int k,
                               std::uint64_t seed);

// Per-class score: best cosine similarity over that class's prototypes.
// Nearest class wins, ties to the lowest class_id.
ScoreVector classify_cosine(const PrototypeBank& bank,
                            std::span<const double> query);

void save_bank(const PrototypeBank& bank, const std::filesystem::path& path);
PrototypeBank load_bank(const std::filesystem::path& path);

}  // namespace labelprop
