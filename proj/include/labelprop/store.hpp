#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "labelprop/registry.hpp"

namespace labelprop {

// One crop's vector in one embedding space. Vectors are stored exactly as
// produced (unnormalized); consumers normalize where their math needs it.
struct EmbeddingRecord {
    std::string id;
    std::string space;
    std::vector<double> vector;
    std::optional<int> class_id;
    std::optional<std::string> image_id;
    std::optional<Complexity> complexity;
};

struct SpaceData {
    std::size_t dim = 0;
    std::vector<EmbeddingRecord> records;  // file order preserved
};

inline constexpr const char* kSplitNames[] = {"representative", "train",
                                              "validation"};
bool is_split_name(std::string_view s);

struct EmbeddingStore {
    ClassRegistry registry;
    std::map<std::string, SpaceData> spaces;
    std::map<std::string, std::set<std::string>> splits;

    // Checks every structural invariant; throws with a specific message.
    void validate() const;

    const SpaceData& space(const std::string& name) const;
    std::optional<std::string> split_of(const std::string& record_id) const;

    // Labeled records of one space restricted to a split, in record order.
    std::vector<const EmbeddingRecord*> labeled_records(
        const std::string& space, const std::string& split) const;
};

EmbeddingStore load_store(const std::filesystem::path& path);
void save_store(const EmbeddingStore& store, const std::filesystem::path& path);

// Desk-scale stand-in for foundation-model encoders: Gaussian class
// clusters per space, optionally blended pairwise to manufacture
// confusability in chosen spaces.
struct SyntheticConfig {
    std::uint64_t seed = 0;
    int num_classes = 0;
    std::size_t dim = 0;
    std::vector<std::string> spaces;
    std::map<std::string, std::size_t> samples_per_class_per_split;
    double cluster_sigma = 0.1;
    double center_scale = 1.0;
    std::map<std::string, std::vector<std::pair<int, int>>> confusion_pairs;
    double confusion_blend = 0.0;

    void validate() const;
};

EmbeddingStore synth_generate(const SyntheticConfig& config);

EmbeddingStore split_assign(const EmbeddingStore& store,
                            const std::map<std::string, double>& fractions,
                            std::uint64_t seed);

}  // namespace labelprop
