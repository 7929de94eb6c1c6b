#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "labelprop/registry.hpp"

#include <json.hpp>

namespace labelprop {

struct ImageEntry {
    std::string id;
    int width = 0;
    int height = 0;
};

// One proposed (or labeled) object segment. Geometry is an opaque payload
// carried through untouched; this code never interprets mask pixels.
struct Annotation {
    std::string id;
    std::string image_id;
    std::optional<int> class_id;
    std::optional<double> confidence;
    std::optional<Complexity> complexity;
    nlohmann::ordered_json geometry;
};

struct AnnotationSet {
    std::vector<ImageEntry> images;
    std::vector<Annotation> annotations;
    ClassRegistry categories;

    void validate() const;
    const Annotation* find(const std::string& annotation_id) const;
};

AnnotationSet load_annotations(const std::filesystem::path& path);
void save_annotations(const AnnotationSet& set, const std::filesystem::path& path);

// Seeded uniform removal of round(drop_rate * n) annotations; images and
// categories pass through, surviving annotations keep their order.
AnnotationSet perturb_proposals(const AnnotationSet& annotations,
                                double drop_rate, std::uint64_t seed);

// Seeded label noise: a round(noise * n_labeled) subset of labeled
// annotations gets a different uniformly chosen class.
AnnotationSet perturb_relabel(const AnnotationSet& annotations, double noise,
                              std::uint64_t seed);

}  // namespace labelprop
