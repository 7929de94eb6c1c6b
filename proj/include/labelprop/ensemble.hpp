#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "labelprop/hopfield.hpp"
#include "labelprop/registry.hpp"
#include "labelprop/scores.hpp"

namespace labelprop {

// Unweighted mean of per-space head scores. Built once from trained heads
// and never itself trained.
struct EnsemblePredictor {
    std::vector<HopfieldHead> heads;
    ClassRegistry registry;

    void validate() const;
};

// queries maps each head's space to that crop's embedding there. Heads are
// evaluated in space-name order so the result is independent of the order
// heads were added.
ScoreVector ensemble_predict(const EnsemblePredictor& ens,
                             const std::map<std::string, std::vector<double>>& queries);

// Manifest file: head paths (relative to the manifest) plus the registry
// checksum the heads were trained against.
void save_ensemble_manifest(const std::vector<std::string>& head_paths,
                            const ClassRegistry& registry,
                            const std::filesystem::path& path);
EnsemblePredictor load_ensemble(const std::filesystem::path& manifest_path,
                                const ClassRegistry& registry);

}  // namespace labelprop
