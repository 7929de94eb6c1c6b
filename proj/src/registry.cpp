#include "labelprop/registry.hpp"

#include <stdexcept>
#include <unordered_set>

#include "labelprop/rng.hpp"

namespace labelprop {

std::string_view to_string(Complexity c) {
    switch (c) {
        case Complexity::Simple: return "Simple";
        case Complexity::Medium: return "Medium";
        case Complexity::Complex: return "Complex";
    }
    throw std::logic_error("bad Complexity value");
}

Complexity complexity_from_string(std::string_view s) {
    if (s == "Simple") return Complexity::Simple;
    if (s == "Medium") return Complexity::Medium;
    if (s == "Complex") return Complexity::Complex;
    throw std::invalid_argument("unknown complexity '" + std::string(s) +
                                "' (expected Simple|Medium|Complex)");
}

ClassRegistry ClassRegistry::from_classes(std::vector<ClassInfo> classes) {
    std::unordered_set<std::string> names;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (classes[i].id != static_cast<int>(i)) {
            throw std::invalid_argument(
                "registry class_ids must be contiguous from 0 (index " +
                std::to_string(i) + " has id " + std::to_string(classes[i].id) + ")");
        }
        if (classes[i].name.empty()) {
            throw std::invalid_argument("registry class " + std::to_string(i) +
                                        " has an empty name");
        }
        if (!names.insert(classes[i].name).second) {
            throw std::invalid_argument("duplicate class name '" + classes[i].name + "'");
        }
    }
    ClassRegistry reg;
    reg.classes_ = std::move(classes);
    return reg;
}

const ClassInfo& ClassRegistry::at(int id) const {
    if (!contains(id)) {
        throw std::out_of_range("class_id " + std::to_string(id) +
                                " not in registry of size " +
                                std::to_string(classes_.size()));
    }
    return classes_[static_cast<std::size_t>(id)];
}

std::uint64_t ClassRegistry::checksum() const {
    std::string canon;
    for (const auto& c : classes_) {
        canon += std::to_string(c.id);
        canon += ':';
        canon += c.name;
        canon += ':';
        canon += to_string(c.complexity);
        canon += ';';
    }
    return SplitRng::fnv1a64(canon);
}

}  // namespace labelprop
