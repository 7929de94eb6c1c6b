#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace labelprop {

// Shape-difficulty category driving per-object annotation time.
enum class Complexity { Simple, Medium, Complex };

std::string_view to_string(Complexity c);
Complexity complexity_from_string(std::string_view s);
inline constexpr Complexity kAllComplexities[] = {
    Complexity::Simple, Complexity::Medium, Complexity::Complex};

struct ClassInfo {
    int id = 0;
    std::string name;
    Complexity complexity = Complexity::Simple;

    bool operator==(const ClassInfo&) const = default;
};

// Canonical class list shared by every head, bank and score vector. Ids are
// contiguous from 0; names unique and non-empty; the ordering is part of
// the contract (score column c is class c).
class ClassRegistry {
public:
    ClassRegistry() = default;
    static ClassRegistry from_classes(std::vector<ClassInfo> classes);

    std::size_t size() const { return classes_.size(); }
    bool empty() const { return classes_.empty(); }
    const ClassInfo& at(int id) const;
    bool contains(int id) const {
        return id >= 0 && static_cast<std::size_t>(id) < classes_.size();
    }
    const std::vector<ClassInfo>& classes() const { return classes_; }

    // FNV-1a over "id:name:complexity;" in id order; used to check that
    // heads trained separately agree on the class universe.
    std::uint64_t checksum() const;

    bool operator==(const ClassRegistry&) const = default;

private:
    std::vector<ClassInfo> classes_;
};

}  // namespace labelprop
