#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace labelprop {

// Index of the largest value; ties resolve to the lowest index. This is the
// one tie-break rule used everywhere a class is picked from scores.
inline int argmax_lowest(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("argmax of empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return static_cast<int>(best);
}

// Per-class confidence for one query plus the implied prediction.
struct ScoreVector {
    std::vector<double> scores;
    int predicted = 0;

    static ScoreVector from_scores(std::vector<double> s) {
        ScoreVector out;
        out.predicted = argmax_lowest(s);
        out.scores = std::move(s);
        return out;
    }
};

}  // namespace labelprop
