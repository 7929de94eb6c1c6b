#pragma once

// Banked Hopfield memory classifier. Each bank projects queries and class
// representatives into a p-dimensional space and scores classes by softmax
// attention; bank scores are averaged. Training minimizes MSE against
// one-hot targets plus an intra-bank clustering term and an inter-bank
// decorrelation term, with hand-derived gradients.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "labelprop/matrix.hpp"
#include "labelprop/scores.hpp"
#include "labelprop/store.hpp"

namespace labelprop {

// One memory bank: query/key projections (d x p) and one representative
// row per class (C x d), ordered by class_id.
struct Bank {
    Matrix w_q;
    Matrix w_k;
    Matrix y;
};

struct HopfieldHead {
    std::string space;
    std::size_t d = 0;  // input dimension
    std::size_t p = 0;  // bank projection dimension
    int m = 1;          // bank count
    double beta = 1.0;  // inverse softmax temperature
    std::vector<Bank> banks;

    std::size_t num_classes() const {
        return banks.empty() ? 0 : banks.front().y.rows();
    }
    void validate() const;
};

enum class Optimizer { AdamLike, PlainSGD };

struct Hyperparams {
    double learning_rate = 0.001;
    int epochs = 20;
    int batch_size = 16;
    double lambda_inter = 0.01;
    double lambda_intra = 0.1;
    std::uint64_t seed = 0;
    Optimizer optimizer = Optimizer::AdamLike;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const;
};

struct Batch {
    Matrix queries;           // N x d
    std::vector<int> labels;  // length N
};

struct LossTerms {
    double total = 0.0;
    double mse = 0.0;
    double intra = 0.0;
    double inter = 0.0;
};

// Same tensor layout as the head itself.
struct Gradients {
    std::vector<Bank> banks;
};

struct EpochStats {
    double total = 0.0;
    double mse = 0.0;
    double intra = 0.0;
    double inter = 0.0;
    double train_accuracy = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    double wall_seconds = 0.0;  // informational; never serialized
};

// Y rows start at the representative-split class means plus bank-specific
// noise of scale noise_scale*||mean||; W_Q/W_K are Gaussian with std
// 1/sqrt(d). beta defaults to 1/sqrt(p).
HopfieldHead init_head(const EmbeddingStore& store, const std::string& space,
                       std::size_t p, int m, std::optional<double> beta,
                       std::uint64_t seed, double noise_scale = 0.01);

// Mean over banks of softmax(beta * (X W_Q) (Y W_K)^T), one row per query.
Matrix forward_scores(const HopfieldHead& head, const Matrix& queries);

LossTerms loss(const HopfieldHead& head, const Batch& batch,
               const Hyperparams& hp);

// Analytic d(total)/d{W_Q, W_K, Y} for every bank.
Gradients gradients(const HopfieldHead& head, const Batch& batch,
                    const Hyperparams& hp);

std::pair<HopfieldHead, TrainReport> train_head(HopfieldHead head,
                                                const EmbeddingStore& store,
                                                const std::string& split,
                                                const Hyperparams& hp);

ScoreVector predict(const HopfieldHead& head, std::span<const double> query);

void save_head(const HopfieldHead& head, const std::filesystem::path& path,
               std::optional<std::uint64_t> registry_checksum = std::nullopt);
HopfieldHead load_head(const std::filesystem::path& path,
                       std::optional<std::uint64_t>* registry_checksum = nullptr);

}  // namespace labelprop
