#pragma once

// Task-independent personality extractor: a linear map E = W_g·x over a
// flattened input window, trained with a contrastive margin objective so that
// windows from one domain embed close together and windows from different
// domains land at least a margin apart.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "synevo/backbone.hpp"
#include "synevo/domain.hpp"

namespace synevo::personality {

enum class DistanceKind { mse, sum_sq };

DistanceKind distance_kind_from_string(const std::string& name);
std::string to_string(DistanceKind kind);

/// mse: mean of (a−b)²; sum_sq: Σ(a−b)².
double distance(std::span<const double> a, std::span<const double> b, DistanceKind kind = DistanceKind::mse);

struct Extractor {
    Matrix weights;  // embed_dim × input_dim
    double margin = 1.0;
    std::size_t generation = 0;
    DistanceKind distance = DistanceKind::mse;

    static Extractor init(std::size_t embed_dim, std::size_t input_dim, std::uint64_t seed, double margin = 1.0,
                          DistanceKind distance = DistanceKind::mse);

    std::size_t embed_dim() const { return static_cast<std::size_t>(weights.rows()); }
    std::size_t input_dim() const { return static_cast<std::size_t>(weights.cols()); }
    std::vector<double> apply(std::span<const double> window) const;
};

struct DomainEmbedding {
    std::string group_id;
    std::vector<double> vector;
    std::size_t sample_count = 0;
};

/// Mean of W_g·x over the windows of `group.train`.
DomainEmbedding embed(const Extractor& extractor, const DomainGroup& group);
DomainEmbedding embed_windows(const Extractor& extractor, const std::string& group_id, const WindowBatch& windows);

/// Copy of `windows` with the inputs shifted and scaled by their overall
/// mean and standard deviation.
WindowBatch standardized(const WindowBatch& windows);

/// ŷ·D + (1−ŷ)·max(0, m − D).
double contrastive_loss(std::span<const double> e_i, std::span<const double> e_j, bool same_domain, double margin,
                        DistanceKind kind = DistanceKind::mse);

struct SamplePair {
    std::span<const double> a;
    std::span<const double> b;
    bool same_domain = false;
};

/// Mean contrastive loss of the embedded pairs, and its gradient w.r.t. W_g.
double contrastive_objective(const Extractor& extractor, std::span<const SamplePair> pairs);
Matrix contrastive_gradient(const Extractor& extractor, std::span<const SamplePair> pairs);

struct PairSampling {
    std::size_t pairs_per_epoch = 256;
    double learning_rate = 0.01;
    std::uint64_t seed = 0;
};

/// Half of each epoch's pairs are same-domain and half cross-domain (all
/// same-domain when only one group is given). Returns the per-epoch mean loss.
std::vector<double> train_extractor(Extractor& extractor, std::span<const DomainGroup* const> groups,
                                    const PairSampling& sampling, std::size_t epochs);

/// Warm-started copy with the generation bumped.
Extractor reinstantiate(const Extractor& extractor);

nlohmann::json extractor_to_json(const Extractor& extractor);
Extractor extractor_from_json(const nlohmann::json& j);
nlohmann::json embedding_table(std::span<const DomainEmbedding> embeddings);

} // namespace synevo::personality
