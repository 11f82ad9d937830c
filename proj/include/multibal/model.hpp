#pragma once

#include "multibal/adam.hpp"
#include "multibal/balancing.hpp"
#include "multibal/dataset.hpp"
#include "multibal/mlp.hpp"
#include "multibal/rng.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace multibal {

enum class HeadMode { multi_head, embed_conditioned };

const char *to_string(HeadMode m);
HeadMode head_mode_from_string(const std::string &name);

/// Representation net, outcome heads and treatment-embedding table.
struct ModelParams {
    MlpParams phi;               // X -> Z
    std::vector<MlpParams> heads;  // K heads (multi_head) or one head on Z (+) e_t
    Matrix table;                // K x d_e
    HeadMode head_mode = HeadMode::multi_head;

    int arms() const { return static_cast<int>(table.rows()); }
    int rep_dim() const { return phi.output_dim(); }
    int embedding_dim() const { return static_cast<int>(table.cols()); }
    std::size_t parameter_count() const;

    /// phi, then heads in order, then the table (row-major).
    Vector pack() const;
    void unpack(const Vector &flat);
    void check() const;
};

struct TrainConfig {
    int epochs = 100;
    int batch_size = 128;
    double learning_rate = 1e-3;
    int rep_dim = 16;
    std::vector<int> phi_hidden{64, 64};
    std::vector<int> head_hidden{32};
    std::optional<HeadMode> head_mode;  // empty: chosen from K and strategy
    int balance_subsample = 512;
    std::uint64_t seed = 0;

    void validate(int arms, const StrategySpec &spec) const;
};

/// multi_head for K <= 10 unless the strategy is agg; embed_conditioned otherwise.
HeadMode default_head_mode(int arms, StrategyKind kind);

ModelParams init_model(const TrainConfig &cfg, int input_dim, int arms, int embedding_dim, HeadMode mode,
                       RngStream &rng);

/// n x K matrix of predicted potential-outcome means.
Matrix predict_means(const ModelParams &theta, const Matrix &x);

/// Head outputs for given representations and arbitrary (possibly
/// interpolated) embedding vectors; embed_conditioned only.
Vector predict_with_embedding(const ModelParams &theta, const Matrix &z, const Vector &embedding);

struct Batch {
    Matrix x;
    std::vector<int> t;
    Vector y;

    int rows() const { return static_cast<int>(x.rows()); }
};

Batch make_batch(const Dataset &ds, const std::vector<int> &rows);
Batch full_batch(const Dataset &ds);

struct LossValue {
    double value = 0.0;
    Vector grad;  // packed like ModelParams::pack(); empty when not requested
};

/// Mean squared error of the factual head predictions.
LossValue factual_loss(const ModelParams &theta, const Batch &batch, bool with_gradient = true);

/// Per-sample squared errors, for loss bounds and Rademacher estimates.
Vector factual_losses(const ModelParams &theta, const Batch &batch);

struct ObjectiveValue {
    double value = 0.0;
    double factual = 0.0;
    double penalty = 0.0;
    Vector grad;
};

/// factual_loss(batch) + alpha * R_S(Phi(balance_batch)) + geodesic_weight * geodesic_penalty(table).
/// The geodesic term is not scaled by alpha. `spec` kernels must be resolved.
ObjectiveValue objective(const ModelParams &theta, const Batch &factual_batch, const Batch &balance_batch,
                         double alpha, const StrategySpec &spec, const GeodesicGraph *graph,
                         bool with_gradient = true);

ObjectiveValue objective(const ModelParams &theta, const Batch &batch, double alpha, const StrategySpec &spec,
                         const GeodesicGraph *graph, bool with_gradient = true);

/// R_S of the model's representation of a batch (no geodesic term, no gradient).
double imbalance(const ModelParams &theta, const Batch &batch, const StrategySpec &spec);

struct EpochRecord {
    int epoch = 0;
    double factual = 0.0;
    double imbalance = 0.0;
    double objective = 0.0;
    double seconds = 0.0;
};

using TrainTrace = std::vector<EpochRecord>;

struct TrainResult {
    ModelParams theta;
    TrainTrace trace;
    StrategySpec resolved_spec;  // kernels pinned at initialization
};

/// Adam on factual + alpha * penalty with stratified mini-batches.
/// Throws overlap_violation when some arm has fewer than 2 samples.
/// In multi_head mode without a geodesic term the embedding table is held fixed.
TrainResult train(const Dataset &ds, double alpha, const StrategySpec &spec, const TrainConfig &cfg,
                  const GeodesicGraph *graph = nullptr);

/// Max over sampled distinct row pairs of |Phi(x_i) - Phi(x_j)| / |x_i - x_j|.
double lipschitz_estimate(const ModelParams &theta, const Matrix &x, int pair_budget, RngStream &rng);

/// Rows drawn per arm: ceil(size / K) each (all of an arm when it is smaller).
std::vector<int> stratified_batch(const std::vector<std::vector<int>> &arm_rows, int size, RngStream &rng);

/// Arm-proportional subsample of `size` rows, at least `min_per_arm` per arm when available.
std::vector<int> stratified_subsample(const std::vector<std::vector<int>> &arm_rows, int size, int min_per_arm,
                                      RngStream &rng);

}  // namespace multibal
