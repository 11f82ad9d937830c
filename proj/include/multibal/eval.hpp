#pragma once

#include "multibal/balancing.hpp"
#include "multibal/dataset.hpp"
#include "multibal/model.hpp"

#include <string>
#include <utility>
#include <vector>

namespace multibal {

struct PeheReport {
    double pehe = 0.0;       // mean over rows of the sum over pairs j < k
    double sqrt_pehe = 0.0;
    Matrix per_pair;         // K x K, upper triangle holds the pair contributions
};

/// Signed ITE convention: tau_jk(x) = m_j(x) - m_k(x).
PeheReport pehe_from_means(const Matrix &predicted, const Matrix &truth);
PeheReport pehe(const ModelParams &theta, const Dataset &ds);

/// Entry t: mean over rows of the predicted mean outcome under t.
Vector adrf(const ModelParams &theta, const Dataset &ds);

struct InterpolationPoint {
    double lambda = 0.0;
    double mean_outcome = 0.0;
};

/// Mean head output along the straight line between two treatment embeddings.
std::vector<InterpolationPoint> interpolate_effect(const ModelParams &theta, int from, int to, int steps,
                                                   const Dataset &ds);

/// Rows of `table` centred and projected on their leading principal directions.
Matrix principal_projection(const Matrix &table, int components = 2);

/// Row indices sorted by the polar angle of their 2-D principal projection.
std::vector<int> angular_order(const Matrix &table);

/// True when `order` visits 0..K-1 around the ring, up to rotation and reflection.
bool is_cyclic_order(const std::vector<int> &order);

/// Index of the Euclidean nearest other row.
int nearest_row(const Matrix &table, int row);

struct ConcentrationRow {
    StrategyKind strategy = StrategyKind::pair;
    int arms = 0;
    int n = 0;
    int replicates = 0;
    double mean = 0.0;
    double sd = 0.0;
};

struct ConcentrationConfig {
    std::vector<int> arm_list{4, 16};
    int n = 500;
    int replicates = 50;
    std::vector<StrategyKind> strategies{StrategyKind::pair, StrategyKind::ova, StrategyKind::agg};
    std::uint64_t seed = 0;
    int rep_dim = 16;
    int embedding_dim = 8;
    double kappa = 5.0;
    int covariates = 20;
};

/// Spread of the imbalance estimator across independent datasets, with a
/// frozen random representation map and embedding table per K.
std::vector<ConcentrationRow> concentration_experiment(const ConcentrationConfig &cfg);

struct TimingRow {
    StrategyKind strategy = StrategyKind::pair;
    int arms = 0;
    int n = 0;
    double seconds_per_epoch = 0.0;
    double seconds_per_penalty = 0.0;  // value + gradient on n rows
    int terms = 0;
    int workers = 1;
};

struct TimingConfig {
    std::vector<int> arm_list{4, 20};
    std::vector<StrategyKind> strategies{StrategyKind::pair, StrategyKind::ova, StrategyKind::agg};
    int n = 1500;
    int epochs = 5;
    int penalty_repeats = 5;
    std::uint64_t seed = 0;
    TrainConfig train;
};

/// Medians over epochs / repeated evaluations on hard-setting data.
std::vector<TimingRow> timing_benchmark(const TimingConfig &cfg);

}  // namespace multibal
