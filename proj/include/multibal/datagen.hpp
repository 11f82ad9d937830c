#pragma once

#include "multibal/balancing.hpp"
#include "multibal/dataset.hpp"

#include <array>
#include <span>
#include <string>
#include <utility>

namespace multibal {

/// Probability vector softmax(kappa * W x), computed with max subtraction.
Vector softmax_propensity(const Matrix &w, std::span<const double> x, double kappa);

/// mu_t = sin(2 x1) + x3^2 + 0.5 (t+1) (x_{1:5} . beta), 1-indexed covariates.
Vector true_means_hard(std::span<const double> x, std::span<const double> beta, int arms);

struct GenHardParams {
    int n = 1500;
    int d = 20;
    int arms = 4;
    double kappa = 5.0;
    double noise_variance = 0.1;
    std::uint64_t seed = 0;
};

/// Confounded softmax-assignment generator with a non-linear response surface.
Dataset gen_hard(const GenHardParams &p);

struct GenDoseParams {
    int n = 1797;
    int arms = 10;
    double noise_variance = 0.1;
    double kappa = 2.0;
    std::uint64_t seed = 0;
};

/// Gaussian-covariate dose-response data: mu_t = f(x) + (t - 4)^2.
Dataset gen_dose(const GenDoseParams &p);

/// Same outcome law on a digits CSV (64 pixel columns then the label).
Dataset load_digits_dose(const std::string &csv_path, double noise_variance, std::uint64_t seed);

enum class TopologyKind { tree, cycle };
TopologyKind topology_from_string(const std::string &name);
const char *to_string(TopologyKind k);

struct GenTopologyParams {
    TopologyKind kind = TopologyKind::tree;
    int n = 1000;
    double noise_variance = 0.1;
    std::uint64_t seed = 0;
};

/// Tree: 7-node depth-3 binary tree (0 root, 1 L, 2 R, 3 LL, 4 LR, 5 RL, 6 RR).
/// Cycle: 8-node ring with mu_t = cos(2 pi t / 8).
std::pair<Dataset, GeodesicGraph> gen_topology(const GenTopologyParams &p);

/// Node effects of the tree topology, indexed by node.
const std::array<double, 7> &tree_node_effects();

}  // namespace multibal
