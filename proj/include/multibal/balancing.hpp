#pragma once

#include "multibal/kernels.hpp"
#include "multibal/matrix.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace multibal {

enum class StrategyKind { pair, ova, agg };

const char *to_string(StrategyKind k);
StrategyKind strategy_from_string(const std::string &name);

struct StrategySpec {
    StrategyKind kind = StrategyKind::agg;
    KernelSpec kernel = KernelSpec::rbf_median();            // on representations
    KernelSpec embedding_kernel = KernelSpec::rbf_median();  // on treatment embeddings (agg)
    int embedding_dim = 8;
    double geodesic_weight = 0.0;
    int min_arm_batch = 2;

    void validate() const;
};

/// Treatment-topology graph with all-pairs hop distances.
class GeodesicGraph {
public:
    GeodesicGraph(int nodes, std::vector<std::pair<int, int>> edges);

    static GeodesicGraph path(int nodes);
    static GeodesicGraph cycle(int nodes);
    /// Complete binary tree in breadth-first order (root 0, children 2i+1, 2i+2).
    static GeodesicGraph binary_tree(int depth);

    int nodes() const { return nodes_; }
    const std::vector<std::pair<int, int>> &edges() const { return edges_; }
    const Matrix &distances() const { return dist_; }
    double distance(int i, int j) const { return dist_(i, j); }

private:
    int nodes_;
    std::vector<std::pair<int, int>> edges_;
    Matrix dist_;
};

struct ArmGroups {
    int arms = 0;
    int total_rows = 0;
    std::vector<std::vector<int>> rows;  // row indices per arm, ascending
    std::vector<Matrix> samples;         // gathered representation rows per arm
    bool has_empty_arm = false;

    std::vector<int> counts() const;
};

ArmGroups group_by_arm(const Matrix &z, std::span<const int> treatments, int arms);

struct PenaltyValue {
    double value = 0.0;
    Matrix grad_z;      // same shape as the representation batch
    Matrix grad_table;  // K x d_e, zero unless the penalty touches the table
    int terms_evaluated = 0;
    int terms_skipped = 0;
};

/// Sum over arm pairs of MMD = sqrt(max(mmd2_v, 0)); K(K-1)/2 terms.
PenaltyValue r_pair(const StrategySpec &spec, const ArmGroups &groups, bool with_gradient = true);

/// Sum over arms of MMD between the arm and the pooled remaining rows; K terms.
PenaltyValue r_ova(const StrategySpec &spec, const ArmGroups &groups, bool with_gradient = true);

/// HSIC between Z and the embedding rows selected by the treatments; one term.
PenaltyValue r_agg(const StrategySpec &spec, const Matrix &z, std::span<const int> treatments, const Matrix &table,
                   bool with_gradient = true);

struct GeodesicValue {
    double value = 0.0;
    Matrix grad_table;
};

/// Mean over ordered pairs i != j of (|e_i - e_j| - d(i, j))^2.
GeodesicValue geodesic_penalty(const Matrix &table, const GeodesicGraph &graph, bool with_gradient = true);

/// R_S(Z) plus geodesic_weight * geodesic_penalty(table) when configured.
/// The graph is required iff geodesic_weight > 0.
PenaltyValue strategy_penalty(const StrategySpec &spec, const Matrix &z, std::span<const int> treatments,
                              const Matrix &table, const GeodesicGraph *graph, bool with_gradient = true);

}  // namespace multibal
