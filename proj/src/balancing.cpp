#include "multibal/balancing.hpp"

#include "multibal/errors.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace multibal {

namespace {

// Below this MMD^2 the square root is treated as sitting on its kink and
// contributes a zero subgradient.
constexpr double kRootFloor = 1e-18;

struct RootedTerm {
    double value = 0.0;
    double scale = 0.0;  // d sqrt(x) / dx at the clamped value
};

RootedTerm rooted(double mmd2) {
    const double clamped = std::max(mmd2, 0.0);
    RootedTerm t;
    t.value = std::sqrt(clamped);
    t.scale = clamped > kRootFloor ? 0.5 / t.value : 0.0;
    return t;
}

void require_resolved(const StrategySpec &spec) {
    require(spec.kernel.is_resolved(), ErrorKind::config,
            "strategy kernel bandwidth must be resolved before evaluating penalties");
}

}  // namespace

const char *to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::pair: return "pair";
        case StrategyKind::ova: return "ova";
        case StrategyKind::agg: return "agg";
    }
    return "agg";
}

StrategyKind strategy_from_string(const std::string &name) {
    if (name == "pair") { return StrategyKind::pair; }
    if (name == "ova") { return StrategyKind::ova; }
    if (name == "agg") { return StrategyKind::agg; }
    throw Error(ErrorKind::config, "unknown strategy '" + name + "'");
}

void StrategySpec::validate() const {
    require(embedding_dim >= 1, ErrorKind::config, "strategy.embedding_dim must be >= 1");
    require(geodesic_weight >= 0.0, ErrorKind::config, "strategy.geodesic_weight must be >= 0");
    require(min_arm_batch >= 1, ErrorKind::config, "strategy.min_arm_batch must be >= 1");
}

GeodesicGraph::GeodesicGraph(int nodes, std::vector<std::pair<int, int>> edges)
    : nodes_(nodes), edges_(std::move(edges)), dist_(Matrix::Zero(nodes, nodes)) {
    require(nodes >= 1, ErrorKind::config, "GeodesicGraph: need at least one node");
    std::vector<std::vector<int>> adjacency(static_cast<std::size_t>(nodes));
    for (const auto &[a, b] : edges_) {
        require(a >= 0 && a < nodes && b >= 0 && b < nodes && a != b, ErrorKind::config,
                "GeodesicGraph: invalid edge");
        adjacency[static_cast<std::size_t>(a)].push_back(b);
        adjacency[static_cast<std::size_t>(b)].push_back(a);
    }
    for (int source = 0; source < nodes; ++source) {
        std::vector<int> hops(static_cast<std::size_t>(nodes), -1);
        std::deque<int> queue{source};
        hops[static_cast<std::size_t>(source)] = 0;
        while (!queue.empty()) {
            const int u = queue.front();
            queue.pop_front();
            for (int v : adjacency[static_cast<std::size_t>(u)]) {
                if (hops[static_cast<std::size_t>(v)] < 0) {
                    hops[static_cast<std::size_t>(v)] = hops[static_cast<std::size_t>(u)] + 1;
                    queue.push_back(v);
                }
            }
        }
        for (int target = 0; target < nodes; ++target) {
            require(hops[static_cast<std::size_t>(target)] >= 0, ErrorKind::config,
                    "GeodesicGraph: graph is not connected");
            dist_(source, target) = hops[static_cast<std::size_t>(target)];
        }
    }
}

GeodesicGraph GeodesicGraph::path(int nodes) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i + 1 < nodes; ++i) { edges.emplace_back(i, i + 1); }
    return GeodesicGraph(nodes, std::move(edges));
}

GeodesicGraph GeodesicGraph::cycle(int nodes) {
    require(nodes >= 3, ErrorKind::config, "cycle graph needs at least 3 nodes");
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < nodes; ++i) { edges.emplace_back(i, (i + 1) % nodes); }
    return GeodesicGraph(nodes, std::move(edges));
}

GeodesicGraph GeodesicGraph::binary_tree(int depth) {
    require(depth >= 1, ErrorKind::config, "binary tree depth must be >= 1");
    const int nodes = (1 << depth) - 1;
    std::vector<std::pair<int, int>> edges;
    for (int child = 1; child < nodes; ++child) { edges.emplace_back((child - 1) / 2, child); }
    return GeodesicGraph(nodes, std::move(edges));
}

std::vector<int> ArmGroups::counts() const {
    std::vector<int> c;
    c.reserve(rows.size());
    for (const auto &r : rows) { c.push_back(static_cast<int>(r.size())); }
    return c;
}

ArmGroups group_by_arm(const Matrix &z, std::span<const int> treatments, int arms) {
    require(z.rows() == static_cast<Eigen::Index>(treatments.size()), ErrorKind::shape,
            "group_by_arm: Z rows and treatment count differ");
    require(arms >= 1, ErrorKind::config, "group_by_arm: K must be >= 1");
    ArmGroups g;
    g.arms = arms;
    g.total_rows = static_cast<int>(z.rows());
    g.rows.resize(static_cast<std::size_t>(arms));
    for (std::size_t i = 0; i < treatments.size(); ++i) {
        const int t = treatments[i];
        require(t >= 0 && t < arms, ErrorKind::shape, "group_by_arm: treatment index out of range");
        g.rows[static_cast<std::size_t>(t)].push_back(static_cast<int>(i));
    }
    for (const auto &r : g.rows) {
        g.samples.push_back(gather_rows(z, r));
        if (r.empty()) { g.has_empty_arm = true; }
    }
    return g;
}

namespace {

Eigen::Index group_dim(const ArmGroups &groups) {
    for (const auto &s : groups.samples) {
        if (s.rows() > 0 || s.cols() > 0) { return s.cols(); }
    }
    return 0;
}

// Rescales by total / evaluated so skipped terms do not shrink the penalty.
void renormalize(PenaltyValue &out, int total_terms) {
    require(out.terms_evaluated > 0, ErrorKind::degenerate,
            "balancing penalty: every term was skipped (arms below min_arm_batch)");
    if (out.terms_evaluated < total_terms) {
        const double factor = static_cast<double>(total_terms) / out.terms_evaluated;
        out.value *= factor;
        out.grad_z *= factor;
    }
}

}  // namespace

namespace {

// One gram over all rows stacked in arm order, reduced to per-arm-pair block
// sums. Every MMD term of r_pair and r_ova is a combination of these sums.
struct BlockGram {
    Matrix stacked;
    std::vector<int> offsets;
    std::vector<int> sizes;
    std::vector<int> source_rows;  // stacked row -> original row
    Matrix gram;
    Matrix sums;  // K x K
};

BlockGram block_gram(const KernelSpec &kernel, const ArmGroups &groups) {
    BlockGram b;
    const Eigen::Index dim = group_dim(groups);
    b.stacked.resize(groups.total_rows, dim);
    int offset = 0;
    for (int k = 0; k < groups.arms; ++k) {
        const auto &s = groups.samples[static_cast<std::size_t>(k)];
        const auto &r = groups.rows[static_cast<std::size_t>(k)];
        b.offsets.push_back(offset);
        b.sizes.push_back(static_cast<int>(r.size()));
        if (!r.empty()) { b.stacked.middleRows(offset, s.rows()) = s; }
        b.source_rows.insert(b.source_rows.end(), r.begin(), r.end());
        offset += static_cast<int>(r.size());
    }
    b.gram = gram(kernel, b.stacked, b.stacked);
    b.sums = Matrix::Zero(groups.arms, groups.arms);
    for (int j = 0; j < groups.arms; ++j) {
        for (int k = 0; k < groups.arms; ++k) {
            if (b.sizes[static_cast<std::size_t>(j)] == 0 || b.sizes[static_cast<std::size_t>(k)] == 0) { continue; }
            b.sums(j, k) = b.gram
                               .block(b.offsets[static_cast<std::size_t>(j)], b.offsets[static_cast<std::size_t>(k)],
                                      b.sizes[static_cast<std::size_t>(j)], b.sizes[static_cast<std::size_t>(k)])
                               .sum();
        }
    }
    return b;
}

// coeff(j, k) is the derivative of the penalty with respect to sums(j, k).
Matrix block_gradient(const KernelSpec &kernel, const BlockGram &b, const Matrix &coeff, int total_rows) {
    const int arms = static_cast<int>(coeff.rows());
    Matrix weights(b.stacked.rows(), b.stacked.rows());
    for (int j = 0; j < arms; ++j) {
        for (int k = 0; k < arms; ++k) {
            const int nj = b.sizes[static_cast<std::size_t>(j)];
            const int nk = b.sizes[static_cast<std::size_t>(k)];
            if (nj == 0 || nk == 0) { continue; }
            weights.block(b.offsets[static_cast<std::size_t>(j)], b.offsets[static_cast<std::size_t>(k)], nj, nk)
                .setConstant(coeff(j, k));
        }
    }
    Matrix grad_stacked = Matrix::Zero(b.stacked.rows(), b.stacked.cols());
    accumulate_symmetric_gram_gradient(kernel, b.stacked, b.gram, weights, grad_stacked);
    Matrix grad = Matrix::Zero(total_rows, b.stacked.cols());
    scatter_add_rows(grad, b.source_rows, grad_stacked);
    return grad;
}

}  // namespace

PenaltyValue r_pair(const StrategySpec &spec, const ArmGroups &groups, bool with_gradient) {
    require_resolved(spec);
    const int arms = groups.arms;
    const BlockGram b = block_gram(spec.kernel, groups);
    PenaltyValue out;
    Matrix coeff = Matrix::Zero(arms, arms);
    for (int j = 0; j < arms; ++j) {
        for (int k = j + 1; k < arms; ++k) {
            const double nj = b.sizes[static_cast<std::size_t>(j)];
            const double nk = b.sizes[static_cast<std::size_t>(k)];
            if (nj < spec.min_arm_batch || nk < spec.min_arm_batch) {
                ++out.terms_skipped;
                continue;
            }
            const double mmd2 =
                b.sums(j, j) / (nj * nj) + b.sums(k, k) / (nk * nk) - 2.0 * b.sums(j, k) / (nj * nk);
            const RootedTerm r = rooted(mmd2);
            out.value += r.value;
            ++out.terms_evaluated;
            coeff(j, j) += r.scale / (nj * nj);
            coeff(k, k) += r.scale / (nk * nk);
            coeff(j, k) -= r.scale / (nj * nk);
            coeff(k, j) -= r.scale / (nj * nk);
        }
    }
    out.grad_z = with_gradient ? block_gradient(spec.kernel, b, coeff, groups.total_rows)
                               : Matrix::Zero(groups.total_rows, b.stacked.cols());
    renormalize(out, arms * (arms - 1) / 2);
    return out;
}

PenaltyValue r_ova(const StrategySpec &spec, const ArmGroups &groups, bool with_gradient) {
    require_resolved(spec);
    const int arms = groups.arms;
    const BlockGram b = block_gram(spec.kernel, groups);
    const double total_sum = b.sums.sum();
    PenaltyValue out;
    Matrix coeff = Matrix::Zero(arms, arms);
    for (int k = 0; k < arms; ++k) {
        const double nk = b.sizes[static_cast<std::size_t>(k)];
        const double nr = groups.total_rows - nk;
        if (nk < spec.min_arm_batch || nr < spec.min_arm_batch) {
            ++out.terms_skipped;
            continue;
        }
        const double s_kk = b.sums(k, k);
        const double s_kr = b.sums.row(k).sum() - s_kk;
        const double s_rr = total_sum - 2.0 * s_kr - s_kk;
        const double mmd2 = s_kk / (nk * nk) + s_rr / (nr * nr) - 2.0 * s_kr / (nk * nr);
        const RootedTerm r = rooted(mmd2);
        out.value += r.value;
        ++out.terms_evaluated;
        if (r.scale == 0.0) { continue; }
        for (int j = 0; j < arms; ++j) {
            for (int l = 0; l < arms; ++l) {
                if (j == k && l == k) {
                    coeff(j, l) += r.scale / (nk * nk);
                } else if (j == k || l == k) {
                    coeff(j, l) -= r.scale / (nk * nr);
                } else {
                    coeff(j, l) += r.scale / (nr * nr);
                }
            }
        }
    }
    out.grad_z = with_gradient ? block_gradient(spec.kernel, b, coeff, groups.total_rows)
                               : Matrix::Zero(groups.total_rows, b.stacked.cols());
    renormalize(out, arms);
    return out;
}

PenaltyValue r_agg(const StrategySpec &spec, const Matrix &z, std::span<const int> treatments, const Matrix &table,
                   bool with_gradient) {
    require_resolved(spec);
    require(spec.embedding_kernel.is_resolved(), ErrorKind::config,
            "embedding kernel bandwidth must be resolved before evaluating r_agg");
    require(z.rows() == static_cast<Eigen::Index>(treatments.size()), ErrorKind::shape,
            "r_agg: Z rows and treatment count differ");
    require(z.rows() >= 3, ErrorKind::insufficient_data, "r_agg needs at least 3 samples");
    const int arms = static_cast<int>(table.rows());
    const BlockGram b = block_gram(spec.kernel, group_by_arm(z, treatments, arms));
    const double n = static_cast<double>(z.rows());
    Vector counts(arms);
    for (int k = 0; k < arms; ++k) { counts(k) = b.sizes[static_cast<std::size_t>(k)]; }

    // The embedding gram over rows is block-constant, so H L H reduces to a K x K matrix.
    const Matrix lt = gram(spec.embedding_kernel, table, table);
    const Vector l_mean = lt * counts / n;
    const double l_grand = counts.dot(lt * counts) / (n * n);
    Matrix centered_l = lt;
    centered_l.colwise() -= l_mean;
    centered_l.rowwise() -= l_mean.transpose();
    centered_l.array() += l_grand;

    PenaltyValue out;
    out.value = b.sums.cwiseProduct(centered_l).sum() / (n * n);
    out.terms_evaluated = 1;
    out.grad_table = Matrix::Zero(table.rows(), table.cols());
    if (!with_gradient) {
        out.grad_z = Matrix::Zero(z.rows(), z.cols());
        return out;
    }
    out.grad_z = block_gradient(spec.kernel, b, centered_l / (n * n), static_cast<int>(z.rows()));
    // Block sums of H K H give the derivative with respect to the embedding gram.
    const Vector k_mean = b.sums.rowwise().sum() / n;
    const double k_grand = b.sums.sum() / (n * n);
    Matrix centered_k = b.sums;
    centered_k -= k_mean * counts.transpose();
    centered_k -= counts * k_mean.transpose();
    centered_k += k_grand * (counts * counts.transpose());
    accumulate_symmetric_gram_gradient(spec.embedding_kernel, table, lt, centered_k / (n * n), out.grad_table);
    return out;
}

GeodesicValue geodesic_penalty(const Matrix &table, const GeodesicGraph &graph, bool with_gradient) {
    const auto arms = static_cast<int>(table.rows());
    require(arms >= 2, ErrorKind::degenerate, "geodesic_penalty needs at least 2 treatments");
    require(arms == graph.nodes(), ErrorKind::shape, "geodesic_penalty: table rows must equal graph nodes");
    GeodesicValue out;
    out.grad_table = Matrix::Zero(table.rows(), table.cols());
    const double pairs = static_cast<double>(arms) * (arms - 1);
    for (int i = 0; i < arms; ++i) {
        for (int j = 0; j < arms; ++j) {
            if (i == j) { continue; }
            const Eigen::RowVectorXd diff = table.row(i) - table.row(j);
            const double dist = diff.norm();
            const double gap = dist - graph.distance(i, j);
            out.value += gap * gap;
            if (with_gradient && dist > 0.0) {
                const Eigen::RowVectorXd g = (2.0 * gap / (dist * pairs)) * diff;
                out.grad_table.row(i) += g;
                out.grad_table.row(j) -= g;
            }
        }
    }
    out.value /= pairs;
    return out;
}

PenaltyValue strategy_penalty(const StrategySpec &spec, const Matrix &z, std::span<const int> treatments,
                              const Matrix &table, const GeodesicGraph *graph, bool with_gradient) {
    require(spec.geodesic_weight == 0.0 || graph != nullptr, ErrorKind::config,
            "strategy_penalty: a geodesic graph is required when geodesic_weight > 0");
    const int arms = static_cast<int>(table.rows());
    PenaltyValue out;
    switch (spec.kind) {
        case StrategyKind::pair: out = r_pair(spec, group_by_arm(z, treatments, arms), with_gradient); break;
        case StrategyKind::ova: out = r_ova(spec, group_by_arm(z, treatments, arms), with_gradient); break;
        case StrategyKind::agg: out = r_agg(spec, z, treatments, table, with_gradient); break;
    }
    if (out.grad_table.size() == 0) { out.grad_table = Matrix::Zero(table.rows(), table.cols()); }
    if (spec.geodesic_weight > 0.0) {
        const GeodesicValue geo = geodesic_penalty(table, *graph, with_gradient);
        out.value += spec.geodesic_weight * geo.value;
        if (with_gradient) { out.grad_table += spec.geodesic_weight * geo.grad_table; }
    }
    return out;
}

}  // namespace multibal
