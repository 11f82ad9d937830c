#include "multibal/model.hpp"

#include "multibal/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace multibal {

const char *to_string(HeadMode m) {
    return m == HeadMode::multi_head ? "multi_head" : "embed_conditioned";
}

HeadMode head_mode_from_string(const std::string &name) {
    if (name == "multi_head") { return HeadMode::multi_head; }
    if (name == "embed_conditioned") { return HeadMode::embed_conditioned; }
    throw Error(ErrorKind::config, "unknown head mode '" + name + "'");
}

std::size_t ModelParams::parameter_count() const {
    std::size_t count = phi.parameter_count() + static_cast<std::size_t>(table.size());
    for (const auto &h : heads) { count += h.parameter_count(); }
    return count;
}

Vector ModelParams::pack() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    append_flat(phi, flat);
    for (const auto &h : heads) { append_flat(h, flat); }
    flat.insert(flat.end(), table.data(), table.data() + table.size());
    return Eigen::Map<const Vector>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

void ModelParams::unpack(const Vector &flat) {
    require(static_cast<std::size_t>(flat.size()) == parameter_count(), ErrorKind::shape,
            "ModelParams::unpack: expected " + std::to_string(parameter_count()) + " values, got " +
                std::to_string(flat.size()));
    const std::span<const double> view(flat.data(), static_cast<std::size_t>(flat.size()));
    std::size_t offset = load_flat(phi, view, 0);
    for (auto &h : heads) { offset = load_flat(h, view, offset); }
    std::copy(view.begin() + static_cast<std::ptrdiff_t>(offset), view.end(), table.data());
}

void ModelParams::check() const {
    require(!phi.layers.empty(), ErrorKind::shape, "model: empty representation network");
    require(table.rows() >= 1 && table.cols() >= 1, ErrorKind::shape, "model: empty embedding table");
    const int expected_in = head_mode == HeadMode::multi_head ? rep_dim() : rep_dim() + embedding_dim();
    const std::size_t expected_heads = head_mode == HeadMode::multi_head ? static_cast<std::size_t>(arms()) : 1;
    require(heads.size() == expected_heads, ErrorKind::shape,
            "model: " + std::string(to_string(head_mode)) + " needs " + std::to_string(expected_heads) +
                " heads, found " + std::to_string(heads.size()));
    for (const auto &h : heads) {
        require(!h.layers.empty() && h.input_dim() == expected_in && h.output_dim() == 1, ErrorKind::shape,
                "model: head dimensions do not match the representation");
    }
}

void TrainConfig::validate(int arms, const StrategySpec &spec) const {
    require(epochs >= 0, ErrorKind::config, "train.epochs must be >= 0");
    require(batch_size >= arms * spec.min_arm_batch, ErrorKind::config,
            "train.batch_size must be >= K * min_arm_batch (" + std::to_string(arms * spec.min_arm_batch) + ")");
    require(std::isfinite(learning_rate) && learning_rate > 0.0, ErrorKind::config, "train.lr must be > 0");
    require(rep_dim >= 1, ErrorKind::config, "train.rep_dim must be >= 1");
    require(balance_subsample >= 2, ErrorKind::config, "train.balance_subsample must be >= 2");
    for (int h : phi_hidden) { require(h >= 1, ErrorKind::config, "train.phi_hidden widths must be >= 1"); }
    for (int h : head_hidden) { require(h >= 1, ErrorKind::config, "train.head_hidden widths must be >= 1"); }
}

HeadMode default_head_mode(int arms, StrategyKind kind) {
    return (kind == StrategyKind::agg || arms > 10) ? HeadMode::embed_conditioned : HeadMode::multi_head;
}

ModelParams init_model(const TrainConfig &cfg, int input_dim, int arms, int embedding_dim, HeadMode mode,
                       RngStream &rng) {
    require(input_dim >= 1 && arms >= 1 && embedding_dim >= 1, ErrorKind::shape, "init_model: bad dimensions");
    ModelParams theta;
    theta.head_mode = mode;
    std::vector<int> dims{input_dim};
    dims.insert(dims.end(), cfg.phi_hidden.begin(), cfg.phi_hidden.end());
    dims.push_back(cfg.rep_dim);
    theta.phi = MlpParams::init(dims, Activation::relu, Activation::identity, rng);
    const int head_in = mode == HeadMode::multi_head ? cfg.rep_dim : cfg.rep_dim + embedding_dim;
    std::vector<int> head_dims{head_in};
    head_dims.insert(head_dims.end(), cfg.head_hidden.begin(), cfg.head_hidden.end());
    head_dims.push_back(1);
    const int head_count = mode == HeadMode::multi_head ? arms : 1;
    for (int k = 0; k < head_count; ++k) {
        theta.heads.push_back(MlpParams::init(head_dims, Activation::relu, Activation::identity, rng));
    }
    theta.table.resize(arms, embedding_dim);
    for (Eigen::Index i = 0; i < theta.table.size(); ++i) { theta.table.data()[i] = 0.1 * rng.normal(); }
    return theta;
}

namespace {

Matrix conditioned_input(const Matrix &z, const Matrix &embeddings) {
    Matrix in(z.rows(), z.cols() + embeddings.cols());
    in.leftCols(z.cols()) = z;
    in.rightCols(embeddings.cols()) = embeddings;
    return in;
}

struct HeadPass {
    Vector pred;
    std::vector<std::vector<int>> arm_rows;  // multi_head only
    std::vector<MlpCache> caches;            // one per head
};

HeadPass heads_forward(const ModelParams &theta, const Matrix &z, std::span<const int> t) {
    HeadPass pass;
    pass.pred.resize(z.rows());
    if (theta.head_mode == HeadMode::multi_head) {
        pass.arm_rows.resize(static_cast<std::size_t>(theta.arms()));
        for (std::size_t i = 0; i < t.size(); ++i) {
            require(t[i] >= 0 && t[i] < theta.arms(), ErrorKind::shape, "treatment index out of range");
            pass.arm_rows[static_cast<std::size_t>(t[i])].push_back(static_cast<int>(i));
        }
        pass.caches.resize(theta.heads.size());
        for (std::size_t k = 0; k < theta.heads.size(); ++k) {
            const auto &rows = pass.arm_rows[k];
            if (rows.empty()) { continue; }
            auto [out, cache] = mlp_forward(theta.heads[k], gather_rows(z, rows));
            for (std::size_t r = 0; r < rows.size(); ++r) { pass.pred(rows[r]) = out(static_cast<Eigen::Index>(r), 0); }
            pass.caches[k] = std::move(cache);
        }
    } else {
        for (int ti : t) { require(ti >= 0 && ti < theta.arms(), ErrorKind::shape, "treatment index out of range"); }
        auto [out, cache] = mlp_forward(theta.heads.front(), conditioned_input(z, gather_rows(theta.table, t)));
        pass.pred = out.col(0);
        pass.caches.push_back(std::move(cache));
    }
    return pass;
}

struct HeadGrads {
    std::vector<MlpGrads> heads;
    Matrix grad_z;
    Matrix grad_table;
};

HeadGrads heads_backward(const ModelParams &theta, const HeadPass &pass, std::span<const int> t,
                         const Vector &grad_pred) {
    HeadGrads g;
    g.grad_z = Matrix::Zero(grad_pred.size(), theta.rep_dim());
    g.grad_table = Matrix::Zero(theta.table.rows(), theta.table.cols());
    for (const auto &h : theta.heads) { g.heads.push_back(MlpGrads::zeros_like(h)); }
    if (theta.head_mode == HeadMode::multi_head) {
        for (std::size_t k = 0; k < theta.heads.size(); ++k) {
            const auto &rows = pass.arm_rows[k];
            if (rows.empty()) { continue; }
            Matrix go(static_cast<Eigen::Index>(rows.size()), 1);
            for (std::size_t r = 0; r < rows.size(); ++r) { go(static_cast<Eigen::Index>(r), 0) = grad_pred(rows[r]); }
            g.heads[k] = mlp_backward(theta.heads[k], pass.caches[k], go);
            scatter_add_rows(g.grad_z, rows, g.heads[k].input);
        }
    } else {
        const Matrix go = grad_pred;
        g.heads[0] = mlp_backward(theta.heads[0], pass.caches[0], go);
        g.grad_z = g.heads[0].input.leftCols(theta.rep_dim());
        scatter_add_rows(g.grad_table, t, g.heads[0].input.rightCols(theta.embedding_dim()));
    }
    return g;
}

Vector pack_grads(const MlpGrads &phi, const std::vector<MlpGrads> &heads, const Matrix &table) {
    std::vector<double> flat;
    append_flat(phi, flat);
    for (const auto &h : heads) { append_flat(h, flat); }
    flat.insert(flat.end(), table.data(), table.data() + table.size());
    return Eigen::Map<const Vector>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

StrategySpec without_geodesic(StrategySpec spec) {
    spec.geodesic_weight = 0.0;
    return spec;
}

}  // namespace

Matrix predict_means(const ModelParams &theta, const Matrix &x) {
    theta.check();
    const Matrix z = mlp_apply(theta.phi, x);
    Matrix out(x.rows(), theta.arms());
    for (int k = 0; k < theta.arms(); ++k) {
        if (theta.head_mode == HeadMode::multi_head) {
            out.col(k) = mlp_apply(theta.heads[static_cast<std::size_t>(k)], z).col(0);
        } else {
            const Matrix e = theta.table.row(k).replicate(z.rows(), 1);
            out.col(k) = mlp_apply(theta.heads.front(), conditioned_input(z, e)).col(0);
        }
    }
    return out;
}

Vector predict_with_embedding(const ModelParams &theta, const Matrix &z, const Vector &embedding) {
    require(theta.head_mode == HeadMode::embed_conditioned, ErrorKind::config,
            "predict_with_embedding needs an embed_conditioned model");
    require(embedding.size() == theta.embedding_dim(), ErrorKind::shape, "embedding dimension mismatch");
    require(z.cols() == theta.rep_dim(), ErrorKind::shape, "representation dimension mismatch");
    const Matrix e = embedding.transpose().replicate(z.rows(), 1);
    return mlp_apply(theta.heads.front(), conditioned_input(z, e)).col(0);
}

Batch make_batch(const Dataset &ds, const std::vector<int> &rows) {
    Batch b;
    b.x = gather_rows(ds.x, rows);
    b.t.reserve(rows.size());
    b.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        b.t.push_back(ds.t[static_cast<std::size_t>(rows[i])]);
        b.y(static_cast<Eigen::Index>(i)) = ds.y(rows[i]);
    }
    return b;
}

Batch full_batch(const Dataset &ds) {
    return Batch{ds.x, ds.t, ds.y};
}

LossValue factual_loss(const ModelParams &theta, const Batch &batch, bool with_gradient) {
    require(batch.rows() > 0, ErrorKind::insufficient_data, "factual_loss: empty batch");
    require(static_cast<int>(batch.t.size()) == batch.rows() && batch.y.size() == batch.rows(), ErrorKind::shape,
            "factual_loss: batch arrays differ in length");
    theta.check();
    auto [z, phi_cache] = mlp_forward(theta.phi, batch.x);
    const HeadPass pass = heads_forward(theta, z, batch.t);
    const Vector residual = pass.pred - batch.y;
    LossValue out;
    out.value = residual.squaredNorm() / batch.rows();
    if (with_gradient) {
        const Vector grad_pred = (2.0 / batch.rows()) * residual;
        const HeadGrads hg = heads_backward(theta, pass, batch.t, grad_pred);
        const MlpGrads pg = mlp_backward(theta.phi, phi_cache, hg.grad_z);
        out.grad = pack_grads(pg, hg.heads, hg.grad_table);
    }
    return out;
}

Vector factual_losses(const ModelParams &theta, const Batch &batch) {
    theta.check();
    const Matrix z = mlp_apply(theta.phi, batch.x);
    const HeadPass pass = heads_forward(theta, z, batch.t);
    return (pass.pred - batch.y).array().square().matrix();
}

ObjectiveValue objective(const ModelParams &theta, const Batch &factual_batch, const Batch &balance_batch,
                         double alpha, const StrategySpec &spec, const GeodesicGraph *graph, bool with_gradient) {
    require(std::isfinite(alpha) && alpha >= 0.0, ErrorKind::config, "objective: alpha must be >= 0");
    require(spec.geodesic_weight == 0.0 || graph != nullptr, ErrorKind::config,
            "objective: geodesic_weight > 0 needs a graph");
    require(factual_batch.rows() > 0, ErrorKind::insufficient_data, "objective: empty batch");
    theta.check();

    auto [z, phi_cache] = mlp_forward(theta.phi, factual_batch.x);
    const HeadPass pass = heads_forward(theta, z, factual_batch.t);
    const Vector residual = pass.pred - factual_batch.y;
    ObjectiveValue out;
    out.factual = residual.squaredNorm() / factual_batch.rows();
    out.value = out.factual;

    HeadGrads hg;
    MlpGrads pg;
    if (with_gradient) {
        hg = heads_backward(theta, pass, factual_batch.t, (2.0 / factual_batch.rows()) * residual);
        pg = mlp_backward(theta.phi, phi_cache, hg.grad_z);
    }

    if (alpha > 0.0) {
        auto [zb, bal_cache] = mlp_forward(theta.phi, balance_batch.x);
        const PenaltyValue pen =
            strategy_penalty(without_geodesic(spec), zb, balance_batch.t, theta.table, nullptr, with_gradient);
        out.penalty = pen.value;
        out.value += alpha * pen.value;
        if (with_gradient) {
            pg.add(mlp_backward(theta.phi, bal_cache, alpha * pen.grad_z));
            hg.grad_table += alpha * pen.grad_table;
        }
    }
    if (spec.geodesic_weight > 0.0) {
        const GeodesicValue geo = geodesic_penalty(theta.table, *graph, with_gradient);
        out.value += spec.geodesic_weight * geo.value;
        if (with_gradient) { hg.grad_table += spec.geodesic_weight * geo.grad_table; }
    }
    require(std::isfinite(out.value), ErrorKind::numeric, "objective is not finite");
    if (with_gradient) { out.grad = pack_grads(pg, hg.heads, hg.grad_table); }
    return out;
}

ObjectiveValue objective(const ModelParams &theta, const Batch &batch, double alpha, const StrategySpec &spec,
                         const GeodesicGraph *graph, bool with_gradient) {
    return objective(theta, batch, batch, alpha, spec, graph, with_gradient);
}

double imbalance(const ModelParams &theta, const Batch &batch, const StrategySpec &spec) {
    theta.check();
    const Matrix z = mlp_apply(theta.phi, batch.x);
    return strategy_penalty(without_geodesic(spec), z, batch.t, theta.table, nullptr, false).value;
}

std::vector<int> stratified_batch(const std::vector<std::vector<int>> &arm_rows, int size, RngStream &rng) {
    require(!arm_rows.empty() && size >= 1, ErrorKind::config, "stratified_batch: bad arguments");
    const int arms = static_cast<int>(arm_rows.size());
    const int per_arm = (size + arms - 1) / arms;
    std::vector<int> rows;
    rows.reserve(static_cast<std::size_t>(per_arm * arms));
    for (const auto &arm : arm_rows) {
        const int take = std::min(per_arm, static_cast<int>(arm.size()));
        for (int idx : rng.sample_without_replacement(static_cast<int>(arm.size()), take)) {
            rows.push_back(arm[static_cast<std::size_t>(idx)]);
        }
    }
    return rows;
}

std::vector<int> stratified_subsample(const std::vector<std::vector<int>> &arm_rows, int size, int min_per_arm,
                                      RngStream &rng) {
    std::size_t total = 0;
    for (const auto &arm : arm_rows) { total += arm.size(); }
    require(total > 0 && size >= 1, ErrorKind::config, "stratified_subsample: bad arguments");
    std::vector<int> rows;
    if (static_cast<std::size_t>(size) >= total) {
        for (const auto &arm : arm_rows) { rows.insert(rows.end(), arm.begin(), arm.end()); }
        return rows;
    }
    for (const auto &arm : arm_rows) {
        const int available = static_cast<int>(arm.size());
        const auto share = static_cast<int>(std::lround(static_cast<double>(size) * available / static_cast<double>(total)));
        const int take = std::min(available, std::max(share, min_per_arm));
        for (int idx : rng.sample_without_replacement(available, take)) {
            rows.push_back(arm[static_cast<std::size_t>(idx)]);
        }
    }
    return rows;
}

TrainResult train(const Dataset &ds, double alpha, const StrategySpec &spec, const TrainConfig &cfg,
                  const GeodesicGraph *graph) {
    ds.check_shapes();
    spec.validate();
    cfg.validate(ds.arms, spec);
    require(std::isfinite(alpha) && alpha >= 0.0, ErrorKind::config, "train: alpha must be >= 0");
    require(spec.geodesic_weight == 0.0 || graph != nullptr, ErrorKind::config,
            "train: geodesic_weight > 0 needs a graph");
    require(graph == nullptr || graph->nodes() == ds.arms, ErrorKind::shape, "train: graph nodes must equal K");
    const auto counts = ds.arm_counts();
    for (std::size_t k = 0; k < counts.size(); ++k) {
        require(counts[k] >= 2, ErrorKind::overlap_violation,
                "arm " + std::to_string(k) + " has " + std::to_string(counts[k]) + " samples (need >= 2)");
    }

    const RngStream root(cfg.seed);
    RngStream init_rng = root.split(1);
    RngStream batch_rng = root.split(2);
    RngStream balance_rng = root.split(3);
    RngStream trace_rng = root.split(4);

    const HeadMode mode = cfg.head_mode.value_or(default_head_mode(ds.arms, spec.kind));
    TrainResult result;
    result.theta = init_model(cfg, ds.covariates(), ds.arms, spec.embedding_dim, mode, init_rng);
    result.resolved_spec = spec;
    result.resolved_spec.kernel = resolve(spec.kernel, mlp_apply(result.theta.phi, ds.x));
    result.resolved_spec.embedding_kernel = resolve(spec.embedding_kernel, result.theta.table);
    const StrategySpec &resolved = result.resolved_spec;

    std::vector<std::vector<int>> arm_rows(static_cast<std::size_t>(ds.arms));
    for (int i = 0; i < ds.rows(); ++i) { arm_rows[static_cast<std::size_t>(ds.t[static_cast<std::size_t>(i)])].push_back(i); }

    AdamConfig adam;
    adam.learning_rate = cfg.learning_rate;
    Vector flat = result.theta.pack();
    OptimState state(static_cast<std::size_t>(flat.size()), adam);
    const int steps = std::max(1, (ds.rows() + cfg.batch_size - 1) / cfg.batch_size);
    const int balance_size = std::min(ds.rows(), cfg.balance_subsample);
    // multi_head heads never read the table; it stays at its initial value.
    const bool freeze_table = mode == HeadMode::multi_head && spec.geodesic_weight == 0.0;
    const Eigen::Index table_size = result.theta.table.size();

    result.trace.reserve(static_cast<std::size_t>(cfg.epochs));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        double factual_sum = 0.0;
        for (int s = 0; s < steps; ++s) {
            const Batch fb = make_batch(ds, stratified_batch(arm_rows, cfg.batch_size, batch_rng));
            ObjectiveValue obj;
            if (alpha > 0.0) {
                const Batch bb =
                    make_batch(ds, stratified_subsample(arm_rows, balance_size, spec.min_arm_batch, balance_rng));
                obj = objective(result.theta, fb, bb, alpha, resolved, graph, true);
            } else {
                obj = objective(result.theta, fb, fb, 0.0, resolved, graph, true);
            }
            factual_sum += obj.factual;
            if (freeze_table) { obj.grad.tail(table_size).setZero(); }
            adam_step(flat, obj.grad, state);
            result.theta.unpack(flat);
        }
        require(flat.allFinite(), ErrorKind::numeric, "training diverged (non-finite parameters)");
        EpochRecord rec;
        rec.epoch = epoch;
        rec.factual = factual_sum / steps;
        const Batch tb = make_batch(ds, stratified_subsample(arm_rows, balance_size, spec.min_arm_batch, trace_rng));
        rec.imbalance = imbalance(result.theta, tb, resolved);
        rec.objective = rec.factual + alpha * rec.imbalance;
        if (spec.geodesic_weight > 0.0) {
            rec.objective += spec.geodesic_weight * geodesic_penalty(result.theta.table, *graph, false).value;
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.trace.push_back(rec);
    }
    return result;
}

double lipschitz_estimate(const ModelParams &theta, const Matrix &x, int pair_budget, RngStream &rng) {
    require(x.rows() >= 2, ErrorKind::insufficient_data, "lipschitz_estimate needs >= 2 rows");
    require(pair_budget >= 1, ErrorKind::config, "lipschitz_estimate: pair_budget must be >= 1");
    const Matrix z = mlp_apply(theta.phi, x);
    const auto n = x.rows();
    double best = 0.0;
    bool any = false;
    auto visit = [&](Eigen::Index i, Eigen::Index j) {
        const double dx = (x.row(i) - x.row(j)).norm();
        if (dx == 0.0) { return; }
        any = true;
        best = std::max(best, (z.row(i) - z.row(j)).norm() / dx);
    };
    const double all_pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    if (all_pairs <= pair_budget) {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i + 1; j < n; ++j) { visit(i, j); }
        }
    } else {
        for (int p = 0; p < pair_budget; ++p) {
            const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
            auto j = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n - 1)));
            if (j >= i) { ++j; }
            visit(i, j);
        }
    }
    require(any, ErrorKind::degenerate, "lipschitz_estimate: all sampled rows are identical");
    return best;
}

}  // namespace multibal
