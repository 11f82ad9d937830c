#include "multibal/datagen.hpp"
#include "multibal/errors.hpp"
#include "multibal/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace multibal {

namespace {

double median(std::vector<double> v) {
    require(!v.empty(), ErrorKind::insufficient_data, "median of an empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

MlpParams frozen_map(int input_dim, int rep_dim, RngStream &rng) {
    const std::vector<int> dims{input_dim, 64, 64, rep_dim};
    return MlpParams::init(dims, Activation::relu, Activation::identity, rng);
}

StrategySpec resolved_spec(StrategyKind kind, const Matrix &z, const Matrix &table) {
    StrategySpec spec;
    spec.kind = kind;
    spec.embedding_dim = static_cast<int>(table.cols());
    spec.kernel = resolve(spec.kernel, z);
    spec.embedding_kernel = resolve(spec.embedding_kernel, table);
    return spec;
}

int term_count(StrategyKind kind, int arms) {
    switch (kind) {
        case StrategyKind::pair: return arms * (arms - 1) / 2;
        case StrategyKind::ova: return arms;
        case StrategyKind::agg: return 1;
    }
    return 1;
}

}  // namespace

std::vector<ConcentrationRow> concentration_experiment(const ConcentrationConfig &cfg) {
    require(cfg.replicates >= 20, ErrorKind::config, "concentration needs at least 20 replicates");
    require(cfg.n >= 4 && cfg.covariates >= 1, ErrorKind::config, "concentration: bad sizes");
    std::vector<ConcentrationRow> rows;
    for (int arms : cfg.arm_list) {
        require(arms >= 2, ErrorKind::config, "concentration: K must be >= 2");
        const RngStream law(cfg.seed, static_cast<std::uint64_t>(arms));
        RngStream setup = law.split(0);
        Matrix w(arms, cfg.covariates);
        for (Eigen::Index i = 0; i < w.size(); ++i) { w.data()[i] = setup.uniform(-1.0, 1.0); }
        const MlpParams phi = frozen_map(cfg.covariates, cfg.rep_dim, setup);
        Matrix table(arms, cfg.embedding_dim);
        for (Eigen::Index i = 0; i < table.size(); ++i) { table.data()[i] = setup.normal(); }

        std::vector<std::vector<double>> values(cfg.strategies.size());
        std::vector<StrategySpec> specs;
        for (int r = 0; r < cfg.replicates; ++r) {
            RngStream draw = law.split(1000 + static_cast<std::uint64_t>(r));
            Matrix x(cfg.n, cfg.covariates);
            for (Eigen::Index i = 0; i < x.size(); ++i) { x.data()[i] = draw.normal(); }
            std::vector<int> t(static_cast<std::size_t>(cfg.n));
            for (int i = 0; i < cfg.n; ++i) {
                const Vector p = softmax_propensity(w, std::span<const double>(x.row(i).data(), x.cols()), cfg.kappa);
                t[static_cast<std::size_t>(i)] = draw.categorical(std::span<const double>(p.data(), p.size()));
            }
            const Matrix z = mlp_apply(phi, x);
            if (specs.empty()) {
                for (StrategyKind kind : cfg.strategies) { specs.push_back(resolved_spec(kind, z, table)); }
            }
            for (std::size_t s = 0; s < specs.size(); ++s) {
                values[s].push_back(strategy_penalty(specs[s], z, t, table, nullptr, false).value);
            }
        }
        for (std::size_t s = 0; s < cfg.strategies.size(); ++s) {
            const auto &v = values[s];
            double mean = 0.0;
            for (double x : v) { mean += x; }
            mean /= static_cast<double>(v.size());
            double ss = 0.0;
            for (double x : v) { ss += (x - mean) * (x - mean); }
            rows.push_back({cfg.strategies[s], arms, cfg.n, cfg.replicates, mean,
                            std::sqrt(ss / static_cast<double>(v.size() - 1))});
        }
    }
    return rows;
}

std::vector<TimingRow> timing_benchmark(const TimingConfig &cfg) {
    require(cfg.penalty_repeats >= 1 && cfg.epochs >= 0, ErrorKind::config, "timing: bad repeat counts");
    std::vector<TimingRow> rows;
    for (int arms : cfg.arm_list) {
        GenHardParams gp;
        gp.n = cfg.n;
        gp.arms = arms;
        gp.seed = cfg.seed;
        const Dataset ds = gen_hard(gp);
        RngStream setup(cfg.seed, 100 + static_cast<std::uint64_t>(arms));
        const MlpParams phi = frozen_map(ds.covariates(), cfg.train.rep_dim, setup);
        Matrix table(arms, 8);
        for (Eigen::Index i = 0; i < table.size(); ++i) { table.data()[i] = 0.1 * setup.normal(); }
        const Matrix z = mlp_apply(phi, ds.x);
        for (StrategyKind kind : cfg.strategies) {
            const StrategySpec spec = resolved_spec(kind, z, table);
            std::vector<double> evals;
            for (int r = 0; r < cfg.penalty_repeats; ++r) {
                const auto start = std::chrono::steady_clock::now();
                const PenaltyValue pv = strategy_penalty(spec, z, ds.t, table, nullptr, true);
                evals.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
                require(std::isfinite(pv.value), ErrorKind::numeric, "timing: non-finite penalty");
            }
            TimingRow row;
            row.strategy = kind;
            row.arms = arms;
            row.n = cfg.n;
            row.seconds_per_penalty = median(evals);
            row.terms = term_count(kind, arms);
            if (cfg.epochs > 0) {
                TrainConfig tc = cfg.train;
                tc.epochs = cfg.epochs;
                tc.seed = cfg.seed;
                StrategySpec train_spec;
                train_spec.kind = kind;
                const TrainResult tr = train(ds, 1.0, train_spec, tc);
                std::vector<double> epochs;
                for (const auto &rec : tr.trace) { epochs.push_back(rec.seconds); }
                row.seconds_per_epoch = median(epochs);
            }
            rows.push_back(row);
        }
    }
    return rows;
}

}  // namespace multibal
