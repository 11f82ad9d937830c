// Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.
// Usage: acceptance [criterion ids...]   (default: all)

#include "commands.hpp"
#include "config.hpp"

#include "multibal/boab.hpp"
#include "multibal/datagen.hpp"
#include "multibal/eval.hpp"
#include "multibal/gradcheck.hpp"
#include "multibal/kernels.hpp"
#include "multibal/model.hpp"
#include "multibal/model_io.hpp"

#include "oracles.hpp"
#include "stub_dataset.hpp"
#include "stub_profile.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace multibal;
namespace fs = std::filesystem;

namespace limits {
// 1: kernel statistics
constexpr int kOracleInstances = 50;
constexpr int kOracleMaxRows = 8;
constexpr double kOracleTolerance = 1e-10;
// 2: gradients
constexpr int kGradInstances = 20;
constexpr double kGradTolerance = 1e-4;
// 3: K=4 efficacy
constexpr int kEfficacySeeds = 5;
constexpr double kBaselineLo = 0.6;
constexpr double kBaselineHi = 1.0;
constexpr double kOvaSmallAlpha = 0.5;
constexpr int kOvaSmallAlphaSeeds = 3;
// 4: K=20 stability
constexpr int kStabilitySeeds = 3;
constexpr double kPairDegradation = 1.15;
constexpr double kAggSpread = 1.3;
// 5: timing
constexpr double kPairTimeGrowth = 10.0;
constexpr double kAggTimeGrowth = 1.5;
constexpr double kAggSpeedup = 5.0;
// 6: concentration
constexpr int kConcentrationReps = 50;
constexpr double kPairSdGrowth = 5.0;
constexpr double kAggSdLo = 0.5;
constexpr double kAggSdHi = 2.0;
constexpr double kSdShrink = 1.4;
// 7: stub search
constexpr double kStubScoreNoise = 0.2;
constexpr int kStubTrials = 100;
constexpr int kStubWithinBound = 95;
constexpr double kStubValueNoise = 0.05;
constexpr double kEnvelopeTolerance = 1e-12;
// 8: bootstrap
constexpr int kBootstrapReplicates = 30;
constexpr double kBootstrapSeRatio = 0.7;
// 9: monotone imbalance
constexpr double kMonotoneSlack = 0.05;
constexpr int kMonotoneViolations = 1;
constexpr int kMonotoneSeeds = 3;
// 10: dose response
constexpr int kDoseSeeds = 5;
constexpr int kDoseHits = 4;
// 11, 12: topology
constexpr int kTopologySeeds = 3;
constexpr int kTopologyHits = 2;
constexpr double kInterpolationTolerance = 0.5;
// seeds for every trained criterion
constexpr std::uint64_t kSeedBase = 101;
}  // namespace limits

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double budget_seconds;
    std::function<Verdict()> run;
};

std::string f(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::string join(const std::vector<double> &v) {
    std::string s;
    for (double x : v) { s += (s.empty() ? "" : ",") + f(x); }
    return "[" + s + "]";
}

fs::path scratch_root() { return fs::temp_directory_path() / "multibal_acceptance"; }

Vector flat(const Matrix &m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

// ---------------------------------------------------------------- 1

Verdict kernel_oracles() {
    double worst = 0.0;
    for (int trial = 0; trial < limits::kOracleInstances; ++trial) {
        RngStream rng(1000 + static_cast<std::uint64_t>(trial));
        const int m = 2 + static_cast<int>(rng.below(limits::kOracleMaxRows - 1));
        const int n = 2 + static_cast<int>(rng.below(limits::kOracleMaxRows - 1));
        const int d = 1 + static_cast<int>(rng.below(4));
        const bool lin = trial % 5 == 4;
        const double gamma = lin ? 0.0 : rng.uniform(0.3, 3.0);
        const KernelSpec spec = lin ? KernelSpec::linear() : KernelSpec::rbf(gamma);
        const Matrix p = oracle::random_matrix(m, d, rng), q = oracle::random_matrix(n, d, rng);
        auto gap = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
        worst = std::max(worst, gap(mmd2_u(spec, p, q, false).value, oracle::mmd2_u(p, q, gamma)));
        worst = std::max(worst, gap(mmd2_v(spec, p, q, false).value, oracle::mmd2_v(p, q, gamma)));

        const int rows = 3 + static_cast<int>(rng.below(limits::kOracleMaxRows - 2));
        const Matrix z = oracle::random_matrix(rows, d, rng), e = oracle::random_matrix(rows, 2, rng);
        const double gamma_e = trial % 7 == 6 ? 0.0 : rng.uniform(0.3, 3.0);
        const KernelSpec spec_e = gamma_e == 0.0 ? KernelSpec::linear() : KernelSpec::rbf(gamma_e);
        worst = std::max(worst, gap(hsic_v(spec, spec_e, z, e, false).value, oracle::hsic_v(z, gamma, e, gamma_e)));
    }
    return {worst <= limits::kOracleTolerance,
            std::to_string(limits::kOracleInstances) + " instances x {mmd2_u, mmd2_v, hsic_v}, worst relative gap " +
                f(worst) + " (limit " + f(limits::kOracleTolerance) + ")"};
}

// ---------------------------------------------------------------- 2

ModelParams smooth_model(int input, int arms, HeadMode mode, RngStream &rng) {
    TrainConfig cfg;
    cfg.rep_dim = 3;
    cfg.phi_hidden = {6};
    cfg.head_hidden = {4};
    ModelParams theta = init_model(cfg, input, arms, 2, mode, rng);
    auto smooth = [](MlpParams &m) {
        for (std::size_t l = 0; l + 1 < m.layers.size(); ++l) { m.layers[l].activation = Activation::tanh; }
    };
    smooth(theta.phi);
    for (auto &h : theta.heads) { smooth(h); }
    for (Eigen::Index i = 0; i < theta.table.size(); ++i) { theta.table.data()[i] = rng.normal(); }
    return theta;
}

Batch random_batch(int n, int input, int arms, RngStream &rng) {
    Batch b;
    b.x = oracle::random_matrix(n, input, rng);
    b.t = oracle::covering_treatments(n, arms, 2, rng);
    b.y.resize(n);
    for (int i = 0; i < n; ++i) { b.y(i) = rng.normal(); }
    return b;
}

StrategySpec fixed_spec(StrategyKind kind, KernelSpec k = KernelSpec::rbf(1.3), KernelSpec e = KernelSpec::rbf(1.1)) {
    StrategySpec s;
    s.kind = kind;
    s.kernel = k;
    s.embedding_kernel = e;
    s.embedding_dim = 2;
    return s;
}

Verdict gradient_suite() {
    std::map<std::string, double> worst;
    auto record = [&](const std::string &name, const DifferentiableLoss &loss, const Vector &p) {
        worst[name] = std::max(worst[name], finite_diff_check(loss, p).max_relative_error);
    };
    for (int trial = 0; trial < limits::kGradInstances; ++trial) {
        RngStream rng(2000 + static_cast<std::uint64_t>(trial));
        const int arms = 2 + trial % 4;
        const HeadMode mode = trial % 2 == 0 ? HeadMode::multi_head : HeadMode::embed_conditioned;
        const KernelSpec k = trial % 5 == 4 ? KernelSpec::linear() : KernelSpec::rbf(1.3);

        const ModelParams theta = smooth_model(3, arms, mode, rng);
        const Batch fb = random_batch(arms * 3, 3, arms, rng);
        record("factual",
               [&](const Vector &p, Vector *g) {
                   ModelParams m = theta;
                   m.unpack(p);
                   const LossValue v = factual_loss(m, fb, g != nullptr);
                   if (g != nullptr) { *g = v.grad; }
                   return v.value;
               },
               theta.pack());

        const int n = arms * 3 + 2;
        const auto t = oracle::covering_treatments(n, arms, 2, rng);
        const Matrix z = oracle::random_matrix(n, 3, rng);
        for (StrategyKind kind : {StrategyKind::pair, StrategyKind::ova}) {
            const StrategySpec spec = fixed_spec(kind, k);
            record(to_string(kind),
                   [&](const Vector &p, Vector *g) {
                       const Matrix zz = Eigen::Map<const Matrix>(p.data(), n, 3);
                       const ArmGroups groups = group_by_arm(zz, t, arms);
                       const PenaltyValue v = kind == StrategyKind::pair ? r_pair(spec, groups, g != nullptr)
                                                                         : r_ova(spec, groups, g != nullptr);
                       if (g != nullptr) { *g = flat(v.grad_z); }
                       return v.value;
                   },
                   flat(z));
        }

        const Matrix table = oracle::random_matrix(arms, 2, rng);
        const StrategySpec agg = fixed_spec(StrategyKind::agg, k, trial % 3 == 2 ? KernelSpec::linear()
                                                                                  : KernelSpec::rbf(1.1));
        Vector zt(n * 3 + arms * 2);
        zt << flat(z), flat(table);
        record("agg",
               [&](const Vector &p, Vector *g) {
                   const Matrix zz = Eigen::Map<const Matrix>(p.data(), n, 3);
                   const Matrix tt = Eigen::Map<const Matrix>(p.data() + n * 3, arms, 2);
                   const PenaltyValue v = r_agg(agg, zz, t, tt, g != nullptr);
                   if (g != nullptr) {
                       g->resize(p.size());
                       g->head(n * 3) = flat(v.grad_z);
                       g->tail(arms * 2) = flat(v.grad_table);
                   }
                   return v.value;
               },
               zt);

        const GeodesicGraph graph = trial % 2 == 0 ? GeodesicGraph::cycle(3 + trial % 6) : GeodesicGraph::binary_tree(3);
        const Matrix gt = oracle::random_matrix(graph.nodes(), 3, rng);
        record("geodesic",
               [&](const Vector &p, Vector *g) {
                   const Matrix tt = Eigen::Map<const Matrix>(p.data(), graph.nodes(), 3);
                   const GeodesicValue v = geodesic_penalty(tt, graph, g != nullptr);
                   if (g != nullptr) { *g = flat(v.grad_table); }
                   return v.value;
               },
               flat(gt));

        const std::array<StrategyKind, 3> kinds{StrategyKind::pair, StrategyKind::ova, StrategyKind::agg};
        StrategySpec full = fixed_spec(kinds[static_cast<std::size_t>(trial % 3)], k);
        const GeodesicGraph path = GeodesicGraph::path(arms);
        if (trial % 4 == 1) { full.geodesic_weight = 0.7; }
        const Batch bb = random_batch(arms * 4, 3, arms, rng);
        const double alpha = 0.5 + trial % 3;
        record("objective",
               [&](const Vector &p, Vector *g) {
                   ModelParams m = theta;
                   m.unpack(p);
                   const ObjectiveValue v = objective(m, fb, bb, alpha, full, &path, g != nullptr);
                   if (g != nullptr) { *g = v.grad; }
                   return v.value;
               },
               theta.pack());
    }
    bool pass = true;
    std::string detail = std::to_string(limits::kGradInstances) + " instances each, worst relative error:";
    for (const auto &[name, err] : worst) {
        pass = pass && err <= limits::kGradTolerance;
        detail += " " + name + " " + f(err, 2);
    }
    return {pass, detail + " (limit " + f(limits::kGradTolerance) + ")"};
}

// ---------------------------------------------------------------- trained models

/// Hard-setting datasets and trained models shared between criteria.
class HardCache {
public:
    const Dataset &data(int arms, std::uint64_t seed) {
        const auto key = std::make_pair(arms, seed);
        auto it = data_.find(key);
        if (it == data_.end()) {
            GenHardParams p;
            p.arms = arms;
            p.seed = seed;
            it = data_.emplace(key, gen_hard(p)).first;
        }
        return it->second;
    }

    const TrainResult &model(int arms, std::uint64_t seed, StrategyKind kind, double alpha) {
        std::ostringstream key;
        key << arms << '/' << seed << '/' << to_string(kind) << '/' << alpha;
        auto it = models_.find(key.str());
        if (it == models_.end()) {
            StrategySpec spec;
            spec.kind = kind;
            TrainConfig cfg;
            cfg.seed = seed;
            cfg.head_mode = HeadMode::multi_head;
            it = models_.emplace(key.str(), train(data(arms, seed), alpha, spec, cfg)).first;
        }
        return it->second;
    }

    double sqrt_pehe(int arms, std::uint64_t seed, StrategyKind kind, double alpha) {
        return pehe(model(arms, seed, kind, alpha).theta, data(arms, seed)).sqrt_pehe;
    }

private:
    std::map<std::pair<int, std::uint64_t>, Dataset> data_;
    std::map<std::string, TrainResult> models_;
};

HardCache &hard_cache() {
    static HardCache cache;
    return cache;
}

const std::vector<double> kEfficacyGrid{0.1, 0.5, 1.0, 5.0};
const std::array<StrategyKind, 3> kStrategies{StrategyKind::pair, StrategyKind::ova, StrategyKind::agg};

// ---------------------------------------------------------------- 3

Verdict k4_efficacy() {
    auto &cache = hard_cache();
    std::vector<double> baseline;
    std::map<StrategyKind, std::vector<double>> best;
    int ova_small = 0;
    for (int s = 0; s < limits::kEfficacySeeds; ++s) {
        const std::uint64_t seed = limits::kSeedBase + static_cast<std::uint64_t>(s);
        baseline.push_back(cache.sqrt_pehe(4, seed, StrategyKind::agg, 0.0));
        for (StrategyKind kind : kStrategies) {
            double best_value = 1e300, best_alpha = 0.0;
            for (double a : kEfficacyGrid) {
                const double v = cache.sqrt_pehe(4, seed, kind, a);
                if (v < best_value) {
                    best_value = v;
                    best_alpha = a;
                }
            }
            best[kind].push_back(best_value);
            if (kind == StrategyKind::ova && best_alpha <= limits::kOvaSmallAlpha) { ++ova_small; }
        }
    }
    const double base = median(baseline);
    bool pass = base >= limits::kBaselineLo && base <= limits::kBaselineHi;
    std::string detail = "baseline median sqrtPEHE " + f(base) + " " + join(baseline) + " (range [" +
                         f(limits::kBaselineLo) + ", " + f(limits::kBaselineHi) + "] " +
                         (pass ? "ok" : "missed") + ");";
    for (StrategyKind kind : kStrategies) {
        const double m = median(best[kind]);
        pass = pass && m < base;
        detail += std::string(" ") + to_string(kind) + " best-alpha median " + f(m) + (m < base ? " <" : " >=") +
                  " baseline;";
    }
    pass = pass && ova_small >= limits::kOvaSmallAlphaSeeds;
    detail += " ova best alpha <= " + f(limits::kOvaSmallAlpha) + " in " + std::to_string(ova_small) + "/" +
              std::to_string(limits::kEfficacySeeds) + " seeds (need " + std::to_string(limits::kOvaSmallAlphaSeeds) +
              ")";
    return {pass, detail};
}

// ---------------------------------------------------------------- 4

Verdict k20_stability() {
    auto &cache = hard_cache();
    std::vector<double> pair_small, pair_large;
    std::map<double, std::vector<double>> agg;
    for (int s = 0; s < limits::kStabilitySeeds; ++s) {
        const std::uint64_t seed = limits::kSeedBase + static_cast<std::uint64_t>(s);
        pair_small.push_back(cache.sqrt_pehe(20, seed, StrategyKind::pair, 0.1));
        pair_large.push_back(cache.sqrt_pehe(20, seed, StrategyKind::pair, 5.0));
        for (double a : kEfficacyGrid) { agg[a].push_back(cache.sqrt_pehe(20, seed, StrategyKind::agg, a)); }
    }
    const double degradation = median(pair_large) / median(pair_small);
    std::vector<double> agg_medians;
    for (double a : kEfficacyGrid) { agg_medians.push_back(median(agg[a])); }
    const double spread = *std::max_element(agg_medians.begin(), agg_medians.end()) /
                          *std::min_element(agg_medians.begin(), agg_medians.end());
    const bool pass = degradation >= limits::kPairDegradation && spread <= limits::kAggSpread;
    return {pass, "pair median sqrtPEHE alpha=5 / alpha=0.1 = " + f(median(pair_large)) + " / " +
                      f(median(pair_small)) + " = " + f(degradation) + " (need >= " + f(limits::kPairDegradation) +
                      "); agg grid medians " + join(agg_medians) + " max/min " + f(spread) + " (need <= " +
                      f(limits::kAggSpread) + ")"};
}

// ---------------------------------------------------------------- 5

Verdict timing_separation() {
    TimingConfig cfg;
    cfg.arm_list = {4, 20};
    cfg.n = 1500;
    cfg.seed = limits::kSeedBase;
    const auto rows = timing_benchmark(cfg);
    auto cell = [&](StrategyKind k, int arms) {
        for (const auto &r : rows) {
            if (r.strategy == k && r.arms == arms) { return r; }
        }
        throw Error(ErrorKind::shape, "timing cell missing");
    };
    const double pair4 = cell(StrategyKind::pair, 4).seconds_per_penalty;
    const double pair20 = cell(StrategyKind::pair, 20).seconds_per_penalty;
    const double agg4 = cell(StrategyKind::agg, 4).seconds_per_penalty;
    const double agg20 = cell(StrategyKind::agg, 20).seconds_per_penalty;
    const double ova20 = cell(StrategyKind::ova, 20).seconds_per_penalty;
    const double pair_growth = pair20 / pair4, agg_growth = agg20 / agg4, speedup = pair20 / agg20;
    const bool pass = pair_growth >= limits::kPairTimeGrowth && agg_growth <= limits::kAggTimeGrowth &&
                      speedup >= limits::kAggSpeedup;
    return {pass, "per-penalty seconds pair K4 " + f(pair4) + " K20 " + f(pair20) + " (x" + f(pair_growth) +
                      ", need >= " + f(limits::kPairTimeGrowth) + "); agg K4 " + f(agg4) + " K20 " + f(agg20) + " (x" +
                      f(agg_growth) + ", need <= " + f(limits::kAggTimeGrowth) + "); pair/agg at K20 " + f(speedup) +
                      " (need >= " + f(limits::kAggSpeedup) + "); ova K20 " + f(ova20) + "; pair epoch K4 " +
                      f(cell(StrategyKind::pair, 4).seconds_per_epoch) + " K20 " +
                      f(cell(StrategyKind::pair, 20).seconds_per_epoch)};
}

// ---------------------------------------------------------------- 6

Verdict concentration_scaling() {
    std::map<std::tuple<StrategyKind, int, int>, double> sd;
    for (int n : {500, 2000}) {
        ConcentrationConfig cfg;
        cfg.arm_list = {4, 16};
        cfg.n = n;
        cfg.replicates = limits::kConcentrationReps;
        cfg.seed = limits::kSeedBase;
        for (const auto &r : concentration_experiment(cfg)) { sd[{r.strategy, r.arms, r.n}] = r.sd; }
    }
    const double pair_growth = sd[{StrategyKind::pair, 16, 500}] / sd[{StrategyKind::pair, 4, 500}];
    const double agg_ratio = sd[{StrategyKind::agg, 16, 500}] / sd[{StrategyKind::agg, 4, 500}];
    bool pass = pair_growth >= limits::kPairSdGrowth && agg_ratio >= limits::kAggSdLo && agg_ratio <= limits::kAggSdHi;
    double worst_shrink = 1e300;
    for (StrategyKind kind : kStrategies) {
        for (int arms : {4, 16}) {
            worst_shrink = std::min(worst_shrink, sd[{kind, arms, 500}] / sd[{kind, arms, 2000}]);
        }
    }
    pass = pass && worst_shrink >= limits::kSdShrink;
    return {pass, "sd pair K16/K4 " + f(pair_growth) + " (need >= " + f(limits::kPairSdGrowth) + "); sd agg K16/K4 " +
                      f(agg_ratio) + " (need [" + f(limits::kAggSdLo) + ", " + f(limits::kAggSdHi) +
                      "]); smallest sd(n=500)/sd(n=2000) " + f(worst_shrink) + " (need >= " + f(limits::kSdShrink) +
                      ")"};
}

// ---------------------------------------------------------------- 7

Verdict stub_search() {
    const stub::QuadraticStub q;
    const stub::ScoreNoise none;

    const auto fine = stub::uniform_grid(0.0, 1.0, 101);
    const double exact = boab_search(fine, [&](double a) { return q.point(a, none); }).alpha_hat;
    const bool a_ok = std::abs(exact - q.alpha_bd()) <= 1e-12;

    const auto dense = stub::uniform_grid(0.0, 1.0, 2001);
    int within = 0;
    for (int trial = 0; trial < limits::kStubTrials; ++trial) {
        RngStream rng(7000 + static_cast<std::uint64_t>(trial));
        const auto noise = stub::ScoreNoise::draw(limits::kStubScoreNoise, rng);
        const double a = boab_search(dense, [&](double al) { return q.point(al, noise); }).alpha_hat;
        within += std::abs(a - q.alpha_bd()) <= limits::kStubScoreNoise / q.kappa;
    }

    const auto coarse = stub::uniform_grid(0.0, 1.0, 41);
    double min_q = 1e300;
    for (double a : coarse) { min_q = std::min(min_q, q.population_q(a)); }
    int oracle_ok = 0;
    for (int trial = 0; trial < limits::kStubTrials; ++trial) {
        RngStream rng(8000 + static_cast<std::uint64_t>(trial));
        std::vector<double> u;
        for (std::size_t i = 0; i < coarse.size(); ++i) {
            u.push_back(rng.uniform(-limits::kStubValueNoise, limits::kStubValueNoise));
        }
        const BoabResult res = boab_search(coarse, [&](double a) {
            const auto idx = static_cast<std::size_t>(std::find(coarse.begin(), coarse.end(), a) - coarse.begin());
            return q.point(a, none, u[idx]);
        });
        oracle_ok += q.population_q(res.alpha_hat) <= min_q + 2 * limits::kStubValueNoise + 1e-12;
    }

    double envelope_gap = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        RngStream rng(9000 + static_cast<std::uint64_t>(trial));
        const double r0 = rng.uniform(0.0, 2.0), c = rng.uniform(0.0, 3.0), c0 = rng.uniform(1.0, 5.0);
        std::vector<ProfilePoint> pts;
        for (double a : stub::uniform_grid(0.0, 2.0, 9)) { pts.push_back(make_profile_point(a, 0.5, r0, c0 - c * a)); }
        for (double v : profile_score(pts).envelope) { envelope_gap = std::max(envelope_gap, std::abs(v - (r0 - c))); }
    }
    const bool d_ok = envelope_gap <= limits::kEnvelopeTolerance;

    const bool pass = a_ok && within >= limits::kStubWithinBound && oracle_ok == limits::kStubTrials && d_ok;
    return {pass, "(a) zero-noise alpha-hat " + f(exact, 6) + " vs " + f(q.alpha_bd(), 6) + "; (b) |alpha-hat - " +
                      "alpha_bd| <= r/kappa in " + std::to_string(within) + "/" + std::to_string(limits::kStubTrials) +
                      " (need " + std::to_string(limits::kStubWithinBound) + "); (c) oracle inequality " +
                      std::to_string(oracle_ok) + "/" + std::to_string(limits::kStubTrials) + "; (d) envelope gap " +
                      f(envelope_gap, 2)};
}

// ---------------------------------------------------------------- 8

Verdict bootstrap_consistency() {
    const auto grid = stub::uniform_grid(0.0, 1.0, 1001);
    const stub::QuadraticStub q;
    const double small = bootstrap_alpha(stub::gaussian_outcomes(1000, limits::kSeedBase),
                                         limits::kBootstrapReplicates, grid, stub::mean_shift_factory(q), 6)
                             .standard_error;
    const double large = bootstrap_alpha(stub::gaussian_outcomes(4000, limits::kSeedBase),
                                         limits::kBootstrapReplicates, grid, stub::mean_shift_factory(q), 6)
                             .standard_error;
    const double ratio = large / small;
    return {small > 0.0 && ratio <= limits::kBootstrapSeRatio,
            "bootstrap se n=1000 " + f(small) + ", n=4000 " + f(large) + ", ratio " + f(ratio) + " (need <= " +
                f(limits::kBootstrapSeRatio) + ")"};
}

// ---------------------------------------------------------------- 9

Verdict monotone_imbalance() {
    auto &cache = hard_cache();
    const std::vector<double> grid{0.0, 0.1, 0.5, 1.0, 5.0};
    bool pass = true;
    std::string detail;
    for (StrategyKind kind : kStrategies) {
        std::vector<int> violations;
        for (int s = 0; s < limits::kMonotoneSeeds; ++s) {
            const std::uint64_t seed = limits::kSeedBase + static_cast<std::uint64_t>(s);
            const Batch all = full_batch(cache.data(4, seed));
            std::vector<double> r;
            for (double a : grid) {
                const TrainResult &m = cache.model(4, seed, kind, a);
                r.push_back(imbalance(m.theta, all, m.resolved_spec));
            }
            int v = 0;
            for (std::size_t i = 0; i + 1 < r.size(); ++i) { v += r[i + 1] > (1.0 + limits::kMonotoneSlack) * r[i]; }
            violations.push_back(v);
            pass = pass && v <= limits::kMonotoneViolations;
        }
        detail += std::string(detail.empty() ? "" : "; ") + to_string(kind) + " violations per seed ";
        for (std::size_t i = 0; i < violations.size(); ++i) {
            detail += (i ? "," : "") + std::to_string(violations[i]);
        }
    }
    return {pass, detail + " (at most " + std::to_string(limits::kMonotoneViolations) + " each, slack " +
                      f(100 * limits::kMonotoneSlack) + "%)"};
}

// ---------------------------------------------------------------- 10

Verdict dose_response() {
    int hits = 0;
    std::string argmins;
    for (int s = 0; s < limits::kDoseSeeds; ++s) {
        const std::uint64_t seed = limits::kSeedBase + static_cast<std::uint64_t>(s);
        GenDoseParams p;
        p.seed = seed;
        const Dataset ds = gen_dose(p);
        StrategySpec spec;
        spec.kind = StrategyKind::agg;
        TrainConfig cfg;
        cfg.seed = seed;
        const TrainResult r = train(ds, 0.1, spec, cfg);
        const Vector a = adrf(r.theta, ds);
        Eigen::Index arg = 0;
        a.minCoeff(&arg);
        hits += arg == 4;
        argmins += (argmins.empty() ? "" : ",") + std::to_string(arg);
    }
    return {hits >= limits::kDoseHits, "ADRF argmin per seed [" + argmins + "], t=4 in " + std::to_string(hits) + "/" +
                                           std::to_string(limits::kDoseSeeds) + " (need " +
                                           std::to_string(limits::kDoseHits) + ")"};
}

// ---------------------------------------------------------------- 11, 12, 13

cli::Manifest run_cli(const std::string &command, const std::string &variant,
                      const std::vector<std::pair<std::string, std::string>> &settings, const fs::path &out) {
    cli::RunConfig cfg(command, variant);
    for (const auto &[k, v] : settings) { cfg.set(k, v); }
    cfg.set("out", out.string());
    cfg.finalize();
    return cli::execute(cfg);
}

Verdict tree_interpolation() {
    int hits = 0;
    std::string detail;
    for (int s = 0; s < limits::kTopologySeeds; ++s) {
        const std::string seed = std::to_string(limits::kSeedBase + static_cast<std::uint64_t>(s));
        const cli::Manifest m =
            run_cli("geodesic", "", {{"geodesic.topology", "tree"}, {"seed", seed}}, scratch_root() / ("tree_" + seed));
        const double start = m.metrics.at("interpolation_start").get<double>(),
                     mid = m.metrics.at("interpolation_mid").get<double>(),
                     end = m.metrics.at("interpolation_end").get<double>();
        const double tol = limits::kInterpolationTolerance;
        const bool ok = std::abs(start + 3.0) <= tol && std::abs(end - 3.0) <= tol && std::abs(mid) <= tol;
        hits += ok;
        detail += (detail.empty() ? "" : "; ") + std::string("seed ") + seed + " LL " + f(start) + " mid " + f(mid) +
                  " RR " + f(end) + (ok ? " ok" : " miss");
    }
    return {hits >= limits::kTopologyHits, detail + " -> " + std::to_string(hits) + "/" +
                                               std::to_string(limits::kTopologySeeds) + " (need " +
                                               std::to_string(limits::kTopologyHits) + ")"};
}

/// True when `b` is among the two nearest other rows of `a`.
bool among_two_nearest(const Matrix &table, int a, int b) {
    std::vector<std::pair<double, int>> d;
    for (int j = 0; j < table.rows(); ++j) {
        if (j != a) { d.emplace_back((table.row(j) - table.row(a)).norm(), j); }
    }
    std::sort(d.begin(), d.end());
    return d[0].second == b || d[1].second == b;
}

Verdict cyclic_topology() {
    int hits = 0;
    std::string detail;
    for (int s = 0; s < limits::kTopologySeeds; ++s) {
        const std::string seed = std::to_string(limits::kSeedBase + static_cast<std::uint64_t>(s));
        const fs::path out = scratch_root() / ("cycle_" + seed);
        run_cli("geodesic", "", {{"geodesic.topology", "cycle"}, {"seed", seed}}, out);
        const ModelParams theta = load_model((out / "model.bin").string());
        const auto order = angular_order(theta.table);
        const bool cyclic = is_cyclic_order(order);
        const bool closed = among_two_nearest(theta.table, 0, 7) && among_two_nearest(theta.table, 7, 0);
        hits += cyclic && closed;
        std::string o;
        for (int v : order) { o += std::to_string(v); }
        detail += (detail.empty() ? "" : "; ") + std::string("seed ") + seed + " order " + o +
                  (cyclic ? " cyclic" : " not-cyclic") + (closed ? ", 0-7 adjacent" : ", 0-7 apart");
    }
    return {hits >= limits::kTopologyHits, detail + " -> " + std::to_string(hits) + "/" +
                                               std::to_string(limits::kTopologySeeds) + " (need " +
                                               std::to_string(limits::kTopologyHits) + ")"};
}

Verdict replay_reproducibility() {
    const fs::path root = scratch_root() / "replay";
    fs::remove_all(root);
    const std::vector<std::pair<std::string, std::string>> quick{
        {"train.epochs", "3"}, {"train.phi_hidden", "16"}, {"train.head_hidden", "8"}, {"train.rep_dim", "4"}};
    std::vector<fs::path> manifests;
    auto add = [&](const std::string &name, const std::string &command, const std::string &variant,
                   std::vector<std::pair<std::string, std::string>> settings) {
        run_cli(command, variant, settings, root / name);
        manifests.push_back(root / name / "manifest.json");
    };
    add("gen", "gen", "hard", {{"seed", "5"}});
    auto train_settings = quick;
    train_settings.push_back({"data.path", (root / "gen" / "dataset.csv").string()});
    train_settings.push_back({"strategy.kind", "ova"});
    add("train", "train", "", train_settings);
    auto boab_settings = quick;
    boab_settings.push_back({"gen.n", "400"});
    boab_settings.push_back({"boab.grid", "0.1,0.5,1,5"});
    add("boab", "boab", "", boab_settings);
    add("eval", "eval", "",
        {{"data.path", (root / "gen" / "dataset.csv").string()},
         {"eval.model", (root / "train" / "model.bin").string() + "," + (root / "boab" / "model.bin").string()}});
    auto geo_settings = quick;
    geo_settings.push_back({"geodesic.topology", "cycle"});
    add("geodesic", "geodesic", "", geo_settings);
    add("bench", "bench", "",
        {{"bench.n", "300"}, {"bench.epochs", "1"}, {"bench.repeats", "1"}, {"bench.concentration_reps", "20"},
         {"bench.concentration_n", "100"}, {"train.epochs", "1"}});

    std::size_t compared = 0;
    std::vector<std::string> bad;
    for (const fs::path &m : manifests) {
        const cli::ReplayReport r = cli::replay(m.string(), (m.parent_path() / "again").string());
        compared += r.compared;
        for (const auto &k : r.mismatches) { bad.push_back(r.original.command + ":" + k); }
    }
    std::string detail = std::to_string(manifests.size()) + " manifests (gen, train, boab, eval, geodesic, bench), " +
                         std::to_string(compared) + " metric values compared, " + std::to_string(bad.size()) +
                         " mismatches";
    for (const auto &b : bad) { detail += " " + b; }
    return {bad.empty() && compared > 0, detail};
}

}  // namespace

int main(int argc, char **argv) {
    const std::vector<Criterion> all{
        {1, "kernel statistics match explicit loops", 5, kernel_oracles},
        {2, "finite-difference gradient suite", 60, gradient_suite},
        {3, "K=4 hard-setting efficacy", 15 * 60, k4_efficacy},
        {4, "K=20 stability", 30 * 60, k20_stability},
        {5, "penalty timing separation", 10 * 60, timing_separation},
        {6, "concentration scaling", 10 * 60, concentration_scaling},
        {7, "alpha search on stub profiles", 60, stub_search},
        {8, "bootstrap sqrt(n) consistency", 5 * 60, bootstrap_consistency},
        {9, "imbalance non-increasing in alpha", 15 * 60, monotone_imbalance},
        {10, "dose-response minimum at t=4", 10 * 60, dose_response},
        {11, "tree geodesic interpolation", 10 * 60, tree_interpolation},
        {12, "cyclic topology recovery", 10 * 60, cyclic_topology},
        {13, "manifest replay is bit-exact", 120, replay_reproducibility},
    };
    std::set<int> chosen;
    for (int i = 1; i < argc; ++i) { chosen.insert(std::stoi(argv[i])); }
    fs::create_directories(scratch_root());

    int failed = 0;
    for (const Criterion &c : all) {
        if (!chosen.empty() && chosen.count(c.id) == 0) { continue; }
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception &e) {
            v = {false, std::string("error: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = seconds <= c.budget_seconds;
        const bool pass = v.pass && in_time;
        failed += !pass;
        std::printf("criterion %2d %s  %s: %s [%.1f s, budget %.0f s%s]\n", c.id, pass ? "PASS" : "FAIL",
                    c.name.c_str(), v.detail.c_str(), seconds, c.budget_seconds, in_time ? "" : ", OVER BUDGET");
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
