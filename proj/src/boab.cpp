#include "multibal/boab.hpp"

#include "multibal/errors.hpp"
#include "multibal/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace multibal {

const char *to_string(ComplexityMethod m) {
    switch (m) {
        case ComplexityMethod::lipschitz: return "lipschitz";
        case ComplexityMethod::rademacher_mc: return "rademacher_mc";
        case ComplexityMethod::constant: return "constant";
    }
    return "lipschitz";
}

ComplexityMethod complexity_method_from_string(const std::string &name) {
    if (name == "lipschitz") { return ComplexityMethod::lipschitz; }
    if (name == "rademacher_mc") { return ComplexityMethod::rademacher_mc; }
    if (name == "constant") { return ComplexityMethod::constant; }
    throw Error(ErrorKind::config, "unknown complexity method '" + name + "'");
}

void ComplexitySpec::validate() const {
    require(std::isfinite(scale) && scale > 0.0, ErrorKind::config, "complexity.scale must be > 0");
    require(delta > 0.0 && delta < 1.0, ErrorKind::config, "complexity.delta must lie in (0, 1)");
    require(mc_draws >= 1, ErrorKind::config, "complexity.mc_draws must be >= 1");
}

double complexity_term(const ComplexitySpec &spec, const ComplexityInputs &in) {
    spec.validate();
    require(in.n >= 2, ErrorKind::insufficient_data, "complexity_term needs n >= 2");
    require(std::isfinite(in.loss_bound) && in.loss_bound > 0.0, ErrorKind::degenerate,
            "complexity_term needs a positive loss bound");
    const double n = in.n;
    const double confidence = in.loss_bound * std::sqrt(std::log(2.0 / spec.delta) / (2.0 * n));
    switch (spec.method) {
        case ComplexityMethod::constant: return confidence;
        case ComplexityMethod::lipschitz:
            require(in.lipschitz.has_value() && *in.lipschitz >= 0.0, ErrorKind::config,
                    "lipschitz complexity needs a Lipschitz estimate");
            return spec.scale * *in.lipschitz / std::sqrt(n) + confidence;
        case ComplexityMethod::rademacher_mc: {
            require(in.per_sample_loss.has_value() && in.per_sample_loss->size() == in.n, ErrorKind::config,
                    "rademacher_mc complexity needs n per-sample losses");
            RngStream rng(in.seed, 7);
            const Vector &loss = *in.per_sample_loss;
            double total = 0.0;
            for (int draw = 0; draw < spec.mc_draws; ++draw) {
                double s = 0.0;
                for (Eigen::Index i = 0; i < loss.size(); ++i) { s += (rng.next_u64() & 1U) ? loss(i) : -loss(i); }
                total += std::abs(s) / n;
            }
            return 2.0 * total / spec.mc_draws + confidence;
        }
    }
    return confidence;
}

ProfilePoint make_profile_point(double alpha, double factual, double imbalance, double comp, double lipschitz,
                                double seconds) {
    ProfilePoint p;
    p.alpha = alpha;
    p.factual = factual;
    p.imbalance = imbalance;
    p.comp = comp;
    p.qhat = factual + alpha * imbalance + comp;
    p.lipschitz = lipschitz;
    p.seconds = seconds;
    return p;
}

TrainedPoint profile_point(const Dataset &ds, double alpha, const StrategySpec &spec, const TrainConfig &cfg,
                           const ComplexitySpec &comp, const GeodesicGraph *graph) {
    comp.validate();
    const auto start = std::chrono::steady_clock::now();
    TrainedPoint out;
    out.model = train(ds, alpha, spec, cfg, graph);
    const Batch all = full_batch(ds);
    const Vector losses = factual_losses(out.model.theta, all);
    const double factual = losses.mean();
    const double imb = imbalance(out.model.theta, all, out.model.resolved_spec);
    RngStream lip_rng = RngStream(cfg.seed).split(5);
    const double lip = lipschitz_estimate(out.model.theta, ds.x, 4096, lip_rng);
    ComplexityInputs in;
    in.n = ds.rows();
    in.loss_bound = losses.maxCoeff();
    in.lipschitz = lip;
    if (comp.method == ComplexityMethod::rademacher_mc) { in.per_sample_loss = losses; }
    in.seed = cfg.seed;
    const double c = complexity_term(comp, in);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.point = make_profile_point(alpha, factual, imb, c, lip, seconds);
    return out;
}

void check_grid(const std::vector<double> &grid) {
    require(!grid.empty(), ErrorKind::config, "alpha grid is empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        require(std::isfinite(grid[i]) && grid[i] >= 0.0, ErrorKind::config, "alpha grid values must be >= 0");
        require(i == 0 || grid[i] > grid[i - 1], ErrorKind::config, "alpha grid must be strictly increasing");
    }
}

std::size_t argmin_qhat(const std::vector<ProfilePoint> &points) {
    require(!points.empty(), ErrorKind::config, "argmin_qhat: no points");
    std::size_t best = 0;
    for (std::size_t i = 1; i < points.size(); ++i) {
        const bool better = points[i].qhat < points[best].qhat ||
                            (points[i].qhat == points[best].qhat && points[i].alpha < points[best].alpha);
        if (better) { best = i; }
    }
    return best;
}

BoabResult boab_search(const std::vector<double> &grid, const ProfileFn &profile, int workers) {
    check_grid(grid);
    BoabResult result;
    result.points.resize(grid.size());
    parallel_for(grid.size(), workers, [&](std::size_t i) { result.points[i] = profile(grid[i]); });
    result.best_index = argmin_qhat(result.points);
    result.alpha_hat = result.points[result.best_index].alpha;
    return result;
}

BoabResult boab_search(const Dataset &ds, const std::vector<double> &grid, const StrategySpec &spec,
                       const TrainConfig &cfg, const ComplexitySpec &comp, const GeodesicGraph *graph, int workers) {
    check_grid(grid);
    std::vector<std::optional<TrainedPoint>> trained(grid.size());
    parallel_for(grid.size(), workers,
                 [&](std::size_t i) { trained[i] = profile_point(ds, grid[i], spec, cfg, comp, graph); });
    BoabResult result;
    for (const auto &t : trained) { result.points.push_back(t->point); }
    result.best_index = argmin_qhat(result.points);
    result.alpha_hat = result.points[result.best_index].alpha;
    result.best_model = std::move(trained[result.best_index]->model);
    return result;
}

ProfileScores profile_score(const std::vector<ProfilePoint> &points) {
    require(points.size() >= 3, ErrorKind::insufficient_data, "profile_score needs at least 3 grid points");
    ProfileScores s;
    for (std::size_t i = 1; i + 1 < points.size(); ++i) {
        const double span = points[i + 1].alpha - points[i - 1].alpha;
        require(span > 0.0, ErrorKind::config, "profile_score: grid must be strictly increasing");
        s.alpha.push_back(points[i].alpha);
        s.envelope.push_back(points[i].imbalance + (points[i + 1].comp - points[i - 1].comp) / span);
        s.finite_diff.push_back((points[i + 1].qhat - points[i - 1].qhat) / span);
    }
    return s;
}

Dataset stratified_resample(const Dataset &ds, RngStream &rng) {
    std::vector<std::vector<int>> arm_rows(static_cast<std::size_t>(ds.arms));
    for (int i = 0; i < ds.rows(); ++i) { arm_rows[static_cast<std::size_t>(ds.t[static_cast<std::size_t>(i)])].push_back(i); }
    std::vector<int> rows;
    rows.reserve(static_cast<std::size_t>(ds.rows()));
    for (const auto &arm : arm_rows) {
        for (std::size_t j = 0; j < arm.size(); ++j) { rows.push_back(arm[rng.below(arm.size())]); }
    }
    return ds.subset(rows);
}

namespace {

using ReplicateFactory = std::function<ProfileFn(const Dataset &, std::size_t replicate)>;

double percentile(std::vector<double> sorted, double q) {
    std::sort(sorted.begin(), sorted.end());
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

AlphaEstimate bootstrap_impl(const Dataset &ds, int replicates, const std::vector<double> &grid,
                             const ReplicateFactory &factory, std::uint64_t seed, int workers) {
    require(replicates >= 20, ErrorKind::config, "bootstrap needs at least 20 replicates");
    check_grid(grid);
    ds.check_shapes();
    for (int c : ds.arm_counts()) {
        require(c >= 1, ErrorKind::overlap_violation, "bootstrap: an arm is empty in the original data");
    }
    AlphaEstimate est;
    est.replicates.resize(static_cast<std::size_t>(replicates));
    const RngStream root(seed, 11);
    parallel_for(static_cast<std::size_t>(replicates), workers, [&](std::size_t b) {
        RngStream rng = root.split(b);
        const Dataset resampled = stratified_resample(ds, rng);
        const ProfileFn profile = factory(resampled, b);
        est.replicates[b] = boab_search(grid, profile, 1).alpha_hat;
    });
    est.alpha_hat = boab_search(grid, factory(ds, static_cast<std::size_t>(replicates)), workers).alpha_hat;
    // Deviations from the first replicate, so identical replicates give exactly zero.
    const double shift = est.replicates.front();
    double sum = 0.0, ss = 0.0;
    for (double a : est.replicates) {
        sum += a - shift;
        ss += (a - shift) * (a - shift);
    }
    est.standard_error = std::sqrt(std::max(0.0, (ss - sum * sum / replicates) / (replicates - 1)));
    est.lo = percentile(est.replicates, 0.025);
    est.hi = percentile(est.replicates, 0.975);
    est.median = percentile(est.replicates, 0.5);
    return est;
}

}  // namespace

AlphaEstimate bootstrap_alpha(const Dataset &ds, int replicates, const std::vector<double> &grid,
                              const ProfileFactory &factory, std::uint64_t seed, int workers) {
    return bootstrap_impl(
        ds, replicates, grid, [&](const Dataset &d, std::size_t) { return factory(d); }, seed, workers);
}

AlphaEstimate bootstrap_alpha(const Dataset &ds, int replicates, const std::vector<double> &grid,
                              const StrategySpec &spec, const TrainConfig &cfg, const ComplexitySpec &comp,
                              std::uint64_t seed, int workers) {
    const RngStream seeds(seed, 12);
    return bootstrap_impl(
        ds, replicates, grid,
        [&](const Dataset &d, std::size_t b) -> ProfileFn {
            TrainConfig local = cfg;
            if (b < static_cast<std::size_t>(replicates)) { local.seed = seeds.split(b).next_u64(); }
            return [&d, local, &spec, &comp](double alpha) { return profile_point(d, alpha, spec, local, comp).point; };
        },
        seed, workers);
}

void write_profile_csv(const std::vector<ProfilePoint> &points, const std::string &path) {
    std::ofstream out(path);
    require(out.good(), ErrorKind::io, "cannot open '" + path + "' for writing");
    const char *columns = "alpha,factual,imbalance,comp,qhat,lipschitz,seconds";
    out << "# columns: " << columns << '\n' << columns << '\n';
    char buf[256];
    for (const auto &p : points) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.6f\n", p.alpha, p.factual, p.imbalance,
                      p.comp, p.qhat, p.lipschitz, p.seconds);
        out << buf;
    }
    require(out.good(), ErrorKind::io, "write failed for '" + path + "'");
}

}  // namespace multibal
