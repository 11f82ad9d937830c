#include "commands.hpp"

#include "multibal/boab.hpp"
#include "multibal/datagen.hpp"
#include "multibal/dataset.hpp"
#include "multibal/eval.hpp"
#include "multibal/model.hpp"
#include "multibal/model_io.hpp"

#include <algorithm>
#include <filesystem>
#include <optional>

namespace multibal::cli {

namespace {

namespace fs = std::filesystem;

struct Outcome {
    nlohmann::json metrics = nlohmann::json::object();
    nlohmann::json measurements = nlohmann::json::object();
    std::vector<std::string> files;
};

struct Data {
    Dataset ds;
    std::optional<GeodesicGraph> graph;
};

std::string out_file(const RunConfig &cfg, Outcome &o, const std::string &name) {
    o.files.push_back(name);
    return (fs::path(cfg.text("out")) / name).string();
}

KernelSpec kernel_from(const RunConfig &cfg, const std::string &family_key, const std::string &bandwidth_key) {
    if (kernel_family_from_string(cfg.text(family_key)) == KernelFamily::linear) { return KernelSpec::linear(); }
    if (cfg.is_auto(bandwidth_key)) { return KernelSpec::rbf_median(); }
    return KernelSpec::rbf(cfg.real(bandwidth_key));
}

StrategySpec strategy_from(const RunConfig &cfg) {
    StrategySpec s;
    s.kind = strategy_from_string(cfg.text("strategy.kind"));
    s.kernel = kernel_from(cfg, "strategy.kernel", "strategy.bandwidth");
    s.embedding_kernel = kernel_from(cfg, "strategy.embedding_kernel", "strategy.embedding_bandwidth");
    s.embedding_dim = static_cast<int>(cfg.integer("strategy.embedding_dim"));
    s.geodesic_weight = cfg.real("strategy.geodesic_weight");
    s.min_arm_batch = static_cast<int>(cfg.integer("strategy.min_arm_batch"));
    s.validate();
    return s;
}

TrainConfig train_from(const RunConfig &cfg) {
    TrainConfig t;
    t.epochs = static_cast<int>(cfg.integer("train.epochs"));
    t.batch_size = static_cast<int>(cfg.integer("train.batch_size"));
    t.learning_rate = cfg.real("train.lr");
    t.rep_dim = static_cast<int>(cfg.integer("train.rep_dim"));
    t.phi_hidden = cfg.integers("train.phi_hidden");
    t.head_hidden = cfg.integers("train.head_hidden");
    if (cfg.text("train.head_mode") != "auto") { t.head_mode = head_mode_from_string(cfg.text("train.head_mode")); }
    t.balance_subsample = static_cast<int>(cfg.integer("train.balance_subsample"));
    t.seed = cfg.unsigned_integer("train.seed");
    return t;
}

ComplexitySpec complexity_from(const RunConfig &cfg) {
    ComplexitySpec c;
    c.method = complexity_method_from_string(cfg.text("complexity.method"));
    c.scale = cfg.real("complexity.scale");
    c.delta = cfg.real("complexity.delta");
    c.mc_draws = static_cast<int>(cfg.integer("complexity.mc_draws"));
    c.validate();
    return c;
}

Data generate(const RunConfig &cfg, const std::string &generator) {
    const std::uint64_t seed = cfg.unsigned_integer("data.seed");
    const double noise = cfg.real("gen.noise_variance");
    if (generator == "hard") {
        GenHardParams p;
        p.n = static_cast<int>(cfg.integer("gen.n"));
        p.d = static_cast<int>(cfg.integer("gen.d"));
        p.arms = static_cast<int>(cfg.integer("gen.arms"));
        p.kappa = cfg.real("gen.kappa");
        p.noise_variance = noise;
        p.seed = seed;
        return {gen_hard(p), std::nullopt};
    }
    if (generator == "dose") {
        if (!cfg.text("gen.digits_csv").empty()) {
            return {load_digits_dose(cfg.text("gen.digits_csv"), noise, seed), std::nullopt};
        }
        GenDoseParams p;
        p.n = static_cast<int>(cfg.integer("gen.n"));
        p.arms = static_cast<int>(cfg.integer("gen.arms"));
        p.kappa = cfg.real("gen.kappa");
        p.noise_variance = noise;
        p.seed = seed;
        return {gen_dose(p), std::nullopt};
    }
    GenTopologyParams p;
    p.kind = topology_from_string(generator);
    p.n = static_cast<int>(cfg.integer("gen.n"));
    p.noise_variance = noise;
    p.seed = seed;
    auto [ds, graph] = gen_topology(p);
    return {std::move(ds), std::move(graph)};
}

Data load_data(const RunConfig &cfg) {
    const std::string path = cfg.text("data.path");
    if (path.empty()) { return generate(cfg, cfg.text("data.generator")); }
    return {read_dataset_csv(path, static_cast<int>(cfg.integer("data.arms"))), std::nullopt};
}

const GeodesicGraph *graph_for(const Data &data, const StrategySpec &spec) {
    if (spec.geodesic_weight <= 0.0) { return nullptr; }
    if (!data.graph) {
        throw KeyError("strategy.geodesic_weight",
                       "key 'strategy.geodesic_weight' needs a tree or cycle generator for the treatment graph");
    }
    return &*data.graph;
}

nlohmann::json to_json(const Vector &v) { return std::vector<double>(v.data(), v.data() + v.size()); }

int argmin(const Vector &v) {
    Eigen::Index i = 0;
    v.minCoeff(&i);
    return static_cast<int>(i);
}

Vector truth_adrf(const Dataset &ds) { return ds.truth->colwise().mean().transpose(); }

/// PEHE and ADRF headline values for a model on a dataset.
void add_model_metrics(nlohmann::json &m, const ModelParams &theta, const Dataset &ds) {
    const Vector a = adrf(theta, ds);
    m["adrf"] = to_json(a);
    m["adrf_argmin"] = argmin(a);
    if (ds.truth) {
        const PeheReport r = pehe(theta, ds);
        m["pehe"] = r.pehe;
        m["sqrt_pehe"] = r.sqrt_pehe;
    }
}

void write_trace(const RunConfig &cfg, Outcome &o, const TrainTrace &trace) {
    Table t{{"epoch", "factual", "imbalance", "objective"}, {}};
    double seconds = 0.0;
    for (const auto &r : trace) {
        t.add({fmt(r.epoch), fmt(r.factual), fmt(r.imbalance), fmt(r.objective)});
        seconds += r.seconds;
    }
    write_csv(t, out_file(cfg, o, "trace.csv"));
    write_plotdata(t, out_file(cfg, o, "trace.dat"));
    o.measurements["train_seconds"] = seconds;
}

void write_adrf(const RunConfig &cfg, Outcome &o, const Dataset &ds, const std::vector<std::string> &labels,
                const std::vector<Vector> &curves) {
    Table t;
    t.columns = {"t"};
    if (ds.truth) { t.columns.push_back("truth"); }
    for (const auto &l : labels) { t.columns.push_back(l); }
    const Vector truth = ds.truth ? truth_adrf(ds) : Vector();
    for (int arm = 0; arm < ds.arms; ++arm) {
        std::vector<std::string> row{fmt(arm)};
        if (ds.truth) { row.push_back(fmt(truth(arm))); }
        for (const auto &c : curves) { row.push_back(fmt(c(arm))); }
        t.add(std::move(row));
    }
    write_csv(t, out_file(cfg, o, "adrf.csv"));
    write_plotdata(t, out_file(cfg, o, "adrf.dat"));
}

Outcome cmd_gen(const RunConfig &cfg) {
    Outcome o;
    const Data data = generate(cfg, cfg.variant());
    const Dataset &ds = data.ds;
    write_dataset_csv(ds, out_file(cfg, o, "dataset.csv"));
    write_provenance_json(ds, out_file(cfg, o, "dataset.json"));
    const DatasetDiagnostics diag = validate_dataset(ds);
    o.metrics["rows"] = ds.rows();
    o.metrics["covariates"] = ds.covariates();
    o.metrics["arms"] = ds.arms;
    o.metrics["arm_counts"] = diag.arm_counts;
    o.metrics["min_count"] = diag.min_count;
    o.metrics["overlap_flag"] = diag.overlap_flag;
    o.metrics["y_mean"] = ds.y.mean();
    if (ds.truth) { o.metrics["truth_adrf"] = to_json(truth_adrf(ds)); }
    return o;
}

Outcome cmd_train(const RunConfig &cfg) {
    Outcome o;
    const Data data = load_data(cfg);
    const StrategySpec spec = strategy_from(cfg);
    const TrainConfig tcfg = train_from(cfg);
    const double alpha = cfg.real("alpha");
    const TrainResult result = train(data.ds, alpha, spec, tcfg, graph_for(data, spec));
    save_model(result.theta, out_file(cfg, o, "model.bin"));
    write_trace(cfg, o, result.trace);

    const Batch all = full_batch(data.ds);
    o.metrics["head_mode"] = to_string(result.theta.head_mode);
    o.metrics["factual"] = factual_loss(result.theta, all, false).value;
    o.metrics["imbalance"] = imbalance(result.theta, all, result.resolved_spec);
    o.metrics["final_objective"] = result.trace.empty() ? 0.0 : result.trace.back().objective;
    add_model_metrics(o.metrics, result.theta, data.ds);
    write_adrf(cfg, o, data.ds, {"model"}, {adrf(result.theta, data.ds)});
    return o;
}

Outcome cmd_boab(const RunConfig &cfg) {
    Outcome o;
    const Data data = load_data(cfg);
    const StrategySpec spec = strategy_from(cfg);
    const TrainConfig tcfg = train_from(cfg);
    const ComplexitySpec comp = complexity_from(cfg);
    const std::vector<double> grid = cfg.reals("boab.grid");
    check_grid(grid);
    const int workers = static_cast<int>(cfg.integer("workers"));
    const GeodesicGraph *graph = graph_for(data, spec);

    const BoabResult result = boab_search(data.ds, grid, spec, tcfg, comp, graph, workers);
    write_profile_csv(result.points, out_file(cfg, o, "profile.csv"));
    Table plot{{"alpha", "factual", "imbalance", "comp", "qhat"}, {}};
    nlohmann::json qhat = nlohmann::json::array();
    nlohmann::json imb = nlohmann::json::array();
    nlohmann::json seconds = nlohmann::json::array();
    for (const auto &p : result.points) {
        plot.add({fmt(p.alpha), fmt(p.factual), fmt(p.imbalance), fmt(p.comp), fmt(p.qhat)});
        qhat.push_back(p.qhat);
        imb.push_back(p.imbalance);
        seconds.push_back(p.seconds);
    }
    write_plotdata(plot, out_file(cfg, o, "profile.dat"));
    o.metrics["alpha_hat"] = result.alpha_hat;
    o.metrics["best_index"] = result.best_index;
    o.metrics["grid"] = grid;
    o.metrics["qhat"] = qhat;
    o.metrics["imbalance"] = imb;
    o.measurements["grid_seconds"] = seconds;

    require(result.best_model.has_value(), ErrorKind::numeric, "boab returned no model");
    save_model(result.best_model->theta, out_file(cfg, o, "model.bin"));
    add_model_metrics(o.metrics, result.best_model->theta, data.ds);

    const auto replicates = cfg.integer("boab.bootstrap");
    if (replicates > 0) {
        const AlphaEstimate est = bootstrap_alpha(data.ds, static_cast<int>(replicates), grid, spec, tcfg, comp,
                                                  cfg.unsigned_integer("seed"), workers);
        Table t{{"replicate", "alpha_hat"}, {}};
        for (std::size_t b = 0; b < est.replicates.size(); ++b) {
            t.add({fmt(static_cast<long long>(b)), fmt(est.replicates[b])});
        }
        write_csv(t, out_file(cfg, o, "bootstrap.csv"));
        o.metrics["bootstrap"] = {{"se", est.standard_error}, {"lo", est.lo}, {"hi", est.hi},
                                  {"median", est.median}, {"replicates", est.replicates}};
    }
    return o;
}

Outcome cmd_eval(const RunConfig &cfg) {
    Outcome o;
    const Data data = load_data(cfg);
    const Dataset &ds = data.ds;
    const std::vector<std::string> paths = cfg.texts("eval.model");
    std::vector<std::string> labels;
    if (cfg.is_auto("eval.labels")) {
        for (const auto &p : paths) { labels.push_back(fs::path(p).stem().string()); }
    } else {
        labels = cfg.texts("eval.labels");
    }

    Table bars{{"label", "pehe", "sqrt_pehe"}, {}};
    Table pairs{{"label", "j", "k", "contribution"}, {}};
    std::vector<Vector> curves;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        const ModelParams theta = load_model(paths[i]);
        require(theta.arms() == ds.arms, ErrorKind::shape,
                "model '" + paths[i] + "' has " + std::to_string(theta.arms()) + " arms, dataset has " +
                    std::to_string(ds.arms));
        require(theta.phi.input_dim() == ds.covariates(), ErrorKind::shape,
                "model '" + paths[i] + "' expects " + std::to_string(theta.phi.input_dim()) + " covariates");
        nlohmann::json m;
        add_model_metrics(m, theta, ds);
        o.metrics[labels[i]] = m;
        curves.push_back(adrf(theta, ds));
        if (ds.truth) {
            const PeheReport r = pehe(theta, ds);
            bars.add({labels[i], fmt(r.pehe), fmt(r.sqrt_pehe)});
            for (int j = 0; j < ds.arms; ++j) {
                for (int k = j + 1; k < ds.arms; ++k) { pairs.add({labels[i], fmt(j), fmt(k), fmt(r.per_pair(j, k))}); }
            }
        }
    }
    o.metrics["has_truth"] = ds.truth.has_value();
    if (ds.truth) {
        write_csv(bars, out_file(cfg, o, "pehe.csv"));
        write_csv(pairs, out_file(cfg, o, "pehe_pairs.csv"));
        write_plotdata(bars, out_file(cfg, o, "pehe_bars.dat"));
    }
    write_adrf(cfg, o, ds, labels, curves);
    return o;
}

Outcome cmd_bench(const RunConfig &cfg) {
    Outcome o;
    std::vector<StrategyKind> strategies;
    for (const auto &s : cfg.texts("bench.strategies")) { strategies.push_back(strategy_from_string(s)); }
    require(!strategies.empty(), ErrorKind::config, "bench.strategies is empty");
    const std::uint64_t seed = cfg.unsigned_integer("seed");

    if (cfg.integer("bench.timing") != 0) {
        TimingConfig t;
        t.arm_list = cfg.integers("bench.K");
        t.strategies = strategies;
        t.n = static_cast<int>(cfg.integer("bench.n"));
        t.epochs = static_cast<int>(cfg.integer("bench.epochs"));
        t.penalty_repeats = static_cast<int>(cfg.integer("bench.repeats"));
        t.seed = seed;
        t.train = train_from(cfg);
        const auto rows = timing_benchmark(t);
        Table table{{"strategy", "K", "n", "terms", "workers", "seconds_per_epoch", "seconds_per_penalty"}, {}};
        nlohmann::json terms = nlohmann::json::object();
        nlohmann::json timing = nlohmann::json::array();
        for (const auto &r : rows) {
            table.add({to_string(r.strategy), fmt(r.arms), fmt(r.n), fmt(r.terms), fmt(r.workers),
                       fmt(r.seconds_per_epoch), fmt(r.seconds_per_penalty)});
            terms[std::string(to_string(r.strategy)) + ".K" + std::to_string(r.arms)] = r.terms;
            timing.push_back({{"strategy", to_string(r.strategy)},
                              {"K", r.arms},
                              {"seconds_per_epoch", r.seconds_per_epoch},
                              {"seconds_per_penalty", r.seconds_per_penalty}});
        }
        write_csv(table, out_file(cfg, o, "timing.csv"));
        write_plotdata(table, out_file(cfg, o, "timing.dat"));
        o.metrics["terms"] = terms;
        o.measurements["timing"] = timing;
    }
    if (cfg.integer("bench.concentration") != 0) {
        Table table{{"strategy", "K", "n", "replicates", "mean", "sd"}, {}};
        nlohmann::json sd = nlohmann::json::object();
        for (int n : cfg.integers("bench.concentration_n")) {
            ConcentrationConfig c;
            c.arm_list = cfg.integers("bench.concentration_K");
            c.n = n;
            c.replicates = static_cast<int>(cfg.integer("bench.concentration_reps"));
            c.strategies = strategies;
            c.seed = seed;
            for (const auto &r : concentration_experiment(c)) {
                table.add({to_string(r.strategy), fmt(r.arms), fmt(r.n), fmt(r.replicates), fmt(r.mean), fmt(r.sd)});
                sd[std::string(to_string(r.strategy)) + ".K" + std::to_string(r.arms) + ".n" + std::to_string(r.n)] =
                    r.sd;
            }
        }
        write_csv(table, out_file(cfg, o, "concentration.csv"));
        write_plotdata(table, out_file(cfg, o, "concentration.dat"));
        o.metrics["concentration_sd"] = sd;
    }
    o.metrics["workers"] = cfg.integer("workers");
    return o;
}

Outcome cmd_geodesic(const RunConfig &cfg) {
    Outcome o;
    GenTopologyParams p;
    p.kind = topology_from_string(cfg.text("geodesic.topology"));
    p.n = static_cast<int>(cfg.integer("geodesic.n"));
    p.noise_variance = cfg.real("geodesic.noise_variance");
    p.seed = cfg.unsigned_integer("data.seed");
    const auto [ds, graph] = gen_topology(p);
    const StrategySpec spec = strategy_from(cfg);
    TrainConfig tcfg = train_from(cfg);
    tcfg.head_mode = HeadMode::embed_conditioned;

    const int from = static_cast<int>(cfg.integer("geodesic.from"));
    const int to = static_cast<int>(cfg.integer("geodesic.to"));
    const int steps = static_cast<int>(cfg.integer("geodesic.steps"));
    require(from >= 0 && from < ds.arms && to >= 0 && to < ds.arms, ErrorKind::config,
            "geodesic.from and geodesic.to must be arms of the topology");

    const TrainResult result = train(ds, cfg.real("alpha"), spec, tcfg, &graph);
    const ModelParams &theta = result.theta;
    save_model(theta, out_file(cfg, o, "model.bin"));
    write_trace(cfg, o, result.trace);

    const auto curve = interpolate_effect(theta, from, to, steps, ds);
    Table interp{{"lambda", "mean_outcome"}, {}};
    nlohmann::json values = nlohmann::json::array();
    for (const auto &pt : curve) {
        interp.add({fmt(pt.lambda), fmt(pt.mean_outcome)});
        values.push_back(pt.mean_outcome);
    }
    write_csv(interp, out_file(cfg, o, "interpolation.csv"));
    write_plotdata(interp, out_file(cfg, o, "interpolation.dat"));

    const Matrix proj = principal_projection(theta.table, std::min<int>(2, theta.embedding_dim()));
    Table emb;
    emb.columns = {"arm"};
    for (int c = 0; c < theta.embedding_dim(); ++c) { emb.columns.push_back("e" + std::to_string(c)); }
    emb.columns.push_back("pc1");
    if (proj.cols() > 1) { emb.columns.push_back("pc2"); }
    for (int k = 0; k < theta.arms(); ++k) {
        std::vector<std::string> row{fmt(k)};
        for (int c = 0; c < theta.embedding_dim(); ++c) { row.push_back(fmt(theta.table(k, c))); }
        for (Eigen::Index c = 0; c < proj.cols(); ++c) { row.push_back(fmt(proj(k, c))); }
        emb.add(std::move(row));
    }
    write_csv(emb, out_file(cfg, o, "embeddings.csv"));
    write_plotdata(emb, out_file(cfg, o, "embeddings.dat"));

    o.metrics["interpolation"] = values;
    o.metrics["interpolation_start"] = curve.front().mean_outcome;
    o.metrics["interpolation_mid"] = curve[curve.size() / 2].mean_outcome;
    o.metrics["interpolation_end"] = curve.back().mean_outcome;
    o.metrics["geodesic_penalty"] = geodesic_penalty(theta.table, graph, false).value;
    o.metrics["nearest_to_from"] = nearest_row(theta.table, from);
    if (p.kind == TopologyKind::cycle && theta.embedding_dim() >= 2) {
        const auto order = angular_order(theta.table);
        o.metrics["angular_order"] = order;
        o.metrics["cyclic_order"] = is_cyclic_order(order);
        o.metrics["nearest_to_0"] = nearest_row(theta.table, 0);
    }
    add_model_metrics(o.metrics, theta, ds);
    write_adrf(cfg, o, ds, {"model"}, {adrf(theta, ds)});
    return o;
}

Outcome dispatch(const RunConfig &cfg) {
    const std::string &c = cfg.command();
    if (c == "gen") { return cmd_gen(cfg); }
    if (c == "train") { return cmd_train(cfg); }
    if (c == "boab") { return cmd_boab(cfg); }
    if (c == "eval") { return cmd_eval(cfg); }
    if (c == "bench") { return cmd_bench(cfg); }
    if (c == "geodesic") { return cmd_geodesic(cfg); }
    throw KeyError("command", "unknown command '" + c + "'");
}

}  // namespace

Manifest execute(const RunConfig &cfg) {
    Manifest m;
    m.version = kToolVersion;
    m.command = cfg.command();
    m.variant = cfg.variant();
    m.config = cfg.to_json();
    m.seed = cfg.unsigned_integer("seed");
    m.workers = static_cast<int>(cfg.integer("workers"));
    require(m.workers >= 1, ErrorKind::config, "workers must be >= 1");
    m.started = utc_timestamp();
    fs::create_directories(cfg.text("out"));
    Outcome o = dispatch(cfg);
    m.finished = utc_timestamp();
    m.files = std::move(o.files);
    m.metrics = std::move(o.metrics);
    m.measurements = std::move(o.measurements);
    write_manifest(m, (fs::path(cfg.text("out")) / "manifest.json").string());
    return m;
}

ReplayReport replay(const std::string &manifest_path, const std::string &out_dir) {
    ReplayReport report;
    report.original = read_manifest(manifest_path);
    RunConfig cfg(report.original.command, report.original.variant);
    cfg.load_json(report.original.config);
    cfg.set("out", out_dir);
    cfg.finalize();
    report.rerun = execute(cfg);
    const nlohmann::json a = report.original.metrics.flatten();
    const nlohmann::json b = report.rerun.metrics.flatten();
    for (const auto &[key, value] : a.items()) {
        ++report.compared;
        if (!b.contains(key) || b[key] != value) { report.mismatches.push_back(key); }
    }
    for (const auto &[key, value] : b.items()) {
        if (!a.contains(key)) { report.mismatches.push_back(key); }
    }
    return report;
}

}  // namespace multibal::cli
