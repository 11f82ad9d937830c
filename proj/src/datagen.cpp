#include "multibal/datagen.hpp"

#include "multibal/errors.hpp"
#include "multibal/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace multibal {

namespace {

enum Stream : std::uint64_t { covariates = 1, weights = 2, coefficients = 3, assignment = 4, noise = 5 };

void check_noise(double variance) {
    require(std::isfinite(variance) && variance >= 0.0, ErrorKind::config, "noise variance must be >= 0");
}

Matrix gaussian_matrix(int rows, int cols, RngStream &rng) {
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) { m(i, j) = rng.normal(); }
    }
    return m;
}

Matrix uniform_matrix(int rows, int cols, RngStream &rng) {
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) { m(i, j) = rng.uniform(-1.0, 1.0); }
    }
    return m;
}

std::vector<int> draw_treatments(const Matrix &x, const Matrix &w, double kappa, RngStream rng) {
    std::vector<int> t(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const Vector p = softmax_propensity(w, std::span<const double>(x.row(i).data(), x.cols()), kappa);
        t[static_cast<std::size_t>(i)] = rng.categorical(std::span<const double>(p.data(), p.size()));
    }
    return t;
}

bool has_empty_arm(const std::vector<int> &t, int arms) {
    std::vector<int> counts(static_cast<std::size_t>(arms), 0);
    for (int ti : t) { ++counts[static_cast<std::size_t>(ti)]; }
    return std::any_of(counts.begin(), counts.end(), [](int c) { return c == 0; });
}

// Draws T from the softmax propensity; one retry on a derived stream if an arm comes out empty.
std::vector<int> assign_with_retry(const Matrix &x, const Matrix &w, double kappa, std::uint64_t seed, int arms) {
    const RngStream base(seed, Stream::assignment);
    auto t = draw_treatments(x, w, kappa, base);
    if (has_empty_arm(t, arms)) {
        t = draw_treatments(x, w, kappa, base.split(1));
        require(!has_empty_arm(t, arms), ErrorKind::overlap_violation,
                "generator produced an empty treatment arm twice; lower kappa or raise n");
    }
    return t;
}

void add_outcomes(Dataset &ds, double noise_variance, std::uint64_t seed) {
    RngStream rng(seed, Stream::noise);
    const double sd = std::sqrt(noise_variance);
    ds.y.resize(ds.rows());
    for (int i = 0; i < ds.rows(); ++i) {
        ds.y(i) = (*ds.truth)(i, ds.t[static_cast<std::size_t>(i)]) + sd * rng.normal();
    }
}

double dose_f(double s1, double s2) { return std::sin(2.0 * s1) + 0.5 * s2 * s2; }

}  // namespace

Vector softmax_propensity(const Matrix &w, std::span<const double> x, double kappa) {
    require(kappa >= 0.0, ErrorKind::config, "softmax_propensity: kappa must be >= 0");
    require(w.cols() == static_cast<Eigen::Index>(x.size()), ErrorKind::shape,
            "softmax_propensity: W is " + shape_string(w) + " but x has " + std::to_string(x.size()) + " entries");
    const Eigen::Map<const Vector> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    Vector logits = kappa * (w * xv);
    require(logits.allFinite(), ErrorKind::numeric, "softmax_propensity: non-finite logits");
    logits.array() -= logits.maxCoeff();
    Vector p = logits.array().exp();
    return p / p.sum();
}

Vector true_means_hard(std::span<const double> x, std::span<const double> beta, int arms) {
    require(x.size() >= 5, ErrorKind::shape, "true_means_hard needs d >= 5");
    require(beta.size() == 5, ErrorKind::shape, "true_means_hard needs a 5-vector beta");
    double lin = 0.0;
    for (std::size_t j = 0; j < 5; ++j) { lin += x[j] * beta[j]; }
    const double base = std::sin(2.0 * x[0]) + x[2] * x[2];
    Vector mu(arms);
    for (int t = 0; t < arms; ++t) { mu(t) = base + 0.5 * (t + 1) * lin; }
    return mu;
}

Dataset gen_hard(const GenHardParams &p) {
    require(p.n >= 1 && p.d >= 5 && p.arms >= 2, ErrorKind::config, "gen_hard needs n >= 1, d >= 5, K >= 2");
    require(p.kappa >= 0.0, ErrorKind::config, "gen_hard: kappa must be >= 0");
    check_noise(p.noise_variance);
    RngStream xr(p.seed, Stream::covariates), wr(p.seed, Stream::weights), br(p.seed, Stream::coefficients);
    Dataset ds;
    ds.arms = p.arms;
    ds.x = gaussian_matrix(p.n, p.d, xr);
    const Matrix w = uniform_matrix(p.arms, p.d, wr);
    std::array<double, 5> beta{};
    for (double &b : beta) { b = br.normal(); }
    ds.t = assign_with_retry(ds.x, w, p.kappa, p.seed, p.arms);
    Matrix truth(p.n, p.arms);
    for (int i = 0; i < p.n; ++i) {
        truth.row(i) = true_means_hard(std::span<const double>(ds.x.row(i).data(), p.d), beta, p.arms).transpose();
    }
    ds.truth = std::move(truth);
    add_outcomes(ds, p.noise_variance, p.seed);
    ds.provenance = {"hard", p.seed,
                     {{"n", p.n}, {"d", p.d}, {"arms", p.arms}, {"kappa", p.kappa},
                      {"noise_variance", p.noise_variance}, {"noise_sd", std::sqrt(p.noise_variance)},
                      {"beta", std::vector<double>(beta.begin(), beta.end())}}};
    return ds;
}

Dataset gen_dose(const GenDoseParams &p) {
    constexpr int kDims = 8;
    require(p.n >= 1 && p.arms >= 5, ErrorKind::config, "gen_dose needs n >= 1 and K >= 5");
    require(p.kappa >= 0.0, ErrorKind::config, "gen_dose: kappa must be >= 0");
    check_noise(p.noise_variance);
    RngStream xr(p.seed, Stream::covariates), wr(p.seed, Stream::weights);
    Dataset ds;
    ds.arms = p.arms;
    ds.x = gaussian_matrix(p.n, kDims, xr);
    const Matrix w = uniform_matrix(p.arms, kDims, wr);
    ds.t = assign_with_retry(ds.x, w, p.kappa, p.seed, p.arms);
    Matrix truth(p.n, p.arms);
    for (int i = 0; i < p.n; ++i) {
        const double f = dose_f(ds.x(i, 0), ds.x(i, 1));
        for (int t = 0; t < p.arms; ++t) { truth(i, t) = f + (t - 4.0) * (t - 4.0); }
    }
    ds.truth = std::move(truth);
    add_outcomes(ds, p.noise_variance, p.seed);
    ds.provenance = {"dose", p.seed,
                     {{"n", p.n}, {"arms", p.arms}, {"kappa", p.kappa}, {"noise_variance", p.noise_variance},
                      {"noise_sd", std::sqrt(p.noise_variance)}, {"f", "sin(2 x0) + 0.5 x1^2"}}};
    return ds;
}

Dataset load_digits_dose(const std::string &csv_path, double noise_variance, std::uint64_t seed) {
    constexpr int kPixels = 64;
    check_noise(noise_variance);
    std::ifstream in(csv_path);
    require(in.good(), ErrorKind::io, "cannot open digits file '" + csv_path + "'");
    std::vector<std::array<double, kPixels>> pixels;
    std::vector<int> labels;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') { continue; }
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> cells;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            char *end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str()) { numeric = false; break; }
            cells.push_back(v);
        }
        if (!numeric && pixels.empty()) { continue; }  // header row
        require(numeric && cells.size() == kPixels + 1, ErrorKind::io,
                "digits line " + std::to_string(line_no) + ": expected 65 numeric cells");
        std::array<double, kPixels> row{};
        std::copy(cells.begin(), cells.begin() + kPixels, row.begin());
        pixels.push_back(row);
        const double label = cells.back();
        require(label >= 0 && label <= 9 && label == static_cast<int>(label), ErrorKind::io,
                "digits line " + std::to_string(line_no) + ": label must be an integer in [0, 9]");
        labels.push_back(static_cast<int>(label));
    }
    const auto n = static_cast<int>(pixels.size());
    require(n >= 2, ErrorKind::insufficient_data, "digits file has fewer than 2 rows");
    Dataset ds;
    ds.arms = 10;
    ds.x.resize(n, kPixels);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < kPixels; ++j) { ds.x(i, j) = pixels[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]; }
    }
    for (int j = 0; j < kPixels; ++j) {
        auto col = ds.x.col(j);
        const double mean = col.mean();
        const double sd = std::sqrt((col.array() - mean).square().mean());
        col.array() -= mean;
        if (sd > 0.0) { col /= sd; }
    }
    ds.t = labels;
    Matrix truth(n, ds.arms);
    for (int i = 0; i < n; ++i) {
        const double s1 = ds.x.row(i).head(kPixels / 2).mean();
        const double s2 = ds.x.row(i).tail(kPixels / 2).mean();
        const double f = dose_f(s1, s2);
        for (int t = 0; t < ds.arms; ++t) { truth(i, t) = f + (t - 4.0) * (t - 4.0); }
    }
    ds.truth = std::move(truth);
    add_outcomes(ds, noise_variance, seed);
    ds.provenance = {"digits", seed,
                     {{"source", csv_path}, {"noise_variance", noise_variance},
                      {"f", "sin(2 s1) + 0.5 s2^2 with s1, s2 the means of the first and last 32 standardized pixels"}}};
    return ds;
}

TopologyKind topology_from_string(const std::string &name) {
    if (name == "tree") { return TopologyKind::tree; }
    if (name == "cycle") { return TopologyKind::cycle; }
    throw Error(ErrorKind::config, "unknown topology '" + name + "'");
}

const char *to_string(TopologyKind k) { return k == TopologyKind::tree ? "tree" : "cycle"; }

const std::array<double, 7> &tree_node_effects() {
    static const std::array<double, 7> effects{0.0, -2.0, 2.0, -3.0, -1.0, 1.0, 3.0};
    return effects;
}

std::pair<Dataset, GeodesicGraph> gen_topology(const GenTopologyParams &p) {
    constexpr int kDims = 4;
    require(p.n >= 1, ErrorKind::config, "gen_topology needs n >= 1");
    check_noise(p.noise_variance);
    const bool tree = p.kind == TopologyKind::tree;
    GeodesicGraph graph = tree ? GeodesicGraph::binary_tree(3) : GeodesicGraph::cycle(8);
    const int arms = graph.nodes();
    std::vector<double> effect(static_cast<std::size_t>(arms));
    for (int t = 0; t < arms; ++t) {
        effect[static_cast<std::size_t>(t)] =
            tree ? tree_node_effects()[static_cast<std::size_t>(t)] : std::cos(2.0 * std::numbers::pi * t / arms);
    }
    RngStream xr(p.seed, Stream::covariates), tr(p.seed, Stream::assignment);
    Dataset ds;
    ds.arms = arms;
    ds.x = gaussian_matrix(p.n, kDims, xr);
    ds.t.resize(static_cast<std::size_t>(p.n));
    for (int &ti : ds.t) { ti = static_cast<int>(tr.below(static_cast<std::uint64_t>(arms))); }
    Matrix truth(p.n, arms);
    for (int i = 0; i < p.n; ++i) {
        const double f = 0.3 * std::sin(ds.x(i, 0));
        for (int t = 0; t < arms; ++t) { truth(i, t) = f + effect[static_cast<std::size_t>(t)]; }
    }
    ds.truth = std::move(truth);
    add_outcomes(ds, p.noise_variance, p.seed);
    ds.provenance = {tree ? "tree" : "cycle", p.seed,
                     {{"n", p.n}, {"arms", arms}, {"noise_variance", p.noise_variance}, {"f", "0.3 sin(x0)"}}};
    return {std::move(ds), std::move(graph)};
}

}  // namespace multibal
