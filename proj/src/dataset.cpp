#include "multibal/dataset.hpp"

#include "multibal/errors.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace multibal {

void Dataset::check_shapes() const {
    const auto n = x.rows();
    require(static_cast<Eigen::Index>(t.size()) == n, ErrorKind::shape,
            "dataset: T has " + std::to_string(t.size()) + " entries, X has " + std::to_string(n) + " rows");
    require(y.size() == n, ErrorKind::shape, "dataset: Y length differs from X rows");
    require(arms >= 1, ErrorKind::shape, "dataset: K must be >= 1");
    for (int ti : t) {
        require(ti >= 0 && ti < arms, ErrorKind::shape,
                "dataset: treatment " + std::to_string(ti) + " outside [0, " + std::to_string(arms) + ")");
    }
    if (truth) {
        require(truth->rows() == n && truth->cols() == arms, ErrorKind::shape,
                "dataset: truth must be n x K, got " + shape_string(*truth));
    }
}

std::vector<int> Dataset::arm_counts() const {
    std::vector<int> counts(static_cast<std::size_t>(std::max(arms, 0)), 0);
    for (int ti : t) {
        if (ti >= 0 && ti < arms) { ++counts[static_cast<std::size_t>(ti)]; }
    }
    return counts;
}

Dataset Dataset::subset(const std::vector<int> &rows) const {
    Dataset out;
    out.arms = arms;
    out.provenance = provenance;
    out.x = gather_rows(x, rows);
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
    out.t.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.t.push_back(t[static_cast<std::size_t>(rows[i])]);
        out.y(static_cast<Eigen::Index>(i)) = y(rows[i]);
    }
    if (truth) { out.truth = gather_rows(*truth, rows); }
    return out;
}

DatasetDiagnostics validate_dataset(const Dataset &ds) {
    DatasetDiagnostics d;
    d.arm_counts = ds.arm_counts();
    d.min_count = d.arm_counts.empty() ? 0 : *std::min_element(d.arm_counts.begin(), d.arm_counts.end());
    d.overlap_flag = d.min_count < 2;
    const double n = ds.rows();
    for (int c : d.arm_counts) { d.arm_share.push_back(n > 0 ? c / n : 0.0); }
    return d;
}

namespace {

void put(std::string &line, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    line += buf;
}

double parse_double(const std::string &cell, int line_no) {
    errno = 0;
    char *end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    require(end != cell.c_str() && *end == '\0' && errno != ERANGE, ErrorKind::io,
            "dataset csv line " + std::to_string(line_no) + ": cannot parse '" + cell + "'");
    return v;
}

std::vector<std::string> split_csv(const std::string &line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) { cell.pop_back(); }
        cells.push_back(cell);
    }
    return cells;
}

}  // namespace

void write_dataset_csv(const Dataset &ds, const std::string &path) {
    ds.check_shapes();
    std::ofstream out(path);
    require(out.good(), ErrorKind::io, "cannot open '" + path + "' for writing");
    std::string line;
    for (int j = 0; j < ds.covariates(); ++j) { line += "x" + std::to_string(j) + ","; }
    line += "t,y";
    if (ds.truth) {
        for (int k = 0; k < ds.arms; ++k) { line += ",mu" + std::to_string(k); }
    }
    out << "# columns: " << line << '\n' << line << '\n';
    for (int i = 0; i < ds.rows(); ++i) {
        line.clear();
        for (int j = 0; j < ds.covariates(); ++j) {
            put(line, ds.x(i, j));
            line += ',';
        }
        line += std::to_string(ds.t[static_cast<std::size_t>(i)]);
        line += ',';
        put(line, ds.y(i));
        if (ds.truth) {
            for (int k = 0; k < ds.arms; ++k) {
                line += ',';
                put(line, (*ds.truth)(i, k));
            }
        }
        out << line << '\n';
    }
    require(out.good(), ErrorKind::io, "write failed for '" + path + "'");
}

Dataset read_dataset_csv(const std::string &path, int arms_hint) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::io, "cannot open dataset '" + path + "'");
    std::string line;
    int line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') { continue; }
        header = split_csv(line);
        break;
    }
    require(!header.empty(), ErrorKind::io, "dataset '" + path + "' has no header");
    int d = 0;
    int t_col = -1, y_col = -1;
    std::vector<int> mu_cols;
    for (int c = 0; c < static_cast<int>(header.size()); ++c) {
        const std::string &h = header[static_cast<std::size_t>(c)];
        if (h == "t") {
            t_col = c;
        } else if (h == "y") {
            y_col = c;
        } else if (h.size() > 1 && h[0] == 'x') {
            require(h == "x" + std::to_string(d), ErrorKind::io, "dataset header: unexpected column '" + h + "'");
            ++d;
        } else if (h.size() > 2 && h.compare(0, 2, "mu") == 0) {
            require(h == "mu" + std::to_string(mu_cols.size()), ErrorKind::io,
                    "dataset header: unexpected column '" + h + "'");
            mu_cols.push_back(c);
        } else {
            throw Error(ErrorKind::io, "dataset header: unknown column '" + h + "'");
        }
    }
    require(t_col >= 0 && y_col >= 0, ErrorKind::io, "dataset header must contain t and y");

    std::vector<std::vector<double>> xs;
    std::vector<int> ts;
    std::vector<double> ys;
    std::vector<std::vector<double>> mus;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') { continue; }
        const auto cells = split_csv(line);
        require(cells.size() == header.size(), ErrorKind::io,
                "dataset csv line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                    " cells, got " + std::to_string(cells.size()));
        std::vector<double> row(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j) { row[static_cast<std::size_t>(j)] = parse_double(cells[static_cast<std::size_t>(j)], line_no); }
        xs.push_back(std::move(row));
        const double tv = parse_double(cells[static_cast<std::size_t>(t_col)], line_no);
        require(tv == static_cast<int>(tv) && tv >= 0, ErrorKind::io,
                "dataset csv line " + std::to_string(line_no) + ": treatment must be a non-negative integer");
        ts.push_back(static_cast<int>(tv));
        ys.push_back(parse_double(cells[static_cast<std::size_t>(y_col)], line_no));
        if (!mu_cols.empty()) {
            std::vector<double> mu;
            for (int c : mu_cols) { mu.push_back(parse_double(cells[static_cast<std::size_t>(c)], line_no)); }
            mus.push_back(std::move(mu));
        }
    }
    Dataset ds;
    const auto n = static_cast<Eigen::Index>(xs.size());
    ds.x.resize(n, d);
    ds.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) { ds.x(i, j) = xs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]; }
        ds.y(i) = ys[static_cast<std::size_t>(i)];
    }
    ds.t = std::move(ts);
    int max_t = -1;
    for (int ti : ds.t) { max_t = std::max(max_t, ti); }
    ds.arms = arms_hint > 0 ? arms_hint : (!mu_cols.empty() ? static_cast<int>(mu_cols.size()) : max_t + 1);
    if (!mu_cols.empty()) {
        Matrix truth(n, static_cast<Eigen::Index>(mu_cols.size()));
        for (Eigen::Index i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < mu_cols.size(); ++k) {
                truth(i, static_cast<Eigen::Index>(k)) = mus[static_cast<std::size_t>(i)][k];
            }
        }
        ds.truth = std::move(truth);
    }
    ds.check_shapes();
    return ds;
}

void write_provenance_json(const Dataset &ds, const std::string &path) {
    nlohmann::json j;
    j["generator"] = ds.provenance.generator;
    j["seed"] = ds.provenance.seed;
    j["params"] = ds.provenance.params;
    j["rows"] = ds.rows();
    j["covariates"] = ds.covariates();
    j["arms"] = ds.arms;
    j["arm_counts"] = ds.arm_counts();
    std::ofstream out(path);
    require(out.good(), ErrorKind::io, "cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
}

Provenance read_provenance_json(const std::string &path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::io, "cannot open provenance '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorKind::io, "provenance '" + path + "': " + e.what());
    }
    Provenance p;
    p.generator = j.value("generator", std::string{});
    p.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("params")) { p.params = j["params"]; }
    return p;
}

}  // namespace multibal
