#include "output.hpp"

#include "multibal/errors.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace multibal::cli {

namespace {

std::ofstream open_out(const std::string &path) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) { std::filesystem::create_directories(p.parent_path()); }
    std::ofstream out(path, std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::io, "cannot write '" + path + "'");
    return out;
}

void check_table(const Table &t, const std::string &path) {
    require(!t.columns.empty(), ErrorKind::io, "table for '" + path + "' has no columns");
    for (const auto &row : t.rows) {
        require(row.size() == t.columns.size(), ErrorKind::shape, "ragged table row for '" + path + "'");
    }
}

std::string columns_comment(const Table &t) {
    std::string s = "# columns:";
    for (const auto &c : t.columns) { s += " " + c; }
    return s;
}

}  // namespace

void Table::add(std::vector<std::string> row) { rows.push_back(std::move(row)); }

std::string fmt(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string fmt(long long v) { return std::to_string(v); }

void write_csv(const Table &table, const std::string &path) {
    check_table(table, path);
    std::ofstream out = open_out(path);
    out << columns_comment(table) << "\n";
    for (std::size_t i = 0; i < table.columns.size(); ++i) { out << (i ? "," : "") << table.columns[i]; }
    out << "\n";
    for (const auto &row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) { out << (i ? "," : "") << row[i]; }
        out << "\n";
    }
    require(static_cast<bool>(out), ErrorKind::io, "write failed for '" + path + "'");
}

void write_plotdata(const Table &table, const std::string &path) {
    check_table(table, path);
    require(!table.rows.empty(), ErrorKind::insufficient_data, "plot data for '" + path + "' is empty");
    std::ofstream out = open_out(path);
    out << columns_comment(table) << "\n";
    for (const auto &row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) { out << (i ? " " : "") << row[i]; }
        out << "\n";
    }
    require(static_cast<bool>(out), ErrorKind::io, "write failed for '" + path + "'");
}

nlohmann::json Manifest::to_json() const {
    nlohmann::json j;
    j["tool"] = tool;
    j["version"] = version;
    j["command"] = command;
    j["variant"] = variant;
    j["config"] = config;
    j["seed"] = seed;
    j["workers"] = workers;
    j["started"] = started;
    j["finished"] = finished;
    j["files"] = files;
    j["metrics"] = metrics;
    j["measurements"] = measurements;
    return j;
}

Manifest Manifest::from_json(const nlohmann::json &j) {
    Manifest m;
    try {
        m.tool = j.at("tool").get<std::string>();
        m.version = j.at("version").get<std::string>();
        m.command = j.at("command").get<std::string>();
        m.variant = j.value("variant", std::string());
        m.config = j.at("config");
        m.seed = j.at("seed").get<std::uint64_t>();
        m.workers = j.at("workers").get<int>();
        m.started = j.value("started", std::string());
        m.finished = j.value("finished", std::string());
        m.files = j.value("files", std::vector<std::string>());
        m.metrics = j.at("metrics");
        m.measurements = j.value("measurements", nlohmann::json::object());
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorKind::io, std::string("malformed manifest: ") + e.what());
    }
    return m;
}

void write_text_atomic(const std::string &path, const std::string &text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out = open_out(tmp);
        out << text;
        out.flush();
        require(static_cast<bool>(out), ErrorKind::io, "write failed for '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    require(!ec, ErrorKind::io, "cannot move '" + tmp + "' to '" + path + "': " + ec.message());
}

void write_manifest(const Manifest &m, const std::string &path) { write_text_atomic(path, m.to_json().dump(2) + "\n"); }

Manifest read_manifest(const std::string &path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::io, "cannot open manifest '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error &e) {
        throw Error(ErrorKind::io, "manifest '" + path + "' is not valid JSON: " + e.what());
    }
    return Manifest::from_json(j);
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace multibal::cli
