#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace multibal::cli {

/// Table of preformatted cells; labels must not contain whitespace or commas.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row);
};

/// Shortest round-trip text for a double.
std::string fmt(double v);
std::string fmt(long long v);
inline std::string fmt(int v) { return fmt(static_cast<long long>(v)); }

/// "# columns: ..." comment, a header row, then comma-separated rows.
void write_csv(const Table &table, const std::string &path);

/// gnuplot-ready: "# columns: ..." comment then whitespace-delimited rows.
void write_plotdata(const Table &table, const std::string &path);

struct Manifest {
    std::string tool = "multibal";
    std::string version;
    std::string command;
    std::string variant;
    nlohmann::json config = nlohmann::json::object();
    std::uint64_t seed = 0;
    int workers = 1;
    std::string started;
    std::string finished;
    std::vector<std::string> files;
    nlohmann::json metrics = nlohmann::json::object();       // deterministic headline values
    nlohmann::json measurements = nlohmann::json::object();  // wall-clock, excluded from replay

    nlohmann::json to_json() const;
    static Manifest from_json(const nlohmann::json &j);
};

/// Writes to a sibling temporary file, then renames over `path`.
void write_text_atomic(const std::string &path, const std::string &text);
void write_manifest(const Manifest &m, const std::string &path);
Manifest read_manifest(const std::string &path);

/// UTC, ISO 8601 with seconds.
std::string utc_timestamp();

}  // namespace multibal::cli
