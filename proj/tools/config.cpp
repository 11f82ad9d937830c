#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace multibal::cli {

namespace {

const std::vector<std::string> kAll{"gen", "train", "boab", "eval", "bench", "geodesic"};
const std::vector<std::string> kGenUsers{"gen", "train", "boab", "eval"};
const std::vector<std::string> kDataUsers{"train", "boab", "eval"};
const std::vector<std::string> kTrainUsers{"train", "boab", "bench", "geodesic"};
const std::vector<std::string> kStrategyUsers{"train", "boab", "geodesic"};

std::vector<KeyDef> build_schema() {
    using V = ValueType;
    std::vector<KeyDef> s;
    auto add = [&](std::string key, V type, std::string fallback, std::string help,
                   std::vector<std::string> commands, std::vector<std::string> choices = {}, bool accepts_auto = false,
                   bool required = false) {
        KeyDef d;
        d.key = std::move(key);
        d.type = type;
        d.fallback = std::move(fallback);
        d.help = std::move(help);
        d.commands = std::move(commands);
        d.choices = std::move(choices);
        d.accepts_auto = accepts_auto;
        d.required = required;
        s.push_back(std::move(d));
    };
    add("seed", V::seed, "0", "global seed; data and training seeds default to it", kAll);
    add("out", V::text, "out", "output directory, created when missing", kAll);
    add("workers", V::integer, "1", "worker thread cap", kAll);

    add("gen.n", V::integer, "auto", "rows (hard 1500, dose 1797, tree/cycle 1000)", kGenUsers, {}, true);
    add("gen.d", V::integer, "auto", "covariates, hard generator only (20)", kGenUsers, {}, true);
    add("gen.arms", V::integer, "auto", "treatment arms K (hard 4, dose 10)", kGenUsers, {}, true);
    add("gen.kappa", V::real, "auto", "propensity sharpness (hard 5.0, dose 2.0)", kGenUsers, {}, true);
    add("gen.noise_variance", V::real, "0.1", "outcome noise variance", kGenUsers);
    add("gen.digits_csv", V::text, "", "dose only: 64 pixel columns plus label; empty uses Gaussian covariates",
        kGenUsers);
    add("data.seed", V::seed, "auto", "generator seed (defaults to seed)", {"gen", "train", "boab", "eval", "geodesic"},
        {}, true);
    add("data.path", V::text, "", "dataset CSV; empty generates data from the gen.* keys", kDataUsers);
    add("data.generator", V::choice, "hard", "generator used when data.path is empty", kDataUsers,
        {"hard", "dose", "tree", "cycle"});
    add("data.arms", V::integer, "0", "arm count hint when reading a CSV without mu columns (0 infers)", kDataUsers);

    add("alpha", V::real, "1.0", "balancing weight", {"train", "geodesic"});
    add("train.epochs", V::integer, "100", "training epochs", kTrainUsers);
    add("train.batch_size", V::integer, "128", "mini-batch size", kTrainUsers);
    add("train.lr", V::real, "0.001", "Adam learning rate", kTrainUsers);
    add("train.rep_dim", V::integer, "16", "representation width", kTrainUsers);
    add("train.phi_hidden", V::int_list, "64,64", "representation hidden widths", kTrainUsers);
    add("train.head_hidden", V::int_list, "32", "outcome head hidden widths", kTrainUsers);
    add("train.head_mode", V::choice, "auto", "auto, multi_head or embed_conditioned", kTrainUsers,
        {"auto", "multi_head", "embed_conditioned"});
    add("train.balance_subsample", V::integer, "512", "rows in the per-step balancing batch", kTrainUsers);
    add("train.seed", V::seed, "auto", "training seed (defaults to seed)", kTrainUsers, {}, true);

    add("strategy.kind", V::choice, "agg", "pair, ova or agg", kStrategyUsers, {"pair", "ova", "agg"});
    add("strategy.kernel", V::choice, "rbf", "kernel on representations", kStrategyUsers, {"rbf", "linear"});
    add("strategy.bandwidth", V::real, "auto", "rbf bandwidth; auto uses the median heuristic", kStrategyUsers, {},
        true);
    add("strategy.embedding_kernel", V::choice, "rbf", "kernel on treatment embeddings (agg)", kStrategyUsers,
        {"rbf", "linear"});
    add("strategy.embedding_bandwidth", V::real, "auto", "embedding rbf bandwidth", kStrategyUsers, {}, true);
    add("strategy.embedding_dim", V::integer, "8", "treatment embedding width", kStrategyUsers);
    add("strategy.geodesic_weight", V::real, "0", "weight of the graph-distance term on the embedding table",
        kStrategyUsers);
    add("strategy.min_arm_batch", V::integer, "2", "arms with fewer batch rows are skipped", kStrategyUsers);

    add("boab.grid", V::real_list, "0,0.1,0.5,1,2,5", "alpha grid, strictly increasing", {"boab"});
    add("boab.bootstrap", V::integer, "0", "bootstrap replicates of alpha-hat (0 disables, else >= 20)", {"boab"});
    add("complexity.method", V::choice, "lipschitz", "lipschitz, rademacher_mc or constant", {"boab"},
        {"lipschitz", "rademacher_mc", "constant"});
    add("complexity.scale", V::real, "1.0", "constant C", {"boab"});
    add("complexity.delta", V::real, "0.05", "confidence level", {"boab"});
    add("complexity.mc_draws", V::integer, "64", "sign draws for rademacher_mc", {"boab"});

    add("eval.model", V::text_list, "", "model files, comma separated", {"eval"}, {}, false, true);
    add("eval.labels", V::text_list, "auto", "labels for the models (default: file stems)", {"eval"}, {}, true);

    add("bench.K", V::int_list, "4,20", "arm counts for the timing table", {"bench"});
    add("bench.strategies", V::text_list, "pair,ova,agg", "strategies to benchmark", {"bench"},
        {"pair", "ova", "agg"});
    add("bench.n", V::integer, "1500", "rows for the timing table", {"bench"});
    add("bench.epochs", V::integer, "5", "timed epochs per cell", {"bench"});
    add("bench.repeats", V::integer, "5", "timed penalty evaluations per cell", {"bench"});
    add("bench.timing", V::integer, "1", "1 runs the timing table", {"bench"});
    add("bench.concentration", V::integer, "1", "1 runs the concentration table", {"bench"});
    add("bench.concentration_K", V::int_list, "4,16", "arm counts for the concentration table", {"bench"});
    add("bench.concentration_n", V::int_list, "500,2000", "sample sizes for the concentration table", {"bench"});
    add("bench.concentration_reps", V::integer, "50", "independent datasets per cell", {"bench"});

    add("geodesic.topology", V::choice, "tree", "tree or cycle", {"geodesic"}, {"tree", "cycle"});
    add("geodesic.n", V::integer, "1000", "rows", {"geodesic"});
    add("geodesic.noise_variance", V::real, "0.1", "outcome noise variance", {"geodesic"});
    add("geodesic.from", V::integer, "auto", "interpolation start arm (tree 3, cycle 0)", {"geodesic"}, {}, true);
    add("geodesic.to", V::integer, "auto", "interpolation end arm (tree 6, cycle 4)", {"geodesic"}, {}, true);
    add("geodesic.steps", V::integer, "11", "points on the interpolation grid", {"geodesic"});
    return s;
}

// Command-specific defaults that differ from the schema fallback.
const std::map<std::string, std::map<std::string, std::string>> &command_defaults() {
    static const std::map<std::string, std::map<std::string, std::string>> d{
        {"geodesic",
         {{"strategy.geodesic_weight", "5.0"},
          {"train.head_mode", "embed_conditioned"},
          {"alpha", "0.1"},
          {"train.epochs", "150"}}},
    };
    return d;
}

bool contains(const std::vector<std::string> &v, const std::string &s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) { return ""; }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_int(const std::string &s, long long &out) {
    const char *end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && p == end && !s.empty();
}

bool parse_u64(const std::string &s, std::uint64_t &out) {
    const char *end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && p == end && !s.empty();
}

bool parse_real(const std::string &s, double &out) {
    if (s.empty()) { return false; }
    std::istringstream in(s);
    in.imbue(std::locale::classic());
    in >> out;
    return !in.fail() && in.peek() == std::char_traits<char>::eof() && std::isfinite(out);
}

void check_value(const KeyDef &d, const std::string &value) {
    if (d.accepts_auto && value == "auto") { return; }
    auto fail = [&](const std::string &what) {
        throw KeyError(d.key, "key '" + d.key + "': expected " + what + ", got '" + value + "'");
    };
    switch (d.type) {
    case ValueType::integer: {
        long long v = 0;
        if (!parse_int(value, v)) { fail("an integer"); }
        break;
    }
    case ValueType::seed: {
        std::uint64_t v = 0;
        if (!parse_u64(value, v)) { fail("an unsigned 64-bit integer"); }
        break;
    }
    case ValueType::real: {
        double v = 0;
        if (!parse_real(value, v)) { fail("a finite real"); }
        break;
    }
    case ValueType::text:
        break;
    case ValueType::choice:
        if (!contains(d.choices, value)) {
            std::string all;
            for (const auto &c : d.choices) { all += (all.empty() ? "" : "|") + c; }
            fail("one of " + all);
        }
        break;
    case ValueType::real_list:
        for (const auto &item : split_list(value)) {
            double v = 0;
            if (!parse_real(item, v)) { fail("a comma-separated list of reals"); }
        }
        if (split_list(value).empty()) { fail("a non-empty list"); }
        break;
    case ValueType::int_list:
        for (const auto &item : split_list(value)) {
            long long v = 0;
            if (!parse_int(item, v)) { fail("a comma-separated list of integers"); }
        }
        if (split_list(value).empty() && d.key != "train.head_hidden") { fail("a non-empty list"); }
        break;
    case ValueType::text_list:
        for (const auto &item : split_list(value)) {
            if (!d.choices.empty() && !contains(d.choices, item)) { fail("items from the documented set"); }
            if (item.find_first_of(" \t") != std::string::npos) { fail("items without whitespace"); }
        }
        break;
    }
}

}  // namespace

const char *to_string(ValueType t) {
    switch (t) {
    case ValueType::integer: return "int";
    case ValueType::seed: return "u64";
    case ValueType::real: return "real";
    case ValueType::text: return "text";
    case ValueType::choice: return "choice";
    case ValueType::real_list: return "real-list";
    case ValueType::int_list: return "int-list";
    case ValueType::text_list: return "text-list";
    }
    return "?";
}

const std::vector<KeyDef> &key_schema() {
    static const std::vector<KeyDef> schema = build_schema();
    return schema;
}

std::string help_config() {
    std::ostringstream out;
    out << "# Configuration keys (flat key=value; later sources override earlier ones:\n"
           "# defaults < --config file < --set / flags). Lists are comma separated.\n";
    for (const KeyDef &d : key_schema()) {
        out << d.key << " = " << (d.fallback.empty() ? "\"\"" : d.fallback) << "\n";
        out << "    type: " << to_string(d.type);
        if (!d.choices.empty()) {
            out << " {";
            for (std::size_t i = 0; i < d.choices.size(); ++i) { out << (i ? "," : "") << d.choices[i]; }
            out << "}";
        }
        if (d.required) { out << ", required"; }
        out << "; commands:";
        for (const auto &c : d.commands) { out << " " << c; }
        out << "\n    " << d.help << "\n";
    }
    for (const auto &[command, overrides] : command_defaults()) {
        out << "# defaults for '" << command << "':";
        for (const auto &[k, v] : overrides) { out << " " << k << "=" << v; }
        out << "\n";
    }
    return out.str();
}

std::vector<std::string> split_list(const std::string &text) {
    std::vector<std::string> items;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) { items.push_back(item); }
    }
    return items;
}

RunConfig::RunConfig(std::string command, std::string variant)
    : command_(std::move(command)), variant_(std::move(variant)) {
    if (!contains(kAll, command_)) { throw KeyError("command", "unknown command '" + command_ + "'"); }
    if (command_ == "gen" && !contains(kGenerators, variant_)) {
        throw KeyError("generator", "gen needs a generator: hard, dose, tree or cycle");
    }
    for (const KeyDef &d : key_schema()) {
        if (contains(d.commands, command_)) { values_[d.key] = d.fallback; }
    }
    const auto &overrides = command_defaults();
    if (auto it = overrides.find(command_); it != overrides.end()) {
        for (const auto &[k, v] : it->second) { values_[k] = v; }
    }
}

const KeyDef &RunConfig::def(const std::string &key) const {
    for (const KeyDef &d : key_schema()) {
        if (d.key == key) { return d; }
    }
    throw KeyError(key, "unknown configuration key '" + key + "'");
}

void RunConfig::set(const std::string &key, const std::string &value) {
    const KeyDef &d = def(key);
    if (!contains(d.commands, command_)) {
        throw KeyError(key, "key '" + key + "' does not apply to command '" + command_ + "'");
    }
    const std::string v = trim(value);
    check_value(d, v);
    values_[key] = v;
}

void RunConfig::put_default(const std::string &key, const std::string &value) {
    if (values_.at(key) == "auto") { values_[key] = value; }
}

void RunConfig::load_text(const std::string &text, const std::string &origin) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') { continue; }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw KeyError(t, origin + ":" + std::to_string(line_no) + ": expected key=value");
        }
        set(trim(t.substr(0, eq)), t.substr(eq + 1));
    }
}

void RunConfig::load_json(const nlohmann::json &config) {
    const nlohmann::json &obj = config.contains("config") && config["config"].is_object() ? config["config"] : config;
    if (!obj.is_object()) { throw KeyError("config", "JSON configuration must be an object"); }
    for (const auto &[key, value] : obj.items()) {
        std::string text;
        if (value.is_string()) {
            text = value.get<std::string>();
        } else if (value.is_array()) {
            for (const auto &item : value) {
                text += (text.empty() ? "" : ",") + (item.is_string() ? item.get<std::string>() : item.dump());
            }
        } else if (value.is_number() || value.is_boolean()) {
            text = value.is_boolean() ? (value.get<bool>() ? "1" : "0") : value.dump();
        } else {
            throw KeyError(key, "key '" + key + "': unsupported JSON value");
        }
        set(key, text);
    }
}

void RunConfig::load_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) { throw Error(ErrorKind::io, "cannot open config file '" + path + "'"); }
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    const std::string head = trim(text);
    if (!head.empty() && head[0] == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error &e) {
            throw KeyError("config", "config file '" + path + "' is not valid JSON: " + e.what());
        }
        load_json(j);
    } else {
        load_text(text, path);
    }
}

void RunConfig::finalize() {
    auto reject_explicit = [&](const std::string &key, const std::string &why) {
        if (has(key) && values_.at(key) != "auto") {
            throw KeyError(key, "key '" + key + "' " + why);
        }
    };
    if (has("data.seed")) { put_default("data.seed", values_.at("seed")); }
    if (has("train.seed")) { put_default("train.seed", values_.at("seed")); }

    std::string generator;
    if (command_ == "gen") {
        generator = variant_;
    } else if (has("data.generator") && text("data.path").empty()) {
        generator = text("data.generator");
    }
    if (!generator.empty()) {
        if (generator == "hard") {
            put_default("gen.n", "1500");
            put_default("gen.d", "20");
            put_default("gen.arms", "4");
            put_default("gen.kappa", "5.0");
        } else if (generator == "dose") {
            put_default("gen.n", "1797");
            put_default("gen.arms", "10");
            put_default("gen.kappa", "2.0");
            reject_explicit("gen.d", "applies only to the hard generator");
            if (values_.at("gen.arms") != "10") {
                throw KeyError("gen.arms", "key 'gen.arms' must be 10 for the dose generator");
            }
        } else {
            put_default("gen.n", "1000");
            reject_explicit("gen.d", "applies only to the hard generator");
            reject_explicit("gen.arms", "is fixed by the topology");
            reject_explicit("gen.kappa", "does not apply to topology generators");
        }
        if (generator != "dose" && has("gen.digits_csv") && !text("gen.digits_csv").empty()) {
            throw KeyError("gen.digits_csv", "key 'gen.digits_csv' applies only to the dose generator");
        }
    } else if (has("gen.n")) {
        for (const char *k : {"gen.n", "gen.d", "gen.arms", "gen.kappa"}) {
            reject_explicit(k, "is unused when data.path is set");
        }
    }
    if (command_ == "geodesic") {
        const bool tree = text("geodesic.topology") == "tree";
        put_default("geodesic.from", tree ? "3" : "0");
        put_default("geodesic.to", tree ? "6" : "4");
        if (text("train.head_mode") == "multi_head") {
            throw KeyError("train.head_mode", "key 'train.head_mode': geodesic runs need embed_conditioned heads");
        }
    }
    for (const KeyDef &d : key_schema()) {
        if (d.required && has(d.key) && values_.at(d.key).empty()) {
            throw KeyError(d.key, "missing required key '" + d.key + "'");
        }
    }
    if (command_ == "eval" && !is_auto("eval.labels") && texts("eval.labels").size() != texts("eval.model").size()) {
        throw KeyError("eval.labels", "key 'eval.labels' needs one label per model");
    }
}

bool RunConfig::has(const std::string &key) const { return values_.count(key) > 0; }

std::string RunConfig::text(const std::string &key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) { throw KeyError(key, "key '" + key + "' is not set for '" + command_ + "'"); }
    return it->second;
}

bool RunConfig::is_auto(const std::string &key) const { return text(key) == "auto"; }

long long RunConfig::integer(const std::string &key) const {
    long long v = 0;
    if (!parse_int(text(key), v)) { throw KeyError(key, "key '" + key + "' is not an integer"); }
    return v;
}

std::uint64_t RunConfig::unsigned_integer(const std::string &key) const {
    std::uint64_t v = 0;
    if (!parse_u64(text(key), v)) { throw KeyError(key, "key '" + key + "' is not an unsigned integer"); }
    return v;
}

double RunConfig::real(const std::string &key) const {
    double v = 0;
    if (!parse_real(text(key), v)) { throw KeyError(key, "key '" + key + "' is not a real"); }
    return v;
}

std::vector<double> RunConfig::reals(const std::string &key) const {
    std::vector<double> out;
    for (const auto &item : split_list(text(key))) {
        double v = 0;
        if (!parse_real(item, v)) { throw KeyError(key, "key '" + key + "' has a non-real item"); }
        out.push_back(v);
    }
    return out;
}

std::vector<int> RunConfig::integers(const std::string &key) const {
    std::vector<int> out;
    for (const auto &item : split_list(text(key))) {
        long long v = 0;
        if (!parse_int(item, v) || v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
            throw KeyError(key, "key '" + key + "' has a non-integer item");
        }
        out.push_back(static_cast<int>(v));
    }
    return out;
}

std::vector<std::string> RunConfig::texts(const std::string &key) const { return split_list(text(key)); }

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto &[k, v] : values_) { j[k] = v; }
    return j;
}

}  // namespace multibal::cli
