#pragma once

#include "multibal/errors.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace multibal::cli {

enum class ValueType { integer, seed, real, text, choice, real_list, int_list, text_list };

const char *to_string(ValueType t);

/// One documented configuration key.
struct KeyDef {
    std::string key;
    ValueType type = ValueType::text;
    std::string fallback;               // default; "auto" resolves at finalize()
    std::string help;
    std::vector<std::string> choices;   // ValueType::choice and text_list members
    std::vector<std::string> commands;  // commands that accept the key
    bool accepts_auto = false;
    bool required = false;
};

const std::vector<KeyDef> &key_schema();

/// Human-readable dump of every key, its type, default and commands.
std::string help_config();

/// Configuration error that carries the offending key.
class KeyError : public Error {
public:
    KeyError(std::string key, const std::string &message)
        : Error(ErrorKind::config, message), key_(std::move(key)) {}
    const std::string &key() const noexcept { return key_; }

private:
    std::string key_;
};

inline const std::vector<std::string> kCommands{"gen", "train", "boab", "eval", "bench", "geodesic"};
inline const std::vector<std::string> kGenerators{"hard", "dose", "tree", "cycle"};

/// Flat dotted key=value configuration for one command.
/// Sources apply as defaults < config file < command-line flags.
class RunConfig {
public:
    /// `variant` is the generator for `gen` and empty otherwise.
    RunConfig(std::string command, std::string variant = "");

    const std::string &command() const { return command_; }
    const std::string &variant() const { return variant_; }

    /// Validates key, applicability and type, then stores the value.
    void set(const std::string &key, const std::string &value);

    /// `key=value` lines ('#' comments, blank lines allowed), or a JSON object
    /// (a manifest's "config" member is used when present).
    void load_file(const std::string &path);
    void load_text(const std::string &text, const std::string &origin);
    void load_json(const nlohmann::json &config);

    /// Resolves "auto" defaults and checks required keys and cross-key rules.
    void finalize();

    bool has(const std::string &key) const;
    std::string text(const std::string &key) const;
    long long integer(const std::string &key) const;
    std::uint64_t unsigned_integer(const std::string &key) const;
    double real(const std::string &key) const;
    bool is_auto(const std::string &key) const;
    std::vector<double> reals(const std::string &key) const;
    std::vector<int> integers(const std::string &key) const;
    std::vector<std::string> texts(const std::string &key) const;

    /// Effective configuration, values as strings, sorted by key.
    nlohmann::json to_json() const;

private:
    const KeyDef &def(const std::string &key) const;
    void put_default(const std::string &key, const std::string &value);

    std::string command_;
    std::string variant_;
    std::map<std::string, std::string> values_;
};

std::vector<std::string> split_list(const std::string &text);

}  // namespace multibal::cli
