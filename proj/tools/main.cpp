#include "commands.hpp"
#include "config.hpp"

#include "multibal/errors.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

using namespace multibal;
using namespace multibal::cli;

namespace {

int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::io:
    case ErrorKind::shape:
    case ErrorKind::insufficient_data:
    case ErrorKind::overlap_violation:
    case ErrorKind::degenerate: return 3;
    case ErrorKind::numeric: return 4;
    }
    return 4;
}

std::string one_line(std::string s) {
    for (char &c : s) {
        if (c == '\n' || c == '\r') { c = ' '; }
        if (c == '"') { c = '\''; }
    }
    return s;
}

void report_error(const std::string &kind, const std::string &key, const std::string &message) {
    std::cerr << "multibal: error kind=" << kind;
    if (!key.empty()) { std::cerr << " key=" << key; }
    std::cerr << " message=\"" << one_line(message) << "\"\n";
}

/// Options shared by every run command; convenience flags map onto config keys.
struct CommandOptions {
    std::string name;
    std::string generator;
    std::optional<std::string> config_path;
    std::vector<std::string> sets;
    std::map<std::string, std::optional<std::string>> flags;
};

void add_flag(CLI::App *sub, CommandOptions &o, const std::string &flag, const std::string &key) {
    o.flags[key] = std::nullopt;
    sub->add_option(flag, o.flags[key], "sets " + key);
}

CLI::App *add_command(CLI::App &app, CommandOptions &o, const std::string &name, const std::string &help,
                      const std::vector<std::pair<std::string, std::string>> &extra) {
    o.name = name;
    CLI::App *sub = app.add_subcommand(name, help);
    sub->add_option("--config", o.config_path, "key=value file or JSON manifest");
    sub->add_option("--set", o.sets, "key=value override (repeatable)");
    add_flag(sub, o, "--seed", "seed");
    add_flag(sub, o, "--out", "out");
    add_flag(sub, o, "--workers", "workers");
    for (const auto &[flag, key] : extra) { add_flag(sub, o, flag, key); }
    return sub;
}

RunConfig build_config(const CommandOptions &o) {
    RunConfig cfg(o.name, o.generator);
    if (o.config_path) { cfg.load_file(*o.config_path); }
    for (const auto &[key, value] : o.flags) {
        if (value) { cfg.set(key, *value); }
    }
    for (const auto &s : o.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) { throw KeyError(s, "--set expects key=value, got '" + s + "'"); }
        cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
    cfg.finalize();
    return cfg;
}

void print_summary(const Manifest &m, const std::string &out) {
    std::cout << "multibal " << m.command << (m.variant.empty() ? "" : " " + m.variant) << ": wrote "
              << m.files.size() << " files to " << out << "\n";
    for (const char *key : {"alpha_hat", "sqrt_pehe", "adrf_argmin", "interpolation_mid", "cyclic_order"}) {
        if (m.metrics.contains(key)) { std::cout << "  " << key << " = " << m.metrics[key].dump() << "\n"; }
    }
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"multibal: multi-treatment balanced representation learning"};
    app.set_version_flag("--version", std::string(kToolVersion));
    bool help_config_flag = false;
    app.add_flag("--help-config", help_config_flag, "print every configuration key and exit");

    std::vector<CommandOptions> opts(6);
    CLI::App *gen = add_command(app, opts[0], "gen", "generate a dataset",
                                {{"--n", "gen.n"}, {"--K", "gen.arms"}, {"--kappa", "gen.kappa"}});
    gen->add_option("generator", opts[0].generator, "hard, dose, tree or cycle")
        ->required()
        ->check(CLI::IsMember(kGenerators));
    add_command(app, opts[1], "train", "train one model at a fixed alpha",
                {{"--data", "data.path"}, {"--strategy", "strategy.kind"}, {"--alpha", "alpha"},
                 {"--epochs", "train.epochs"}});
    add_command(app, opts[2], "boab", "select alpha by minimizing the profile bound",
                {{"--data", "data.path"}, {"--strategy", "strategy.kind"}, {"--grid", "boab.grid"},
                 {"--epochs", "train.epochs"}, {"--bootstrap", "boab.bootstrap"}});
    add_command(app, opts[3], "eval", "PEHE and ADRF reports for saved models",
                {{"--data", "data.path"}, {"--model", "eval.model"}, {"--labels", "eval.labels"}});
    add_command(app, opts[4], "bench", "timing and concentration tables",
                {{"--K", "bench.K"}, {"--strategies", "bench.strategies"}, {"--n", "bench.n"}});
    add_command(app, opts[5], "geodesic", "topology run with embedding interpolation",
                {{"--topology", "geodesic.topology"}, {"--alpha", "alpha"}, {"--epochs", "train.epochs"}});

    std::string replay_manifest;
    std::optional<std::string> replay_out;
    CLI::App *rep = app.add_subcommand("replay", "re-run a manifest and compare its metrics");
    rep->add_option("manifest", replay_manifest, "manifest.json of an earlier run")->required();
    rep->add_option("--out", replay_out, "output directory (default: <manifest dir>/replay)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        report_error("config", "", e.what());
        return 2;
    }

    if (help_config_flag) {
        std::cout << help_config();
        return 0;
    }
    try {
        if (rep->parsed()) {
            const std::string out =
                replay_out.value_or((std::filesystem::path(replay_manifest).parent_path() / "replay").string());
            const ReplayReport r = replay(replay_manifest, out);
            if (!r.mismatches.empty()) {
                std::string keys;
                for (const auto &k : r.mismatches) { keys += (keys.empty() ? "" : ",") + k; }
                report_error("numeric", "", "replay metrics differ: " + keys);
                return 4;
            }
            std::cout << "multibal replay: " << r.compared << " metric values identical\n";
            return 0;
        }
        for (const auto &o : opts) {
            if (!app.got_subcommand(o.name)) { continue; }
            const RunConfig cfg = build_config(o);
            const Manifest m = execute(cfg);
            print_summary(m, cfg.text("out"));
            return 0;
        }
        std::cerr << app.help();
        report_error("config", "command", "a command is required");
        return 2;
    } catch (const KeyError &e) {
        report_error(to_string(e.kind()), e.key(), e.what());
        return exit_code(e.kind());
    } catch (const Error &e) {
        report_error(to_string(e.kind()), "", e.what());
        return exit_code(e.kind());
    } catch (const std::exception &e) {
        report_error("internal", "", e.what());
        return 1;
    }
}
