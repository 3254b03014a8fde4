#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "recolat/recolat.hpp"

namespace {

constexpr int kExitModel = 1;
constexpr int kExitUsage = 2;

std::string commands_line()
{
    std::string s;
    for (const auto& c : recolat::command_names()) {
        s += (s.empty() ? "" : ", ") + c;
    }
    return s;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Migration-recombination dynamics and their labelled partitioning dual.\nCommands: " +
                 commands_line()};
    app.set_version_flag("--version", "recolat 0.1.0");

    std::string command;
    std::string config_path;
    std::string out_path;
    std::string format = "csv";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> replicates;
    std::optional<double> t;

    app.add_option("command", command, "one of: " + commands_line())->required();
    app.add_option("--config", config_path, "JSON run configuration")->required();
    app.add_option("--out", out_path, "write results here instead of stdout");
    app.add_option("--format", format, "output format")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--seed", seed, "override the configured seed");
    app.add_option("--replicates", replicates, "override the configured number of replicates")
        ->check(CLI::PositiveNumber);
    app.add_option("--t", t, "override the configured horizon")->check(CLI::NonNegativeNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    const auto& known = recolat::command_names();
    if (std::find(known.begin(), known.end(), command) == known.end()) {
        std::cerr << "unknown command '" << command << "'\n\n" << app.help();
        return kExitUsage;
    }

    std::ifstream in(config_path);
    if (!in) {
        std::cerr << "cannot read config file '" << config_path << "'\n";
        return kExitUsage;
    }
    std::stringstream text;
    text << in.rdbuf();

    try {
        const auto cfg = recolat::parse_config(text.str());
        const auto table = recolat::run(command, cfg, {t, seed, replicates});
        for (const auto& w : table.warnings) {
            std::cerr << "warning: " << w << '\n';
        }
        const std::string body =
            format == "json" ? recolat::to_json(table).dump(2) + "\n" : recolat::to_csv(table);
        if (out_path.empty()) {
            std::cout << body;
        } else {
            std::ofstream out(out_path);
            if (!out) {
                std::cerr << "cannot write '" << out_path << "'\n";
                return kExitUsage;
            }
            out << body;
        }
    } catch (const recolat::ModelError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitModel;
    }
    return 0;
}
