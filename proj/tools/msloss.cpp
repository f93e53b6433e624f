#include "msloss/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

int run(const std::string& command, const std::string& config_path, std::optional<std::uint64_t> seed,
        std::string out_path, const std::string& scenario) {
    using namespace msloss;
    RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (seed)
        config.train.seed = *seed;
    if (!scenario.empty())
        set_config_value(config, "dump.scenario", scenario);
    if (!out_path.empty())
        config.out = out_path;

    CommandResult result;
    if (command == "train")
        result = cmd_train(config);
    else if (command == "gradcheck")
        result = cmd_gradcheck(config);
    else if (command == "ablate")
        result = cmd_ablate(config);
    else
        result = cmd_dump_weights(config);

    if (config.out.empty()) {
        std::cout << result.document;
    } else {
        std::ofstream out(config.out, std::ios::binary);
        if (!out)
            throw IoError("cannot write " + config.out);
        out << result.document;
    }
    return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pair-weighting loss laboratory: train, gradcheck, ablate, dump-weights"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_path;
    std::string scenario;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key/value config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "overrides the config seed");
        sub->add_option("--out", out_path, "output document path (default: stdout)");
    };
    add_common(app.add_subcommand("train", "train one method and report Recall@K"));
    add_common(app.add_subcommand("gradcheck", "finite-difference checks of every loss"));
    add_common(app.add_subcommand("ablate", "train every method on the same data"));
    auto* dump = app.add_subcommand("dump-weights", "pair weights along a similarity sweep");
    add_common(dump);
    dump->add_option("--scenario", scenario, "S, P or N")->check(CLI::IsMember({"S", "P", "N"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : msloss::kExitUsage;
    }

    try {
        return run(app.get_subcommands().front()->get_name(), config_path, seed, out_path, scenario);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return msloss::kExitUsage;
    }
}
