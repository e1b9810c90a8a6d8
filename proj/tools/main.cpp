#include <string>

#include <CLI11.hpp>

#include "iklflow/cli.hpp"

int main(int argc, char **argv) {
    CLI::App app{"particle simulator for kernelized inclusive-KL gradient flows"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string scope = "all";

    CLI::App *run = app.add_subcommand("run", "execute a configured flow");
    run->add_option("config", config_path,
                    "run config (JSON; // comments allowed)")
        ->required();
    run->add_option("--out", out_dir, "output directory")->required();

    CLI::App *check =
        app.add_subcommand("check", "run the acceptance-check suite");
    check->add_option("scope", scope, "kernels | flows | oracles | all");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) { return iklflow::cmd_run(config_path, out_dir); }
    return iklflow::cmd_check(scope);
}
