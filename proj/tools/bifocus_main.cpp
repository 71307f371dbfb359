#include <cstdint>
#include <string>

#include <CLI11.hpp>

#include "bifocus/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"bifocus: corank-2 tangency models, index raising, and "
                 "return-map renormalization at desk scale"};
    app.require_subcommand(1);

    std::string config;
    auto add_config_cmd = [&](const std::string& name, const std::string& desc) {
        CLI::App* cmd = app.add_subcommand(name, desc);
        cmd->add_option("config", config, "JSON scenario config")->required();
        return cmd;
    };

    CLI::App* validate = add_config_cmd("validate", "genericity determinant report");
    CLI::App* raise_cmd = add_config_cmd("raise", "one suborder-raising step on a model pair");
    CLI::App* order_n = add_config_cmd("order-n", "binary-tree raising to order N");
    CLI::App* renorm = add_config_cmd("renorm", "first-return rescaling convergence table");
    CLI::App* universal = add_config_cmd("universal", "fit a disk map by a renormalized iteration");

    std::uint64_t seed = 0;
    int count = 1;
    int order = 1;
    std::string out_dir = "reference_models";
    CLI::App* gen = app.add_subcommand("gen-reference",
                                       "deterministic index-(n,0) reference models");
    gen->add_option("--seed", seed, "RNG seed")->required();
    gen->add_option("--count", count, "number of models")->required();
    gen->add_option("--order", order, "tangency order n")->required();
    gen->add_option("--out", out_dir, "output directory")->required();

    std::string renorm_out = "renorm_reference.json";
    CLI::App* gen_renorm = app.add_subcommand(
        "gen-renorm-reference", "fixed order-2 model for the renormalization studies");
    gen_renorm->add_option("--out", renorm_out, "output file")->required();

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        return bifocus::run_gen_reference(seed, count, order, out_dir);
    }
    if (gen_renorm->parsed()) {
        return bifocus::run_gen_renorm_reference(renorm_out);
    }
    std::string kind;
    if (validate->parsed()) kind = "validate";
    if (raise_cmd->parsed()) kind = "raise";
    if (order_n->parsed()) kind = "order_n";
    if (renorm->parsed()) kind = "renorm";
    if (universal->parsed()) kind = "universal";
    return bifocus::run_scenario(config, kind);
}
