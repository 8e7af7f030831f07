#include "commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using pnflat::cli::json;
    CLI::App app{"Reduced vector-field Peierls-Nabarro model: kernels, profiles, 2D solves, stability, elastic extension"};
    app.require_subcommand(1, 1);

    std::string config_path, out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<double> tol;
    std::vector<std::string> beta;
    std::optional<std::string> nu;

    for (const auto& name : pnflat::cli::subcommands()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON config file (schema_version 1)")->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "random seed");
        sub->add_option("--tol", tol, "solver tolerance");
        if (name == "kernel")
            sub->add_option("--beta", beta, "beta values (numbers or p/q)");
        else if (name != "validate")
            sub->add_option("--beta", beta, "beta (number or p/q)")->expected(1);
        if (name == "extend") sub->add_option("--nu", nu, "Poisson ratio (number or p/q)");
    }
    CLI11_PARSE(app, argc, argv);
    const std::string cmd = app.get_subcommands().front()->get_name();

    json overrides = json::object();
    if (seed) overrides["seed"] = *seed;
    if (tol) overrides["tol"] = *tol;
    if (nu) overrides["nu"] = *nu;
    if (!beta.empty()) {
        if (cmd == "kernel") overrides["beta"] = beta;
        else if (cmd == "profile") overrides["beta_tilde"] = beta.front();
        else if (cmd == "extend") overrides["nu"] = pnflat::cli::num(1 - pnflat::cli::parse_number(beta.front(), "beta"));
        else overrides["beta"] = beta.front();
    }
    try {
        const json file = config_path.empty() ? json() : pnflat::cli::load_config_file(config_path);
        const json cfg = pnflat::cli::effective_config(cmd, file, overrides);
        return pnflat::cli::run(cmd, cfg, out_dir, std::cerr);
    } catch (const pnflat::ConfigurationError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return pnflat::cli::config_error;
    }
}
