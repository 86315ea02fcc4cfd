#include "cfmimo/config.hpp"
#include "cfmimo/experiments.hpp"
#include "cfmimo/minmax.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

std::vector<double> parse_grid(const std::string& text)
{
    std::vector<double> grid;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
    {
        try
        {
            std::size_t used = 0;
            grid.push_back(std::stod(item, &used));
            if (used != item.size())
                throw std::invalid_argument(item);
        }
        catch (const std::exception&)
        {
            throw cfmimo::ConfigError("grid", "grid: invalid value '" + item + "'");
        }
    }
    if (grid.empty())
        throw cfmimo::ConfigError("grid", "grid: must not be empty");
    return grid;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Cell-free massive MIMO downlink under adversarial APs"};
    app.require_subcommand(0, 0);

    std::string experiment;
    std::string config_path;
    std::vector<std::string> assignments;
    std::uint64_t seed = 0;
    std::string out_path;
    std::string grid_text;
    int drops = 20;
    std::string mode = "both";
    int sca_iters = 8;
    std::string preset;
    cfmimo::Experiment exp;

    app.add_option("experiment", experiment, "sweep-n | sweep-m | sweep-power | optimize | cdf | validate")
        ->required();
    app.add_option("--config", config_path, "key = value config file");
    app.add_option("--set", assignments, "override one key (repeatable)")->allow_extra_args(false);
    auto* seed_opt = app.add_option("--seed", seed, "master seed");
    app.add_option("--out", out_path, "CSV output path (default stdout)");
    app.add_option("--grid", grid_text, "comma-separated sweep grid");
    app.add_option("--drops", drops, "random network drops");
    app.add_option("--mode", mode, "optimize: psa | data | both");
    app.add_option("--sca-iters", sca_iters, "maximum SCA iterations");
    app.add_option("--preset", preset, "fig5-n32 | fig5-n64");
    app.add_option("--trace", exp.trace_path, "optimize: solve trace CSV of drop 0");
    app.add_option("--dump-cone", exp.dump_cone_path, "optimize: first cone instance of drop 0");
    app.add_option("--dump-realizations", exp.dump_realizations_path, "large-scale fading CSV of every drop");
    app.add_option("--replay", exp.replay_path, "validate: CSV whose config header is re-parsed");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try
    {
        exp.kind = cfmimo::parse_experiment(experiment);
        exp.drops = drops;
        exp.sca_iters = sca_iters;
        if (!grid_text.empty())
            exp.grid = parse_grid(grid_text);
        if (mode == "psa")
            exp.modes = {cfmimo::AttackMode::Psa};
        else if (mode == "data")
            exp.modes = {cfmimo::AttackMode::Data};
        else if (mode != "both")
            throw cfmimo::ConfigError("mode", "mode: expected psa, data or both, got '" + mode + "'");

        cfmimo::ConfigBuilder builder;
        if (!config_path.empty())
            builder.load_file(config_path);
        for (const auto& a : assignments)
            builder.set(a);
        if (*seed_opt)
            builder.set("seed", std::to_string(seed));
        cfmimo::SystemConfig config = builder.resolve();
        if (!preset.empty())
        {
            cfmimo::apply_preset(config, preset);
            config.validate();
        }

        if (out_path.empty())
            return cfmimo::run_experiment(exp, config, std::cout, std::cerr);
        std::ofstream out(out_path);
        if (!out)
            throw cfmimo::ConfigError("out", "cannot write '" + out_path + "'");
        return cfmimo::run_experiment(exp, config, out, std::cerr);
    }
    catch (const cfmimo::ConfigError& e)
    {
        std::cerr << "config error [" << e.key() << "]: " << e.what() << '\n';
        return 2;
    }
    catch (const cfmimo::InfeasibleConfig& e)
    {
        std::cerr << "infeasible config: " << e.what() << '\n';
        return 3;
    }
    catch (const cfmimo::SolverFailure& e)
    {
        std::cerr << "solver failure: " << e.what() << '\n';
        return 4;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
