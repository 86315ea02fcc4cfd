#include "cfmimo/experiments.hpp"

#include "cfmimo/format.hpp"
#include "cfmimo/model.hpp"
#include "cfmimo/parallel.hpp"
#include "cfmimo/rates.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

namespace cfmimo {

std::string to_string(ExperimentKind kind)
{
    switch (kind)
    {
    case ExperimentKind::SweepN:
        return "sweep-n";
    case ExperimentKind::SweepM:
        return "sweep-m";
    case ExperimentKind::SweepPower:
        return "sweep-power";
    case ExperimentKind::Optimize:
        return "optimize";
    case ExperimentKind::Cdf:
        return "cdf";
    case ExperimentKind::Validate:
        break;
    }
    return "validate";
}

ExperimentKind parse_experiment(const std::string& text)
{
    for (auto k : {ExperimentKind::SweepN, ExperimentKind::SweepM, ExperimentKind::SweepPower,
                   ExperimentKind::Optimize, ExperimentKind::Cdf, ExperimentKind::Validate})
        if (to_string(k) == text)
            return k;
    throw ConfigError("experiment", "unknown experiment '" + text +
                                        "' (sweep-n|sweep-m|sweep-power|optimize|cdf|validate)");
}

void Experiment::validate() const
{
    if (drops < 1)
        throw ConfigError("drops", "drops: must be >= 1");
    if (sca_iters < 1)
        throw ConfigError("sca-iters", "sca-iters: must be >= 1");
    if (kind == ExperimentKind::Cdf && drops < 50)
        throw ConfigError("drops", "drops: the cdf experiment needs >= 50 drops");
    if (modes.empty())
        throw ConfigError("mode", "mode: at least one attack mode is required");
}

std::vector<double> default_grid(ExperimentKind kind)
{
    switch (kind)
    {
    case ExperimentKind::SweepN:
        return {0, 8, 16, 32};
    case ExperimentKind::SweepM:
        return {16, 32, 64, 128};
    case ExperimentKind::SweepPower:
        return {0, 1, 10, 100};
    default:
        return {};
    }
}

SystemConfig at_grid_point(const SystemConfig& base, ExperimentKind kind, double x)
{
    SystemConfig c = base;
    auto as_count = [x](const char* key) {
        if (x < 0.0 || x != std::floor(x))
            throw ConfigError(key, std::string(key) + ": grid value " + format_double(x) + " is not a count");
        return static_cast<int>(x);
    };
    switch (kind)
    {
    case ExperimentKind::SweepN:
        c.n_adv = as_count("n_adv");
        break;
    case ExperimentKind::SweepM:
        c.m_aps = as_count("m_aps");
        break;
    case ExperimentKind::SweepPower:
        if (x < 0.0)
            throw ConfigError("mu_dp", "mu_dp: normalized power must be >= 0");
        c.mu_dp = x * base.rho_dp;
        c.rho_da = x * base.rho_dp;
        break;
    default:
        break;
    }
    c.validate();
    return c;
}

void apply_preset(SystemConfig& config, const std::string& preset)
{
    if (preset == "fig5-n32")
        config.n_adv = 32;
    else if (preset == "fig5-n64")
        config.n_adv = 64;
    else
        throw ConfigError("preset", "unknown preset '" + preset + "' (fig5-n32|fig5-n64)");
}

namespace {

PowerAllocation equal_power(const LargeScaleFading& fading, const SystemConfig& config)
{
    PowerAllocation alloc;
    alloc.eta = uniform_eta(gamma_matrix(fading.beta, config));
    alloc.zeta = equal_allocation(kappa_matrix(fading.theta, config));
    return alloc;
}

struct SweepCell
{
    double cf[3] = {0, 0, 0};
    double mc[3] = {0, 0, 0};
    double se[3] = {0, 0, 0};
};

constexpr AttackMode kSweepModes[3] = {AttackMode::Psa, AttackMode::Data, AttackMode::None};

void write_header(std::ostream& os, const SystemConfig& config)
{
    os << config_header(config) << '\n';
}

} // namespace

std::vector<SweepRow> run_sweep(ExperimentKind kind, const SystemConfig& config, const std::vector<double>& grid,
                                int drops)
{
    if (grid.empty())
        throw ConfigError("grid", "grid: must not be empty");
    if (config.trials < 1000)
        throw ConfigError("trials", "trials: Monte Carlo columns need >= 1000 trials");
    std::vector<SystemConfig> points;
    for (double x : grid)
        points.push_back(at_grid_point(config, kind, x));

    const auto D = static_cast<std::size_t>(drops);
    std::vector<SweepCell> cells(points.size() * D);
    parallel_for(cells.size(), [&](std::size_t i) {
        const SystemConfig& cfg = points[i / D];
        const std::size_t d = i % D;
        const Drop drop = make_drop(cfg, d);
        const PowerAllocation alloc = equal_power(drop.fading, cfg);
        const ClosedFormTerms terms = closed_form_terms(alloc, drop.fading, cfg);
        McOptions mo;
        mo.trials = cfg.trials;
        mo.stream = d;
        mo.workers = 1;
        const McExpectations mc = mc_expectations(cfg, alloc, drop.fading, mo);
        for (int m = 0; m < 3; ++m)
        {
            const RateReport cf = closed_form_rate(kSweepModes[m], terms, cfg);
            const RateReport sim = rate_from_mc(kSweepModes[m], mc, cfg);
            cells[i].cf[m] = cf.sum_rate;
            cells[i].mc[m] = sim.sum_rate;
            cells[i].se[m] = sim.sum_rate_stderr;
        }
    });

    std::vector<SweepRow> rows;
    for (std::size_t g = 0; g < points.size(); ++g)
        for (int m = 0; m < 3; ++m)
        {
            SweepRow r;
            r.x = grid[g];
            r.mode = kSweepModes[m];
            r.alloc = kSweepModes[m] == AttackMode::None ? "none" : "equal";
            double var = 0.0;
            for (std::size_t d = 0; d < D; ++d)
            {
                const SweepCell& c = cells[g * D + d];
                r.rate_sum_cf += c.cf[m];
                r.rate_sum_mc += c.mc[m];
                var += c.se[m] * c.se[m];
            }
            r.rate_sum_cf /= static_cast<double>(D);
            r.rate_sum_mc /= static_cast<double>(D);
            r.stderr_mc = std::sqrt(var) / static_cast<double>(D);
            rows.push_back(r);
        }
    return rows;
}

OptimizeOutput run_optimize(const SystemConfig& config, const std::vector<AttackMode>& modes, int drops,
                            const MinMaxOptions& options)
{
    if (config.n_adv < 1)
        throw ConfigError("n_adv", "n_adv: the optimizer needs at least one adversarial AP");
    for (AttackMode m : modes)
        if (m == AttackMode::None)
            throw ConfigError("mode", "mode: the optimizer needs psa or data");

    const auto D = static_cast<std::size_t>(drops);
    const std::size_t count = D * modes.size();
    OptimizeOutput out;
    out.rows.resize(count);
    out.traces.resize(count);
    parallel_for(count, [&](std::size_t i) {
        const std::size_t d = i / modes.size();
        const AttackMode mode = modes[i % modes.size()];
        const Drop drop = make_drop(config, d);
        const MinMaxProblem p = make_problem(mode, drop.fading, {}, config);
        const MinMaxResult r = solve_minmax(p, options);
        out.rows[i] = {static_cast<int>(d), mode, std::log2(1.0 + r.objective_equal), std::log2(1.0 + r.objective),
                       r.trace.sca_iterations()};
        out.traces[i] = r.trace;
    });

    std::size_t probes = 0;
    std::size_t failures = 0;
    for (const auto& t : out.traces)
    {
        failures += static_cast<std::size_t>(t.numerical_failures);
        for (const auto& it : t.iterations)
            probes += it.bisection.size();
    }
    if (probes > 0 && failures == probes)
        throw SolverFailure("every cone feasibility probe failed numerically");
    return out;
}

std::vector<CdfRow> run_cdf(const SystemConfig& config, int drops, const MinMaxOptions& options)
{
    if (drops < 50)
        throw ConfigError("drops", "drops: the cdf experiment needs >= 50 drops");
    const std::vector<AttackMode> modes{AttackMode::Psa, AttackMode::Data};
    const OptimizeOutput opt = run_optimize(config, modes, drops, options);

    std::vector<CdfRow> rows;
    for (AttackMode mode : modes)
        for (const char* alloc : {"equal", "minmax"})
        {
            std::vector<double> values;
            for (const auto& r : opt.rows)
                if (r.mode == mode)
                    values.push_back(std::string(alloc) == "equal" ? r.r_max_equal : r.r_max_opt);
            std::sort(values.begin(), values.end());
            for (std::size_t i = 0; i < values.size(); ++i)
                rows.push_back({mode, alloc, values[i],
                                static_cast<double>(i + 1) / static_cast<double>(values.size())});
        }
    return rows;
}

std::vector<ValidationCheck> run_validate(const SystemConfig& config, const std::string& replay_line)
{
    std::vector<ValidationCheck> checks;
    auto add = [&checks](std::string name, int user, double value, double reference, double tol) {
        const double err = reference != 0.0 ? std::abs(value - reference) / std::abs(reference) : std::abs(value);
        checks.push_back({std::move(name), user, value, reference, tol, err <= tol});
    };

    const std::string header = config_header(config);
    add("header-roundtrip", -1, config_header(parse_config_header(header)) == header ? 1.0 : 0.0, 1.0, 0.0);
    if (!replay_line.empty())
    {
        const std::string again = config_header(parse_config_header(replay_line));
        add("replay-header", -1, again == replay_line ? 1.0 : 0.0, 1.0, 0.0);
    }

    const Drop drop = make_drop(config, 0);
    const PowerAllocation alloc = equal_power(drop.fading, config);
    const ClosedFormTerms terms = closed_form_terms(alloc, drop.fading, config);
    McOptions mo;
    mo.trials = std::max<std::int64_t>(config.trials, 100000);
    const McExpectations mc = mc_expectations(config, alloc, drop.fading, mo);

    const PsaExpectations pe = psa_expectations(terms, config);
    const DataExpectations de = data_expectations(terms);
    for (Eigen::Index k = 0; k < terms.users(); ++k)
    {
        const int u = static_cast<int>(k);
        add("rate-forms", u, std::log2(1.0 + psa_sinr(terms, k)), psa_rate_rearranged(terms, k), 1e-12);
        add("psa-abs2-ahat", u, mc.mean(k, kAbs2AhatPsa), pe.abs2_ahat(k), 0.03);
        add("psa-abs2-atilde", u, mc.mean(k, kAbs2AtildePsa), pe.abs2_atilde(k), 0.03);
        add("data-abs2-ahat", u, mc.mean(k, kAbs2AhatClean), de.abs2_ahat(k), 0.03);
        add("data-abs2-atilde", u, mc.mean(k, kAbs2AtildeClean), de.abs2_atilde(k), 0.03);
        add("data-interference", u, mc.mean(k, kInterference), terms.interference(k), 0.03);
        add("data-abs2-b", u, mc.mean(k, kAbs2BSum), de.abs2_b(k), 0.03);
    }
    for (AttackMode mode : kSweepModes)
    {
        const RateReport cf = closed_form_rate(mode, terms, config);
        const RateReport sim = rate_from_mc(mode, mc, config);
        for (std::size_t k = 0; k < cf.rate.size(); ++k)
            add("rate-" + to_string(mode), static_cast<int>(k), sim.rate[k], cf.rate[k], 0.05);
    }
    return checks;
}

void write_sweep_csv(std::ostream& os, const SystemConfig& config, const std::vector<SweepRow>& rows)
{
    write_header(os, config);
    os << "x_value,mode,alloc,rate_sum_cf,rate_sum_mc,stderr\n";
    for (const auto& r : rows)
        os << format_double(r.x) << ',' << to_string(r.mode) << ',' << r.alloc << ',' << format_double(r.rate_sum_cf)
           << ',' << format_double(r.rate_sum_mc) << ',' << format_double(r.stderr_mc) << '\n';
}

void write_optimize_csv(std::ostream& os, const SystemConfig& config, const std::vector<OptimizeRow>& rows)
{
    write_header(os, config);
    os << "drop,mode,r_max_equal,r_max_opt,sca_iters\n";
    for (const auto& r : rows)
        os << r.drop << ',' << to_string(r.mode) << ',' << format_double(r.r_max_equal) << ','
           << format_double(r.r_max_opt) << ',' << r.sca_iters << '\n';
}

void write_cdf_csv(std::ostream& os, const SystemConfig& config, const std::vector<CdfRow>& rows)
{
    write_header(os, config);
    os << "mode,alloc,r_max,ecdf\n";
    for (const auto& r : rows)
        os << to_string(r.mode) << ',' << r.alloc << ',' << format_double(r.r_max) << ',' << format_double(r.ecdf)
           << '\n';
}

void write_validate_csv(std::ostream& os, const SystemConfig& config, const std::vector<ValidationCheck>& checks)
{
    write_header(os, config);
    os << "check,user,value,reference,tolerance,pass\n";
    for (const auto& c : checks)
        os << c.name << ',' << c.user << ',' << format_double(c.value) << ',' << format_double(c.reference) << ','
           << format_double(c.tolerance) << ',' << (c.pass ? 1 : 0) << '\n';
}

void write_realizations_csv(std::ostream& os, const SystemConfig& config, int drops)
{
    write_header(os, config);
    os << "drop,link,node,user,pl_db,shadow_db,gain\n";
    for (int d = 0; d < drops; ++d)
    {
        const Drop drop = make_drop(config, static_cast<std::uint64_t>(d));
        const LargeScaleFading& f = drop.fading;
        auto emit = [&](const char* link, const Eigen::MatrixXd& pl, const Eigen::MatrixXd& sh,
                        const Eigen::MatrixXd& gain) {
            for (Eigen::Index i = 0; i < gain.rows(); ++i)
                for (Eigen::Index k = 0; k < gain.cols(); ++k)
                    os << d << ',' << link << ',' << i << ',' << k << ',' << format_double(pl(i, k)) << ','
                       << format_double(sh(i, k)) << ',' << format_double(gain(i, k)) << '\n';
        };
        emit("legit", f.pl_db_beta, f.shadow_db_beta, f.beta);
        emit("adv", f.pl_db_theta, f.shadow_db_theta, f.theta);
    }
}

namespace {

std::ofstream open_output(const std::string& path)
{
    std::ofstream os(path);
    if (!os)
        throw ConfigError("out", "cannot write '" + path + "'");
    return os;
}

} // namespace

int run_experiment(const Experiment& experiment, const SystemConfig& config, std::ostream& out, std::ostream& log)
{
    experiment.validate();
    config.validate();
    if (!experiment.dump_realizations_path.empty())
    {
        auto os = open_output(experiment.dump_realizations_path);
        write_realizations_csv(os, config, experiment.kind == ExperimentKind::Validate ? 1 : experiment.drops);
    }

    MinMaxOptions mm;
    mm.sca_iters = experiment.sca_iters;

    switch (experiment.kind)
    {
    case ExperimentKind::SweepN:
    case ExperimentKind::SweepM:
    case ExperimentKind::SweepPower: {
        const auto grid = experiment.grid.empty() ? default_grid(experiment.kind) : experiment.grid;
        const auto rows = run_sweep(experiment.kind, config, grid, experiment.drops);
        write_sweep_csv(out, config, rows);
        for (const auto& r : rows)
            log << to_string(experiment.kind) << " x=" << format_double(r.x) << ' ' << to_string(r.mode)
                << ": R_sum closed-form " << format_double(r.rate_sum_cf) << ", monte-carlo "
                << format_double(r.rate_sum_mc) << '\n';
        return 0;
    }
    case ExperimentKind::Optimize: {
        const OptimizeOutput opt = run_optimize(config, experiment.modes, experiment.drops, mm);
        write_optimize_csv(out, config, opt.rows);
        if (!experiment.trace_path.empty())
        {
            auto os = open_output(experiment.trace_path);
            write_header(os, config);
            write_solve_trace(os, opt.traces.front());
        }
        if (!experiment.dump_cone_path.empty())
        {
            const Drop drop = make_drop(config, 0);
            const MinMaxProblem p = make_problem(experiment.modes.front(), drop.fading, {}, config);
            const Eigen::MatrixXd nu = equal_allocation(p.kappa).cwiseSqrt();
            const SocProblem soc = assemble_soc(p, 0.5 * max_sinr(p, nu.cwiseAbs2()), nu);
            auto os = open_output(experiment.dump_cone_path);
            write_cone_instance(os, soc.cones, soc.bounds);
        }
        int improved = 0;
        for (std::size_t i = 0; i < opt.rows.size(); ++i)
        {
            if (opt.rows[i].r_max_opt <= opt.rows[i].r_max_equal)
                ++improved;
            if (!opt.traces[i].diagnostic.empty())
                log << "drop " << opt.rows[i].drop << ' ' << to_string(opt.rows[i].mode) << ": "
                    << opt.traces[i].diagnostic << '\n';
        }
        log << "optimize: min-max <= equal in " << improved << " of " << opt.rows.size() << " solves\n";
        return 0;
    }
    case ExperimentKind::Cdf: {
        const auto rows = run_cdf(config, experiment.drops, mm);
        write_cdf_csv(out, config, rows);
        log << "cdf: " << rows.size() << " rows over " << experiment.drops << " drops\n";
        return 0;
    }
    case ExperimentKind::Validate: {
        std::string replay;
        SystemConfig cfg = config;
        if (!experiment.replay_path.empty())
        {
            std::ifstream in(experiment.replay_path);
            if (!in || !std::getline(in, replay))
                throw ConfigError("replay", "cannot read a header line from '" + experiment.replay_path + "'");
            cfg = parse_config_header(replay);
        }
        const auto checks = run_validate(cfg, replay);
        write_validate_csv(out, cfg, checks);
        int failed = 0;
        for (const auto& c : checks)
            if (!c.pass)
            {
                ++failed;
                log << "FAIL " << c.name << " user " << c.user << ": " << format_double(c.value) << " vs "
                    << format_double(c.reference) << '\n';
            }
        log << "validate: " << checks.size() - static_cast<std::size_t>(failed) << " of " << checks.size()
            << " checks pass\n";
        return failed == 0 ? 0 : 1;
    }
    }
    return 0;
}

} // namespace cfmimo
