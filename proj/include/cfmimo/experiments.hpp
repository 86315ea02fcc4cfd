#pragma once

#include "cfmimo/config.hpp"
#include "cfmimo/estimation.hpp"
#include "cfmimo/minmax.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace cfmimo {

enum class ExperimentKind
{
    SweepN,
    SweepM,
    SweepPower,
    Optimize,
    Cdf,
    Validate,
};

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment(const std::string& text);

struct Experiment
{
    ExperimentKind kind = ExperimentKind::SweepN;
    std::vector<double> grid; // empty: default grid for the kind
    int drops = 20;
    std::vector<AttackMode> modes{AttackMode::Psa, AttackMode::Data};
    int sca_iters = 8;
    std::string trace_path;             // optimize: solve trace of drop 0
    std::string dump_cone_path;         // optimize: first bisection probe of drop 0
    std::string dump_realizations_path; // large-scale realizations of every drop used
    std::string replay_path;            // validate: CSV whose header is re-parsed

    void validate() const;
};

std::vector<double> default_grid(ExperimentKind kind);

/// Applies a sweep coordinate: n_adv, m_aps, or mu_dp = rho_da = x rho_dp.
SystemConfig at_grid_point(const SystemConfig& base, ExperimentKind kind, double x);

/// Fig. 5 presets: "fig5-n32" and "fig5-n64" set n_adv. Throws ConfigError otherwise.
void apply_preset(SystemConfig& config, const std::string& preset);

struct SweepRow
{
    double x = 0.0;
    AttackMode mode = AttackMode::None;
    std::string alloc;
    double rate_sum_cf = 0.0; // mean over drops
    double rate_sum_mc = 0.0;
    double stderr_mc = 0.0;   // Monte Carlo standard error of the drop mean
};

/// Every (grid point, drop) pair shares drop index d across the grid, so
/// nested layouts and common random numbers hold along the sweep.
std::vector<SweepRow> run_sweep(ExperimentKind kind, const SystemConfig& config, const std::vector<double>& grid,
                                int drops);

struct OptimizeRow
{
    int drop = 0;
    AttackMode mode = AttackMode::Psa;
    double r_max_equal = 0.0;
    double r_max_opt = 0.0;
    int sca_iters = 0;
};

struct OptimizeOutput
{
    std::vector<OptimizeRow> rows;
    std::vector<SolveTrace> traces; // same order as rows
};

OptimizeOutput run_optimize(const SystemConfig& config, const std::vector<AttackMode>& modes, int drops,
                            const MinMaxOptions& options);

struct CdfRow
{
    AttackMode mode = AttackMode::Psa;
    std::string alloc;
    double r_max = 0.0;
    double ecdf = 0.0;
};

/// Empirical CDF of max_k R_k for {psa, data} x {equal, minmax}.
/// Throws ConfigError when drops < 50.
std::vector<CdfRow> run_cdf(const SystemConfig& config, int drops, const MinMaxOptions& options);

struct ValidationCheck
{
    std::string name;
    int user = -1;
    double value = 0.0;
    double reference = 0.0;
    double tolerance = 0.0; // on |value - reference| / |reference|
    bool pass = false;
};

/// Oracle-agreement checks on drop 0 of `config`: closed form against Monte
/// Carlo for every expectation and rate, the two spoofed-training rate
/// forms, and the config header round trip. `replay_line`, when non-empty,
/// must re-parse to a config whose header reproduces it byte for byte.
std::vector<ValidationCheck> run_validate(const SystemConfig& config, const std::string& replay_line = {});

void write_sweep_csv(std::ostream& os, const SystemConfig& config, const std::vector<SweepRow>& rows);
void write_optimize_csv(std::ostream& os, const SystemConfig& config, const std::vector<OptimizeRow>& rows);
void write_cdf_csv(std::ostream& os, const SystemConfig& config, const std::vector<CdfRow>& rows);
void write_validate_csv(std::ostream& os, const SystemConfig& config, const std::vector<ValidationCheck>& checks);

/// drop,link,node,user,pl_db,shadow_db,gain for each drop 0..drops-1.
void write_realizations_csv(std::ostream& os, const SystemConfig& config, int drops);

/// Runs the experiment, writing CSV to `out` and a summary to `log`.
/// Returns 0, or 1 when `validate` has failing checks. Throws ConfigError,
/// InfeasibleConfig and SolverFailure for the caller to map to exit codes.
int run_experiment(const Experiment& experiment, const SystemConfig& config, std::ostream& out, std::ostream& log);

} // namespace cfmimo
