#pragma once

#include "cfmimo/cone.hpp"
#include "cfmimo/estimation.hpp"
#include "cfmimo/rates.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cfmimo {

struct SolverFailure : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

/// Adversary-side problem: choose zeta (N x K) to minimize max_k SINR_k
/// subject to sum_k zeta_nk kappa_nk <= 1 and zeta >= 0.
///
/// Internally the variable is x_nk = nu_nk sqrt(kappa_nk), nu = sqrt(zeta),
/// so the caps read ||x_n,:|| <= 1 and
///   ups_k   = sum_n sqrt(kappa_nk) x_nk,
///   own_k   = sum_n theta_nk x_nk^2           (= sum_n zeta_nk theta_nk kappa_nk),
///   cross_k = sum_k' sum_n theta_nk x_nk'^2   (= sum_k' sum_n zeta_nk' theta_nk kappa_nk').
struct MinMaxProblem
{
    AttackMode mode = AttackMode::Psa;
    Eigen::MatrixXd kappa;
    Eigen::MatrixXd theta;
    // spoofed training: SINR = (C ups + D(own + ups^2) + A) / (D(own + ups^2) + B)
    Eigen::VectorXd A, B, C, D;
    // data phase: SINR = num / (den + rho_da (ups^2 + cross))
    Eigen::VectorXd num;
    Eigen::VectorXd den;
    double rho_da = 0.0;

    Eigen::Index adversaries() const { return kappa.rows(); }
    Eigen::Index users() const { return kappa.cols(); }
    void validate() const;
};

/// Problem constants from the legitimate-side terms (eta, beta, gamma) and the
/// adversarial large-scale gains. `mode` must be Psa or Data.
MinMaxProblem make_problem(AttackMode mode, const LargeScaleFading& fading, const Eigen::MatrixXd& eta,
                           const SystemConfig& config);

/// zeta_nk = 1 / (K kappa_nk). Throws std::invalid_argument on a zero kappa.
Eigen::MatrixXd equal_allocation(const Eigen::MatrixXd& kappa);

double problem_sinr(const MinMaxProblem& p, const Eigen::MatrixXd& zeta, Eigen::Index k);
double max_sinr(const MinMaxProblem& p, const Eigen::MatrixXd& zeta);

/// The convex pieces the constraints linearize, as functions of nu:
///   ups_sq(nu) = (sum_n kappa_nk nu_nk)^2
///   adv(nu)    = own_k (spoofed training) or cross_k (data phase).
double ups_sq(const MinMaxProblem& p, const Eigen::MatrixXd& nu, Eigen::Index k);
double adv_power(const MinMaxProblem& p, const Eigen::MatrixXd& nu, Eigen::Index k);

/// First-order Taylor expansion of a convex function of nu at an anchor.
struct Tangent
{
    Eigen::MatrixXd anchor;
    double value = 0.0;
    Eigen::MatrixXd gradient; // N x K, d/d nu

    double operator()(const Eigen::MatrixXd& nu) const;
};

struct UserSurrogate
{
    Tangent ups_sq;
    Tangent adv;
};

/// Tangents of ups_sq and adv_power for user k at nu_anchor (a global
/// minorant of each, exact at the anchor).
UserSurrogate sca_linearize(const MinMaxProblem& p, const Eigen::MatrixXd& nu_anchor, Eigen::Index k);

Eigen::VectorXd to_x(const MinMaxProblem& p, const Eigen::MatrixXd& nu);
Eigen::MatrixXd nu_from_x(const MinMaxProblem& p, const Eigen::VectorXd& x);

struct SocProblem
{
    std::vector<SocConstraint> cones; // K user cones, then N cap cones
    Box bounds;
};

/// Convex inner approximation of {max_k SINR_k <= t} around nu_anchor, over
/// x. Dividing the spoofed-training constraint by D gives
///   (t - 1)(ups^2 + own) >= (C/D) ups + (A - tB)/D.
/// For t >= 1 the left side is convex and is replaced by its tangent at the
/// anchor (a linear constraint). For t < 1 the constraint is already convex:
///   (1 - t)(ups^2 + own) <= -(C/D) ups - (A - tB)/D,
/// written as the hyperbolic cone ||[2w; r-1]|| <= r+1 for ||w||^2 <= r. The
/// data-phase constraint is linear:
///   rho_da (L[ups^2] + L[cross]) >= num/t - den.
/// Each user constraint is normalized by the magnitude of its coefficients
/// over the unit box. Throws std::invalid_argument for t <= 0.
SocProblem assemble_soc(const MinMaxProblem& p, double t, const Eigen::MatrixXd& nu_anchor);

/// The true (unlinearized) constraint max_k SINR_k(nu^2) <= t and the caps,
/// as a signed margin: >= 0 iff satisfied.
double direct_margin(const MinMaxProblem& p, double t, const Eigen::MatrixXd& nu);

struct FeasibilityProbe
{
    bool feasible = false;
    FeasibilityStatus status = FeasibilityStatus::NumericalFailure;
    Eigen::MatrixXd nu;
    double residual = 0.0;
    int iterations = 0;
};

/// Numerical failures are reported as infeasible.
FeasibilityProbe feasible(const MinMaxProblem& p, double t, const Eigen::MatrixXd& nu_anchor,
                          const ConeOptions& options = {});

struct BisectionStep
{
    double lo = 0.0;
    double hi = 0.0;
    double t = 0.0;
    bool feasible = false;
};

struct ScaIteration
{
    int iteration = 0;
    double objective = 0.0; // true max SINR at the accepted iterate
    Eigen::MatrixXd nu;
    int cone_iterations = 0;
    double residual = 0.0;
    double wall_ms = 0.0;
    std::vector<BisectionStep> bisection;
};

struct SolveTrace
{
    std::vector<ScaIteration> iterations; // entry 0 is the equal allocation
    bool zero_sensitivity = false;
    int numerical_failures = 0;
    std::string diagnostic; // non-empty if an iterate was rejected

    bool monotone() const;
    int sca_iterations() const { return static_cast<int>(iterations.size()) - 1; }
};

struct MinMaxOptions
{
    int sca_iters = 8;
    double sca_tol = 1e-4;
    double bisect_tol = 1e-4;
    int max_bisect = 60;
    double t_min = 1e-9;
    ConeOptions cone;
};

struct MinMaxResult
{
    Eigen::MatrixXd zeta;
    double objective = 0.0;       // max_k SINR at zeta
    double objective_equal = 0.0; // max_k SINR at the equal allocation
    SolveTrace trace;
};

/// SCA outer loop from the equal allocation; each iteration bisects t over
/// [t_min, current objective] with cone feasibility probes, anchors the next
/// linearization at the last feasible witness, and stops after sca_iters or
/// when the objective changes by less than sca_tol (relative).
MinMaxResult solve_minmax(const MinMaxProblem& p, const MinMaxOptions& options = {});

/// CSV `iteration,t,residual,wall-time-ms`.
void write_solve_trace(std::ostream& os, const SolveTrace& trace);

} // namespace cfmimo
