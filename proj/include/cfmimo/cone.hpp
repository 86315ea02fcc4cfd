#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace cfmimo {

/// ||A x + b|| <= c^T x + d.
struct SocConstraint
{
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    Eigen::VectorXd c;
    double d = 0.0;

    /// Linear constraint c^T x + d >= 0 as a one-row cone with A = 0.
    static SocConstraint linear(const Eigen::VectorXd& c, double d);
};

/// Elementwise lower <= x <= upper; infinities allowed. Empty vectors mean
/// "no bound on that side".
struct Box
{
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    static Box nonnegative(Eigen::Index dim);
};

enum class FeasibilityStatus
{
    StrictlyFeasible,
    InfeasibleAtTolerance,
    NumericalFailure,
};

std::string to_string(FeasibilityStatus status);

struct FeasibilityResult
{
    FeasibilityStatus status = FeasibilityStatus::NumericalFailure;
    Eigen::VectorXd witness;
    double max_residual = 0.0;
    int iterations = 0;  // Newton steps
    double slack_bound = 0.0; // phase-1 lower bound on the optimal slack

    bool feasible() const { return status == FeasibilityStatus::StrictlyFeasible; }
};

struct ConeOptions
{
    double tol = 1e-8;
    int max_iters = 400;
    double barrier_growth = 10.0;
    Eigen::VectorXd warm_start; // phase-1 initial x; zero vector when empty
};

/// Phase-1 log-barrier search: minimize s subject to
///   ||A_i x + b_i|| <= c_i^T x + d_i + s,  lower - s <= x <= upper + s,  s >= -1.
/// Each cone contributes -log((c^T x + d + s)^2 - ||A x + b||^2), each bound
/// -log(slack). Newton steps with backtracking; the barrier weight grows by
/// `barrier_growth` after each centering. Stops as soon as s <= tol
/// (feasible), or when the duality-gap bound s - m/tau exceeds tol (the
/// phase-1 optimum is positive: infeasible at tolerance).
FeasibilityResult solve_feasibility(const std::vector<SocConstraint>& cones, const Box& bounds,
                                    const ConeOptions& options = {});

/// max over constraints of ||Ax+b|| - c^T x - d and the box violations.
/// <= 0 iff x is feasible; -inf when there is nothing to violate.
double residual(const std::vector<SocConstraint>& cones, const Box& bounds, const Eigen::VectorXd& x);

/// Plain-text dump:
///   cfmimo-cone 1
///   dim <n> cones <m>
///   lower <n values>
///   upper <n values>
///   cone <i> rows <r>
///   A <n values>            (r lines)
///   b <r values>
///   c <n values>
///   d <value>
/// Missing bounds are written as -inf / inf.
void write_cone_instance(std::ostream& os, const std::vector<SocConstraint>& cones, const Box& bounds);

} // namespace cfmimo
