#include "cfmimo/minmax.hpp"

#include "cfmimo/format.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

namespace cfmimo {

void MinMaxProblem::validate() const
{
    if (mode != AttackMode::Psa && mode != AttackMode::Data)
        throw std::invalid_argument("min-max problem: mode must be psa or data");
    const Eigen::Index K = users();
    if (theta.rows() != kappa.rows() || theta.cols() != K)
        throw std::invalid_argument("min-max problem: kappa/theta dimensions differ");
    if (kappa.size() == 0)
        throw std::invalid_argument("min-max problem: no adversarial links");
    if (!(kappa.array() > 0.0).all() || !(theta.array() >= 0.0).all())
        throw std::invalid_argument("min-max problem: kappa must be > 0 and theta >= 0");
    if (mode == AttackMode::Psa)
    {
        if (A.size() != K || B.size() != K || C.size() != K || D.size() != K)
            throw std::invalid_argument("min-max problem: missing spoofed-training constants");
        if (!(B.array() > 0.0).all())
            throw std::invalid_argument("min-max problem: B must be > 0");
    }
    else if (num.size() != K || den.size() != K || !(den.array() > 0.0).all())
        throw std::invalid_argument("min-max problem: missing data-phase constants");
}

MinMaxProblem make_problem(AttackMode mode, const LargeScaleFading& fading, const Eigen::MatrixXd& eta,
                           const SystemConfig& config)
{
    const Eigen::MatrixXd gamma = gamma_matrix(fading.beta, config);
    PowerAllocation alloc;
    alloc.eta = eta.size() == 0 ? uniform_eta(gamma) : eta;
    alloc.zeta = Eigen::MatrixXd::Zero(fading.theta.rows(), fading.theta.cols());
    const Eigen::MatrixXd kappa = kappa_matrix(fading.theta, config);
    const ClosedFormTerms t = closed_form_terms(alloc, fading, gamma, kappa, config);

    MinMaxProblem p;
    p.mode = mode;
    p.kappa = kappa;
    p.theta = fading.theta;
    p.A = t.A;
    p.B = t.B;
    p.C = t.C;
    p.D = t.D;
    p.num = (t.rho_d * (t.eps.array().square() + t.varrho.array())).matrix();
    p.den = (t.rho_d * (t.interference.array() + t.xi.array() - t.varrho.array()) + 1.0).matrix();
    p.rho_da = config.rho_da;
    p.validate();
    return p;
}

Eigen::MatrixXd equal_allocation(const Eigen::MatrixXd& kappa)
{
    if (!(kappa.array() > 0.0).all())
        throw std::invalid_argument("equal_allocation: kappa must be entrywise > 0");
    return (1.0 / (static_cast<double>(kappa.cols()) * kappa.array())).matrix();
}

namespace {

struct UserPieces
{
    double ups = 0.0;
    double own = 0.0;
    double cross = 0.0;
};

// zeta-space sums for user k.
UserPieces pieces(const MinMaxProblem& p, const Eigen::MatrixXd& zeta, Eigen::Index k)
{
    UserPieces u;
    u.ups = (zeta.col(k).array().sqrt() * p.kappa.col(k).array()).sum();
    u.own = (zeta.col(k).array() * p.theta.col(k).array() * p.kappa.col(k).array()).sum();
    if (p.mode == AttackMode::Data)
        u.cross = p.theta.col(k).dot(zeta.cwiseProduct(p.kappa).rowwise().sum());
    return u;
}

double sinr_from(const MinMaxProblem& p, const UserPieces& u, Eigen::Index k)
{
    if (p.mode == AttackMode::Psa)
    {
        const double spoof = p.D(k) * (u.own + u.ups * u.ups);
        return (p.C(k) * u.ups + spoof + p.A(k)) / (spoof + p.B(k));
    }
    return p.num(k) / (p.den(k) + p.rho_da * (u.ups * u.ups + u.cross));
}

Eigen::Index index_of(const MinMaxProblem& p, Eigen::Index n, Eigen::Index k)
{
    return n + p.adversaries() * k;
}

double wall_ms_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

// Q(x) = ||W x||^2 <= l^T x + k0 as ||[2Wx; l^T x + k0 - 1]|| <= l^T x + k0 + 1,
// divided through by a magnitude estimate over the unit box.
SocConstraint hyperbolic(const Eigen::MatrixXd& W, const Eigen::VectorXd& l, double k0)
{
    double scale = std::max(std::abs(k0), l.cwiseAbs().sum());
    for (Eigen::Index r = 0; r < W.rows(); ++r)
        scale = std::max(scale, std::pow(W.row(r).cwiseAbs().sum(), 2));
    if (!(scale > 0.0))
        scale = 1.0;

    const Eigen::Index dim = l.size();
    SocConstraint c;
    c.A.setZero(W.rows() + 1, dim);
    c.A.topRows(W.rows()) = 2.0 * W / std::sqrt(scale);
    c.A.row(W.rows()) = l.transpose() / scale;
    c.b = Eigen::VectorXd::Zero(W.rows() + 1);
    c.b(W.rows()) = k0 / scale - 1.0;
    c.c = l / scale;
    c.d = k0 / scale + 1.0;
    return c;
}

SocConstraint normalized_linear(const Eigen::VectorXd& c, double d)
{
    double scale = std::max(std::abs(d), c.cwiseAbs().sum());
    if (!(scale > 0.0))
        scale = 1.0;
    return SocConstraint::linear(c / scale, d / scale);
}

Eigen::MatrixXd clean_witness(const MinMaxProblem& p, const Eigen::VectorXd& x)
{
    const Eigen::VectorXd clipped = x.cwiseMax(0.0);
    Eigen::MatrixXd X = Eigen::Map<const Eigen::MatrixXd>(clipped.data(), p.adversaries(), p.users());
    for (Eigen::Index n = 0; n < X.rows(); ++n)
    {
        const double norm = X.row(n).norm();
        if (norm > 1.0)
            X.row(n) /= norm;
    }
    return (X.array() / p.kappa.array().sqrt()).matrix();
}

} // namespace

double problem_sinr(const MinMaxProblem& p, const Eigen::MatrixXd& zeta, Eigen::Index k)
{
    return sinr_from(p, pieces(p, zeta, k), k);
}

double max_sinr(const MinMaxProblem& p, const Eigen::MatrixXd& zeta)
{
    double best = 0.0;
    for (Eigen::Index k = 0; k < p.users(); ++k)
        best = std::max(best, problem_sinr(p, zeta, k));
    return best;
}

double ups_sq(const MinMaxProblem& p, const Eigen::MatrixXd& nu, Eigen::Index k)
{
    const double u = p.kappa.col(k).dot(nu.col(k));
    return u * u;
}

double adv_power(const MinMaxProblem& p, const Eigen::MatrixXd& nu, Eigen::Index k)
{
    const Eigen::MatrixXd zeta = nu.cwiseAbs2();
    const UserPieces u = pieces(p, zeta, k);
    return p.mode == AttackMode::Psa ? u.own : u.cross;
}

double Tangent::operator()(const Eigen::MatrixXd& nu) const
{
    return value + gradient.cwiseProduct(nu - anchor).sum();
}

UserSurrogate sca_linearize(const MinMaxProblem& p, const Eigen::MatrixXd& nu_anchor, Eigen::Index k)
{
    const Eigen::Index N = p.adversaries();
    const Eigen::Index K = p.users();
    UserSurrogate s;

    s.ups_sq.anchor = nu_anchor;
    s.ups_sq.value = ups_sq(p, nu_anchor, k);
    s.ups_sq.gradient = Eigen::MatrixXd::Zero(N, K);
    s.ups_sq.gradient.col(k) = 2.0 * p.kappa.col(k).dot(nu_anchor.col(k)) * p.kappa.col(k);

    s.adv.anchor = nu_anchor;
    s.adv.value = adv_power(p, nu_anchor, k);
    s.adv.gradient = Eigen::MatrixXd::Zero(N, K);
    if (p.mode == AttackMode::Psa)
        s.adv.gradient.col(k) = 2.0 * (nu_anchor.col(k).array() * p.theta.col(k).array() * p.kappa.col(k).array()).matrix();
    else
        for (Eigen::Index j = 0; j < K; ++j)
            s.adv.gradient.col(j) =
                2.0 * (p.theta.col(k).array() * nu_anchor.col(j).array() * p.kappa.col(j).array()).matrix();
    return s;
}

Eigen::VectorXd to_x(const MinMaxProblem& p, const Eigen::MatrixXd& nu)
{
    const Eigen::MatrixXd x = nu.array() * p.kappa.array().sqrt();
    return Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
}

Eigen::MatrixXd nu_from_x(const MinMaxProblem& p, const Eigen::VectorXd& x)
{
    const Eigen::Map<const Eigen::MatrixXd> X(x.data(), p.adversaries(), p.users());
    return (X.array() / p.kappa.array().sqrt()).matrix();
}

SocProblem assemble_soc(const MinMaxProblem& p, double t, const Eigen::MatrixXd& nu_anchor)
{
    if (!(t > 0.0))
        throw std::invalid_argument("assemble_soc: t must be > 0");
    const Eigen::Index N = p.adversaries();
    const Eigen::Index K = p.users();
    const Eigen::Index dim = N * K;
    const Eigen::VectorXd x0 = to_x(p, nu_anchor);
    const Eigen::MatrixXd sqrt_kappa = p.kappa.array().sqrt().matrix();

    SocProblem out;
    out.cones.reserve(static_cast<std::size_t>(K + N));
    for (Eigen::Index k = 0; k < K; ++k)
    {
        // ups_k = a^T x; tangent of ups^2 is 2 u0 a^T x - u0^2
        Eigen::VectorXd a = Eigen::VectorXd::Zero(dim);
        for (Eigen::Index n = 0; n < N; ++n)
            a(index_of(p, n, k)) = sqrt_kappa(n, k);
        const double u0 = a.dot(x0);

        // tangent of own (psa) or cross (data): sum theta_nk (2 x0 x - x0^2) over its support
        Eigen::VectorXd adv_grad = Eigen::VectorXd::Zero(dim);
        double adv_const = 0.0;
        for (Eigen::Index j = 0; j < K; ++j)
        {
            if (p.mode == AttackMode::Psa && j != k)
                continue;
            for (Eigen::Index n = 0; n < N; ++n)
            {
                const double x = x0(index_of(p, n, j));
                adv_grad(index_of(p, n, j)) = 2.0 * p.theta(n, k) * x;
                adv_const -= p.theta(n, k) * x * x;
            }
        }

        if (p.mode == AttackMode::Data)
        {
            const Eigen::VectorXd c = p.rho_da * (2.0 * u0 * a + adv_grad);
            const double d = p.rho_da * (-u0 * u0 + adv_const) + p.den(k) - p.num(k) / t;
            out.cones.push_back(normalized_linear(c, d));
            continue;
        }

        if (!(p.D(k) > 0.0))
        {
            // no spoofing leverage on this user: SINR is the constant A/B
            out.cones.push_back(normalized_linear(Eigen::VectorXd::Zero(dim), t - p.A(k) / p.B(k)));
            continue;
        }

        // (t-1)(ups^2 + own) >= (C/D) ups + (A - tB)/D
        const double lin = p.C(k) / p.D(k);
        const double rhs = (p.A(k) - t * p.B(k)) / p.D(k);
        if (t >= 1.0)
        {
            const Eigen::VectorXd c = (t - 1.0) * (2.0 * u0 * a + adv_grad) - lin * a;
            const double d = (t - 1.0) * (-u0 * u0 + adv_const) - rhs;
            out.cones.push_back(normalized_linear(c, d));
            continue;
        }
        Eigen::MatrixXd W = Eigen::MatrixXd::Zero(N + 1, dim);
        W.row(0) = std::sqrt(1.0 - t) * a.transpose();
        for (Eigen::Index n = 0; n < N; ++n)
            W(n + 1, index_of(p, n, k)) = std::sqrt((1.0 - t) * p.theta(n, k));
        out.cones.push_back(hyperbolic(W, -lin * a, -rhs));
    }

    for (Eigen::Index n = 0; n < N; ++n)
    {
        SocConstraint cap;
        cap.A = Eigen::MatrixXd::Zero(K, dim);
        for (Eigen::Index k = 0; k < K; ++k)
            cap.A(k, index_of(p, n, k)) = 1.0;
        cap.b = Eigen::VectorXd::Zero(K);
        cap.c = Eigen::VectorXd::Zero(dim);
        cap.d = 1.0;
        out.cones.push_back(std::move(cap));
    }
    out.bounds = Box::nonnegative(dim);
    return out;
}

double direct_margin(const MinMaxProblem& p, double t, const Eigen::MatrixXd& nu)
{
    double margin = nu.minCoeff();
    const Eigen::MatrixXd zeta = nu.cwiseAbs2();
    const Eigen::VectorXd load = zeta.cwiseProduct(p.kappa).rowwise().sum();
    margin = std::min(margin, 1.0 - load.maxCoeff());
    for (Eigen::Index k = 0; k < p.users(); ++k)
        margin = std::min(margin, (t - problem_sinr(p, zeta, k)) / t);
    return margin;
}

FeasibilityProbe feasible(const MinMaxProblem& p, double t, const Eigen::MatrixXd& nu_anchor,
                          const ConeOptions& options)
{
    const SocProblem soc = assemble_soc(p, t, nu_anchor);
    ConeOptions opts = options;
    if (opts.warm_start.size() != p.kappa.size())
        opts.warm_start = to_x(p, nu_anchor);
    const FeasibilityResult r = solve_feasibility(soc.cones, soc.bounds, opts);

    FeasibilityProbe probe;
    probe.status = r.status;
    probe.feasible = r.feasible();
    probe.residual = r.max_residual;
    probe.iterations = r.iterations;
    probe.nu = probe.feasible ? clean_witness(p, r.witness) : nu_anchor;
    return probe;
}

bool SolveTrace::monotone() const
{
    for (std::size_t i = 1; i < iterations.size(); ++i)
        if (iterations[i].objective > iterations[i - 1].objective * (1.0 + 1e-12))
            return false;
    return true;
}

MinMaxResult solve_minmax(const MinMaxProblem& p, const MinMaxOptions& options)
{
    p.validate();
    if (options.sca_iters < 1)
        throw std::invalid_argument("solve_minmax: sca_iters must be >= 1");
    if (!(options.bisect_tol > 0.0) || !(options.t_min > 0.0))
        throw std::invalid_argument("solve_minmax: tolerances must be > 0");

    const auto start = std::chrono::steady_clock::now();
    MinMaxResult result;
    const Eigen::MatrixXd zeta_equal = equal_allocation(p.kappa);
    result.objective_equal = max_sinr(p, zeta_equal);

    ScaIteration first;
    first.objective = result.objective_equal;
    first.nu = zeta_equal.cwiseSqrt();
    result.trace.iterations.push_back(first);
    result.zeta = zeta_equal;
    result.objective = result.objective_equal;

    if (p.mode == AttackMode::Psa && (p.D.array() <= 0.0).all())
    {
        result.trace.zero_sensitivity = true;
        return result;
    }

    Eigen::MatrixXd anchor = first.nu;
    double objective = result.objective_equal;
    for (int it = 1; it <= options.sca_iters; ++it)
    {
        ScaIteration step;
        step.iteration = it;
        double lo = options.t_min;
        double hi = objective;
        Eigen::MatrixXd best = anchor;
        bool found = false;
        ConeOptions cone = options.cone;
        for (int b = 0; b < options.max_bisect && (hi - lo) > options.bisect_tol * hi; ++b)
        {
            const double mid = 0.5 * (lo + hi);
            cone.warm_start = to_x(p, best);
            const FeasibilityProbe probe = feasible(p, mid, anchor, cone);
            step.cone_iterations += probe.iterations;
            if (probe.status == FeasibilityStatus::NumericalFailure)
                ++result.trace.numerical_failures;
            step.bisection.push_back({lo, hi, mid, probe.feasible});
            if (probe.feasible)
            {
                hi = mid;
                best = probe.nu;
                step.residual = probe.residual;
                found = true;
            }
            else
                lo = mid;
        }

        const double candidate = found ? max_sinr(p, best.cwiseAbs2()) : objective;
        if (candidate > objective)
        {
            if (candidate > objective * (1.0 + 1e-6))
                result.trace.diagnostic = "iteration " + std::to_string(it) + " raised the objective from " +
                                          format_double(objective) + " to " + format_double(candidate) +
                                          "; iterate rejected";
            step.objective = objective;
            step.nu = anchor;
            step.wall_ms = wall_ms_since(start);
            result.trace.iterations.push_back(std::move(step));
            break;
        }

        step.objective = candidate;
        step.nu = best;
        step.wall_ms = wall_ms_since(start);
        result.trace.iterations.push_back(step);
        const double change = (objective - candidate) / objective;
        anchor = best;
        objective = candidate;
        if (change < options.sca_tol)
            break;
    }

    result.zeta = anchor.cwiseAbs2();
    result.objective = objective;
    return result;
}

void write_solve_trace(std::ostream& os, const SolveTrace& trace)
{
    os << "iteration,t,residual,wall-time-ms\n";
    for (const auto& it : trace.iterations)
        os << it.iteration << ',' << format_double(it.objective) << ',' << format_double(it.residual) << ','
           << format_double(it.wall_ms) << '\n';
}

} // namespace cfmimo
