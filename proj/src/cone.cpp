#include "cfmimo/cone.hpp"

#include "cfmimo/format.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace cfmimo {

SocConstraint SocConstraint::linear(const Eigen::VectorXd& c, double d)
{
    SocConstraint s;
    s.A = Eigen::MatrixXd::Zero(1, c.size());
    s.b = Eigen::VectorXd::Zero(1);
    s.c = c;
    s.d = d;
    return s;
}

Box Box::nonnegative(Eigen::Index dim)
{
    Box b;
    b.lower = Eigen::VectorXd::Zero(dim);
    return b;
}

std::string to_string(FeasibilityStatus status)
{
    switch (status)
    {
    case FeasibilityStatus::StrictlyFeasible:
        return "strictly-feasible";
    case FeasibilityStatus::InfeasibleAtTolerance:
        return "infeasible-at-tolerance";
    case FeasibilityStatus::NumericalFailure:
        break;
    }
    return "numerical-failure";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_dimensions(const std::vector<SocConstraint>& cones, const Box& bounds, Eigen::Index dim)
{
    for (const auto& c : cones)
        if (c.A.rows() < 1 || c.A.cols() != dim || c.b.size() != c.A.rows() || c.c.size() != dim)
            throw std::invalid_argument("cone: inconsistent constraint dimensions");
    if ((bounds.lower.size() != 0 && bounds.lower.size() != dim) ||
        (bounds.upper.size() != 0 && bounds.upper.size() != dim))
        throw std::invalid_argument("cone: box dimension mismatch");
}

Eigen::Index infer_dim(const std::vector<SocConstraint>& cones, const Box& bounds)
{
    if (!cones.empty())
        return cones.front().A.cols();
    return std::max(bounds.lower.size(), bounds.upper.size());
}

// A cone restricted to the columns it touches.
struct CompactCone
{
    std::vector<Eigen::Index> support;
    Eigen::MatrixXd A;
    Eigen::MatrixXd AtA;
    Eigen::VectorXd b;
    Eigen::VectorXd c;
    double d = 0.0;
};

CompactCone compact(const SocConstraint& s)
{
    CompactCone out;
    for (Eigen::Index j = 0; j < s.A.cols(); ++j)
        if (s.c(j) != 0.0 || !s.A.col(j).isZero(0.0))
            out.support.push_back(j);
    const auto p = static_cast<Eigen::Index>(out.support.size());
    out.A.resize(s.A.rows(), p);
    out.c.resize(p);
    for (Eigen::Index i = 0; i < p; ++i)
    {
        out.A.col(i) = s.A.col(out.support[static_cast<std::size_t>(i)]);
        out.c(i) = s.c(out.support[static_cast<std::size_t>(i)]);
    }
    out.AtA = out.A.transpose() * out.A;
    out.b = s.b;
    out.d = s.d;
    return out;
}

struct BoundTerm
{
    Eigen::Index index;
    double value;
    double sign; // +1: x - value + s > 0;  -1: value - x + s > 0
};

class Phase1
{
public:
    Phase1(const std::vector<SocConstraint>& cones, const Box& bounds, Eigen::Index dim) : dim_(dim)
    {
        cones_.reserve(cones.size());
        for (const auto& c : cones)
            cones_.push_back(compact(c));
        for (Eigen::Index j = 0; j < bounds.lower.size(); ++j)
            if (std::isfinite(bounds.lower(j)))
                bounds_.push_back({j, bounds.lower(j), 1.0});
        for (Eigen::Index j = 0; j < bounds.upper.size(); ++j)
            if (std::isfinite(bounds.upper(j)))
                bounds_.push_back({j, bounds.upper(j), -1.0});
    }

    double degree() const { return 2.0 * static_cast<double>(cones_.size()) + static_cast<double>(bounds_.size()) + 1.0; }

    // Barrier value, +inf outside the domain.
    double barrier(const Eigen::VectorXd& z) const
    {
        const double s = z(dim_);
        if (!(s + 1.0 > 0.0))
            return kInf;
        double f = -std::log(s + 1.0);
        for (const auto& c : cones_)
        {
            double u = c.d + s;
            Eigen::VectorXd v = c.b;
            for (std::size_t i = 0; i < c.support.size(); ++i)
            {
                const double xi = z(c.support[i]);
                u += c.c(static_cast<Eigen::Index>(i)) * xi;
                v += c.A.col(static_cast<Eigen::Index>(i)) * xi;
            }
            const double nv = v.norm();
            if (!(u > nv))
                return kInf;
            f -= std::log((u - nv) * (u + nv));
        }
        for (const auto& b : bounds_)
        {
            const double e = b.sign * (z(b.index) - b.value) + s;
            if (!(e > 0.0))
                return kInf;
            f -= std::log(e);
        }
        return f;
    }

    void derivatives(const Eigen::VectorXd& z, Eigen::VectorXd& g, Eigen::MatrixXd& H) const
    {
        const Eigen::Index n = dim_;
        const double s = z(n);
        g.setZero(n + 1);
        H.setZero(n + 1, n + 1);

        const double e0 = s + 1.0;
        g(n) -= 1.0 / e0;
        H(n, n) += 1.0 / (e0 * e0);

        for (const auto& c : cones_)
        {
            const auto p = static_cast<Eigen::Index>(c.support.size());
            Eigen::VectorXd xs(p);
            for (Eigen::Index i = 0; i < p; ++i)
                xs(i) = z(c.support[static_cast<std::size_t>(i)]);
            const double u = c.c.dot(xs) + c.d + s;
            const Eigen::VectorXd v = c.A * xs + c.b;
            const double w = u * u - v.squaredNorm();

            // local coordinates: [x_support; s]
            Eigen::VectorXd dw(p + 1);
            dw.head(p) = 2.0 * u * c.c - 2.0 * c.A.transpose() * v;
            dw(p) = 2.0 * u;
            Eigen::MatrixXd d2w(p + 1, p + 1);
            d2w.topLeftCorner(p, p) = 2.0 * (c.c * c.c.transpose() - c.AtA);
            d2w.topRightCorner(p, 1) = 2.0 * c.c;
            d2w.bottomLeftCorner(1, p) = 2.0 * c.c.transpose();
            d2w(p, p) = 2.0;

            const Eigen::VectorXd gl = -dw / w;
            const Eigen::MatrixXd Hl = gl * gl.transpose() - d2w / w;

            auto global = [&](Eigen::Index i) { return i < p ? c.support[static_cast<std::size_t>(i)] : n; };
            for (Eigen::Index i = 0; i <= p; ++i)
            {
                const Eigen::Index gi = global(i);
                g(gi) += gl(i);
                for (Eigen::Index j = 0; j <= p; ++j)
                    H(gi, global(j)) += Hl(i, j);
            }
        }

        for (const auto& b : bounds_)
        {
            const double e = b.sign * (z(b.index) - b.value) + s;
            const double inv = 1.0 / e;
            const double inv2 = inv * inv;
            g(b.index) -= b.sign * inv;
            g(n) -= inv;
            H(b.index, b.index) += inv2;
            H(b.index, n) += b.sign * inv2;
            H(n, b.index) += b.sign * inv2;
            H(n, n) += inv2;
        }
    }

private:
    Eigen::Index dim_;
    std::vector<CompactCone> cones_;
    std::vector<BoundTerm> bounds_;
};

Eigen::VectorXd newton_direction(Eigen::MatrixXd H, const Eigen::VectorXd& g, bool& ok)
{
    const double scale = std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
    double reg = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt)
    {
        Eigen::LLT<Eigen::MatrixXd> llt(H);
        if (llt.info() == Eigen::Success)
        {
            Eigen::VectorXd dz = llt.solve(-g);
            if (dz.allFinite())
            {
                ok = true;
                return dz;
            }
        }
        const double next = reg == 0.0 ? 1e-12 * scale : reg * 100.0;
        H.diagonal().array() += next - reg;
        reg = next;
    }
    ok = false;
    return Eigen::VectorXd::Zero(g.size());
}

} // namespace

double residual(const std::vector<SocConstraint>& cones, const Box& bounds, const Eigen::VectorXd& x)
{
    check_dimensions(cones, bounds, x.size());
    double worst = -kInf;
    for (const auto& c : cones)
        worst = std::max(worst, (c.A * x + c.b).norm() - c.c.dot(x) - c.d);
    for (Eigen::Index j = 0; j < bounds.lower.size(); ++j)
        if (std::isfinite(bounds.lower(j)))
            worst = std::max(worst, bounds.lower(j) - x(j));
    for (Eigen::Index j = 0; j < bounds.upper.size(); ++j)
        if (std::isfinite(bounds.upper(j)))
            worst = std::max(worst, x(j) - bounds.upper(j));
    return worst;
}

FeasibilityResult solve_feasibility(const std::vector<SocConstraint>& cones, const Box& bounds,
                                    const ConeOptions& options)
{
    if (!(options.tol > 0.0))
        throw std::invalid_argument("solve_feasibility: tol must be > 0");
    const Eigen::Index n = infer_dim(cones, bounds);
    check_dimensions(cones, bounds, n);

    FeasibilityResult result;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    if (options.warm_start.size() == n)
        x = options.warm_start;

    auto finish = [&](FeasibilityStatus status, const Eigen::VectorXd& at) {
        result.status = status;
        result.witness = at;
        result.max_residual = residual(cones, bounds, at);
        return result;
    };

    const double r0 = residual(cones, bounds, x);
    if (r0 < 0.0)
        return finish(FeasibilityStatus::StrictlyFeasible, x);

    const Phase1 problem(cones, bounds, n);
    const double m = problem.degree();
    Eigen::VectorXd z(n + 1);
    z.head(n) = x;
    z(n) = r0 + std::max(1.0, 0.1 * std::abs(r0));
    result.slack_bound = -kInf;

    double tau = 1.0;
    Eigen::VectorXd g;
    Eigen::MatrixXd H;
    while (result.iterations < options.max_iters)
    {
        for (int step = 0; step < 100 && result.iterations < options.max_iters; ++step)
        {
            problem.derivatives(z, g, H);
            g(n) += tau;
            bool ok = false;
            const Eigen::VectorXd dz = newton_direction(H, g, ok);
            if (!ok)
                return finish(FeasibilityStatus::NumericalFailure, z.head(n));
            const double decrement = -g.dot(dz);
            if (decrement < 2e-10)
                break;

            const double f0 = tau * z(n) + problem.barrier(z);
            double alpha = 1.0;
            bool moved = false;
            for (int ls = 0; ls < 60; ++ls, alpha *= 0.5)
            {
                const Eigen::VectorXd trial = z + alpha * dz;
                const double f = tau * trial(n) + problem.barrier(trial);
                if (std::isfinite(f) && f <= f0 - 0.25 * alpha * decrement)
                {
                    z = trial;
                    moved = true;
                    break;
                }
            }
            ++result.iterations;
            if (!moved)
                break;
            if (residual(cones, bounds, z.head(n)) < 0.0)
                return finish(FeasibilityStatus::StrictlyFeasible, z.head(n));
        }

        result.slack_bound = std::max(result.slack_bound, z(n) - m / tau);
        if (result.slack_bound > options.tol)
            return finish(FeasibilityStatus::InfeasibleAtTolerance, z.head(n));
        if (m / tau < 0.1 * options.tol)
        {
            const Eigen::VectorXd at = z.head(n);
            return finish(residual(cones, bounds, at) <= options.tol ? FeasibilityStatus::StrictlyFeasible
                                                                     : FeasibilityStatus::InfeasibleAtTolerance,
                          at);
        }
        tau *= options.barrier_growth;
    }
    return finish(FeasibilityStatus::NumericalFailure, z.head(n));
}

void write_cone_instance(std::ostream& os, const std::vector<SocConstraint>& cones, const Box& bounds)
{
    const Eigen::Index n = infer_dim(cones, bounds);
    check_dimensions(cones, bounds, n);
    auto row = [&os](const char* tag, const Eigen::VectorXd& v) {
        os << tag;
        for (Eigen::Index j = 0; j < v.size(); ++j)
            os << ' ' << format_double(v(j));
        os << '\n';
    };
    os << "cfmimo-cone 1\n";
    os << "dim " << n << " cones " << cones.size() << '\n';
    row("lower", bounds.lower.size() == n ? bounds.lower : Eigen::VectorXd::Constant(n, -kInf));
    row("upper", bounds.upper.size() == n ? bounds.upper : Eigen::VectorXd::Constant(n, kInf));
    for (std::size_t i = 0; i < cones.size(); ++i)
    {
        const auto& c = cones[i];
        os << "cone " << i << " rows " << c.A.rows() << '\n';
        for (Eigen::Index r = 0; r < c.A.rows(); ++r)
            row("A", c.A.row(r).transpose());
        row("b", c.b);
        row("c", c.c);
        os << "d " << format_double(c.d) << '\n';
    }
}

} // namespace cfmimo
