#include "cfmimo/rates.hpp"

#include "cfmimo/format.hpp"
#include "cfmimo/parallel.hpp"

#include <cassert>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace cfmimo {

ClosedFormTerms closed_form_terms(const PowerAllocation& alloc, const LargeScaleFading& fading,
                                  const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& kappa,
                                  const SystemConfig& config)
{
    if (config.rho_d <= 0.0)
        throw ConfigError("rho_d", "rho_d: must be > 0 for the downlink rate");
    const Eigen::Index K = fading.beta.cols();
    if (alloc.eta.rows() != fading.beta.rows() || alloc.eta.cols() != K || gamma.rows() != alloc.eta.rows() ||
        gamma.cols() != K || alloc.zeta.rows() != fading.theta.rows() || alloc.zeta.cols() != K ||
        kappa.rows() != fading.theta.rows() || kappa.cols() != K)
        throw std::invalid_argument("closed_form_terms: inconsistent dimensions");

    const double T = static_cast<double>(config.tau_d) * config.rho_dp;
    const double tau_d = static_cast<double>(config.tau_d);

    ClosedFormTerms t;
    t.rho_d = config.rho_d;
    t.rho_da = config.rho_da;
    t.eps = (alloc.eta.array().sqrt() * gamma.array()).colwise().sum().transpose();
    t.xi = (alloc.eta.array() * fading.beta.array() * gamma.array()).colwise().sum().transpose();
    const Eigen::MatrixXd eta_gamma = alloc.eta.cwiseProduct(gamma);
    t.cross = fading.beta.transpose() * eta_gamma;
    t.interference = t.cross.rowwise().sum() - t.cross.diagonal();
    t.varrho = (T * t.xi.array().square() / (1.0 + T * t.xi.array())).matrix();

    if (fading.theta.rows() == 0)
    {
        t.ups = Eigen::VectorXd::Zero(K);
        t.adv_var = Eigen::VectorXd::Zero(K);
        t.adv_cross = Eigen::VectorXd::Zero(K);
    }
    else
    {
        t.ups = (alloc.zeta.array().sqrt() * kappa.array()).colwise().sum().transpose();
        t.adv_var = (alloc.zeta.array() * fading.theta.array() * kappa.array()).colwise().sum().transpose();
        const Eigen::VectorXd per_ap_load = alloc.zeta.cwiseProduct(kappa).rowwise().sum();
        t.adv_cross = fading.theta.transpose() * per_ap_load;
    }

    const Eigen::ArrayXd xi = t.xi.array();
    const Eigen::ArrayXd P = T * xi + 1.0;
    t.A = (t.eps.array().square() * P.square() + T * T * xi.cube() + T * xi.square()).matrix();
    t.B = (xi + T * xi.square() + (t.interference.array() + 1.0 / config.rho_d) * P.square()).matrix();
    t.C = (2.0 * tau_d * t.eps.array() * xi * std::sqrt(config.rho_dp * config.mu_dp) * P).matrix();
    t.D = (tau_d * tau_d * config.rho_dp * config.mu_dp * xi.square()).matrix();
    t.script_D = (t.D.array() * (t.adv_var.array() + t.ups.array().square())).matrix();
    t.script_F = (config.rho_da * (t.ups.array().square() + t.adv_cross.array())).matrix();
    return t;
}

ClosedFormTerms closed_form_terms(const PowerAllocation& alloc, const LargeScaleFading& fading,
                                  const SystemConfig& config)
{
    const Eigen::MatrixXd gamma = gamma_matrix(fading.beta, config);
    const Eigen::MatrixXd kappa = kappa_matrix(fading.theta, config);
    PowerAllocation full = alloc;
    if (full.eta.size() == 0)
        full.eta = uniform_eta(gamma);
    return closed_form_terms(full, fading, gamma, kappa, config);
}

std::string to_string(RateSource source)
{
    return source == RateSource::ClosedForm ? "closed-form" : "monte-carlo";
}

double RateReport::max_rate() const
{
    double best = 0.0;
    for (double r : rate)
        best = std::max(best, r);
    return best;
}

double psa_sinr(const ClosedFormTerms& t, Eigen::Index k)
{
    return (t.C(k) * t.ups(k) + t.script_D(k) + t.A(k)) / (t.script_D(k) + t.B(k));
}

double psa_rate_rearranged(const ClosedFormTerms& t, Eigen::Index k)
{
    return std::log2(2.0 + (t.C(k) * t.ups(k) + t.A(k) - t.B(k)) / (t.script_D(k) + t.B(k)));
}

namespace {

double data_sinr_with(const ClosedFormTerms& t, Eigen::Index k, double script_f)
{
    const double total_cross = t.interference(k) + t.xi(k);
    const double num = t.rho_d * (t.eps(k) * t.eps(k) + t.varrho(k));
    const double den = t.rho_d * total_cross - t.rho_d * t.varrho(k) + script_f + 1.0;
    if (!(den > 0.0) || !std::isfinite(num))
        throw std::domain_error("data-phase SINR: non-positive denominator (corrupted terms)");
    return num / den;
}

RateReport report_from_sinr(AttackMode mode, RateSource source, std::vector<double> sinr,
                            const SystemConfig& config)
{
    RateReport r;
    r.mode = mode;
    r.source = source;
    r.sinr = std::move(sinr);
    r.rate.reserve(r.sinr.size());
    for (double s : r.sinr)
        r.rate.push_back(std::log2(1.0 + s));
    r.rate_stderr.assign(r.sinr.size(), 0.0);
    r.sum_rate = sum_rate(r.rate, config);
    return r;
}

} // namespace

double data_attack_sinr(const ClosedFormTerms& t, Eigen::Index k)
{
    return data_sinr_with(t, k, t.script_F(k));
}

double clean_sinr(const ClosedFormTerms& t, Eigen::Index k)
{
    return data_sinr_with(t, k, 0.0);
}

double sinr(AttackMode mode, const ClosedFormTerms& t, Eigen::Index k)
{
    switch (mode)
    {
    case AttackMode::Psa:
        return psa_sinr(t, k);
    case AttackMode::Data:
        return data_attack_sinr(t, k);
    case AttackMode::None:
        break;
    }
    return clean_sinr(t, k);
}

RateReport rate_psa(const ClosedFormTerms& t, const SystemConfig& config)
{
    std::vector<double> s;
    for (Eigen::Index k = 0; k < t.users(); ++k)
    {
        const double v = psa_sinr(t, k);
        if (!std::isfinite(v) || !(t.B(k) > 0.0))
            throw std::domain_error("PSA SINR: non-finite terms");
        assert(std::abs(std::log2(1.0 + v) - psa_rate_rearranged(t, k)) <=
               1e-9 * std::max(1.0, std::log2(1.0 + v)));
        s.push_back(v);
    }
    return report_from_sinr(AttackMode::Psa, RateSource::ClosedForm, std::move(s), config);
}

RateReport rate_data_attack(const ClosedFormTerms& t, const SystemConfig& config)
{
    std::vector<double> s;
    for (Eigen::Index k = 0; k < t.users(); ++k)
        s.push_back(data_attack_sinr(t, k));
    return report_from_sinr(AttackMode::Data, RateSource::ClosedForm, std::move(s), config);
}

RateReport rate_clean(const ClosedFormTerms& t, const SystemConfig& config)
{
    std::vector<double> s;
    for (Eigen::Index k = 0; k < t.users(); ++k)
        s.push_back(clean_sinr(t, k));
    return report_from_sinr(AttackMode::None, RateSource::ClosedForm, std::move(s), config);
}

RateReport closed_form_rate(AttackMode mode, const ClosedFormTerms& terms, const SystemConfig& config)
{
    switch (mode)
    {
    case AttackMode::Psa:
        return rate_psa(terms, config);
    case AttackMode::Data:
        return rate_data_attack(terms, config);
    case AttackMode::None:
        break;
    }
    return rate_clean(terms, config);
}

double sum_rate(const std::vector<double>& per_user, const SystemConfig& config)
{
    if (config.tau_u + config.tau_d >= config.tau_c)
        throw InfeasibleConfig("sum_rate: tau_u + tau_d must be < tau_c");
    double total = 0.0;
    for (double r : per_user)
        total += r;
    return config.prelog() * total;
}

double psa_saturation_snr(const ClosedFormTerms& t, const SystemConfig& config)
{
    const double T = static_cast<double>(config.tau_d) * config.rho_dp;
    double threshold = 0.0;
    for (Eigen::Index k = 0; k < t.users(); ++k)
    {
        const double P2 = std::pow(T * t.xi(k) + 1.0, 2);
        const double rest = (t.script_D(k) + t.B(k) - P2 / t.rho_d) / P2;
        if (!(rest > 0.0))
            throw std::domain_error("psa_saturation_snr: denominator has no noise-free part");
        threshold = std::max(threshold, 100.0 / rest);
    }
    return threshold;
}

PsaExpectations psa_expectations(const ClosedFormTerms& t, const SystemConfig& config)
{
    const double tau_d = static_cast<double>(config.tau_d);
    const double T = tau_d * config.rho_dp;
    const double S = tau_d * config.mu_dp;
    const Eigen::ArrayXd xi = t.xi.array();
    const Eigen::ArrayXd P = T * xi + 1.0;
    const Eigen::ArrayXd adv_power = t.ups.array().square() + t.adv_var.array();

    PsaExpectations e;
    e.abs2_ahat = (t.eps.array().square() +
                   2.0 * t.eps.array() * t.ups.array() * xi * tau_d * std::sqrt(config.rho_dp * config.mu_dp) / P +
                   T * xi.square() * (T * xi + S * adv_power + 1.0) / P.square())
                      .matrix();
    e.abs2_atilde = (xi - 2.0 * T * xi.square() / P + (T * T * xi.cube() + T * xi.square()) / P.square() +
                     tau_d * tau_d * config.rho_dp * config.mu_dp * xi.square() * adv_power / P.square())
                        .matrix();
    e.interference = t.interference;
    return e;
}

DataExpectations data_expectations(const ClosedFormTerms& t)
{
    DataExpectations e;
    e.abs2_ahat = (t.eps.array().square() + t.varrho.array()).matrix();
    e.abs2_atilde = t.xi - t.varrho;
    e.abs2_a = t.cross;
    e.abs2_b = (t.ups.array().square() + t.adv_cross.array()).matrix();
    return e;
}

void CoMoments::push(const McVector& x)
{
    ++n;
    const McVector delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean).transpose();
}

void CoMoments::merge(const CoMoments& other)
{
    if (other.n == 0)
        return;
    if (n == 0)
    {
        *this = other;
        return;
    }
    const double na = static_cast<double>(n);
    const double nb = static_cast<double>(other.n);
    const double total = na + nb;
    const McVector delta = other.mean - mean;
    mean += delta * (nb / total);
    m2 += other.m2 + delta * delta.transpose() * (na * nb / total);
    n += other.n;
}

McMatrix CoMoments::covariance() const
{
    if (n < 2)
        return McMatrix::Zero();
    return m2 / static_cast<double>(n - 1);
}

double McExpectations::mean(Eigen::Index k, McTerm term) const
{
    return users.at(static_cast<std::size_t>(k)).mean(term);
}

double McExpectations::stderr_of(Eigen::Index k, McTerm term) const
{
    const auto& u = users.at(static_cast<std::size_t>(k));
    if (u.n < 2)
        return 0.0;
    return std::sqrt(u.covariance()(term, term) / static_cast<double>(u.n));
}

McExpectations mc_expectations(const SystemConfig& config, const PowerAllocation& alloc,
                               const LargeScaleFading& fading, const McOptions& options)
{
    if (options.trials < 1 || options.chunk < 1)
        throw std::invalid_argument("mc_expectations: trials and chunk must be >= 1");
    const Eigen::Index K = config.k_users;
    const Eigen::MatrixXd gamma = gamma_matrix(fading.beta, config);
    const LmmseStats stats = lmmse_stats(alloc, fading, gamma, config);
    const std::uint64_t master = config.seed ^ mix64(options.stream);

    const auto chunks = static_cast<std::size_t>((options.trials + options.chunk - 1) / options.chunk);
    std::vector<std::vector<CoMoments>> partial(chunks, std::vector<CoMoments>(static_cast<std::size_t>(K)));

    parallel_for(
        chunks,
        [&](std::size_t c) {
            auto& acc = partial[c];
            const std::int64_t first = static_cast<std::int64_t>(c) * options.chunk;
            const std::int64_t last = std::min(options.trials, first + options.chunk);
            Eigen::VectorXcd dl_noise(K);
            for (std::int64_t trial = first; trial < last; ++trial)
            {
                Rng rng(master, StreamTag::Trial, static_cast<std::uint64_t>(trial));
                const ChannelRealization ch = realize(fading, sample_small_scale(config, rng));
                const UplinkEstimates est = uplink_estimate(ch, fading, config, rng);
                const EffectiveChannel eff = effective_channels(ch, est, alloc);
                for (Eigen::Index k = 0; k < K; ++k)
                    dl_noise(k) = rng.complex_normal();
                const Eigen::VectorXcd a_hat =
                    estimate_effective(downlink_observation(eff, config, dl_noise, AttackMode::None), stats);
                const Eigen::VectorXcd a_hat_psa =
                    estimate_effective(downlink_observation(eff, config, dl_noise, AttackMode::Psa), stats);

                for (Eigen::Index k = 0; k < K; ++k)
                {
                    McVector x;
                    const std::complex<double> akk = eff.a(k, k);
                    x(kAbs2AhatClean) = std::norm(a_hat(k));
                    x(kAbs2AtildeClean) = std::norm(akk - a_hat(k));
                    x(kAbs2AhatPsa) = std::norm(a_hat_psa(k));
                    x(kAbs2AtildePsa) = std::norm(akk - a_hat_psa(k));
                    x(kInterference) = eff.a.row(k).cwiseAbs2().sum() - std::norm(akk);
                    x(kAbs2BSum) = eff.b.row(k).cwiseAbs2().sum();
                    x(kAbs2Bkk) = std::norm(eff.b(k, k));
                    acc[static_cast<std::size_t>(k)].push(x);
                }
            }
        },
        options.workers == 0 ? worker_count() : options.workers);

    McExpectations out;
    out.trials = options.trials;
    out.users.assign(static_cast<std::size_t>(K), CoMoments{});
    for (const auto& chunk : partial)
        for (std::size_t k = 0; k < chunk.size(); ++k)
            out.users[k].merge(chunk[k]);
    return out;
}

RateReport rate_from_mc(AttackMode mode, const McExpectations& mc, const SystemConfig& config)
{
    if (config.rho_d <= 0.0)
        throw ConfigError("rho_d", "rho_d: must be > 0 for the downlink rate");
    McVector wx = McVector::Zero();
    McVector wy = McVector::Zero();
    switch (mode)
    {
    case AttackMode::None:
        wx(kAbs2AhatClean) = 1.0;
        wy(kAbs2AtildeClean) = 1.0;
        wy(kInterference) = 1.0;
        break;
    case AttackMode::Psa:
        wx(kAbs2AhatPsa) = 1.0;
        wy(kAbs2AtildePsa) = 1.0;
        wy(kInterference) = 1.0;
        break;
    case AttackMode::Data:
        wx(kAbs2AhatClean) = 1.0;
        wy(kAbs2AtildeClean) = 1.0;
        wy(kInterference) = 1.0;
        wy(kAbs2BSum) = config.rho_da / config.rho_d;
        break;
    }

    RateReport r;
    r.mode = mode;
    r.source = RateSource::MonteCarlo;
    double var_sum = 0.0;
    for (const auto& u : mc.users)
    {
        const double x = wx.dot(u.mean);
        const double z = wy.dot(u.mean) + 1.0 / config.rho_d;
        const double s = x / z;
        const McMatrix cov = u.covariance();
        const double n = static_cast<double>(std::max<std::int64_t>(u.n, 1));
        const double sxx = wx.dot(cov * wx);
        const double sxy = wx.dot(cov * wy);
        const double syy = wy.dot(cov * wy);
        const double var_s = std::max(0.0, (sxx / (z * z) - 2.0 * sxy * x / (z * z * z) +
                                            syy * x * x / (z * z * z * z)) / n);
        const double se_rate = std::sqrt(var_s) / ((1.0 + s) * std::log(2.0));
        r.sinr.push_back(s);
        r.rate.push_back(std::log2(1.0 + s));
        r.rate_stderr.push_back(se_rate);
        var_sum += se_rate * se_rate;
    }
    r.sum_rate = sum_rate(r.rate, config);
    r.sum_rate_stderr = config.prelog() * std::sqrt(var_sum);
    return r;
}

RateReport mc_rate(AttackMode mode, const SystemConfig& config, const PowerAllocation& alloc,
                   const LargeScaleFading& fading, const McOptions& options)
{
    if (options.trials < 1000)
        throw std::invalid_argument("mc_rate: at least 1000 trials required");
    return rate_from_mc(mode, mc_expectations(config, alloc, fading, options), config);
}

void write_rate_report_header(std::ostream& os)
{
    os << "mode,source,user,sinr,rate,sum_rate,stderr\n";
}

void write_rate_report(std::ostream& os, const RateReport& report)
{
    for (std::size_t k = 0; k < report.rate.size(); ++k)
        os << to_string(report.mode) << ',' << to_string(report.source) << ',' << k << ','
           << format_double(report.sinr[k]) << ',' << format_double(report.rate[k]) << ','
           << format_double(report.sum_rate) << ',' << format_double(report.rate_stderr[k]) << '\n';
}

} // namespace cfmimo
