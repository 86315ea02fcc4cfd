#include "cfmimo/estimation.hpp"

#include <cmath>
#include <stdexcept>

namespace cfmimo {

std::string to_string(AttackMode mode)
{
    switch (mode)
    {
    case AttackMode::None:
        return "none";
    case AttackMode::Psa:
        return "psa";
    case AttackMode::Data:
        return "data";
    }
    return "unknown";
}

AttackMode parse_attack_mode(std::string_view text)
{
    if (text == "none")
        return AttackMode::None;
    if (text == "psa")
        return AttackMode::Psa;
    if (text == "data")
        return AttackMode::Data;
    throw std::invalid_argument("unknown attack mode '" + std::string(text) + "' (none|psa|data)");
}

double gamma_coeff(double beta, int tau_u, double rho_up)
{
    const double snr = rho_up * static_cast<double>(tau_u);
    return snr * beta * beta / (1.0 + snr * beta);
}

double kappa_coeff(double theta, int tau_u, double rho_up)
{
    return gamma_coeff(theta, tau_u, rho_up);
}

Eigen::MatrixXd gamma_matrix(const Eigen::MatrixXd& beta, const SystemConfig& config)
{
    return beta.unaryExpr([&](double b) { return gamma_coeff(b, config.tau_u, config.rho_up); });
}

Eigen::MatrixXd kappa_matrix(const Eigen::MatrixXd& theta, const SystemConfig& config)
{
    return theta.unaryExpr([&](double t) { return kappa_coeff(t, config.tau_u, config.rho_up); });
}

Eigen::MatrixXd uniform_eta(const Eigen::MatrixXd& gamma)
{
    Eigen::MatrixXd eta(gamma.rows(), gamma.cols());
    for (Eigen::Index m = 0; m < gamma.rows(); ++m)
    {
        const double total = gamma.row(m).sum();
        eta.row(m).setConstant(total > 0.0 ? 1.0 / total : 0.0);
    }
    return eta;
}

UplinkNoise sample_uplink_noise(const SystemConfig& config, Rng& rng)
{
    UplinkNoise w;
    w.legit.resize(config.m_aps, config.k_users);
    w.adv.resize(config.n_adv, config.k_users);
    for (Eigen::Index m = 0; m < w.legit.rows(); ++m)
        for (Eigen::Index k = 0; k < w.legit.cols(); ++k)
            w.legit(m, k) = rng.complex_normal();
    for (Eigen::Index n = 0; n < w.adv.rows(); ++n)
        for (Eigen::Index k = 0; k < w.adv.cols(); ++k)
            w.adv(n, k) = rng.complex_normal();
    return w;
}

namespace {

void mmse(const Eigen::MatrixXcd& channel, const Eigen::MatrixXd& gain, const Eigen::MatrixXcd& noise,
          double snr, Eigen::MatrixXcd& est, Eigen::MatrixXd& var)
{
    const double amp = std::sqrt(snr);
    est.resize(channel.rows(), channel.cols());
    var.resize(channel.rows(), channel.cols());
    for (Eigen::Index i = 0; i < channel.rows(); ++i)
        for (Eigen::Index k = 0; k < channel.cols(); ++k)
        {
            const double g = gain(i, k);
            const double coeff = amp * g / (1.0 + snr * g);
            est(i, k) = coeff * (amp * channel(i, k) + noise(i, k));
            var(i, k) = snr * g * g / (1.0 + snr * g);
        }
}

} // namespace

UplinkEstimates uplink_estimate(const ChannelRealization& channels, const LargeScaleFading& fading,
                                const SystemConfig& config, const UplinkNoise& noise)
{
    if (channels.g.rows() != config.m_aps || channels.g.cols() != config.k_users ||
        channels.f.rows() != config.n_adv || channels.f.cols() != config.k_users)
        throw std::invalid_argument("uplink_estimate: channel dimensions do not match the config");
    if (fading.beta.rows() != channels.g.rows() || fading.beta.cols() != channels.g.cols() ||
        fading.theta.rows() != channels.f.rows() || fading.theta.cols() != channels.f.cols())
        throw std::invalid_argument("uplink_estimate: large-scale fading does not match the channels");
    if (noise.legit.rows() != channels.g.rows() || noise.legit.cols() != channels.g.cols() ||
        noise.adv.rows() != channels.f.rows() || noise.adv.cols() != channels.f.cols())
        throw std::invalid_argument("uplink_estimate: noise dimensions do not match the channels");

    const double snr = static_cast<double>(config.tau_u) * config.rho_up;
    UplinkEstimates e;
    mmse(channels.g, fading.beta, noise.legit, snr, e.g_hat, e.gamma);
    mmse(channels.f, fading.theta, noise.adv, snr, e.f_hat, e.kappa);
    e.g_tilde = channels.g - e.g_hat;
    e.f_tilde = channels.f - e.f_hat;
    return e;
}

UplinkEstimates uplink_estimate(const ChannelRealization& channels, const LargeScaleFading& fading,
                                const SystemConfig& config, Rng& rng)
{
    return uplink_estimate(channels, fading, config, sample_uplink_noise(config, rng));
}

EffectiveChannel effective_channels(const ChannelRealization& channels, const UplinkEstimates& estimates,
                                    const PowerAllocation& alloc)
{
    if (alloc.eta.rows() != channels.g.rows() || alloc.eta.cols() != channels.g.cols() ||
        alloc.zeta.rows() != channels.f.rows() || alloc.zeta.cols() != channels.f.cols())
        throw std::invalid_argument("effective_channels: allocation dimensions do not match the channels");

    using Eigen::MatrixXcd;
    const MatrixXcd legit_precoder =
        estimates.g_hat.conjugate().array() * alloc.eta.array().sqrt().cast<std::complex<double>>();
    const MatrixXcd adv_precoder =
        estimates.f_hat.conjugate().array() * alloc.zeta.array().sqrt().cast<std::complex<double>>();

    EffectiveChannel out;
    out.a = channels.g.transpose() * legit_precoder;
    if (channels.f.rows() == 0)
        out.b = MatrixXcd::Zero(channels.g.cols(), channels.g.cols());
    else
        out.b = channels.f.transpose() * adv_precoder;
    return out;
}

LmmseStats lmmse_stats(const PowerAllocation& alloc, const LargeScaleFading& fading,
                       const Eigen::MatrixXd& gamma, const SystemConfig& config)
{
    const double train = static_cast<double>(config.tau_d) * config.rho_dp;
    const double amp = std::sqrt(train);

    LmmseStats s;
    s.mean_a = (alloc.eta.array().sqrt() * gamma.array()).colwise().sum().transpose();
    const Eigen::VectorXd xi = (alloc.eta.array() * fading.beta.array() * gamma.array()).colwise().sum().transpose();
    s.mean_y = amp * s.mean_a;
    s.cov_ay = amp * xi;
    s.cov_yy = (1.0 + train * xi.array()).matrix();
    s.ratio = s.cov_ay.array() / s.cov_yy.array();
    return s;
}

TrainingObservation downlink_observation(const EffectiveChannel& effective, const SystemConfig& config,
                                         const Eigen::VectorXcd& noise, AttackMode attack)
{
    const Eigen::Index K = effective.a.rows();
    if (noise.size() != K)
        throw std::invalid_argument("downlink_observation: noise length does not match the user count");
    const double legit_amp = std::sqrt(static_cast<double>(config.tau_d) * config.rho_dp);
    const double adv_amp = std::sqrt(static_cast<double>(config.tau_d) * config.mu_dp);

    TrainingObservation obs;
    obs.noise_proj = noise;
    obs.y_proj = legit_amp * effective.a.diagonal() + noise;
    if (attack == AttackMode::Psa)
        obs.y_proj += adv_amp * effective.b.diagonal();
    return obs;
}

TrainingObservation downlink_observation(const EffectiveChannel& effective, const SystemConfig& config,
                                         Rng& rng, AttackMode attack)
{
    Eigen::VectorXcd noise(effective.a.rows());
    for (Eigen::Index k = 0; k < noise.size(); ++k)
        noise(k) = rng.complex_normal();
    return downlink_observation(effective, config, noise, attack);
}

Eigen::VectorXcd estimate_effective(const TrainingObservation& obs, const LmmseStats& stats)
{
    return stats.mean_a.cast<std::complex<double>>() +
           (stats.ratio.cast<std::complex<double>>().array() *
            (obs.y_proj - stats.mean_y.cast<std::complex<double>>()).array())
               .matrix();
}

} // namespace cfmimo
