#pragma once

#include "cfmimo/config.hpp"
#include "cfmimo/model.hpp"
#include "cfmimo/rng.hpp"

#include <Eigen/Dense>

#include <string>
#include <string_view>

namespace cfmimo {

enum class AttackMode
{
    None, // clean downlink training, silent adversaries
    Psa,  // adversaries spoof the beamformed downlink pilots
    Data, // adversaries precode random interference onto the payload
};

std::string to_string(AttackMode mode);
AttackMode parse_attack_mode(std::string_view text);

/// Power coefficients: eta (legitimate, M x K), zeta (adversarial, N x K).
struct PowerAllocation
{
    Eigen::MatrixXd eta;
    Eigen::MatrixXd zeta;
};

/// Variance of the MMSE estimate of a link with gain `beta`:
/// rho tau beta^2 / (1 + rho tau beta). Lies in [0, beta).
double gamma_coeff(double beta, int tau_u, double rho_up);

/// Same functional form for the adversarial links (theta -> kappa).
double kappa_coeff(double theta, int tau_u, double rho_up);

Eigen::MatrixXd gamma_matrix(const Eigen::MatrixXd& beta, const SystemConfig& config);
Eigen::MatrixXd kappa_matrix(const Eigen::MatrixXd& theta, const SystemConfig& config);

/// Full-power uniform legitimate allocation eta_mk = 1 / sum_k' gamma_mk',
/// so every AP meets sum_k eta_mk gamma_mk <= 1 with equality.
Eigen::MatrixXd uniform_eta(const Eigen::MatrixXd& gamma);

struct UplinkEstimates
{
    Eigen::MatrixXcd g_hat;
    Eigen::MatrixXd gamma;
    Eigen::MatrixXcd f_hat;
    Eigen::MatrixXd kappa;
    Eigen::MatrixXcd g_tilde;
    Eigen::MatrixXcd f_tilde;
};

/// Projected uplink pilot noise, one CN(0,1) entry per link.
struct UplinkNoise
{
    Eigen::MatrixXcd legit; // M x K
    Eigen::MatrixXcd adv;   // N x K
};

/// Draws all legitimate entries (AP-major) then all adversarial ones.
UplinkNoise sample_uplink_noise(const SystemConfig& config, Rng& rng);

/// MMSE uplink estimation in the pilot-projected domain: the observation of
/// link (m,k) is sqrt(tau_u rho_up) g_mk + w_mk and the estimate is
/// sqrt(tau_u rho_up) beta / (1 + tau_u rho_up beta) times that observation.
/// Adversarial APs estimate f from the same public pilots.
UplinkEstimates uplink_estimate(const ChannelRealization& channels, const LargeScaleFading& fading,
                                const SystemConfig& config, const UplinkNoise& noise);
UplinkEstimates uplink_estimate(const ChannelRealization& channels, const LargeScaleFading& fading,
                                const SystemConfig& config, Rng& rng);

/// a(k,k') = sum_m sqrt(eta_mk') g_mk conj(g_hat_mk'),
/// b(k,k') = sum_n sqrt(zeta_nk') f_nk conj(f_hat_nk').
struct EffectiveChannel
{
    Eigen::MatrixXcd a;
    Eigen::MatrixXcd b;
};

EffectiveChannel effective_channels(const ChannelRealization& channels, const UplinkEstimates& estimates,
                                    const PowerAllocation& alloc);

/// Per-user moments the user precomputes for the LMMSE estimate of a_kk.
struct LmmseStats
{
    Eigen::VectorXd mean_a; // E{a_kk}   = sum_m sqrt(eta) gamma
    Eigen::VectorXd mean_y; // E{y_dp,k} = sqrt(tau_d rho_dp) mean_a
    Eigen::VectorXd cov_ay; // sqrt(tau_d rho_dp) sum_m eta beta gamma
    Eigen::VectorXd cov_yy; // 1 + tau_d rho_dp sum_m eta beta gamma
    Eigen::VectorXd ratio;  // cov_ay / cov_yy
};

LmmseStats lmmse_stats(const PowerAllocation& alloc, const LargeScaleFading& fading,
                       const Eigen::MatrixXd& gamma, const SystemConfig& config);

struct TrainingObservation
{
    Eigen::VectorXcd y_proj;
    Eigen::VectorXcd noise_proj;
};

/// Pilot-projected downlink training observation
///   y_k = sqrt(tau_d rho_dp) a_kk [+ sqrt(tau_d mu_dp) b_kk] + n_k.
/// The adversarial term is present only for AttackMode::Psa; the noise is
/// drawn for every mode so equal streams give equal noise.
TrainingObservation downlink_observation(const EffectiveChannel& effective, const SystemConfig& config,
                                         Rng& rng, AttackMode attack);
TrainingObservation downlink_observation(const EffectiveChannel& effective, const SystemConfig& config,
                                         const Eigen::VectorXcd& noise, AttackMode attack);

/// a_hat = mean_a + ratio (y - mean_y). Users always apply the clean
/// statistics; a spoofed observation yields the contaminated estimate.
Eigen::VectorXcd estimate_effective(const TrainingObservation& obs, const LmmseStats& stats);

} // namespace cfmimo
