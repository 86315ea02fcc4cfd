#pragma once

#include "cfmimo/config.hpp"
#include "cfmimo/estimation.hpp"
#include "cfmimo/model.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace cfmimo {

/// Per-user constants of the closed-form rate expressions.
///
/// Legitimate side:  eps_k = sum_m sqrt(eta_mk) gamma_mk,
///                   xi_k  = sum_m eta_mk beta_mk gamma_mk,
///                   cross(k,k') = sum_m eta_mk' beta_mk gamma_mk'  (E|a_kk'|^2),
///                   varrho_k = T xi_k^2 / (1 + T xi_k),  T = tau_d rho_dp.
/// Adversarial side: ups_k = sum_n sqrt(zeta_nk) kappa_nk           (E b_kk),
///                   adv_var_k = sum_n zeta_nk theta_nk kappa_nk     (var b_kk),
///                   adv_cross_k = sum_k' sum_n zeta_nk' theta_nk kappa_nk'.
/// Spoofed-training rate constants (all scaled by (T xi + 1)^2):
///   A = eps^2 (T xi + 1)^2 + T^2 xi^3 + T xi^2
///   B = xi + T xi^2 + (sum_{k'!=k} cross(k,k') + 1/rho_d)(T xi + 1)^2
///   C = 2 tau_d eps xi sqrt(rho_dp mu_dp)(T xi + 1)
///   D = tau_d^2 rho_dp mu_dp xi^2
///   script_D = D adv_var + D ups^2,   script_F = rho_da (ups^2 + adv_cross).
struct ClosedFormTerms
{
    Eigen::VectorXd eps;
    Eigen::VectorXd xi;
    Eigen::VectorXd ups;
    Eigen::MatrixXd cross;
    Eigen::VectorXd interference; // sum_{k' != k} cross(k,k')
    Eigen::VectorXd varrho;
    Eigen::VectorXd adv_var;
    Eigen::VectorXd adv_cross;
    Eigen::VectorXd A;
    Eigen::VectorXd B;
    Eigen::VectorXd C;
    Eigen::VectorXd D;
    Eigen::VectorXd script_D;
    Eigen::VectorXd script_F;
    double rho_d = 0.0;
    double rho_da = 0.0;

    Eigen::Index users() const { return eps.size(); }
};

/// Throws ConfigError when rho_d == 0 (B undefined).
ClosedFormTerms closed_form_terms(const PowerAllocation& alloc, const LargeScaleFading& fading,
                                  const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& kappa,
                                  const SystemConfig& config);

/// Convenience: gamma/kappa from the config, eta uniform if `alloc.eta` is empty.
ClosedFormTerms closed_form_terms(const PowerAllocation& alloc, const LargeScaleFading& fading,
                                  const SystemConfig& config);

enum class RateSource
{
    ClosedForm,
    MonteCarlo,
};

std::string to_string(RateSource source);

struct RateReport
{
    AttackMode mode = AttackMode::None;
    RateSource source = RateSource::ClosedForm;
    std::vector<double> sinr;
    std::vector<double> rate;        // bits/s/Hz, log2(1 + sinr)
    std::vector<double> rate_stderr; // zero for closed forms
    double sum_rate = 0.0;           // prelog * sum_k rate
    double sum_rate_stderr = 0.0;

    double max_rate() const;
};

/// SINR of user k under downlink pilot spoofing:
/// (C ups + script_D + A) / (script_D + B).
double psa_sinr(const ClosedFormTerms& terms, Eigen::Index k);

/// The same rate written as log2(2 + (C ups + A - B) / (script_D + B)).
double psa_rate_rearranged(const ClosedFormTerms& terms, Eigen::Index k);

/// lambda''_k = rho_d (eps^2 + varrho) / (rho_d sum_k' cross - rho_d varrho + script_F + 1).
/// Throws std::domain_error on a non-positive denominator.
double data_attack_sinr(const ClosedFormTerms& terms, Eigen::Index k);

/// Downlink-trained rate without any attack (data_attack_sinr with script_F = 0).
double clean_sinr(const ClosedFormTerms& terms, Eigen::Index k);

double sinr(AttackMode mode, const ClosedFormTerms& terms, Eigen::Index k);

RateReport rate_psa(const ClosedFormTerms& terms, const SystemConfig& config);
RateReport rate_data_attack(const ClosedFormTerms& terms, const SystemConfig& config);
RateReport rate_clean(const ClosedFormTerms& terms, const SystemConfig& config);
RateReport closed_form_rate(AttackMode mode, const ClosedFormTerms& terms, const SystemConfig& config);

/// prelog * sum(per_user). Throws InfeasibleConfig if tau_u + tau_d >= tau_c.
double sum_rate(const std::vector<double>& per_user, const SystemConfig& config);

/// Smallest rho_d from which the noise term 1/rho_d in the spoofed-training
/// denominator is at most 1% of the rest for every user:
///   rho_sat = 100 (T xi + 1)^2 / min_k (script_D + B - (T xi + 1)^2 / rho_d).
/// Above it the PSA rate is insensitive to payload power.
double psa_saturation_snr(const ClosedFormTerms& terms, const SystemConfig& config);

/// Closed-form expectations behind the spoofed-training rate.
struct PsaExpectations
{
    Eigen::VectorXd abs2_ahat;    // E|a_hat_psa|^2
    Eigen::VectorXd abs2_atilde;  // E|a_kk - a_hat_psa|^2
    Eigen::VectorXd interference; // sum_{k' != k} E|a_kk'|^2
};

/// With T = tau_d rho_dp, S = tau_d mu_dp, P = T xi + 1:
///   E|a_hat|^2   = eps^2 + 2 eps ups xi tau_d sqrt(rho_dp mu_dp)/P
///                + T xi^2 (T xi + S (ups^2 + adv_var) + 1)/P^2
///   E|a_tilde|^2 = xi - 2 T xi^2/P + (T^2 xi^3 + T xi^2)/P^2
///                + tau_d^2 rho_dp mu_dp xi^2 (ups^2 + adv_var)/P^2
PsaExpectations psa_expectations(const ClosedFormTerms& terms, const SystemConfig& config);

/// Closed-form expectations behind the data-phase attack rate.
struct DataExpectations
{
    Eigen::VectorXd abs2_ahat;   // eps^2 + varrho
    Eigen::VectorXd abs2_atilde; // xi - varrho
    Eigen::MatrixXd abs2_a;      // E|a_kk'|^2 = cross(k,k') for k' != k
    Eigen::VectorXd abs2_b;      // sum_k' E|b_kk'|^2 = ups^2 + adv_cross
};

DataExpectations data_expectations(const ClosedFormTerms& terms);

/// Monte Carlo terms, in this order, per user.
enum McTerm : int
{
    kAbs2AhatClean = 0, // |a_hat|^2 from clean training
    kAbs2AtildeClean,   // |a_kk - a_hat|^2
    kAbs2AhatPsa,       // |a_hat_psa|^2 from spoofed training
    kAbs2AtildePsa,     // |a_kk - a_hat_psa|^2
    kInterference,      // sum_{k' != k} |a_kk'|^2
    kAbs2BSum,          // sum_k' |b_kk'|^2
    kAbs2Bkk,           // |b_kk|^2
    kMcTermCount
};

using McVector = Eigen::Matrix<double, kMcTermCount, 1>;
using McMatrix = Eigen::Matrix<double, kMcTermCount, kMcTermCount>;

/// Streaming mean and co-moment (Chan et al. merge), one instance per user.
struct CoMoments
{
    std::int64_t n = 0;
    McVector mean = McVector::Zero();
    McMatrix m2 = McMatrix::Zero();

    void push(const McVector& x);
    void merge(const CoMoments& other);
    McMatrix covariance() const; // sample covariance (n - 1 normalization)
};

struct McExpectations
{
    std::int64_t trials = 0;
    std::vector<CoMoments> users;

    double mean(Eigen::Index k, McTerm term) const;
    double stderr_of(Eigen::Index k, McTerm term) const;
};

struct McOptions
{
    std::int64_t trials = 10000;
    std::uint64_t stream = 0;         // distinguishes independent MC runs under one seed
    unsigned workers = 0;             // 0: worker_count()
    std::int64_t chunk = 512;         // reduction granularity, fixed for bit-identical sums
};

/// Samples full channel, uplink-estimation and downlink-training realizations
/// and accumulates every term above. Trial t draws from the stream
/// (config.seed ^ options.stream, Trial, t); chunks of `chunk` trials are
/// reduced sequentially and merged in chunk order, so the result does not
/// depend on the worker count.
McExpectations mc_expectations(const SystemConfig& config, const PowerAllocation& alloc,
                               const LargeScaleFading& fading, const McOptions& options);

/// log2(1 + E{X}/E{Y}) from sampled terms, with delta-method standard errors.
/// Sum-rate error assumes independent users.
RateReport rate_from_mc(AttackMode mode, const McExpectations& mc, const SystemConfig& config);

/// Throws std::invalid_argument if trials < 1000.
RateReport mc_rate(AttackMode mode, const SystemConfig& config, const PowerAllocation& alloc,
                   const LargeScaleFading& fading, const McOptions& options);

/// CSV rows `mode,source,user,sinr,rate,sum_rate,stderr`.
void write_rate_report_header(std::ostream& os);
void write_rate_report(std::ostream& os, const RateReport& report);

} // namespace cfmimo
