#include "cfmimo/estimation.hpp"
#include "cfmimo/minmax.hpp"
#include "cfmimo/rates.hpp"

#include <doctest.h>

#include <cmath>

using namespace cfmimo;

namespace {

SystemConfig scenario(int m, int n, int k, std::uint64_t seed)
{
    SystemConfig c = default_config();
    c.m_aps = m;
    c.n_adv = n;
    c.k_users = k;
    c.seed = seed;
    return c;
}

ChannelRealization unit_channels(int m, int n, int k, std::complex<double> value)
{
    ChannelRealization ch;
    ch.g = Eigen::MatrixXcd::Constant(m, k, value);
    ch.f = Eigen::MatrixXcd::Constant(n, k, value);
    return ch;
}

} // namespace

TEST_CASE("estimate variance coefficients")
{
    CHECK(gamma_coeff(0.0, 32, 100.0) == 0.0);
    CHECK(gamma_coeff(0.5, 32, 100.0) == doctest::Approx(800.0 / 1601.0).epsilon(1e-14));
    CHECK(kappa_coeff(0.2, 32, 100.0) == doctest::Approx(128.0 / 641.0).epsilon(1e-14));
    CHECK(kappa_coeff(0.0, 32, 100.0) == 0.0);
    CHECK(gamma_coeff(1.0, 1, 1e6) == doctest::Approx(1e6 / (1 + 1e6)).epsilon(1e-14));
    Rng rng(9);
    for (int i = 0; i < 1000; ++i)
    {
        const double b = std::exp(-30.0 * rng.uniform());
        const double rho = std::exp(40.0 * rng.uniform());
        const double g = gamma_coeff(b, 32, rho);
        CHECK(g >= 0.0);
        // beyond ~1e15 the gap b - g is below one ulp of b
        if (32 * rho * b < 1e12)
            CHECK(g < b);
        else
            CHECK(g <= b);
        CHECK(kappa_coeff(b, 32, rho) == g);
    }
}

TEST_CASE("uniform eta saturates every AP")
{
    SystemConfig c = scenario(16, 2, 4, 3);
    const Drop d = make_drop(c, 0);
    const Eigen::MatrixXd gamma = gamma_matrix(d.fading.beta, c);
    const Eigen::MatrixXd eta = uniform_eta(gamma);
    for (Eigen::Index m = 0; m < 16; ++m)
        CHECK((eta.row(m).array() * gamma.row(m).array()).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("uplink estimation limits")
{
    SystemConfig c = scenario(3, 2, 2, 1);
    LargeScaleFading f;
    f.beta = Eigen::MatrixXd::Constant(3, 2, 1.0);
    f.theta = Eigen::MatrixXd::Constant(2, 2, 0.5);
    const ChannelRealization ch = unit_channels(3, 2, 2, {0.3, -0.7});

    SUBCASE("no uplink power collapses to the prior mean")
    {
        c.rho_up = 0.0;
        Rng rng(1);
        const UplinkEstimates e = uplink_estimate(ch, f, c, rng);
        CHECK(e.g_hat.isZero(0.0));
        CHECK(e.f_hat.isZero(0.0));
        CHECK(e.g_tilde == ch.g);
    }
    SUBCASE("noiseless high-SNR estimate approaches the channel")
    {
        c.rho_up = 1e12;
        UplinkNoise w{Eigen::MatrixXcd::Zero(3, 2), Eigen::MatrixXcd::Zero(2, 2)};
        const UplinkEstimates e = uplink_estimate(ch, f, c, w);
        CHECK((e.g_hat - ch.g).norm() < 1e-9);
        CHECK((e.f_hat - ch.f).norm() < 1e-9);
    }
    SUBCASE("dimension mismatch")
    {
        Rng rng(1);
        SystemConfig wrong = c;
        wrong.m_aps = 4;
        CHECK_THROWS_AS(uplink_estimate(ch, f, wrong, rng), std::invalid_argument);
    }
}

TEST_CASE("effective channel sums")
{
    SystemConfig c = scenario(1, 1, 1, 1);
    const ChannelRealization ch = unit_channels(1, 1, 1, {1.0, 0.0});
    UplinkEstimates e;
    e.g_hat = ch.g;
    e.f_hat = ch.f;
    PowerAllocation alloc{Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Zero(1, 1)};
    const EffectiveChannel eff = effective_channels(ch, e, alloc);
    CHECK(eff.a(0, 0) == std::complex<double>(1.0, 0.0));
    CHECK(eff.b(0, 0) == std::complex<double>(0.0, 0.0));

    SystemConfig none = scenario(2, 0, 2, 1);
    ChannelRealization ch0 = unit_channels(2, 0, 2, {1.0, 1.0});
    UplinkEstimates e0;
    e0.g_hat = ch0.g;
    e0.f_hat = ch0.f;
    const EffectiveChannel eff0 =
        effective_channels(ch0, e0, {Eigen::MatrixXd::Ones(2, 2), Eigen::MatrixXd::Zero(0, 2)});
    CHECK(eff0.b.rows() == 2);
    CHECK(eff0.b.isZero(0.0));
    (void)none;
}

TEST_CASE("LMMSE statistics")
{
    SystemConfig c = scenario(8, 2, 3, 5);
    const Drop d = make_drop(c, 0);
    const Eigen::MatrixXd gamma = gamma_matrix(d.fading.beta, c);

    SUBCASE("zero eta")
    {
        PowerAllocation alloc{Eigen::MatrixXd::Zero(8, 3), Eigen::MatrixXd::Zero(2, 3)};
        const LmmseStats s = lmmse_stats(alloc, d.fading, gamma, c);
        CHECK(s.mean_a.isZero(0.0));
        CHECK(s.cov_ay.isZero(0.0));
        CHECK((s.cov_yy.array() == 1.0).all());
    }
    SUBCASE("variance identity")
    {
        PowerAllocation alloc{uniform_eta(gamma), Eigen::MatrixXd::Zero(2, 3)};
        const LmmseStats s = lmmse_stats(alloc, d.fading, gamma, c);
        const double amp = std::sqrt(c.tau_d * c.rho_dp);
        for (Eigen::Index k = 0; k < 3; ++k)
        {
            CHECK(s.cov_yy(k) > 0.0);
            CHECK(s.cov_yy(k) - 1.0 == doctest::Approx(amp * s.cov_ay(k)).epsilon(1e-12));
            CHECK(s.mean_y(k) == doctest::Approx(amp * s.mean_a(k)).epsilon(1e-14));
        }
    }
}

TEST_CASE("estimate_effective trivial cases")
{
    LmmseStats s;
    s.mean_a = Eigen::Vector2d(0.5, 2.0);
    s.mean_y = Eigen::Vector2d(3.0, 4.0);
    s.ratio = Eigen::Vector2d(0.25, 0.0);
    TrainingObservation obs;
    obs.y_proj = s.mean_y.cast<std::complex<double>>();
    Eigen::VectorXcd a = estimate_effective(obs, s);
    CHECK(a(0) == std::complex<double>(0.5, 0.0));
    obs.y_proj = Eigen::Vector2cd(std::complex<double>(10.0, 1.0), std::complex<double>(-7.0, 2.0));
    a = estimate_effective(obs, s);
    CHECK(a(0) == std::complex<double>(0.5 + 0.25 * 7.0, 0.25));
    CHECK(a(1) == std::complex<double>(2.0, 0.0));
}

TEST_CASE("downlink observation attack switch")
{
    SystemConfig c = scenario(2, 1, 2, 1);
    EffectiveChannel eff;
    eff.a = Eigen::MatrixXcd::Constant(2, 2, {1.0, 0.0});
    eff.b = Eigen::MatrixXcd::Constant(2, 2, {0.0, 1.0});
    const Eigen::VectorXcd noise = Eigen::Vector2cd(std::complex<double>(0.1, 0.2), std::complex<double>(-0.3, 0.0));
    const TrainingObservation clean = downlink_observation(eff, c, noise, AttackMode::None);
    const TrainingObservation psa = downlink_observation(eff, c, noise, AttackMode::Psa);
    const TrainingObservation data = downlink_observation(eff, c, noise, AttackMode::Data);
    CHECK(clean.y_proj == data.y_proj);
    CHECK(psa.y_proj != clean.y_proj);
    c.mu_dp = 0.0;
    CHECK(downlink_observation(eff, c, noise, AttackMode::Psa).y_proj == clean.y_proj);
}

namespace {

struct Sums
{
    double n = 0;
    std::complex<double> s = 0;
    double s2 = 0;

    void add(std::complex<double> z)
    {
        n += 1;
        s += z;
        s2 += std::norm(z);
    }
    std::complex<double> mean() const { return s / n; }
    double var() const { return (s2 - std::norm(s) / n) / (n - 1); }
};

} // namespace

TEST_CASE("uplink estimates match the MMSE statistics")
{
    SystemConfig c = scenario(8, 2, 2, 17);
    const Drop d = make_drop(c, 0);
    const int trials = 100000;
    const Eigen::Index links = 8 * 2;
    std::vector<Sums> hat(links), til(links);
    std::vector<std::complex<double>> cross(links, 0.0);
    for (int t = 0; t < trials; ++t)
    {
        Rng rng(c.seed, StreamTag::Trial, t);
        const ChannelRealization ch = realize(d.fading, sample_small_scale(c, rng));
        const UplinkEstimates e = uplink_estimate(ch, d.fading, c, rng);
        if (t == 0)
            CHECK((e.g_hat + e.g_tilde - ch.g).norm() <= 1e-15 * ch.g.norm());
        for (Eigen::Index i = 0; i < links; ++i)
        {
            const Eigen::Index m = i / 2, k = i % 2;
            hat[i].add(e.g_hat(m, k));
            til[i].add(e.g_tilde(m, k));
            cross[i] += e.g_hat(m, k) * std::conj(e.g_tilde(m, k));
        }
    }
    const Eigen::MatrixXd gamma = gamma_matrix(d.fading.beta, c);
    for (Eigen::Index i = 0; i < links; ++i)
    {
        const Eigen::Index m = i / 2, k = i % 2;
        CHECK(std::abs(hat[i].var() / gamma(m, k) - 1.0) < 0.02);
        // correlation coefficient, so the bound does not depend on the link gain
        const std::complex<double> cov = cross[i] / double(trials) - hat[i].mean() * std::conj(til[i].mean());
        const double rho = std::abs(cov) / std::sqrt(hat[i].var() * til[i].var());
        CHECK(rho < 5.0 / std::sqrt(double(trials)));
    }
}

TEST_CASE("training moments match their closed forms")
{
    for (std::uint64_t seed : {101u, 202u, 303u})
    {
        CAPTURE(seed);
        SystemConfig c = scenario(16, 4, 3, seed);
        const Drop d = make_drop(c, 0);
        const Eigen::MatrixXd gamma = gamma_matrix(d.fading.beta, c);
        const Eigen::MatrixXd kappa = kappa_matrix(d.fading.theta, c);
        const PowerAllocation alloc{uniform_eta(gamma), equal_allocation(kappa)};
        const LmmseStats stats = lmmse_stats(alloc, d.fading, gamma, c);
        const ClosedFormTerms terms = closed_form_terms(alloc, d.fading, gamma, kappa, c);
        const PsaExpectations psa = psa_expectations(terms, c);

        const Eigen::Index K = 3;
        const int trials = 100000;
        std::vector<Sums> akk(K), akk_other(K), y_clean(K), y_psa(K), b_kk(K);
        Eigen::VectorXd err_clean = Eigen::VectorXd::Zero(K), ahat_psa = Eigen::VectorXd::Zero(K),
                        err_psa = Eigen::VectorXd::Zero(K), cov_ay_re = Eigen::VectorXd::Zero(K);
        for (int t = 0; t < trials; ++t)
        {
            Rng rng(seed, StreamTag::Trial, t);
            const ChannelRealization ch = realize(d.fading, sample_small_scale(c, rng));
            const UplinkEstimates e = uplink_estimate(ch, d.fading, c, rng);
            const EffectiveChannel eff = effective_channels(ch, e, alloc);
            const TrainingObservation clean = downlink_observation(eff, c, rng, AttackMode::None);
            const TrainingObservation spoof = downlink_observation(eff, c, clean.noise_proj, AttackMode::Psa);
            const Eigen::VectorXcd a_clean = estimate_effective(clean, stats);
            const Eigen::VectorXcd a_psa = estimate_effective(spoof, stats);
            for (Eigen::Index k = 0; k < K; ++k)
            {
                akk[k].add(eff.a(k, k));
                akk_other[k].add(eff.a(k, (k + 1) % K));
                y_clean[k].add(clean.y_proj(k));
                y_psa[k].add(spoof.y_proj(k));
                b_kk[k].add(eff.b(k, k));
                err_clean(k) += std::norm(eff.a(k, k) - a_clean(k));
                ahat_psa(k) += std::norm(a_psa(k));
                err_psa(k) += std::norm(eff.a(k, k) - a_psa(k));
                cov_ay_re(k) += std::real((eff.a(k, k) - stats.mean_a(k)) * std::conj(clean.y_proj(k) - stats.mean_y(k)));
            }
        }
        for (Eigen::Index k = 0; k < K; ++k)
        {
            CAPTURE(k);
            // E a_kk and var a_kk
            const double se_mean = std::sqrt(akk[k].var() / trials);
            CHECK(std::abs(akk[k].mean() - stats.mean_a(k)) < 5 * se_mean);
            CHECK(akk[k].var() == doctest::Approx(terms.xi(k)).epsilon(0.03));
            // cross-user effective gains have zero mean under orthonormal pilots
            CHECK(std::abs(akk_other[k].mean()) < 5 * std::sqrt(akk_other[k].var() / trials));
            CHECK(akk_other[k].var() == doctest::Approx(terms.cross(k, (k + 1) % K)).epsilon(0.03));

            CHECK(cov_ay_re(k) / trials == doctest::Approx(stats.cov_ay(k)).epsilon(0.03));
            CHECK(y_clean[k].var() == doctest::Approx(stats.cov_yy(k)).epsilon(0.03));
            const double psa_var = stats.cov_yy(k) + c.tau_d * c.mu_dp * terms.adv_var(k);
            CHECK(y_psa[k].var() == doctest::Approx(psa_var).epsilon(0.03));
            CHECK(b_kk[k].var() == doctest::Approx(terms.adv_var(k)).epsilon(0.03));

            CHECK(err_clean(k) / trials == doctest::Approx(terms.xi(k) - terms.varrho(k)).epsilon(0.03));
            CHECK(ahat_psa(k) / trials == doctest::Approx(psa.abs2_ahat(k)).epsilon(0.03));
            CHECK(err_psa(k) / trials == doctest::Approx(psa.abs2_atilde(k)).epsilon(0.03));
        }
    }
}
