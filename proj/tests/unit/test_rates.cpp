#include "cfmimo/minmax.hpp"
#include "cfmimo/rates.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

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

struct Setup
{
    SystemConfig config;
    Drop drop;
    Eigen::MatrixXd gamma, kappa;
    PowerAllocation alloc;

    ClosedFormTerms terms() const { return closed_form_terms(alloc, drop.fading, gamma, kappa, config); }
};

Setup make_setup(const SystemConfig& c, std::uint64_t drop = 0)
{
    Setup s{c, make_drop(c, drop), {}, {}, {}};
    s.gamma = gamma_matrix(s.drop.fading.beta, c);
    s.kappa = kappa_matrix(s.drop.fading.theta, c);
    s.alloc.eta = uniform_eta(s.gamma);
    s.alloc.zeta = c.n_adv > 0 ? equal_allocation(s.kappa) : Eigen::MatrixXd::Zero(0, c.k_users);
    return s;
}

ClosedFormTerms random_terms(Rng& rng, int k)
{
    auto pos = [&](double scale) { return scale * std::exp(8.0 * (rng.uniform() - 0.5)); };
    ClosedFormTerms t;
    t.A.resize(k);
    t.B.resize(k);
    t.C.resize(k);
    t.D.resize(k);
    t.ups.resize(k);
    t.script_D.resize(k);
    for (int i = 0; i < k; ++i)
    {
        t.A(i) = pos(1e3);
        t.B(i) = pos(10.0);
        t.C(i) = pos(1e2);
        t.D(i) = pos(1e2);
        t.ups(i) = pos(1.0);
        t.script_D(i) = t.D(i) * (t.ups(i) * t.ups(i) + pos(0.1));
    }
    return t;
}

} // namespace

TEST_CASE("closed-form term invariants")
{
    const Setup s = make_setup(scenario(32, 8, 4, 11));
    const ClosedFormTerms t = s.terms();
    for (Eigen::Index k = 0; k < 4; ++k)
    {
        CHECK(t.xi(k) == doctest::Approx(t.cross(k, k)).epsilon(1e-12));
        CHECK(t.varrho(k) < t.xi(k));
        CHECK(t.eps(k) > 0.0);
        CHECK(t.ups(k) > 0.0);
        CHECK(t.A(k) > 0.0);
        CHECK(t.B(k) > 0.0);
        CHECK(t.C(k) > 0.0);
        CHECK(t.D(k) > 0.0);
        CHECK(t.script_D(k) > 0.0);
        CHECK(t.script_F(k) > 0.0);
        CHECK(t.interference(k) >= 0.0);
    }

    SUBCASE("silent adversaries")
    {
        Setup z = s;
        z.alloc.zeta.setZero();
        const ClosedFormTerms q = z.terms();
        CHECK(q.ups.isZero(0.0));
        CHECK(q.script_D.isZero(0.0));
        CHECK(q.script_F.isZero(0.0));
        for (Eigen::Index k = 0; k < 4; ++k)
        {
            CHECK(q.C(k) * q.ups(k) == 0.0);
            CHECK(data_attack_sinr(q, k) == clean_sinr(q, k));
        }
    }
}

TEST_CASE("single-AP algebra")
{
    SystemConfig c = scenario(1, 0, 1, 1);
    c.tau_d = 1;
    c.rho_dp = 1.0; // T xi + 1 = 2
    LargeScaleFading f;
    f.beta = Eigen::MatrixXd::Ones(1, 1);
    f.theta = Eigen::MatrixXd::Zero(0, 1);
    const PowerAllocation alloc{Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Zero(0, 1)};
    const ClosedFormTerms t =
        closed_form_terms(alloc, f, Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Zero(0, 1), c);
    CHECK(t.eps(0) == 1.0);
    CHECK(t.xi(0) == 1.0);
    CHECK(t.A(0) == doctest::Approx(4.0 + 1.0 + 1.0));
    CHECK(t.ups(0) == 0.0);
}

TEST_CASE("zero payload SNR is a config error")
{
    Setup s = make_setup(scenario(8, 2, 2, 1));
    s.config.rho_d = 0.0;
    CHECK_THROWS_AS(s.terms(), ConfigError);
}

TEST_CASE("spoofed-training rate forms agree")
{
    Rng rng(99);
    for (int i = 0; i < 1000; ++i)
    {
        const ClosedFormTerms t = random_terms(rng, 1);
        const double direct = std::log2(1.0 + psa_sinr(t, 0));
        CHECK(std::abs(direct - psa_rate_rearranged(t, 0)) <= 1e-12 * direct);
    }
}

TEST_CASE("attack-free limits")
{
    Setup s = make_setup(scenario(32, 8, 4, 12));
    SUBCASE("spoofing with zero power is clean training")
    {
        s.config.mu_dp = 0.0;
        const ClosedFormTerms t = s.terms();
        for (Eigen::Index k = 0; k < 4; ++k)
        {
            CHECK(psa_sinr(t, k) == doctest::Approx(t.A(k) / t.B(k)).epsilon(1e-14));
            CHECK(psa_sinr(t, k) == doctest::Approx(clean_sinr(t, k)).epsilon(1e-12));
        }
    }
    SUBCASE("data attack with zero power is clean training")
    {
        s.config.rho_da = 0.0;
        const ClosedFormTerms t = s.terms();
        const RateReport r = rate_data_attack(t, s.config);
        const RateReport clean = rate_clean(t, s.config);
        CHECK(r.sinr == clean.sinr);
        CHECK(r.sum_rate == clean.sum_rate);
    }
    SUBCASE("corrupted terms are rejected")
    {
        ClosedFormTerms t = s.terms();
        t.script_F(0) = -1e30;
        CHECK_THROWS_AS(data_attack_sinr(t, 0), std::domain_error);
    }
}

TEST_CASE("rate report structure")
{
    const Setup s = make_setup(scenario(32, 8, 4, 13));
    const ClosedFormTerms t = s.terms();
    for (AttackMode mode : {AttackMode::None, AttackMode::Psa, AttackMode::Data})
    {
        const RateReport r = closed_form_rate(mode, t, s.config);
        CHECK(r.mode == mode);
        CHECK(r.rate.size() == 4);
        double total = 0;
        for (std::size_t k = 0; k < 4; ++k)
        {
            CHECK(r.sinr[k] >= 0.0);
            CHECK(r.rate[k] == doctest::Approx(std::log2(1 + r.sinr[k])).epsilon(1e-15));
            total += r.rate[k];
        }
        CHECK(r.sum_rate == doctest::Approx(0.34 * total).epsilon(1e-14));
        CHECK(r.max_rate() == *std::max_element(r.rate.begin(), r.rate.end()));
    }
    std::ostringstream os;
    write_rate_report_header(os);
    write_rate_report(os, rate_psa(t, s.config));
    std::string line;
    std::istringstream is(os.str());
    std::getline(is, line);
    CHECK(line == "mode,source,user,sinr,rate,sum_rate,stderr");
    std::getline(is, line);
    CHECK(line.rfind("psa,closed-form,0,", 0) == 0);
}

TEST_CASE("sum rate")
{
    SystemConfig c = default_config();
    CHECK(sum_rate({2.5, 2.5, 2.5, 2.5}, c) == doctest::Approx(3.4).epsilon(1e-14));
    CHECK(sum_rate({1.7}, c) == doctest::Approx(c.prelog() * 1.7).epsilon(1e-15));
    c.alpha_dl = 0.0;
    CHECK(sum_rate({3.0, 4.0}, c) == 0.0);
    c.tau_c = 64;
    CHECK_THROWS_AS(sum_rate({1.0}, c), InfeasibleConfig);
}

TEST_CASE("rates fall with attack power")
{
    const Setup base = make_setup(scenario(64, 16, 4, 14));
    double previous = std::numeric_limits<double>::infinity();
    std::vector<double> prev_rate;
    for (double x : {0.0, 1.0, 10.0, 100.0})
    {
        Setup s = base;
        s.config.mu_dp = x * s.config.rho_dp;
        const RateReport r = rate_psa(s.terms(), s.config);
        CHECK(r.sum_rate < previous);
        if (!prev_rate.empty())
            for (std::size_t k = 0; k < 4; ++k)
                CHECK(r.rate[k] < prev_rate[k]);
        previous = r.sum_rate;
        prev_rate = r.rate;
    }
}

TEST_CASE("spoofed-training rate saturates in payload power")
{
    for (std::uint64_t seed : {15u, 16u, 17u})
    {
        Setup s = make_setup(scenario(64, 16, 4, seed));
        const double threshold = psa_saturation_snr(s.terms(), s.config);
        CHECK(threshold > 0.0);
        for (double factor : {1.0, 10.0, 1000.0})
        {
            s.config.rho_d = threshold * factor;
            const RateReport lo = rate_psa(s.terms(), s.config);
            s.config.rho_d = threshold * factor * 10.0;
            const RateReport hi = rate_psa(s.terms(), s.config);
            for (std::size_t k = 0; k < 4; ++k)
                CHECK(std::abs(hi.rate[k] - lo.rate[k]) < 0.01 * lo.rate[k]);
        }
    }
}

TEST_CASE("co-moment merge equals a single pass")
{
    Rng rng(3);
    std::vector<McVector> xs;
    for (int i = 0; i < 1000; ++i)
    {
        McVector x;
        for (int j = 0; j < kMcTermCount; ++j)
            x(j) = rng.normal() * (j + 1) + (j == 2 ? rng.normal() * x(0) : 10.0);
        xs.push_back(x);
    }
    CoMoments all, a, b, empty;
    for (std::size_t i = 0; i < xs.size(); ++i)
    {
        all.push(xs[i]);
        (i < 337 ? a : b).push(xs[i]);
    }
    a.merge(b);
    a.merge(empty);
    CHECK(a.n == all.n);
    CHECK((a.mean - all.mean).norm() < 1e-12 * all.mean.norm());
    CHECK((a.covariance() - all.covariance()).norm() < 1e-10 * all.covariance().norm());
    McVector direct = McVector::Zero();
    for (const auto& x : xs)
        direct += x;
    CHECK((direct / 1000.0 - all.mean).norm() < 1e-12 * all.mean.norm());
}

TEST_CASE("Monte Carlo oracle")
{
    const Setup s = make_setup(scenario(64, 16, 4, 21));
    const ClosedFormTerms t = s.terms();

    SUBCASE("expectations agree with their closed forms")
    {
        McOptions opt;
        opt.trials = 100000;
        const McExpectations mc = mc_expectations(s.config, s.alloc, s.drop.fading, opt);
        const PsaExpectations psa = psa_expectations(t, s.config);
        const DataExpectations data = data_expectations(t);
        for (Eigen::Index k = 0; k < 4; ++k)
        {
            CAPTURE(k);
            CHECK(mc.mean(k, kAbs2AhatPsa) == doctest::Approx(psa.abs2_ahat(k)).epsilon(0.03));
            CHECK(mc.mean(k, kAbs2AtildePsa) == doctest::Approx(psa.abs2_atilde(k)).epsilon(0.03));
            CHECK(mc.mean(k, kAbs2AhatClean) == doctest::Approx(data.abs2_ahat(k)).epsilon(0.03));
            CHECK(mc.mean(k, kAbs2AtildeClean) == doctest::Approx(data.abs2_atilde(k)).epsilon(0.03));
            CHECK(mc.mean(k, kInterference) == doctest::Approx(t.interference(k)).epsilon(0.03));
            CHECK(mc.mean(k, kAbs2BSum) == doctest::Approx(data.abs2_b(k)).epsilon(0.03));
            CHECK(mc.mean(k, kAbs2Bkk) == doctest::Approx(t.ups(k) * t.ups(k) + t.adv_var(k)).epsilon(0.03));
        }
        for (AttackMode mode : {AttackMode::None, AttackMode::Psa, AttackMode::Data})
        {
            CAPTURE(to_string(mode));
            const RateReport cf = closed_form_rate(mode, t, s.config);
            const RateReport mr = rate_from_mc(mode, mc, s.config);
            CHECK(mr.source == RateSource::MonteCarlo);
            for (std::size_t k = 0; k < 4; ++k)
                CHECK(mr.rate[k] == doctest::Approx(cf.rate[k]).epsilon(0.03));
            CHECK(mr.sum_rate == doctest::Approx(cf.sum_rate).epsilon(0.05));
        }
    }

    SUBCASE("standard errors scale with the trial count")
    {
        McOptions opt;
        opt.trials = 4000;
        const RateReport r1 = mc_rate(AttackMode::Psa, s.config, s.alloc, s.drop.fading, opt);
        opt.trials = 8000;
        const RateReport r2 = mc_rate(AttackMode::Psa, s.config, s.alloc, s.drop.fading, opt);
        opt.trials = 16000;
        const RateReport r4 = mc_rate(AttackMode::Psa, s.config, s.alloc, s.drop.fading, opt);
        const double ratio2 = r1.sum_rate_stderr / r2.sum_rate_stderr;
        const double ratio4 = r1.sum_rate_stderr / r4.sum_rate_stderr;
        CHECK(std::abs(ratio2 / std::sqrt(2.0) - 1.0) < 0.2);
        CHECK(std::abs(ratio4 / 2.0 - 1.0) < 0.2);
        CHECK(r1.sum_rate_stderr > 0.0);
    }

    SUBCASE("zero-power spoofing matches the clean run on the same streams")
    {
        SystemConfig c = s.config;
        c.mu_dp = 0.0;
        McOptions opt;
        opt.trials = 2000;
        const RateReport psa = mc_rate(AttackMode::Psa, c, s.alloc, s.drop.fading, opt);
        const RateReport none = mc_rate(AttackMode::None, c, s.alloc, s.drop.fading, opt);
        for (std::size_t k = 0; k < 4; ++k)
            CHECK(psa.rate[k] == doctest::Approx(none.rate[k]).epsilon(1e-12));
    }

    SUBCASE("result does not depend on the worker count")
    {
        McOptions opt;
        opt.trials = 3000;
        opt.chunk = 256;
        opt.workers = 1;
        const McExpectations one = mc_expectations(s.config, s.alloc, s.drop.fading, opt);
        opt.workers = 3;
        const McExpectations three = mc_expectations(s.config, s.alloc, s.drop.fading, opt);
        for (std::size_t k = 0; k < 4; ++k)
        {
            CHECK(one.users[k].mean == three.users[k].mean);
            CHECK(one.users[k].m2 == three.users[k].m2);
        }
        opt.stream = 1;
        const McExpectations other = mc_expectations(s.config, s.alloc, s.drop.fading, opt);
        CHECK(other.users[0].mean != one.users[0].mean);
    }

    SUBCASE("too few trials")
    {
        McOptions opt;
        opt.trials = 999;
        CHECK_THROWS_AS(mc_rate(AttackMode::None, s.config, s.alloc, s.drop.fading, opt), std::invalid_argument);
    }
}
