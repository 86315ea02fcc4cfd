#include "cfmimo/model.hpp"

#include <algorithm>
#include <cmath>

namespace cfmimo {

double distance(const Point& a, const Point& b)
{
    return std::hypot(a.x - b.x, a.y - b.y);
}

double hata_constant_db(double carrier_ghz)
{
    const double lf = std::log10(carrier_ghz * 1000.0);
    return 46.3 + 33.9 * lf - 13.82 * std::log10(kApHeightM) - (1.1 * lf - 0.7) * kUserHeightM +
           (1.56 * lf - 0.8);
}

double path_loss_db(double distance_km, const SystemConfig& config)
{
    const double L = hata_constant_db(config.carrier_freq);
    const double d = std::max(distance_km, kMinDistanceKm);
    if (d > kBreakpointFarKm)
        return -L - 35.0 * std::log10(d);
    if (d > kBreakpointNearKm)
        return -L - 15.0 * std::log10(kBreakpointFarKm) - 20.0 * std::log10(d);
    return -L - 15.0 * std::log10(kBreakpointFarKm) - 20.0 * std::log10(kBreakpointNearKm);
}

double noise_power_mw(double bandwidth_mhz)
{
    const double dbm = kThermalNoiseDbmPerHz + 10.0 * std::log10(bandwidth_mhz * 1e6) + kNoiseFigureDb;
    return std::pow(10.0, dbm / 10.0);
}

double snr_from_power(double power_mw, double bandwidth_mhz)
{
    return power_mw / noise_power_mw(bandwidth_mhz);
}

double snr_from_power(double power_mw, const SystemConfig& config)
{
    return snr_from_power(power_mw, config.bandwidth);
}

Layout generate_layout(const SystemConfig& config, Rng& ap_stream, Rng& adv_stream, Rng& user_stream)
{
    auto draw = [&](Rng& rng, int count) {
        std::vector<Point> pts(static_cast<std::size_t>(count));
        for (auto& p : pts)
        {
            p.x = config.area_side * rng.uniform();
            p.y = config.area_side * rng.uniform();
        }
        return pts;
    };
    Layout layout;
    layout.ap_positions = draw(ap_stream, config.m_aps);
    layout.adv_positions = draw(adv_stream, config.n_adv);
    layout.user_positions = draw(user_stream, config.k_users);
    return layout;
}

namespace {

void fill_links(const std::vector<Point>& tx, const std::vector<Point>& users, const SystemConfig& config,
                Rng& rng, Eigen::MatrixXd& gain, Eigen::MatrixXd& pl_db, Eigen::MatrixXd& shadow_db)
{
    const auto rows = static_cast<Eigen::Index>(tx.size());
    const auto cols = static_cast<Eigen::Index>(users.size());
    gain.resize(rows, cols);
    pl_db.resize(rows, cols);
    shadow_db.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index k = 0; k < cols; ++k)
        {
            const double z = rng.normal();
            pl_db(i, k) = path_loss_db(distance(tx[i], users[k]), config);
            shadow_db(i, k) = config.sigma_sh == 0.0 ? 0.0 : config.sigma_sh * z;
            gain(i, k) = std::pow(10.0, (pl_db(i, k) + shadow_db(i, k)) / 10.0);
        }
}

} // namespace

LargeScaleFading large_scale(const Layout& layout, const SystemConfig& config, Rng& legit_stream,
                             Rng& adv_stream)
{
    LargeScaleFading out;
    fill_links(layout.ap_positions, layout.user_positions, config, legit_stream, out.beta, out.pl_db_beta,
               out.shadow_db_beta);
    fill_links(layout.adv_positions, layout.user_positions, config, adv_stream, out.theta, out.pl_db_theta,
               out.shadow_db_theta);
    return out;
}

SmallScale sample_small_scale(const SystemConfig& config, Rng& rng)
{
    SmallScale s;
    s.h.resize(config.m_aps, config.k_users);
    s.q.resize(config.n_adv, config.k_users);
    for (Eigen::Index m = 0; m < s.h.rows(); ++m)
        for (Eigen::Index k = 0; k < s.h.cols(); ++k)
            s.h(m, k) = rng.complex_normal();
    for (Eigen::Index n = 0; n < s.q.rows(); ++n)
        for (Eigen::Index k = 0; k < s.q.cols(); ++k)
            s.q(n, k) = rng.complex_normal();
    return s;
}

ChannelRealization realize(const LargeScaleFading& fading, const SmallScale& small)
{
    ChannelRealization c;
    c.g = small.h.array() * fading.beta.array().sqrt().cast<std::complex<double>>();
    c.f = small.q.array() * fading.theta.array().sqrt().cast<std::complex<double>>();
    return c;
}

Drop make_drop(const SystemConfig& config, std::uint64_t drop_index)
{
    Rng ap(config.seed, StreamTag::ApPositions, drop_index);
    Rng adv(config.seed, StreamTag::AdvPositions, drop_index);
    Rng users(config.seed, StreamTag::UserPositions, drop_index);
    Rng shadow_legit(config.seed, StreamTag::ShadowLegit, drop_index);
    Rng shadow_adv(config.seed, StreamTag::ShadowAdv, drop_index);

    Drop d;
    d.layout = generate_layout(config, ap, adv, users);
    d.fading = large_scale(d.layout, config, shadow_legit, shadow_adv);
    return d;
}

} // namespace cfmimo
