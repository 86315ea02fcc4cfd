#pragma once

#include "cfmimo/config.hpp"
#include "cfmimo/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace cfmimo {

struct Point
{
    double x = 0.0; // km
    double y = 0.0; // km
};

double distance(const Point& a, const Point& b);

struct Layout
{
    std::vector<Point> ap_positions;
    std::vector<Point> adv_positions;
    std::vector<Point> user_positions;
};

/// Large-scale gains of every legitimate (beta, M x K) and adversarial
/// (theta, N x K) link, with the dB components that produced them.
struct LargeScaleFading
{
    Eigen::MatrixXd beta;
    Eigen::MatrixXd theta;
    Eigen::MatrixXd pl_db_beta;
    Eigen::MatrixXd shadow_db_beta;
    Eigen::MatrixXd pl_db_theta;
    Eigen::MatrixXd shadow_db_theta;
};

/// Unit-variance small-scale fading: h (M x K) and q (N x K).
struct SmallScale
{
    Eigen::MatrixXcd h;
    Eigen::MatrixXcd q;
};

/// g_mk = h_mk sqrt(beta_mk), f_nk = q_nk sqrt(theta_nk).
struct ChannelRealization
{
    Eigen::MatrixXcd g;
    Eigen::MatrixXcd f;
};

// Three-slope path loss. Breakpoints d0 = 10 m and d1 = 50 m; the constant L
// is the COST-231 Hata term for the configured carrier, 15 m APs and 1.65 m
// users:
//   L = 46.3 + 33.9 log10(f) - 13.82 log10(h_ap)
//       - (1.1 log10(f) - 0.7) h_u + (1.56 log10(f) - 0.8),    f in MHz
//   PL(d) = -L - 35 log10(d)                      d > d1
//         = -L - 15 log10(d1) - 20 log10(d)       d0 < d <= d1
//         = -L - 15 log10(d1) - 20 log10(d0)      d <= d0
// with d in km.
inline constexpr double kBreakpointNearKm = 0.010;
inline constexpr double kBreakpointFarKm = 0.050;
inline constexpr double kApHeightM = 15.0;
inline constexpr double kUserHeightM = 1.65;
inline constexpr double kMinDistanceKm = 0.001;
inline constexpr double kNoiseFigureDb = 9.0;
inline constexpr double kThermalNoiseDbmPerHz = -174.0;

/// COST-231 Hata constant L (dB) for a carrier in GHz.
double hata_constant_db(double carrier_ghz);

/// PL (dB, <= 0) at a horizontal distance in km.
double path_loss_db(double distance_km, const SystemConfig& config);

/// -174 dBm/Hz + 10 log10(B) + noise figure, in mW.
double noise_power_mw(double bandwidth_mhz);

/// Normalized SNR of a transmit power in mW.
double snr_from_power(double power_mw, double bandwidth_mhz);
double snr_from_power(double power_mw, const SystemConfig& config);

/// Uniform positions in [0, area_side]^2. Each node class draws from its own
/// stream in index order, so the first n points do not depend on the count.
Layout generate_layout(const SystemConfig& config, Rng& ap_stream, Rng& adv_stream, Rng& user_stream);

/// beta_mk = PL_mk 10^(sigma_sh z_mk / 10), z ~ N(0,1) drawn AP-major from
/// `legit_stream`; theta likewise from `adv_stream`.
LargeScaleFading large_scale(const Layout& layout, const SystemConfig& config, Rng& legit_stream,
                             Rng& adv_stream);

/// i.i.d. CN(0,1) draws: all of h (AP-major) then all of q.
SmallScale sample_small_scale(const SystemConfig& config, Rng& rng);

ChannelRealization realize(const LargeScaleFading& fading, const SmallScale& small);

/// One random network drop: layout and large-scale fading from the streams
/// derived from (config.seed, drop index).
struct Drop
{
    Layout layout;
    LargeScaleFading fading;
};

Drop make_drop(const SystemConfig& config, std::uint64_t drop_index);

} // namespace cfmimo
