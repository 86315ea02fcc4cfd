#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cfmimo {

/// Raised for unknown keys, malformed values and violated invariants.
class ConfigError : public std::runtime_error
{
public:
    ConfigError(std::string key, const std::string& what)
        : std::runtime_error(what), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Raised when the coherence interval leaves no room for payload (prelog <= 0).
class InfeasibleConfig : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// All scalar parameters of one scenario. SNRs are normalized (linear,
/// transmit power over receiver noise power).
struct SystemConfig
{
    int m_aps = 128;
    int n_adv = 32;
    int k_users = 4;
    int tau_u = 32;
    int tau_d = 32;
    int tau_c = 200;
    double rho_up = 0.0;
    double rho_dp = 0.0;
    double rho_d = 0.0;
    double mu_dp = 0.0;
    double rho_da = 0.0;
    double alpha_dl = 0.5;
    double area_side = 1.0;     // km
    double sigma_sh = 8.0;      // dB
    double carrier_freq = 1.9;  // GHz
    double bandwidth = 20.0;    // MHz
    std::uint64_t seed = 20240917;
    std::int64_t trials = 10000;

    /// Throws ConfigError or InfeasibleConfig.
    void validate() const;

    /// α_DL (1 - (τ_u + τ_d)/τ_c).
    double prelog() const;

    bool operator==(const SystemConfig&) const = default;
};

/// Table-1 scenario: 128/32/4, 20 MHz at 1.9 GHz, 32-symbol pilots,
/// 200 mW downlink pilots and payload, 100 mW uplink pilots, adversaries
/// at the legitimate downlink power.
SystemConfig default_config();

/// Key/value layer under SystemConfig. Keys are the SystemConfig field names.
/// SNR keys accept a plain linear value or a suffixed power: `200mW`,
/// `23dBm` (converted with the bandwidth's thermal noise) or `115dB`
/// (normalized SNR in dB). Values are resolved only in `resolve()`, so the
/// bandwidth may be given after the powers.
class ConfigBuilder
{
public:
    ConfigBuilder();

    /// Parses `key=value` lines; '#' starts a comment.
    void load_file(const std::string& path);
    void load_text(std::string_view text, const std::string& origin = "<text>");

    /// Accepts `key=value`.
    void set(std::string_view assignment);
    void set(const std::string& key, const std::string& value);

    SystemConfig resolve() const;

private:
    std::map<std::string, std::string> values_;
};

/// Parses one SNR value as accepted by ConfigBuilder.
double parse_snr(const std::string& key, const std::string& text, double bandwidth_mhz);

/// Single-line header carrying every resolved field at full precision,
/// e.g. `# cfmimo-config: m_aps=128 n_adv=32 ...`.
std::string config_header(const SystemConfig& config);

/// Inverse of config_header; accepts the line with or without the leading '#'.
SystemConfig parse_config_header(std::string_view line);

} // namespace cfmimo
