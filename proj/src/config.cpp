#include "cfmimo/config.hpp"

#include "cfmimo/format.hpp"
#include "cfmimo/model.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace cfmimo {

namespace {

constexpr std::array<std::string_view, 18> kKeys = {
    "m_aps",  "n_adv",    "k_users",   "tau_u",     "tau_d",    "tau_c",
    "rho_up", "rho_dp",   "rho_d",     "mu_dp",     "rho_da",   "alpha_dl",
    "area_side", "sigma_sh", "carrier_freq", "bandwidth", "seed", "trials"};

bool is_known_key(std::string_view key)
{
    for (auto k : kKeys)
        if (k == key)
            return true;
    return false;
}

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

double parse_double(const std::string& key, const std::string& text)
{
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v))
        throw ConfigError(key, "invalid numeric value for '" + key + "': '" + text + "'");
    return v;
}

std::int64_t parse_int(const std::string& key, const std::string& text)
{
    std::int64_t v = 0;
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), last, v);
    if (ec != std::errc() || ptr != last)
        throw ConfigError(key, "invalid integer value for '" + key + "': '" + text + "'");
    return v;
}

int parse_count(const std::string& key, const std::string& text)
{
    const auto v = parse_int(key, text);
    if (v < 0 || v > 1'000'000)
        throw ConfigError(key, "count out of range for '" + key + "': " + text);
    return static_cast<int>(v);
}

bool ends_with(std::string_view s, std::string_view suffix)
{
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

} // namespace

SystemConfig default_config()
{
    SystemConfig c;
    c.rho_up = snr_from_power(100.0, c.bandwidth);
    c.rho_dp = snr_from_power(200.0, c.bandwidth);
    c.rho_d = c.rho_dp;
    c.mu_dp = c.rho_dp;
    c.rho_da = c.rho_d;
    return c;
}

void SystemConfig::validate() const
{
    auto require = [](bool ok, const char* key, const std::string& msg) {
        if (!ok)
            throw ConfigError(key, std::string(key) + ": " + msg);
    };
    require(m_aps >= 1, "m_aps", "must be >= 1");
    require(n_adv >= 0, "n_adv", "must be >= 0");
    require(k_users >= 1, "k_users", "must be >= 1");
    require(tau_u >= k_users, "tau_u", "must be >= k_users (orthonormal pilots)");
    require(tau_d >= k_users, "tau_d", "must be >= k_users (orthonormal pilots)");
    require(tau_c >= 1, "tau_c", "must be >= 1");
    require(rho_up >= 0.0, "rho_up", "must be >= 0");
    require(rho_dp >= 0.0, "rho_dp", "must be >= 0");
    require(rho_d >= 0.0, "rho_d", "must be >= 0");
    require(mu_dp >= 0.0, "mu_dp", "must be >= 0");
    require(rho_da >= 0.0, "rho_da", "must be >= 0");
    require(alpha_dl >= 0.0 && alpha_dl <= 1.0, "alpha_dl", "must lie in [0, 1]");
    require(area_side > 0.0, "area_side", "must be > 0");
    require(sigma_sh >= 0.0, "sigma_sh", "must be >= 0");
    require(carrier_freq > 0.0, "carrier_freq", "must be > 0");
    require(bandwidth > 0.0, "bandwidth", "must be > 0");
    require(trials >= 1, "trials", "must be >= 1");
    if (tau_u + tau_d >= tau_c)
        throw InfeasibleConfig("tau_u + tau_d = " + std::to_string(tau_u + tau_d) +
                               " leaves no payload in tau_c = " + std::to_string(tau_c));
}

double SystemConfig::prelog() const
{
    return alpha_dl * (1.0 - static_cast<double>(tau_u + tau_d) / static_cast<double>(tau_c));
}

ConfigBuilder::ConfigBuilder()
{
    const SystemConfig d = default_config();
    values_ = {
        {"m_aps", std::to_string(d.m_aps)},
        {"n_adv", std::to_string(d.n_adv)},
        {"k_users", std::to_string(d.k_users)},
        {"tau_u", std::to_string(d.tau_u)},
        {"tau_d", std::to_string(d.tau_d)},
        {"tau_c", std::to_string(d.tau_c)},
        {"rho_up", "100mW"},
        {"rho_dp", "200mW"},
        {"rho_d", "200mW"},
        {"mu_dp", "200mW"},
        {"rho_da", "200mW"},
        {"alpha_dl", format_double(d.alpha_dl)},
        {"area_side", format_double(d.area_side)},
        {"sigma_sh", format_double(d.sigma_sh)},
        {"carrier_freq", format_double(d.carrier_freq)},
        {"bandwidth", format_double(d.bandwidth)},
        {"seed", std::to_string(d.seed)},
        {"trials", std::to_string(d.trials)},
    };
}

void ConfigBuilder::load_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("config", "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    load_text(ss.str(), path);
}

void ConfigBuilder::load_text(std::string_view text, const std::string& origin)
{
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size())
    {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos)
            end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        ++line_no;
        pos = end + 1;

        if (auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        const std::string stripped = trim(line);
        if (stripped.empty())
            continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(stripped, origin + ":" + std::to_string(line_no) +
                                            ": expected key=value, got '" + stripped + "'");
        set(trim(std::string_view(stripped).substr(0, eq)),
            trim(std::string_view(stripped).substr(eq + 1)));
    }
}

void ConfigBuilder::set(std::string_view assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos)
        throw ConfigError(std::string(assignment), "expected key=value, got '" + std::string(assignment) + "'");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void ConfigBuilder::set(const std::string& key, const std::string& value)
{
    if (!is_known_key(key))
        throw ConfigError(key, "unknown config key '" + key + "'");
    if (value.empty())
        throw ConfigError(key, "empty value for '" + key + "'");
    values_[key] = value;
}

double parse_snr(const std::string& key, const std::string& text, double bandwidth_mhz)
{
    if (ends_with(text, "dBm"))
    {
        const double dbm = parse_double(key, trim(std::string_view(text).substr(0, text.size() - 3)));
        return snr_from_power(std::pow(10.0, dbm / 10.0), bandwidth_mhz);
    }
    if (ends_with(text, "mW"))
    {
        const double mw = parse_double(key, trim(std::string_view(text).substr(0, text.size() - 2)));
        if (mw < 0.0)
            throw ConfigError(key, key + ": power must be >= 0");
        return snr_from_power(mw, bandwidth_mhz);
    }
    if (ends_with(text, "dB"))
    {
        const double db = parse_double(key, trim(std::string_view(text).substr(0, text.size() - 2)));
        return std::pow(10.0, db / 10.0);
    }
    return parse_double(key, text);
}

SystemConfig ConfigBuilder::resolve() const
{
    auto get = [this](const char* key) -> const std::string& { return values_.at(key); };

    SystemConfig c;
    c.m_aps = parse_count("m_aps", get("m_aps"));
    c.n_adv = parse_count("n_adv", get("n_adv"));
    c.k_users = parse_count("k_users", get("k_users"));
    c.tau_u = parse_count("tau_u", get("tau_u"));
    c.tau_d = parse_count("tau_d", get("tau_d"));
    c.tau_c = parse_count("tau_c", get("tau_c"));
    c.alpha_dl = parse_double("alpha_dl", get("alpha_dl"));
    c.area_side = parse_double("area_side", get("area_side"));
    c.sigma_sh = parse_double("sigma_sh", get("sigma_sh"));
    c.carrier_freq = parse_double("carrier_freq", get("carrier_freq"));
    c.bandwidth = parse_double("bandwidth", get("bandwidth"));
    if (c.bandwidth <= 0.0)
        throw ConfigError("bandwidth", "bandwidth: must be > 0");

    const auto seed = get("seed");
    std::uint64_t s = 0;
    auto [ptr, ec] = std::from_chars(seed.data(), seed.data() + seed.size(), s);
    if (ec != std::errc() || ptr != seed.data() + seed.size())
        throw ConfigError("seed", "invalid seed '" + seed + "'");
    c.seed = s;
    c.trials = parse_int("trials", get("trials"));

    c.rho_up = parse_snr("rho_up", get("rho_up"), c.bandwidth);
    c.rho_dp = parse_snr("rho_dp", get("rho_dp"), c.bandwidth);
    c.rho_d = parse_snr("rho_d", get("rho_d"), c.bandwidth);
    c.mu_dp = parse_snr("mu_dp", get("mu_dp"), c.bandwidth);
    c.rho_da = parse_snr("rho_da", get("rho_da"), c.bandwidth);

    c.validate();
    return c;
}

std::string config_header(const SystemConfig& c)
{
    std::ostringstream os;
    os << "# cfmimo-config:"
       << " m_aps=" << c.m_aps << " n_adv=" << c.n_adv << " k_users=" << c.k_users
       << " tau_u=" << c.tau_u << " tau_d=" << c.tau_d << " tau_c=" << c.tau_c
       << " rho_up=" << format_double(c.rho_up) << " rho_dp=" << format_double(c.rho_dp)
       << " rho_d=" << format_double(c.rho_d) << " mu_dp=" << format_double(c.mu_dp)
       << " rho_da=" << format_double(c.rho_da) << " alpha_dl=" << format_double(c.alpha_dl)
       << " area_side=" << format_double(c.area_side) << " sigma_sh=" << format_double(c.sigma_sh)
       << " carrier_freq=" << format_double(c.carrier_freq)
       << " bandwidth=" << format_double(c.bandwidth) << " seed=" << c.seed
       << " trials=" << c.trials;
    return os.str();
}

SystemConfig parse_config_header(std::string_view line)
{
    constexpr std::string_view tag = "cfmimo-config:";
    const auto at = line.find(tag);
    if (at == std::string_view::npos)
        throw ConfigError("header", "not a cfmimo config header");
    std::istringstream is(std::string(line.substr(at + tag.size())));

    ConfigBuilder builder;
    std::string token;
    std::size_t seen = 0;
    while (is >> token)
    {
        builder.set(token);
        ++seen;
    }
    if (seen != kKeys.size())
        throw ConfigError("header", "config header carries " + std::to_string(seen) + " of " +
                                        std::to_string(kKeys.size()) + " keys");
    return builder.resolve();
}

} // namespace cfmimo
