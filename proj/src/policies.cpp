#include "qest/policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "qest/errors.hpp"

namespace qest {

namespace {

void require_spread(double sigma_g) {
    if (!(sigma_g > 0.0))
        throw DegeneratePosteriorError("posterior sigma_g collapsed to zero");
}

}  // namespace

void MachinePolicyParams::validate(int m_r) const {
    if (!(a >= 0.0 && b >= 0.0 && d >= 0.0 && f >= 0.0 && g_pol >= 0.0))
        throw std::invalid_argument("machine policy: rule coefficients must be >= 0");
    if (!(t_max > 0.0))
        throw std::invalid_argument("machine policy: t_max must be > 0");
    if (d_th < 0 || d_th > m_r)
        throw std::invalid_argument("machine policy: d_th must lie in [0, m_r]");
    if (c0 < 0)
        throw std::invalid_argument("machine policy: c0 must be >= 0");
}

void register_batch(PolicyState& state, int d, int d_th) {
    if (d > d_th)
        ++state.clicks;
    ++state.settings_issued;
}

MeasurementSetting manual_rule(const ManualPolicyParams& params, const PosteriorStats& stats,
                               long setting_index, const PolicyDraws& draws, bool shared_draw) {
    require_spread(stats.sigma_g);
    MeasurementSetting setting;
    setting.m_r = 1;
    if (setting_index <= params.m0) {
        const double r_t = draws.r1;
        const double r_w = shared_draw ? draws.r1 : draws.r2;
        setting.t = params.a * r_t / stats.sigma_g;
        setting.omega_q = stats.mu_omega + (r_w - 0.5) * stats.mu_g;
    } else {
        setting.t = std::abs(params.a + params.b * draws.z) / stats.sigma_g;
        setting.omega_q = stats.mu_omega + params.c * (draws.r2 - 0.5) * stats.sigma_omega;
    }
    return setting;
}

MeasurementSetting next_setting_man(const ManualPolicyParams& params, const PosteriorStats& stats,
                                    const PolicyState& state, Rng& rng, bool shared_draw) {
    PolicyDraws draws;
    const long setting_index = state.settings_issued + 1;
    if (setting_index <= params.m0) {
        draws.r1 = rng.uniform();
        if (!shared_draw)
            draws.r2 = rng.uniform();
    } else {
        draws.r2 = rng.uniform();
        draws.z = rng.normal();
    }
    return manual_rule(params, stats, setting_index, draws, shared_draw);
}

MeasurementSetting next_setting_rand(double t1, const PosteriorStats& stats, Rng& rng, double c) {
    require_spread(stats.sigma_g);
    if (!(t1 > 0.0) || is_infinite_t1(t1))
        throw std::invalid_argument("random-time policy needs a finite t1 > 0");
    MeasurementSetting setting;
    setting.m_r = 1;
    setting.t = rng.uniform(0.0, t1);
    setting.omega_q = stats.mu_omega + c * (rng.uniform() - 0.5) * stats.sigma_omega;
    return setting;
}

MachRegime mach_regime(long clicks, double sigma_g, double t_max) {
    if (clicks == 0)
        return MachRegime::click_search;
    return sigma_g > 1.0 / t_max ? MachRegime::refine : MachRegime::capped;
}

MeasurementSetting mach_rule(const MachinePolicyParams& params, const PosteriorStats& stats,
                             long clicks, const PolicyDraws& draws, double omega_marginal,
                             double tail_t, int m_r) {
    MeasurementSetting setting;
    setting.m_r = m_r;
    const MachRegime regime = mach_regime(clicks, stats.sigma_g, params.t_max);

    if (regime == MachRegime::click_search) {
        require_spread(stats.sigma_g);
        setting.omega_q = omega_marginal;
        setting.t = params.a * draws.r1 / stats.sigma_g;
        return setting;
    }

    setting.omega_q = clicks <= params.c0
                          ? stats.mu_omega + params.f * (draws.r1 - 0.5) * stats.mu_g
                          : stats.mu_omega + params.g_pol * (draws.r2 - 0.5) * stats.sigma_omega;
    if (regime == MachRegime::capped) {
        setting.t = tail_t;
    } else {
        require_spread(stats.sigma_g);
        setting.t = clicks <= params.c0
                        ? params.a * draws.r1 / stats.sigma_g
                        : std::abs(params.d + params.b * draws.z) / stats.sigma_g;
    }
    return setting;
}

MeasurementSetting next_setting_mach(const MachinePolicyParams& params,
                                     const std::optional<ShapedTimeDensity>& tail,
                                     const PosteriorStats& stats, const PolicyState& state,
                                     const ParticleCloud& cloud, Rng& rng, int m_r) {
    const MachRegime regime = mach_regime(state.clicks, stats.sigma_g, params.t_max);
    PolicyDraws draws;
    double omega_marginal = 0.0;
    double tail_t = 0.0;

    // draw order: r1, r2, z as needed, then the marginal or tail sample
    if (regime == MachRegime::click_search) {
        draws.r1 = rng.uniform();
        omega_marginal = sample_omega_marginal(cloud, rng);
    } else {
        if (state.clicks <= params.c0) {
            draws.r1 = rng.uniform();
        } else {
            draws.r2 = rng.uniform();
            if (regime == MachRegime::refine)
                draws.z = rng.normal();
        }
        if (regime == MachRegime::capped)
            tail_t = tail ? sample_shaped_time(*tail, rng) : rng.uniform(0.0, params.t_max);
    }
    return mach_rule(params, stats, state.clicks, draws, omega_marginal, tail_t, m_r);
}

ShapedTimeDensity make_shaped_density(std::vector<double> grid, std::vector<double> values) {
    if (grid.size() < 2 || grid.size() != values.size())
        throw std::invalid_argument("shaped density: need matching grid/value arrays, size >= 2");
    if (grid.front() != 0.0)
        throw std::invalid_argument("shaped density: grid must start at t = 0");
    double integral = 0.0;
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        const double h = grid[k + 1] - grid[k];
        if (!(h > 0.0))
            throw std::invalid_argument("shaped density: grid must be strictly increasing");
        if (!(values[k] >= 0.0) || !(values[k + 1] >= 0.0))
            throw std::invalid_argument("shaped density: values must be >= 0");
        integral += 0.5 * (values[k] + values[k + 1]) * h;
    }
    if (!(integral > 0.0))
        throw std::invalid_argument("shaped density: all-zero density");
    for (double& v : values)
        v /= integral;
    return ShapedTimeDensity{std::move(grid), std::move(values)};
}

std::vector<double> build_time_grid(int n_t, double t1, double t_max_prime) {
    if (n_t < 2)
        throw std::invalid_argument("time grid: need at least 2 points");
    if (!(t_max_prime > 0.0))
        throw std::invalid_argument("time grid: t_max' must be > 0");
    std::vector<double> grid(static_cast<std::size_t>(n_t));
    const bool uniform = is_infinite_t1(t1) || t_max_prime / t1 < 1e-12;
    const double growth = uniform ? 0.0 : std::expm1(t_max_prime / t1);
    for (int i = 0; i < n_t; ++i) {
        const double q = static_cast<double>(i) / static_cast<double>(n_t - 1);
        grid[static_cast<std::size_t>(i)] =
            uniform ? q * t_max_prime : t1 * std::log1p(q * growth);
    }
    grid.front() = 0.0;
    grid.back() = t_max_prime;
    return grid;
}

double sample_shaped_time(const ShapedTimeDensity& density, Rng& rng) {
    const std::size_t n_seg = density.grid.size() - 1;
    const double u = rng.uniform();
    double cum = 0.0;
    for (std::size_t k = 0; k < n_seg; ++k) {
        const double h = density.grid[k + 1] - density.grid[k];
        const double v0 = density.value[k];
        const double v1 = density.value[k + 1];
        const double area = 0.5 * (v0 + v1) * h;
        if (u < cum + area || k + 1 == n_seg) {
            const double r = std::clamp(u - cum, 0.0, area);
            // solve v0*s + (v1-v0)/2 * s^2 = r/h for s in [0,1]
            const double dv = v1 - v0;
            const double disc = std::sqrt(std::max(v0 * v0 + 2.0 * dv * (r / h), 0.0));
            const double denom = v0 + disc;
            const double s = denom > 0.0 ? std::min(2.0 * (r / h) / denom, 1.0) : 0.0;
            return density.grid[k] + s * h;
        }
        cum += area;
    }
    return density.grid.back();
}

}  // namespace qest
