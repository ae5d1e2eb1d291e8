#include "qest/inference.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace qest {

namespace {

constexpr double kSqrt3 = 1.7320508075688772935;
constexpr double kWeightSumFloor = 1e-300;

// Weight-proportional index lookup on a cumulative sum.
std::size_t cdf_pick(const std::vector<double>& cdf, double u) {
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u * cdf.back());
    const std::size_t idx = static_cast<std::size_t>(it - cdf.begin());
    return std::min(idx, cdf.size() - 1);
}

std::vector<double> cumulative_weights(const ParticleCloud& cloud) {
    std::vector<double> cdf(cloud.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        acc += cloud.weight[i];
        cdf[i] = acc;
    }
    return cdf;
}

}  // namespace

double PriorSpec::g_lo() const { return mu_g0 - kSqrt3 * sigma_g0; }
double PriorSpec::g_hi() const { return mu_g0 + kSqrt3 * sigma_g0; }
double PriorSpec::omega_lo() const { return mu_omega0 - kSqrt3 * sigma_omega0; }
double PriorSpec::omega_hi() const { return mu_omega0 + kSqrt3 * sigma_omega0; }

void PriorSpec::validate() const {
    if (!(sigma_g0 > 0.0) || !(sigma_omega0 > 0.0))
        throw std::invalid_argument("PriorSpec: sigmas must be > 0");
    if (!(g_lo() > 0.0))
        throw std::invalid_argument("PriorSpec: the g support must exclude g <= 0");
}

ParticleCloud init_cloud(const PriorSpec& prior, std::size_t n_particles, Rng& rng) {
    prior.validate();
    if (n_particles < 100)
        throw std::invalid_argument("init_cloud: need at least 100 particles");

    ParticleCloud cloud;
    cloud.g.resize(n_particles);
    cloud.omega.resize(n_particles);
    cloud.weight.assign(n_particles, 1.0 / static_cast<double>(n_particles));
    cloud.g_floor = 1e-6 * prior.mu_g0;
    for (std::size_t i = 0; i < n_particles; ++i) {
        cloud.g[i] = rng.uniform(prior.g_lo(), prior.g_hi());
        cloud.omega[i] = rng.uniform(prior.omega_lo(), prior.omega_hi());
    }
    return cloud;
}

UpdateResult bayes_update(ParticleCloud& cloud, const MeasurementSetting& setting, int d,
                          double presumed_t1, double p_e, const SmcOptions& opts, Rng& rng) {
    const std::size_t n = cloud.size();
    std::vector<double> reweighted(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w =
            cloud.weight[i] * batch_likelihood(d, setting, cloud.point(i), presumed_t1, p_e);
        reweighted[i] = w;
        sum += w;
    }
    if (!(sum > kWeightSumFloor))
        return UpdateResult::rejected;

    double sum_sq = 0.0;
    const double inv = 1.0 / sum;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = reweighted[i] * inv;
        cloud.weight[i] = w;
        sum_sq += w * w;
    }

    const double ess = 1.0 / sum_sq;
    if (ess < opts.ess_threshold * static_cast<double>(n)) {
        resample(cloud, opts.lw_shrink, rng);
        return UpdateResult::resampled;
    }
    return UpdateResult::applied;
}

void resample(ParticleCloud& cloud, double shrink, Rng& rng) {
    const std::size_t n = cloud.size();
    if (n == 0)
        throw std::invalid_argument("resample: empty cloud");
    const PosteriorStats st = stats(cloud);

    // weighted covariance, then the Liu-West perturbation term (1 - a^2) cov
    double cov_gw = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        cov_gw += cloud.weight[i] * (cloud.g[i] - st.mu_g) * (cloud.omega[i] - st.mu_omega);

    const double a = shrink;
    const double noise_scale = 1.0 - a * a;
    const double c_gg = noise_scale * st.sigma_g * st.sigma_g;
    const double c_ww = noise_scale * st.sigma_omega * st.sigma_omega;
    const double c_gw = noise_scale * cov_gw;

    // 2x2 Cholesky with a floor on the diagonal so a collapsed or degenerate
    // cloud still resamples (with vanishing noise in the flat direction)
    constexpr double kDiagFloor = 1e-300;
    const double l11 = std::sqrt(std::max(c_gg, kDiagFloor));
    const double l21 = c_gg > kDiagFloor ? c_gw / l11 : 0.0;
    const double l22 = std::sqrt(std::max(c_ww - l21 * l21, kDiagFloor));

    const std::vector<double> cdf = cumulative_weights(cloud);
    std::vector<double> new_g(n), new_omega(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = cdf_pick(cdf, rng.uniform());
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        double gi = a * cloud.g[j] + (1.0 - a) * st.mu_g + l11 * z1;
        const double wi = a * cloud.omega[j] + (1.0 - a) * st.mu_omega + l21 * z1 + l22 * z2;
        // reflect couplings off the positivity floor
        gi = cloud.g_floor + std::abs(gi - cloud.g_floor);
        new_g[i] = gi;
        new_omega[i] = wi;
    }
    cloud.g = std::move(new_g);
    cloud.omega = std::move(new_omega);
    std::fill(cloud.weight.begin(), cloud.weight.end(), 1.0 / static_cast<double>(n));
}

PosteriorStats stats(const ParticleCloud& cloud) {
    const std::size_t n = cloud.size();
    if (n == 0)
        throw std::invalid_argument("stats: empty cloud");
    PosteriorStats st;
    for (std::size_t i = 0; i < n; ++i) {
        st.mu_g += cloud.weight[i] * cloud.g[i];
        st.mu_omega += cloud.weight[i] * cloud.omega[i];
    }
    double var_g = 0.0, var_w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dg = cloud.g[i] - st.mu_g;
        const double dw = cloud.omega[i] - st.mu_omega;
        var_g += cloud.weight[i] * dg * dg;
        var_w += cloud.weight[i] * dw * dw;
    }
    st.sigma_g = std::sqrt(std::max(var_g, 0.0));
    st.sigma_omega = std::sqrt(std::max(var_w, 0.0));
    return st;
}

double sample_omega_marginal(const ParticleCloud& cloud, Rng& rng) {
    if (cloud.size() == 0)
        throw std::invalid_argument("sample_omega_marginal: empty cloud");
    const std::vector<double> cdf = cumulative_weights(cloud);
    return cloud.omega[cdf_pick(cdf, rng.uniform())];
}

void write_cloud_csv(const ParticleCloud& cloud, std::ostream& out) {
    out << "g,omega_r,weight\n";
    out.precision(17);
    for (std::size_t i = 0; i < cloud.size(); ++i)
        out << cloud.g[i] << ',' << cloud.omega[i] << ',' << cloud.weight[i] << '\n';
}

ParticleCloud read_cloud_csv(std::istream& in) {
    ParticleCloud cloud;
    std::string line;
    if (!std::getline(in, line) || line != "g,omega_r,weight")
        throw std::runtime_error("cloud CSV: bad header");
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::istringstream row(line);
        std::string cell;
        double vals[3];
        for (double& val : vals) {
            if (!std::getline(row, cell, ','))
                throw std::runtime_error("cloud CSV: short row");
            val = std::stod(cell);
        }
        cloud.g.push_back(vals[0]);
        cloud.omega.push_back(vals[1]);
        cloud.weight.push_back(vals[2]);
    }
    return cloud;
}

}  // namespace qest
