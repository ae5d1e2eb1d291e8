#ifndef QEST_INFERENCE_HPP
#define QEST_INFERENCE_HPP

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "qest/physics.hpp"
#include "qest/rng.hpp"

namespace qest {

enum class PriorShape { uniform };

// Uniform box prior over (g, omega_r), parameterized by mean and standard
// deviation per axis; the support half-width is sqrt(3) * sigma.
struct PriorSpec {
    double mu_g0 = 1.0;
    double sigma_g0 = 0.25;
    double mu_omega0 = 30.0;
    double sigma_omega0 = 2.0;
    PriorShape shape = PriorShape::uniform;

    double g_lo() const;
    double g_hi() const;
    double omega_lo() const;
    double omega_hi() const;

    // sigma_* > 0 and the g support strictly positive
    void validate() const;
};

// Weighted sample representation of the posterior over (g, omega_r).
// Stored column-wise; weight[i] belongs to (g[i], omega[i]).
struct ParticleCloud {
    std::vector<double> g;
    std::vector<double> omega;
    std::vector<double> weight;
    double g_floor = 1e-6;  // resampled couplings are reflected off this floor

    std::size_t size() const { return g.size(); }
    HypothesisPoint point(std::size_t i) const { return {g[i], omega[i]}; }
};

struct PosteriorStats {
    double mu_g = 0.0;
    double sigma_g = 0.0;
    double mu_omega = 0.0;
    double sigma_omega = 0.0;
};

struct SmcOptions {
    double ess_threshold = 0.5;  // resample when ESS < threshold * n; 0 disables
    double lw_shrink = 0.98;     // Liu-West shrinkage coefficient a
};

enum class UpdateResult {
    applied,    // reweighted, no resample needed
    resampled,  // reweighted and the cloud was refreshed
    rejected    // total weight underflowed; cloud left untouched
};

// i.i.d. draws from the prior box with equal weights 1/n.
ParticleCloud init_cloud(const PriorSpec& prior, std::size_t n_particles, Rng& rng);

// One Bayes step: multiply each weight by the batch likelihood of observing
// d ground-state shots, renormalize, and refresh the cloud when the
// effective sample size 1 / sum(w^2) drops below opts.ess_threshold * n.
// If the unnormalized weight sum underflows the update is rejected and the
// cloud is left exactly as it was.
UpdateResult bayes_update(ParticleCloud& cloud, const MeasurementSetting& setting, int d,
                          double presumed_t1, double p_e, const SmcOptions& opts, Rng& rng);

// Liu-West kernel refresh: draws equal-weight particles around
// a * x_j + (1 - a) * mean with perturbation covariance (1 - a^2) * cov,
// where x_j is chosen by weight. Keeps mean and covariance in expectation.
void resample(ParticleCloud& cloud, double shrink, Rng& rng);

// Weighted means and standard deviations of the two marginals.
PosteriorStats stats(const ParticleCloud& cloud);

// omega_r of a weight-proportionally sampled particle (a draw from the
// current omega_r marginal).
double sample_omega_marginal(const ParticleCloud& cloud, Rng& rng);

// Debug snapshot, CSV with header "g,omega_r,weight".
void write_cloud_csv(const ParticleCloud& cloud, std::ostream& out);
ParticleCloud read_cloud_csv(std::istream& in);

}  // namespace qest

#endif
