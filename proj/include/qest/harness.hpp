#ifndef QEST_HARNESS_HPP
#define QEST_HARNESS_HPP

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "qest/inference.hpp"
#include "qest/physics.hpp"
#include "qest/policies.hpp"
#include "qest/policy_store.hpp"

namespace qest {

// Everything needed to reproduce one ensemble run from its master seed.
// Times are in units of the coupling scale; 20 pi is the headline
// twenty-Rabi-cycle relaxation time.
struct EnsembleConfig {
    PriorSpec prior;
    std::string policy_id = "mach_u_20_2";
    double true_t1 = 62.831853071795864769;      // relaxation time of simulated systems
    double presumed_t1 = 62.831853071795864769;  // relaxation time the inference assumes
    double p_e = 0.0;
    long n_samples = 500;
    long shot_budget = 2000;
    long record_stride = 0;  // shots between recorded rows; 0 means one policy batch
    std::size_t n_particles = 1000;
    SmcOptions smc;
    std::uint64_t master_seed = 1;
    unsigned workers = 1;

    void validate() const;
};

// One recorded point of an episode. Estimates are the posterior means; the
// setting fields describe the batch that ended at this shot count.
struct TraceRow {
    long shot = 0;
    double sq_err_omega = 0.0;
    double sq_err_g = 0.0;
    double sigma_omega = 0.0;
    double sigma_g = 0.0;
    double t = 0.0;
    double omega_q = 0.0;
    int d = 0;
    long clicks = 0;
    bool rejected = false;  // the update for this batch underflowed and was skipped
};

struct EpisodeTrace {
    double g0 = 0.0;
    double omega_r0 = 0.0;
    long rejected_updates = 0;
    std::vector<TraceRow> rows;  // rows.front() is the prior point at shot 0
};

// Ensemble medians on a common shot grid. med_sq_omega and med_sq_g are
// normalized by the prior-estimator medians of the same ensemble, so both
// start at exactly 1; med_t is the raw median issued waiting time.
struct ErrorCurve {
    std::vector<long> shot;
    std::vector<double> med_sq_omega;
    std::vector<double> med_sq_g;
    std::vector<double> med_t;
    double prior_median_sq_omega = 0.0;  // the un-normalized normalizers
    double prior_median_sq_g = 0.0;
};

// g0 and omega_r0 are drawn from the same uniform box the inference starts
// from; the prior is all the simulation knows about plausible systems.
TrueSystem sample_true_system(const PriorSpec& prior, double true_t1, double p_e, Rng& rng);

// One estimation episode: the policy issues settings, the true system
// produces batch counts, the cloud is reweighted with the presumed t1.
// Rows are recorded every record_stride shots (default: every batch). The
// shot-0 row scores the analytic prior means, which is what normalizes the
// ensemble curve to 1 at shot 0. Rejected updates leave the cloud rolled
// back and the episode running. The final batch may overshoot the budget by
// up to m_r - 1 shots; rows record actual cumulative counts.
EpisodeTrace run_episode(const Policy& policy, const TrueSystem& truth,
                         const EnsembleConfig& cfg, Rng& rng);

// Resolves "man", "rand", or a machine-policy id from the store. When
// uniform_tail is set, machine policies draw capped-regime waiting times
// through an explicitly shaped flat density (the continuous-density code
// path) instead of the built-in uniform draw; same distribution either way.
std::unique_ptr<Policy> make_policy(const std::string& policy_id, const PolicyStore& store,
                                    double presumed_t1, bool uniform_tail = false);

// Runs cfg.n_samples independent episodes (concurrently when cfg.workers
// allows) and aggregates medians per recorded shot. Episode i draws its
// truth and randomness from a substream derived from (master_seed, i), so
// the result is identical for any worker count.
ErrorCurve normalized_median_curve(const EnsembleConfig& cfg, const Policy& policy);

// Same ensemble computation, named for its med_t column.
ErrorCurve waiting_time_curve(const EnsembleConfig& cfg, const Policy& policy);

// One curve per true relaxation time, all inferred with cfg.presumed_t1 and
// sharing cfg.master_seed (common random numbers across the family).
std::vector<ErrorCurve> mismatch_study(const EnsembleConfig& cfg, const Policy& policy,
                                       const std::vector<double>& true_t1_list);

// Ensemble median of (mu_omega0 - omega_r0)^2 under the prior-mean
// estimator, drawn with the same substream scheme as the curves. The
// analytic value for the uniform prior is 3 sigma_omega0^2 / 4.
double prior_median_sq_omega(const PriorSpec& prior, long n_samples, std::uint64_t master_seed);

// CSV with header "shot,median_sq_err_omega,median_sq_err_g,median_t".
void write_curve_csv(const ErrorCurve& curve, std::ostream& out);

// CSV with header
// "shot,sq_err_omega,sq_err_g,sigma_omega,sigma_g,t,omega_q,d,clicks,rejected".
void write_trace_csv(const EpisodeTrace& trace, std::ostream& out);

}  // namespace qest

#endif
