#ifndef QEST_PSO_HPP
#define QEST_PSO_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "qest/harness.hpp"
#include "qest/policies.hpp"
#include "qest/rng.hpp"

namespace qest {

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
};

// Swarm constants and search region. The defaults are the published training
// configuration; tests shrink n_pso and the fitness budget instead of
// touching the dynamics constants.
struct PsoConfig {
    int n_pso = 60;
    double beta1 = 0.5;  // attraction to the personal best
    double beta2 = 1.0;  // attraction to the ring-neighborhood best
    double w = 0.7;      // inertia weight
    std::vector<Interval> search_box;
    std::vector<double> v_max;  // empty: 0.25 * (hi - lo) per dimension
    int max_iters = 200;
    double tol_rel = 0.01;  // saturation threshold on best-fitness gain; <= 0 disables
    int window = 10;        // saturation lookback, iterations
    bool per_coordinate_xi = false;   // fresh xi per coordinate instead of per particle
    bool resample_incumbents = true;  // refresh every personal best each iteration
    std::uint64_t seed = 1;
    unsigned workers = 1;

    void validate() const;
};

// Positions live in search-box coordinates. The personal-best fitness is the
// running mean over every evaluation made while that position has been the
// incumbent; the count resets when a challenger replaces it.
struct SwarmParticle {
    std::vector<double> position;
    std::vector<double> velocity;
    std::vector<double> best_position;
    double best_fitness_sum = 0.0;
    long best_eval_count = 0;
    std::size_t last_neighbor = 0;  // ring argmax used in the most recent step

    double best_mean() const { return best_fitness_sum / static_cast<double>(best_eval_count); }
};

// One noisy fitness evaluation at a position; the seed fixes its randomness.
// Higher is better.
using FitnessFn = std::function<double(std::span<const double>, std::uint64_t)>;

// Called after each completed iteration (bests updated, step applied).
using PsoObserver = std::function<void(int iteration, const std::vector<SwarmParticle>& swarm)>;

struct PsoIterationStats {
    int iteration = 0;
    double best_fitness = 0.0;  // max over particles of the personal-best mean
    double mean_fitness = 0.0;  // swarm mean of the personal-best means
};

struct PsoResult {
    std::vector<double> best_position;
    double best_fitness = 0.0;
    bool saturated = false;  // false means the iteration budget ran out first
    std::vector<PsoIterationStats> trace;
};

// Index into {i-1, i, i+1} (mod swarm size) with the best personal-best mean;
// earlier ring position wins ties.
std::size_t neighborhood_best(const std::vector<SwarmParticle>& swarm, std::size_t i);

// v_max as used by pso_step: the configured vector, or the 0.25-span default.
std::vector<double> effective_v_max(const PsoConfig& cfg);

// One swarm update: v <- w v + beta1 xi1 (p_best - p) + beta2 xi2 (p_n - p),
// componentwise velocity clamp to +-v_max, then p <- p + v with positions
// clamped to the box (the offending velocity component is zeroed). xi1, xi2
// are fresh uniform draws per particle (per coordinate when configured),
// consumed in particle-index order.
void pso_step(std::vector<SwarmParticle>& swarm, const PsoConfig& cfg, Rng& rng);

// Full optimization loop: uniform initialization in the box with zero
// velocities, then per iteration refresh incumbents, evaluate positions,
// challenge personal bests, and step. Stops when the best personal-best mean
// gained less than tol_rel (relative) over the trailing window, or at
// max_iters with saturated = false. Every fitness call receives a seed
// derived from (seed, iteration, particle), so results do not depend on the
// worker count.
PsoResult pso_optimize(const PsoConfig& cfg, const FitnessFn& fitness,
                       const PsoObserver& observer = nullptr);

// CSV with header "iteration,best_fitness,mean_fitness".
void write_pso_trace_csv(const PsoResult& result, std::ostream& out);

// ---------------------------------------------------------------------------
// Fitness builders
// ---------------------------------------------------------------------------

// Deterministic sanity benchmark: -|p - optimum|^2, maximum 0 at the optimum.
FitnessFn make_sphere_fitness(std::vector<double> optimum);

// Trial configuration behind the policy fitness: K i.i.d. estimation trials,
// each running n_updates settings, scored by the final omega_r estimate.
struct FitnessSpec {
    long k_trials = 2000;
    long n_updates = 200;
    PriorSpec prior;
    double true_t1 = 62.831853071795864769;
    double presumed_t1 = 62.831853071795864769;
    double p_e = 0.0;
    std::size_t n_particles = 1000;
    SmcOptions smc;
    unsigned workers = 1;
};

// Negative median of (omega_r estimate - omega_r0)^2 over k_trials episodes;
// the shot budget is n_updates batches of the policy's repeat count.
double evaluate_policy_fitness(const Policy& policy, const FitnessSpec& spec,
                               std::uint64_t seed);

// The 8 coordinates (a, b, d, f, g_pol, t_max, D_th, C_0). Real coordinates
// pass through; the trailing two round to the nearest integer and clamp to
// [0, m_r] and [0, inf).
MachinePolicyParams decode_position(std::span<const double> position, int m_r = 10);

// a, b, d, f, g_pol in [0, 10]; t_max in [0.5 t1, 2 t1]; D_th in [0, m_r];
// C_0 in [0, 200]. Contains every shipped policy row.
std::vector<Interval> default_search_box(double t1, int m_r = 10);

// Fitness over machine-policy space: decode, then evaluate_policy_fitness.
FitnessFn make_machine_fitness(const FitnessSpec& spec, int m_r = 10);

}  // namespace qest

#endif
