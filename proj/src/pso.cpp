#include "qest/pso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "qest/parallel.hpp"

namespace qest {

namespace {

// substream tags: initialization, step draws, position evals, incumbent evals
constexpr std::uint64_t kInitStream = 10;
constexpr std::uint64_t kStepStream = 11;
constexpr std::uint64_t kEvalStream = 12;
constexpr std::uint64_t kIncumbentStream = 13;

std::size_t best_particle(const std::vector<SwarmParticle>& swarm) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < swarm.size(); ++i)
        if (swarm[i].best_mean() > swarm[best].best_mean())
            best = i;
    return best;
}

}  // namespace

void PsoConfig::validate() const {
    if (n_pso < 2)
        throw std::invalid_argument("PsoConfig: n_pso must be >= 2");
    if (beta1 < 0.0 || beta2 < 0.0)
        throw std::invalid_argument("PsoConfig: attraction constants must be >= 0");
    if (w < 0.0 || w >= 1.0)
        throw std::invalid_argument("PsoConfig: inertia weight must be in [0, 1)");
    if (search_box.empty())
        throw std::invalid_argument("PsoConfig: search_box must be non-empty");
    for (const Interval& dim : search_box)
        if (!(dim.lo < dim.hi))
            throw std::invalid_argument("PsoConfig: each search_box interval needs lo < hi");
    if (!v_max.empty()) {
        if (v_max.size() != search_box.size())
            throw std::invalid_argument("PsoConfig: v_max dimension mismatch");
        for (double v : v_max)
            if (!(v > 0.0))
                throw std::invalid_argument("PsoConfig: v_max must be > 0 componentwise");
    }
    if (max_iters < 1)
        throw std::invalid_argument("PsoConfig: max_iters must be >= 1");
    if (window < 1)
        throw std::invalid_argument("PsoConfig: window must be >= 1");
}

std::size_t neighborhood_best(const std::vector<SwarmParticle>& swarm, std::size_t i) {
    const std::size_t n = swarm.size();
    const std::size_t ring[3] = {(i + n - 1) % n, i, (i + 1) % n};
    std::size_t best = ring[0];
    for (std::size_t k = 1; k < 3; ++k)
        if (swarm[ring[k]].best_mean() > swarm[best].best_mean())
            best = ring[k];
    return best;
}

std::vector<double> effective_v_max(const PsoConfig& cfg) {
    if (!cfg.v_max.empty())
        return cfg.v_max;
    std::vector<double> v(cfg.search_box.size());
    for (std::size_t k = 0; k < v.size(); ++k)
        v[k] = 0.25 * (cfg.search_box[k].hi - cfg.search_box[k].lo);
    return v;
}

void pso_step(std::vector<SwarmParticle>& swarm, const PsoConfig& cfg, Rng& rng) {
    const std::vector<double> v_max = effective_v_max(cfg);
    const std::size_t dim = cfg.search_box.size();
    for (std::size_t i = 0; i < swarm.size(); ++i) {
        SwarmParticle& particle = swarm[i];
        const std::size_t n_idx = neighborhood_best(swarm, i);
        particle.last_neighbor = n_idx;
        const std::vector<double>& p_n = swarm[n_idx].best_position;

        double xi1 = 0.0;
        double xi2 = 0.0;
        if (!cfg.per_coordinate_xi) {
            xi1 = rng.uniform();
            xi2 = rng.uniform();
        }
        for (std::size_t k = 0; k < dim; ++k) {
            if (cfg.per_coordinate_xi) {
                xi1 = rng.uniform();
                xi2 = rng.uniform();
            }
            double v = cfg.w * particle.velocity[k] +
                       cfg.beta1 * xi1 * (particle.best_position[k] - particle.position[k]) +
                       cfg.beta2 * xi2 * (p_n[k] - particle.position[k]);
            v = std::clamp(v, -v_max[k], v_max[k]);
            double p = particle.position[k] + v;
            if (p < cfg.search_box[k].lo) {
                p = cfg.search_box[k].lo;
                v = 0.0;
            } else if (p > cfg.search_box[k].hi) {
                p = cfg.search_box[k].hi;
                v = 0.0;
            }
            particle.velocity[k] = v;
            particle.position[k] = p;
        }
    }
}

PsoResult pso_optimize(const PsoConfig& cfg, const FitnessFn& fitness,
                       const PsoObserver& observer) {
    cfg.validate();
    if (!fitness)
        throw std::invalid_argument("pso_optimize: fitness function required");

    const std::size_t dim = cfg.search_box.size();
    const std::size_t n = static_cast<std::size_t>(cfg.n_pso);

    std::vector<SwarmParticle> swarm(n);
    Rng init_rng(derive_seed(cfg.seed, kInitStream));
    for (SwarmParticle& particle : swarm) {
        particle.position.resize(dim);
        particle.velocity.assign(dim, 0.0);
        for (std::size_t k = 0; k < dim; ++k)
            particle.position[k] = init_rng.uniform(cfg.search_box[k].lo, cfg.search_box[k].hi);
    }

    Rng step_rng(derive_seed(cfg.seed, kStepStream));
    PsoResult result;
    result.trace.reserve(static_cast<std::size_t>(cfg.max_iters));

    std::vector<double> position_fitness(n);
    std::vector<double> incumbent_fitness(n);
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        const bool refresh = cfg.resample_incumbents && iter > 0;
        parallel_for(n, cfg.workers, [&](std::size_t i) {
            if (refresh)
                incumbent_fitness[i] =
                    fitness(swarm[i].best_position,
                            derive_seed(cfg.seed, kIncumbentStream,
                                        static_cast<std::uint64_t>(iter), i));
            position_fitness[i] = fitness(
                swarm[i].position,
                derive_seed(cfg.seed, kEvalStream, static_cast<std::uint64_t>(iter), i));
        });

        for (std::size_t i = 0; i < n; ++i) {
            SwarmParticle& particle = swarm[i];
            if (iter == 0) {
                particle.best_position = particle.position;
                particle.best_fitness_sum = position_fitness[i];
                particle.best_eval_count = 1;
                continue;
            }
            if (refresh) {
                particle.best_fitness_sum += incumbent_fitness[i];
                particle.best_eval_count += 1;
            }
            if (position_fitness[i] > particle.best_mean()) {
                particle.best_position = particle.position;
                particle.best_fitness_sum = position_fitness[i];
                particle.best_eval_count = 1;
            }
        }

        PsoIterationStats row;
        row.iteration = iter;
        row.best_fitness = swarm[best_particle(swarm)].best_mean();
        double sum = 0.0;
        for (const SwarmParticle& particle : swarm)
            sum += particle.best_mean();
        row.mean_fitness = sum / static_cast<double>(n);
        result.trace.push_back(row);

        if (cfg.tol_rel > 0.0 && iter >= cfg.window) {
            const double now = result.trace[static_cast<std::size_t>(iter)].best_fitness;
            const double then =
                result.trace[static_cast<std::size_t>(iter - cfg.window)].best_fitness;
            const double scale = std::abs(then);
            const double gain = now - then;
            if (scale == 0.0 || gain < cfg.tol_rel * scale) {
                result.saturated = true;
                break;
            }
        }

        pso_step(swarm, cfg, step_rng);
        if (observer)
            observer(iter, swarm);
    }

    const std::size_t best = best_particle(swarm);
    result.best_position = swarm[best].best_position;
    result.best_fitness = swarm[best].best_mean();
    return result;
}

void write_pso_trace_csv(const PsoResult& result, std::ostream& out) {
    out << "iteration,best_fitness,mean_fitness\n";
    for (const PsoIterationStats& row : result.trace)
        out << row.iteration << ',' << format_double(row.best_fitness) << ','
            << format_double(row.mean_fitness) << '\n';
}

FitnessFn make_sphere_fitness(std::vector<double> optimum) {
    return [optimum = std::move(optimum)](std::span<const double> position, std::uint64_t) {
        if (position.size() != optimum.size())
            throw std::invalid_argument("sphere fitness: dimension mismatch");
        double sum = 0.0;
        for (std::size_t k = 0; k < optimum.size(); ++k) {
            const double delta = position[k] - optimum[k];
            sum += delta * delta;
        }
        return -sum;
    };
}

double evaluate_policy_fitness(const Policy& policy, const FitnessSpec& spec,
                               std::uint64_t seed) {
    EnsembleConfig cfg;
    cfg.prior = spec.prior;
    cfg.true_t1 = spec.true_t1;
    cfg.presumed_t1 = spec.presumed_t1;
    cfg.p_e = spec.p_e;
    cfg.n_samples = spec.k_trials;
    cfg.shot_budget = spec.n_updates * policy.repeats();
    cfg.record_stride = cfg.shot_budget;  // prior row and final row only
    cfg.n_particles = spec.n_particles;
    cfg.smc = spec.smc;
    cfg.master_seed = seed;
    cfg.workers = spec.workers;
    const ErrorCurve curve = normalized_median_curve(cfg, policy);
    return -(curve.med_sq_omega.back() * curve.prior_median_sq_omega);
}

MachinePolicyParams decode_position(std::span<const double> position, int m_r) {
    if (position.size() != 8)
        throw std::invalid_argument("decode_position: expected 8 coordinates");
    MachinePolicyParams params;
    params.a = position[0];
    params.b = position[1];
    params.d = position[2];
    params.f = position[3];
    params.g_pol = position[4];
    params.t_max = position[5];
    params.d_th = std::clamp(static_cast<int>(std::lround(position[6])), 0, m_r);
    params.c0 = std::max(static_cast<int>(std::lround(position[7])), 0);
    return params;
}

std::vector<Interval> default_search_box(double t1, int m_r) {
    if (!(t1 > 0.0) || is_infinite_t1(t1))
        throw std::invalid_argument("default_search_box: t1 must be finite and > 0");
    std::vector<Interval> box(8);
    for (std::size_t k = 0; k < 5; ++k)
        box[k] = {0.0, 10.0};
    box[5] = {0.5 * t1, 2.0 * t1};
    box[6] = {0.0, static_cast<double>(m_r)};
    box[7] = {0.0, 200.0};
    return box;
}

FitnessFn make_machine_fitness(const FitnessSpec& spec, int m_r) {
    return [spec, m_r](std::span<const double> position, std::uint64_t seed) {
        MachinePolicyParams params;
        try {
            params = decode_position(position, m_r);
            params.validate(m_r);
        } catch (const std::exception&) {
            return -std::numeric_limits<double>::infinity();
        }
        const MachinePolicy policy(params, std::nullopt, m_r);
        return evaluate_policy_fitness(policy, spec, seed);
    };
}

}  // namespace qest
