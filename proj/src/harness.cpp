#include "qest/harness.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "qest/parallel.hpp"

namespace qest {

namespace {

// substream tag separating episode streams from any future derivations
constexpr std::uint64_t kEpisodeStream = 1;

double sq(double x) { return x * x; }

double median_of(std::vector<double> v) {
    const std::size_t n = v.size();
    std::sort(v.begin(), v.end());
    if (n % 2 == 1)
        return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

void EnsembleConfig::validate() const {
    prior.validate();
    if (n_samples < 1)
        throw std::invalid_argument("EnsembleConfig: n_samples must be >= 1");
    if (shot_budget < 1)
        throw std::invalid_argument("EnsembleConfig: shot_budget must be >= 1");
    if (record_stride < 0)
        throw std::invalid_argument("EnsembleConfig: record_stride must be >= 0");
    if (!(true_t1 > 0.0))
        throw std::invalid_argument("EnsembleConfig: true_t1 must be > 0");
    if (!(presumed_t1 > 0.0))
        throw std::invalid_argument("EnsembleConfig: presumed_t1 must be > 0");
    if (p_e < 0.0 || p_e > 0.5)
        throw std::invalid_argument("EnsembleConfig: p_e must be in [0, 0.5]");
    if (n_particles < 100)
        throw std::invalid_argument("EnsembleConfig: n_particles must be >= 100");
    if (prior.omega_lo() <= 0.0)
        throw std::invalid_argument(
            "EnsembleConfig: prior omega support must be positive to sample true systems");
}

TrueSystem sample_true_system(const PriorSpec& prior, double true_t1, double p_e, Rng& rng) {
    const double g0 = rng.uniform(prior.g_lo(), prior.g_hi());
    const double omega_r0 = rng.uniform(prior.omega_lo(), prior.omega_hi());
    return TrueSystem(g0, omega_r0, true_t1, p_e);
}

EpisodeTrace run_episode(const Policy& policy, const TrueSystem& truth,
                         const EnsembleConfig& cfg, Rng& rng) {
    cfg.validate();

    EpisodeTrace trace;
    trace.g0 = truth.g0;
    trace.omega_r0 = truth.omega_r0;

    ParticleCloud cloud = init_cloud(cfg.prior, cfg.n_particles, rng);
    PolicyState state;
    const long stride = cfg.record_stride > 0 ? cfg.record_stride : policy.repeats();

    TraceRow prior_row;
    prior_row.sq_err_omega = sq(cfg.prior.mu_omega0 - truth.omega_r0);
    prior_row.sq_err_g = sq(cfg.prior.mu_g0 - truth.g0);
    prior_row.sigma_omega = cfg.prior.sigma_omega0;
    prior_row.sigma_g = cfg.prior.sigma_g0;
    trace.rows.push_back(prior_row);

    PosteriorStats now = stats(cloud);
    long shots_done = 0;
    while (shots_done < cfg.shot_budget) {
        const MeasurementSetting setting = policy.next(now, state, cloud, rng);
        const int d = sample_batch(truth, setting, rng);
        const UpdateResult result =
            bayes_update(cloud, setting, d, cfg.presumed_t1, cfg.p_e, cfg.smc, rng);
        register_batch(state, d, policy.click_threshold());
        shots_done += setting.m_r;
        now = stats(cloud);
        if (result == UpdateResult::rejected)
            ++trace.rejected_updates;
        if (shots_done % stride == 0 || shots_done >= cfg.shot_budget) {
            TraceRow row;
            row.shot = shots_done;
            row.sq_err_omega = sq(now.mu_omega - truth.omega_r0);
            row.sq_err_g = sq(now.mu_g - truth.g0);
            row.sigma_omega = now.sigma_omega;
            row.sigma_g = now.sigma_g;
            row.t = setting.t;
            row.omega_q = setting.omega_q;
            row.d = d;
            row.clicks = state.clicks;
            row.rejected = result == UpdateResult::rejected;
            trace.rows.push_back(row);
        }
    }
    return trace;
}

std::unique_ptr<Policy> make_policy(const std::string& policy_id, const PolicyStore& store,
                                    double presumed_t1, bool uniform_tail) {
    if (policy_id == "man")
        return std::make_unique<ManualPolicy>();
    if (policy_id == "rand")
        return std::make_unique<RandomTimePolicy>(presumed_t1);
    const PolicyRecord& rec = store.get(policy_id);
    std::optional<ShapedTimeDensity> tail;
    if (uniform_tail) {
        std::vector<double> grid = build_time_grid(16, presumed_t1, rec.params.t_max);
        tail = make_shaped_density(std::move(grid), std::vector<double>(16, 1.0));
    }
    return std::make_unique<MachinePolicy>(rec.params, std::move(tail));
}

ErrorCurve normalized_median_curve(const EnsembleConfig& cfg, const Policy& policy) {
    cfg.validate();

    std::vector<EpisodeTrace> traces(static_cast<std::size_t>(cfg.n_samples));
    parallel_for(traces.size(), cfg.workers, [&](std::size_t i) {
        Rng rng(derive_seed(cfg.master_seed, kEpisodeStream, i));
        const TrueSystem truth = sample_true_system(cfg.prior, cfg.true_t1, cfg.p_e, rng);
        traces[i] = run_episode(policy, truth, cfg, rng);
    });

    const std::size_t n_rows = traces.front().rows.size();
    for (const EpisodeTrace& trace : traces)
        if (trace.rows.size() != n_rows)
            throw std::logic_error("normalized_median_curve: episodes disagree on the shot grid");

    ErrorCurve curve;
    curve.shot.resize(n_rows);
    curve.med_sq_omega.resize(n_rows);
    curve.med_sq_g.resize(n_rows);
    curve.med_t.resize(n_rows);

    std::vector<double> buf(traces.size());
    for (std::size_t r = 0; r < n_rows; ++r) {
        curve.shot[r] = traces.front().rows[r].shot;
        for (std::size_t i = 0; i < traces.size(); ++i)
            buf[i] = traces[i].rows[r].sq_err_omega;
        curve.med_sq_omega[r] = median_of(buf);
        for (std::size_t i = 0; i < traces.size(); ++i)
            buf[i] = traces[i].rows[r].sq_err_g;
        curve.med_sq_g[r] = median_of(buf);
        for (std::size_t i = 0; i < traces.size(); ++i)
            buf[i] = traces[i].rows[r].t;
        curve.med_t[r] = median_of(buf);
    }

    curve.prior_median_sq_omega = curve.med_sq_omega.front();
    curve.prior_median_sq_g = curve.med_sq_g.front();
    if (curve.prior_median_sq_omega <= 0.0 || curve.prior_median_sq_g <= 0.0)
        throw std::logic_error("normalized_median_curve: degenerate prior-error normalizer");
    for (std::size_t r = 0; r < n_rows; ++r) {
        curve.med_sq_omega[r] /= curve.prior_median_sq_omega;
        curve.med_sq_g[r] /= curve.prior_median_sq_g;
    }
    return curve;
}

ErrorCurve waiting_time_curve(const EnsembleConfig& cfg, const Policy& policy) {
    return normalized_median_curve(cfg, policy);
}

std::vector<ErrorCurve> mismatch_study(const EnsembleConfig& cfg, const Policy& policy,
                                       const std::vector<double>& true_t1_list) {
    std::vector<ErrorCurve> curves;
    curves.reserve(true_t1_list.size());
    for (double t1 : true_t1_list) {
        EnsembleConfig variant = cfg;
        variant.true_t1 = t1;
        curves.push_back(normalized_median_curve(variant, policy));
    }
    return curves;
}

double prior_median_sq_omega(const PriorSpec& prior, long n_samples, std::uint64_t master_seed) {
    prior.validate();
    if (n_samples < 1)
        throw std::invalid_argument("prior_median_sq_omega: n_samples must be >= 1");
    std::vector<double> errs(static_cast<std::size_t>(n_samples));
    for (std::size_t i = 0; i < errs.size(); ++i) {
        Rng rng(derive_seed(master_seed, kEpisodeStream, i));
        const TrueSystem truth = sample_true_system(prior, 1.0, 0.0, rng);
        errs[i] = sq(prior.mu_omega0 - truth.omega_r0);
    }
    return median_of(std::move(errs));
}

void write_curve_csv(const ErrorCurve& curve, std::ostream& out) {
    out << "shot,median_sq_err_omega,median_sq_err_g,median_t\n";
    for (std::size_t r = 0; r < curve.shot.size(); ++r)
        out << curve.shot[r] << ',' << format_double(curve.med_sq_omega[r]) << ','
            << format_double(curve.med_sq_g[r]) << ',' << format_double(curve.med_t[r]) << '\n';
}

void write_trace_csv(const EpisodeTrace& trace, std::ostream& out) {
    out << "shot,sq_err_omega,sq_err_g,sigma_omega,sigma_g,t,omega_q,d,clicks,rejected\n";
    for (const TraceRow& row : trace.rows)
        out << row.shot << ',' << format_double(row.sq_err_omega) << ','
            << format_double(row.sq_err_g) << ',' << format_double(row.sigma_omega) << ','
            << format_double(row.sigma_g) << ',' << format_double(row.t) << ','
            << format_double(row.omega_q) << ',' << row.d << ',' << row.clicks << ','
            << (row.rejected ? 1 : 0) << '\n';
}

}  // namespace qest
