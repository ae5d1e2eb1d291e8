#include "qest/physics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace qest {

namespace {

void check_hypothesis(const HypothesisPoint& hyp) {
    if (!(hyp.g > 0.0))
        throw std::domain_error("hypothesis coupling g must be > 0, got " +
                                std::to_string(hyp.g));
}

void check_setting(const MeasurementSetting& setting) {
    if (!(setting.t >= 0.0))
        throw std::domain_error("waiting time must be >= 0");
    if (setting.m_r < 1)
        throw std::domain_error("repeat count m_r must be >= 1");
}

// exact integer powers; exponents never exceed m_r
double powi(double base, int n) {
    double acc = 1.0;
    for (int i = 0; i < n; ++i)
        acc *= base;
    return acc;
}

double binomial_coefficient(int n, int k) {
    double acc = 1.0;
    k = std::min(k, n - k);
    for (int i = 1; i <= k; ++i)
        acc = acc * static_cast<double>(n - k + i) / static_cast<double>(i);
    return acc;
}

}  // namespace

TrueSystem::TrueSystem(double g0_, double omega_r0_, double t1_, double p_e_)
    : g0(g0_), omega_r0(omega_r0_), t1(t1_), p_e(p_e_) {
    if (!(g0 > 0.0))
        throw std::invalid_argument("TrueSystem: g0 must be > 0");
    if (!(omega_r0 > 0.0))
        throw std::invalid_argument("TrueSystem: omega_r0 must be > 0");
    if (!(t1 > 0.0))
        throw std::invalid_argument("TrueSystem: t1 must be > 0");
    if (!(p_e >= 0.0 && p_e <= 0.5))
        throw std::invalid_argument("TrueSystem: p_e must lie in [0, 0.5]");
}

double ground_prob_coherent(const MeasurementSetting& setting, const HypothesisPoint& hyp) {
    check_setting(setting);
    check_hypothesis(hyp);
    const double dw = setting.omega_q - hyp.omega_r;
    const double wr2 = dw * dw + 4.0 * hyp.g * hyp.g;
    const double wr = std::sqrt(wr2);
    const double p =
        0.5 * (1.0 - (4.0 * hyp.g * hyp.g / wr2) * std::cos(wr * setting.t) - dw * dw / wr2);
    return std::clamp(p, 0.0, 1.0);
}

double ground_prob_relaxing(const MeasurementSetting& setting, const HypothesisPoint& hyp,
                            double t1) {
    if (is_infinite_t1(t1))
        return ground_prob_coherent(setting, hyp);
    if (!(t1 > 0.0))
        throw std::domain_error("relaxation time t1 must be > 0");
    check_setting(setting);
    check_hypothesis(hyp);

    const double dw = setting.omega_q - hyp.omega_r;
    const double g2 = hyp.g * hyp.g;
    const double wr2 = dw * dw + 4.0 * g2;
    const double wr = std::sqrt(wr2);
    const double t = setting.t;

    // wr >= |dw|, so both combined exponents are <= 0 and neither envelope
    // can overflow (splitting off exp(-t/(2 t1)) would produce 0 * inf for
    // strongly detuned, long-waited, fast-relaxing corners).
    const double e_plus = std::exp(-0.5 * (wr + dw) * t / (wr * t1));
    const double e_minus = std::exp(-0.5 * (wr - dw) * t / (wr * t1));
    const double e_mid = std::exp(-0.5 * t / t1);
    const double amp_plus = (wr + dw) / (2.0 * wr);
    const double amp_minus = (wr - dw) / (2.0 * wr);

    const double p = 1.0 - amp_plus * amp_plus * e_plus - amp_minus * amp_minus * e_minus -
                     (2.0 * g2 / wr2) * e_mid * std::cos(wr * t);
    return std::clamp(p, 0.0, 1.0);
}

double observed_click_prob(double p_ground, double p_e) {
    if (!(p_ground >= 0.0 && p_ground <= 1.0))
        throw std::domain_error("p_ground must lie in [0, 1]");
    if (!(p_e >= 0.0 && p_e <= 1.0))
        throw std::domain_error("p_e must lie in [0, 1]");
    return p_ground * (1.0 - p_e) + (1.0 - p_ground) * p_e;
}

double batch_likelihood(int d, const MeasurementSetting& setting, const HypothesisPoint& hyp,
                        double t1, double p_e) {
    if (d < 0 || d > setting.m_r)
        throw std::domain_error("ground count d outside [0, m_r]");
    const double p_ground = ground_prob_relaxing(setting, hyp, t1);
    const double p_raw = observed_click_prob(p_ground, p_e);
    const double p = std::clamp(p_raw, kProbClamp, 1.0 - kProbClamp);
    return binomial_coefficient(setting.m_r, d) * powi(p, d) * powi(1.0 - p, setting.m_r - d);
}

int sample_batch(const TrueSystem& true_sys, const MeasurementSetting& setting, Rng& rng) {
    const HypothesisPoint truth{true_sys.g0, true_sys.omega_r0};
    const double p_ground = ground_prob_relaxing(setting, truth, true_sys.t1);
    // no clamping on the simulation side; p = 0 and p = 1 stay exact
    const double p = observed_click_prob(p_ground, true_sys.p_e);
    return rng.binomial(setting.m_r, p);
}

}  // namespace qest
