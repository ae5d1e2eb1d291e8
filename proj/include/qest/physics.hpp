#ifndef QEST_PHYSICS_HPP
#define QEST_PHYSICS_HPP

#include <limits>

#include "qest/rng.hpp"

namespace qest {

// Frequencies are in units of the nominal coupling scale (fixed to 1 by the
// toolkit), times in the inverse of that scale.

// Ground-truth parameters of one simulated sample.
struct TrueSystem {
    double g0;        // coupling strength, > 0
    double omega_r0;  // mode frequency, > 0
    double t1;        // qubit relaxation time, > 0, may be +infinity
    double p_e;       // per-shot readout flip probability, in [0, 0.5]

    TrueSystem(double g0_, double omega_r0_, double t1_, double p_e_);
};

// One control choice: the qubit is parked at omega_q, the excitation swaps
// for a waiting time t, and the shot is repeated m_r times at this setting.
struct MeasurementSetting {
    double omega_q = 0.0;
    double t = 0.0;
    int m_r = 1;
};

// A candidate (g, omega_r) pair the posterior is defined over.
struct HypothesisPoint {
    double g = 0.0;
    double omega_r = 0.0;
};

// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before entering
// likelihoods so a single batch cannot zero out the whole particle cloud.
inline constexpr double kProbClamp = 1e-12;

// Ground-state occupation probability after waiting time t, with the qubit
// relaxing on timescale t1. With detuning dw = omega_q - omega_r and Rabi
// frequency wR = sqrt(dw^2 + 4 g^2):
//
//   P(0) = 1 - ((wR+dw)/(2wR))^2 exp(-(wR+dw) t / (2 wR t1))
//            - ((wR-dw)/(2wR))^2 exp(-(wR-dw) t / (2 wR t1))
//            - (2 g^2 / wR^2) exp(-t / (2 t1)) cos(wR t)
//
// t1 = +infinity routes to ground_prob_coherent.
double ground_prob_relaxing(const MeasurementSetting& setting, const HypothesisPoint& hyp,
                            double t1);

// Relaxation-free limit: P(0) = (1 - (4g^2/wR^2) cos(wR t) - dw^2/wR^2) / 2.
double ground_prob_coherent(const MeasurementSetting& setting, const HypothesisPoint& hyp);

// Symmetric readout flip: reported-ground probability given the true
// ground-state probability.
double observed_click_prob(double p_ground, double p_e);

// Probability of observing d ground-state shots out of setting.m_r
// independent repeats. Shots are i.i.d.: the system is reset between shots.
double batch_likelihood(int d, const MeasurementSetting& setting, const HypothesisPoint& hyp,
                        double t1, double p_e);

// Forward-simulates one batch on the true system; returns the ground count.
int sample_batch(const TrueSystem& true_sys, const MeasurementSetting& setting, Rng& rng);

inline bool is_infinite_t1(double t1) { return t1 == std::numeric_limits<double>::infinity(); }

}  // namespace qest

#endif
