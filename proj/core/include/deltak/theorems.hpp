#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace deltak {

/// Monte Carlo setup for the logit-perturbation tail experiment. Query and
/// differential-key directions are drawn uniformly on the unit sphere per
/// dimension, which isolates the dimension dependence of the decay.
struct OrthogonalityExperiment {
    std::vector<std::size_t> dims{8, 16, 32, 64};
    double alpha = 1.0;
    double epsilon = 0.05;
    std::size_t trials = 100000;  // per dim, >= 1000
    std::uint64_t seed = 1;

    void validate() const;  // throws ConfigError
};

struct TailReport {
    std::vector<std::size_t> dims;
    std::vector<double> tails;  // empirical P(|delta| >= epsilon) per dim
    std::vector<std::size_t> zero_tail_dims;  // excluded from the log fit
    std::size_t fit_points = 0;
    double slope = 0.0;      // of ln(tail) vs dim
    double intercept = 0.0;
    double r_squared = 0.0;
    double fitted_c = 0.0;   // effective decay constant, -slope * alpha^2 / epsilon^2
};

/// Per trial: unit-sphere q and dk in dimension d, delta = (alpha/sqrt(d)) <q, dk>;
/// tallies the |delta| >= epsilon frequency per dim and least-squares fits
/// ln(tail) against d over dims with nonzero tail. Trials use per-index
/// derived seeds and accumulate in trial order.
TailReport mc_orthogonality(const OrthogonalityExperiment& exp);

/// Aggregate softmax mass after a uniform logit shift on the mass's own
/// logits: a * e^s / (a * e^s + 1 - a). Requires a in (0, 1).
double reweight_closed_form(double a_i, double delta_s);

struct MassCheck {
    bool passed = false;  // after > before, strictly
    double before = 0.0;
    double after = 0.0;
    double closed_form = 0.0;  // reweight_closed_form(before, delta_s)
};

/// Adds delta_s to the target logits only and compares the target's softmax
/// mass before/after, plus the closed-form cross-check. target must be a
/// non-empty proper subset and delta_s > 0.
MassCheck verify_mass_concentration(std::span<const double> logits,
                                    const std::vector<int>& target, double delta_s);

struct MassSuiteReport {
    std::size_t instances = 0;
    std::size_t failures = 0;           // strictness violations
    double max_closed_form_gap = 0.0;   // worst |after - closed_form|
    bool all_passed() const { return failures == 0; }
};

/// Random instances with N in [2, 32], delta_s in (0, 5], random logits and
/// target subsets. Every instance must pass strictly.
MassSuiteReport run_mass_concentration_suite(std::size_t instances, std::uint64_t seed);

}  // namespace deltak
