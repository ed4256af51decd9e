#include "deltak/theorems.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "deltak/error.hpp"
#include "deltak/rng.hpp"

namespace deltak {

void OrthogonalityExperiment::validate() const {
    if (trials < 1000) throw ConfigError("orthogonality: trials must be >= 1000");
    if (dims.empty()) throw ConfigError("orthogonality: no dims");
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (dims[i] < 1) throw ConfigError("orthogonality: dims must be >= 1");
        if (i > 0 && dims[i] <= dims[i - 1])
            throw ConfigError("orthogonality: dims must be strictly increasing");
    }
    if (!(epsilon >= 0.0)) throw ConfigError("orthogonality: epsilon must be >= 0");
    if (!std::isfinite(alpha)) throw ConfigError("orthogonality: alpha must be finite");
}

namespace {

void unit_sphere(SplitMix64& stream, std::vector<double>& v) {
    double norm2 = 0.0;
    do {
        norm2 = 0.0;
        for (double& x : v) {
            x = stream.next_gaussian();
            norm2 += x * x;
        }
    } while (norm2 == 0.0);
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
}

}  // namespace

TailReport mc_orthogonality(const OrthogonalityExperiment& exp) {
    exp.validate();
    TailReport report;
    report.dims = exp.dims;
    report.tails.reserve(exp.dims.size());

    for (std::size_t d : exp.dims) {
        std::vector<double> q(d), dk(d);
        std::size_t exceed = 0;
        for (std::size_t trial = 0; trial < exp.trials; ++trial) {
            SplitMix64 stream(mix_seed(exp.seed, kTagTrial, d * 1000003ULL + trial));
            unit_sphere(stream, q);
            unit_sphere(stream, dk);
            double dot = 0.0;
            for (std::size_t i = 0; i < d; ++i) dot += q[i] * dk[i];
            const double delta = exp.alpha / std::sqrt(static_cast<double>(d)) * dot;
            if (std::abs(delta) >= exp.epsilon) ++exceed;
        }
        report.tails.push_back(static_cast<double>(exceed) / static_cast<double>(exp.trials));
    }

    // least squares of ln(tail) on dim; dims with an exactly zero tail carry
    // no log value and are reported separately
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < report.dims.size(); ++i) {
        if (report.tails[i] > 0.0) {
            xs.push_back(static_cast<double>(report.dims[i]));
            ys.push_back(std::log(report.tails[i]));
        } else {
            report.zero_tail_dims.push_back(report.dims[i]);
        }
    }
    report.fit_points = xs.size();
    if (xs.size() >= 2) {
        const double n = static_cast<double>(xs.size());
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            mx += xs[i];
            my += ys[i];
        }
        mx /= n;
        my /= n;
        double sxx = 0.0, sxy = 0.0, syy = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double dx = xs[i] - mx;
            const double dy = ys[i] - my;
            sxx += dx * dx;
            sxy += dx * dy;
            syy += dy * dy;
        }
        report.slope = sxy / sxx;
        report.intercept = my - report.slope * mx;
        report.r_squared = (syy > 0.0) ? (sxy * sxy) / (sxx * syy) : 1.0;
        // ln tail ~ intercept - c * eps^2 / alpha^2 * d for unit-norm vectors
        if (exp.epsilon > 0.0 && exp.alpha != 0.0)
            report.fitted_c = -report.slope * exp.alpha * exp.alpha / (exp.epsilon * exp.epsilon);
    }
    return report;
}

double reweight_closed_form(double a_i, double delta_s) {
    if (!(a_i > 0.0) || !(a_i < 1.0))
        throw InputError("reweight_closed_form: mass must lie strictly in (0, 1)");
    const double boosted = a_i * std::exp(delta_s);
    return boosted / (boosted + (1.0 - a_i));
}

MassCheck verify_mass_concentration(std::span<const double> logits,
                                    const std::vector<int>& target, double delta_s) {
    if (target.empty()) throw InputError("mass_concentration: empty target set");
    if (!(delta_s > 0.0)) throw InputError("mass_concentration: delta_s must be > 0");
    std::set<int> tset;
    for (int i : target) {
        if (i < 0 || static_cast<std::size_t>(i) >= logits.size())
            throw InputError("mass_concentration: target index out of range");
        tset.insert(i);
    }
    if (tset.size() >= logits.size())
        throw InputError("mass_concentration: target must be a proper subset");

    auto mass = [&](bool shifted) {
        double max_logit = logits[0] + (shifted && tset.count(0) ? delta_s : 0.0);
        for (std::size_t i = 1; i < logits.size(); ++i) {
            const double s = logits[i] + (shifted && tset.count(static_cast<int>(i)) ? delta_s : 0.0);
            max_logit = std::max(max_logit, s);
        }
        double target_sum = 0.0, total = 0.0;
        for (std::size_t i = 0; i < logits.size(); ++i) {
            const double s = logits[i] + (shifted && tset.count(static_cast<int>(i)) ? delta_s : 0.0);
            const double e = std::exp(s - max_logit);
            total += e;
            if (tset.count(static_cast<int>(i))) target_sum += e;
        }
        return target_sum / total;
    };

    MassCheck check;
    check.before = mass(false);
    check.after = mass(true);
    check.closed_form = reweight_closed_form(check.before, delta_s);
    check.passed = check.after > check.before;
    return check;
}

MassSuiteReport run_mass_concentration_suite(std::size_t instances, std::uint64_t seed) {
    if (instances < 1) throw ConfigError("mass suite: instances must be >= 1");
    MassSuiteReport report;
    report.instances = instances;
    for (std::size_t i = 0; i < instances; ++i) {
        SplitMix64 stream(mix_seed(seed, kTagInstance, i));
        const std::size_t n = 2 + stream.next() % 31;  // N in [2, 32]
        std::vector<double> logits(n);
        for (double& v : logits) v = 4.0 * (stream.next_unit() - 0.5);
        const std::size_t target_size = 1 + stream.next() % (n - 1);  // proper subset
        std::vector<int> all(n);
        for (std::size_t k = 0; k < n; ++k) all[k] = static_cast<int>(k);
        // Fisher-Yates prefix
        for (std::size_t k = 0; k < target_size; ++k) {
            const std::size_t j = k + stream.next() % (n - k);
            std::swap(all[k], all[j]);
        }
        std::vector<int> target(all.begin(), all.begin() + static_cast<long>(target_size));
        double delta_s = 5.0 * stream.next_unit();
        if (delta_s == 0.0) delta_s = 5.0;  // (0, 5]
        const MassCheck check = verify_mass_concentration(logits, target, delta_s);
        if (!check.passed) ++report.failures;
        report.max_closed_form_gap =
            std::max(report.max_closed_form_gap, std::abs(check.after - check.closed_form));
    }
    return report;
}

}  // namespace deltak
