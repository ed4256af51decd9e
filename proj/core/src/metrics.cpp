#include "deltak/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "deltak/error.hpp"

namespace deltak {

double coefficient_of_variation(std::span<const double> column) {
    if (column.empty()) throw MetricError("coefficient_of_variation: empty column");
    const double n = static_cast<double>(column.size());
    double mean = 0.0;
    for (double v : column) mean += v;
    mean /= n;
    if (!(mean > 0.0)) throw MetricError("coefficient_of_variation: non-positive mean");
    double ss = 0.0;
    for (double v : column) {
        const double d = v - mean;
        ss += d * d;
    }
    return std::sqrt(ss / n) / mean;
}

std::vector<double> token_spatial_profile(const AttentionTrace& trace,
                                          const std::vector<int>& tokens, std::size_t step,
                                          const std::vector<std::size_t>& layer_subset) {
    if (step < 1 || step > trace.steps) throw InputError("token_spatial_profile: step out of range");
    if (tokens.empty()) throw InputError("token_spatial_profile: empty token set");
    std::vector<std::size_t> layers = layer_subset;
    if (layers.empty()) {
        layers.resize(trace.layers);
        std::iota(layers.begin(), layers.end(), 0);
    }
    std::vector<double> profile(trace.queries, 0.0);
    std::size_t terms = 0;
    for (std::size_t l : layers) {
        if (l >= trace.layers) throw InputError("token_spatial_profile: layer out of range");
        for (std::size_t h = 0; h < trace.heads; ++h) {
            const DenseMatrix& m = trace.map_at(step, l, h);
            for (int tok : tokens) {
                if (tok < 0 || static_cast<std::size_t>(tok) >= trace.keys)
                    throw InputError("token_spatial_profile: token index out of range");
                for (std::size_t q = 0; q < trace.queries; ++q)
                    profile[q] += m(q, static_cast<std::size_t>(tok));
            }
            terms += tokens.size();
        }
    }
    for (double& v : profile) v /= static_cast<double>(terms);
    return profile;
}

double token_intensity(const AttentionTrace& trace, const std::vector<int>& tokens,
                       std::size_t step) {
    const auto profile = token_spatial_profile(trace, tokens, step);
    double sum = 0.0;
    for (double v : profile) sum += v;
    return sum / static_cast<double>(profile.size());
}

double auc_roc(std::span<const double> scores, std::span<const ConceptLabel> labels) {
    if (scores.size() != labels.size()) throw DimensionError("auc_roc: size mismatch");
    std::size_t n_missing = 0, n_present = 0;
    for (ConceptLabel l : labels) (l == ConceptLabel::missing ? n_missing : n_present)++;
    if (n_missing == 0 || n_present == 0) throw MetricError("auc_roc: single-class input");

    // midranks of the scores, ascending
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(scores.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mid = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }

    double rank_sum_missing = 0.0;
    for (std::size_t k = 0; k < labels.size(); ++k)
        if (labels[k] == ConceptLabel::missing) rank_sum_missing += rank[k];

    const double nm = static_cast<double>(n_missing);
    const double np = static_cast<double>(n_present);
    // U counts missing-above-present pairs; the detector is the negated score
    const double u_missing = rank_sum_missing - nm * (nm + 1.0) / 2.0;
    return 1.0 - u_missing / (nm * np);
}

double stage_entropy(const std::vector<DenseMatrix>& head_maps) {
    if (head_maps.empty()) throw InputError("stage_entropy: no heads");
    double h_sum = 0.0;
    for (const DenseMatrix& m : head_maps) {
        if (m.rows() == 0 || m.cols() == 0) throw DimensionError("stage_entropy: empty map");
        std::vector<double> mass(m.cols(), 0.0);
        double total = 0.0;
        for (std::size_t q = 0; q < m.rows(); ++q)
            for (std::size_t k = 0; k < m.cols(); ++k) {
                mass[k] += m(q, k);
                total += m(q, k);
            }
        double h = 0.0;
        for (double mk : mass) {
            const double p = mk / total;
            if (p > 0.0) h -= p * std::log(p);
        }
        h_sum += h;
    }
    return h_sum / static_cast<double>(head_maps.size());
}

}  // namespace deltak
