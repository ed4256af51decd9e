#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "deltak/denoiser.hpp"

namespace deltak {

struct MetricSeries {
    std::string label;
    std::vector<std::pair<std::size_t, double>> values;  // (step, value), steps increasing
};

struct EntropyReport {
    std::vector<std::pair<std::size_t, double>> per_step;  // H in nats, within [0, ln keys]
};

/// Population standard deviation over mean. The column is the whole
/// population of spatial positions, not a sample. Throws MetricError on an
/// empty column or non-positive mean.
double coefficient_of_variation(std::span<const double> column);

/// Spatial attention profile of a token set at one step: per query, the mean
/// over the selected layers (empty = all), heads and set members of the
/// attention paid to those tokens.
std::vector<double> token_spatial_profile(const AttentionTrace& trace,
                                          const std::vector<int>& tokens, std::size_t step,
                                          const std::vector<std::size_t>& layer_subset = {});

/// Mean attention the token set receives at one step, averaged over layers,
/// heads and queries.
double token_intensity(const AttentionTrace& trace, const std::vector<int>& tokens,
                       std::size_t step);

enum class ConceptLabel { present, missing };

/// Rank-based (Mann-Whitney) AUC with midrank ties for detecting "missing"
/// from a score. Low scores flag missing, so the negated score acts as the
/// detector: perfectly separated low-missing scores give 1.0.
double auc_roc(std::span<const double> scores, std::span<const ConceptLabel> labels);

/// Head-averaged entropy of the key-wise attention-mass distribution:
/// mass_n[k] = sum_q attn_n(q, k), P_n = mass_n normalized,
/// H = mean_n of -sum_k P_n[k] ln P_n[k], with 0 ln 0 = 0.
double stage_entropy(const std::vector<DenseMatrix>& head_maps);

}  // namespace deltak
