#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rmd/json_io.hpp"

namespace rmd {

// Row-major feature rows for evaluation: motion features, optionally paired
// text features (same row count) and per-row prompt group ids.
struct FeatureSet {
    int dim = 0;
    std::vector<double> motion;              // rows x dim
    std::vector<double> text;                // rows x dim, or empty
    std::vector<std::string> group_ids;      // rows entries, or empty

    int rows() const { return dim == 0 ? 0 : static_cast<int>(motion.size()) / dim; }
    bool paired() const { return !text.empty(); }
    const double* motion_row(int i) const { return motion.data() + static_cast<std::size_t>(i) * dim; }
    const double* text_row(int i) const { return text.data() + static_cast<std::size_t>(i) * dim; }

    void validate() const;

    // {"dim", "rows": [[..]], "paired_text_rows": [[..]]?, "group_ids": [..]?}
    static FeatureSet load(const std::string& path);
    void save(const std::string& path) const;
};

// Fraction of motions whose own text ranks within the top k by Euclidean
// distance inside a seeded batch of batch_size rows. Batches are disjoint;
// a trailing partial batch is dropped.
double r_precision(const FeatureSet& features, int k, int batch_size, std::uint64_t seed);

// Symmetric PSD square root via eigendecomposition. Asymmetry beyond 1e-8 or
// eigenvalues below -1e-8 raise; small negative eigenvalues clip to zero.
// Matrices are dim x dim row-major.
std::vector<double> matrix_sqrt_psd(const std::vector<double>& a, int dim);

// Frechet distance between Gaussians fitted to the two row sets:
// ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}).
double fid(const std::vector<double>& rows_a, const std::vector<double>& rows_b, int dim);

// Same, from precomputed moments (mean + row-major covariance).
double fid_from_moments(const std::vector<double>& mean_a, const std::vector<double>& cov_a,
                        const std::vector<double>& mean_b, const std::vector<double>& cov_b,
                        int dim);

// Mean distance over n_pairs row pairs, each side drawn from its own seeded
// repeated-shuffle stream (reduces to one shuffle's prefix when rows >=
// n_pairs).
double diversity(const FeatureSet& features, int n_pairs, std::uint64_t seed);

// Within-group spread: per group, n_per_group elementwise pairs from two
// independent streams, averaged; then the mean over groups (sorted by id).
double multimodality(const FeatureSet& features, int n_per_group, std::uint64_t seed);

// Mean Euclidean distance between each motion row and its paired text row.
double mm_dist(const FeatureSet& features);

struct MetricValue {
    double value = 0.0;
    double ci95 = 0.0;  // 1.96 * std / sqrt(reps); 0 for deterministic metrics
};

struct MetricsConfig {
    int batch_size = 32;
    int n_pairs = 300;
    int n_per_group = 10;
    int reps = 20;  // seeded repetitions behind each confidence interval
    std::uint64_t seed = 0;
};

// The Table-1 style column set. Metrics whose inputs are missing (no paired
// text, no groups, no reference set) stay unset.
struct MetricReport {
    std::optional<MetricValue> top1, top2, top3;
    std::optional<MetricValue> fid;
    std::optional<MetricValue> mm_dist;
    std::optional<MetricValue> diversity;
    std::optional<MetricValue> multimodality;

    json to_json() const;
};

MetricReport evaluate(const FeatureSet& generated, const FeatureSet* reference,
                      const MetricsConfig& config);

}  // namespace rmd
