#pragma once

#include <cstddef>

namespace rmd::kernels {

// Global switch between the OpenMP path and the serial reference. Both paths
// are order-deterministic: parallelism is always over independent output
// elements, never over a floating-point reduction, so results are
// bit-identical for any thread count.
bool parallel_enabled();
void set_parallel_enabled(bool enabled);
int max_threads();

namespace serial {

// out[i] = <vecs[i], query> for i in [0, n); each vecs[i] has dim entries.
void batched_dot(const double* const* vecs, int n, int dim, const double* query, double* out);

// out[p] = ||a_rows[p] - b_rows[p]||_2 over dim-wide rows.
void pair_distances(const double* a_rows, const double* b_rows, int n_pairs, int dim,
                    double* out);

// Column means and unbiased covariance (n-1 denominator) of an n x dim
// row-major matrix. cov_out is dim x dim row-major. Requires n >= 2.
void mean_cov(const double* rows, int n, int dim, double* mean_out, double* cov_out);

// x[i] += score_coeff * score[i] + noise_coeff * noise[i]; noise may be null.
void apply_score_step(double* x, const double* score, const double* noise, double score_coeff,
                      double noise_coeff, std::size_t n);

}  // namespace serial

namespace parallel {

void batched_dot(const double* const* vecs, int n, int dim, const double* query, double* out);
void pair_distances(const double* a_rows, const double* b_rows, int n_pairs, int dim,
                    double* out);
void mean_cov(const double* rows, int n, int dim, double* mean_out, double* cov_out);
void apply_score_step(double* x, const double* score, const double* noise, double score_coeff,
                      double noise_coeff, std::size_t n);

}  // namespace parallel

// Dispatchers honoring parallel_enabled().
void batched_dot(const double* const* vecs, int n, int dim, const double* query, double* out);
void pair_distances(const double* a_rows, const double* b_rows, int n_pairs, int dim, double* out);
void mean_cov(const double* rows, int n, int dim, double* mean_out, double* cov_out);
void apply_score_step(double* x, const double* score, const double* noise, double score_coeff,
                      double noise_coeff, std::size_t n);

}  // namespace rmd::kernels
