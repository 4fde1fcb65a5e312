#include "rmd/kernels.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rmd::kernels {

namespace {
std::atomic<bool> g_parallel{true};

inline double dot(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double row_distance(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}
}  // namespace

bool parallel_enabled() {
#ifdef _OPENMP
    return g_parallel.load();
#else
    return false;
#endif
}

void set_parallel_enabled(bool enabled) { g_parallel.store(enabled); }

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

namespace serial {

void batched_dot(const double* const* vecs, int n, int dim, const double* query, double* out) {
    for (int i = 0; i < n; ++i) out[i] = dot(vecs[i], query, dim);
}

void pair_distances(const double* a_rows, const double* b_rows, int n_pairs, int dim,
                    double* out) {
    for (int p = 0; p < n_pairs; ++p)
        out[p] = row_distance(a_rows + static_cast<std::size_t>(p) * dim,
                              b_rows + static_cast<std::size_t>(p) * dim, dim);
}

void mean_cov(const double* rows, int n, int dim, double* mean_out, double* cov_out) {
    if (n < 2) throw std::invalid_argument("covariance needs at least 2 rows");
    for (int j = 0; j < dim; ++j) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += rows[static_cast<std::size_t>(i) * dim + j];
        mean_out[j] = s / n;
    }
    for (int j = 0; j < dim; ++j) {
        for (int l = j; l < dim; ++l) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) {
                const double* row = rows + static_cast<std::size_t>(i) * dim;
                s += (row[j] - mean_out[j]) * (row[l] - mean_out[l]);
            }
            double c = s / (n - 1);
            cov_out[static_cast<std::size_t>(j) * dim + l] = c;
            cov_out[static_cast<std::size_t>(l) * dim + j] = c;
        }
    }
}

void apply_score_step(double* x, const double* score, const double* noise, double score_coeff,
                      double noise_coeff, std::size_t n) {
    if (noise) {
        for (std::size_t i = 0; i < n; ++i)
            x[i] += score_coeff * score[i] + noise_coeff * noise[i];
    } else {
        for (std::size_t i = 0; i < n; ++i) x[i] += score_coeff * score[i];
    }
}

}  // namespace serial

namespace parallel {

// Each loop below parallelizes over independent output elements; the inner
// accumulation order is identical to the serial reference, which keeps the two
// paths bit-identical.

void batched_dot(const double* const* vecs, int n, int dim, const double* query, double* out) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) out[i] = dot(vecs[i], query, dim);
}

void pair_distances(const double* a_rows, const double* b_rows, int n_pairs, int dim,
                    double* out) {
#pragma omp parallel for schedule(static)
    for (int p = 0; p < n_pairs; ++p)
        out[p] = row_distance(a_rows + static_cast<std::size_t>(p) * dim,
                              b_rows + static_cast<std::size_t>(p) * dim, dim);
}

void mean_cov(const double* rows, int n, int dim, double* mean_out, double* cov_out) {
    if (n < 2) throw std::invalid_argument("covariance needs at least 2 rows");
#pragma omp parallel for schedule(static)
    for (int j = 0; j < dim; ++j) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += rows[static_cast<std::size_t>(i) * dim + j];
        mean_out[j] = s / n;
    }
#pragma omp parallel for schedule(dynamic, 4)
    for (int j = 0; j < dim; ++j) {
        for (int l = j; l < dim; ++l) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) {
                const double* row = rows + static_cast<std::size_t>(i) * dim;
                s += (row[j] - mean_out[j]) * (row[l] - mean_out[l]);
            }
            double c = s / (n - 1);
            cov_out[static_cast<std::size_t>(j) * dim + l] = c;
            cov_out[static_cast<std::size_t>(l) * dim + j] = c;
        }
    }
}

void apply_score_step(double* x, const double* score, const double* noise, double score_coeff,
                      double noise_coeff, std::size_t n) {
    std::ptrdiff_t count = static_cast<std::ptrdiff_t>(n);
    if (noise) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < count; ++i)
            x[i] += score_coeff * score[i] + noise_coeff * noise[i];
    } else {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < count; ++i) x[i] += score_coeff * score[i];
    }
}

}  // namespace parallel

void batched_dot(const double* const* vecs, int n, int dim, const double* query, double* out) {
    if (parallel_enabled())
        parallel::batched_dot(vecs, n, dim, query, out);
    else
        serial::batched_dot(vecs, n, dim, query, out);
}

void pair_distances(const double* a_rows, const double* b_rows, int n_pairs, int dim,
                    double* out) {
    if (parallel_enabled())
        parallel::pair_distances(a_rows, b_rows, n_pairs, dim, out);
    else
        serial::pair_distances(a_rows, b_rows, n_pairs, dim, out);
}

void mean_cov(const double* rows, int n, int dim, double* mean_out, double* cov_out) {
    if (parallel_enabled())
        parallel::mean_cov(rows, n, dim, mean_out, cov_out);
    else
        serial::mean_cov(rows, n, dim, mean_out, cov_out);
}

void apply_score_step(double* x, const double* score, const double* noise, double score_coeff,
                      double noise_coeff, std::size_t n) {
    if (parallel_enabled())
        parallel::apply_score_step(x, score, noise, score_coeff, noise_coeff, n);
    else
        serial::apply_score_step(x, score, noise, score_coeff, noise_coeff, n);
}

}  // namespace rmd::kernels
