#include "rmd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Dense>

#include "rmd/errors.hpp"
#include "rmd/kernels.hpp"
#include "rmd/rng.hpp"

namespace rmd {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double row_dist(const double* a, const double* b, int dim) {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// Emits shuffled indices, reshuffling whenever a pass over [0, n) is
// exhausted; the prefix of the first pass matches a plain shuffle.
class IndexStream {
public:
    IndexStream(std::size_t n, std::uint64_t seed) : n_(n), rng_(seed) {}

    std::size_t next() {
        if (pos_ == order_.size()) {
            order_ = shuffled_indices(n_, rng_);
            pos_ = 0;
        }
        return order_[pos_++];
    }

private:
    std::size_t n_;
    Rng rng_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Mean distance over elementwise pairs drawn from two independent streams.
double paired_stream_distance(const FeatureSet& features, const std::vector<int>& row_pool,
                              int n_pairs, std::uint64_t seed_a, std::uint64_t seed_b) {
    IndexStream sa(row_pool.size(), seed_a);
    IndexStream sb(row_pool.size(), seed_b);
    const int dim = features.dim;
    std::vector<double> a(static_cast<std::size_t>(n_pairs) * dim);
    std::vector<double> b(static_cast<std::size_t>(n_pairs) * dim);
    for (int p = 0; p < n_pairs; ++p) {
        const double* ra = features.motion_row(row_pool[sa.next()]);
        const double* rb = features.motion_row(row_pool[sb.next()]);
        std::copy(ra, ra + dim, a.begin() + static_cast<std::size_t>(p) * dim);
        std::copy(rb, rb + dim, b.begin() + static_cast<std::size_t>(p) * dim);
    }
    std::vector<double> dist(n_pairs);
    kernels::pair_distances(a.data(), b.data(), n_pairs, dim, dist.data());
    return mean_of(dist);
}

}  // namespace

void FeatureSet::validate() const {
    if (dim < 1) throw std::invalid_argument("feature set needs dim >= 1");
    if (motion.size() % dim != 0)
        throw std::invalid_argument("motion feature data is not a whole number of rows");
    if (!text.empty() && text.size() != motion.size())
        throw std::invalid_argument("paired text rows must match motion rows");
    if (!group_ids.empty() && static_cast<int>(group_ids.size()) != rows())
        throw std::invalid_argument("group_ids must have one entry per row");
    for (double v : motion)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite motion feature value");
    for (double v : text)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite text feature value");
}

FeatureSet FeatureSet::load(const std::string& path) {
    json j = read_json_file(path);
    FeatureSet fs;
    try {
        fs.dim = j.at("dim").get<int>();
        auto read_rows = [&](const json& rows_node, std::vector<double>* out) {
            for (const auto& row : rows_node) {
                auto values = row.get<std::vector<double>>();
                if (static_cast<int>(values.size()) != fs.dim)
                    throw InputError(path + ": feature row width " +
                                     std::to_string(values.size()) + " != dim " +
                                     std::to_string(fs.dim));
                out->insert(out->end(), values.begin(), values.end());
            }
        };
        read_rows(j.at("rows"), &fs.motion);
        if (j.contains("paired_text_rows")) read_rows(j.at("paired_text_rows"), &fs.text);
        if (j.contains("group_ids")) {
            for (const auto& g : j.at("group_ids"))
                fs.group_ids.push_back(g.is_string() ? g.get<std::string>() : g.dump());
        }
    } catch (const json::exception& e) {
        throw InputError(path + ": bad feature file: " + e.what());
    }
    fs.validate();
    return fs;
}

void FeatureSet::save(const std::string& path) const {
    validate();
    json j;
    j["dim"] = dim;
    auto rows_json = [&](const std::vector<double>& data) {
        json rows = json::array();
        for (int i = 0; i < static_cast<int>(data.size()) / dim; ++i) {
            std::vector<double> row(data.begin() + static_cast<std::size_t>(i) * dim,
                                    data.begin() + static_cast<std::size_t>(i + 1) * dim);
            rows.push_back(quantized_array(row));
        }
        return rows;
    };
    j["rows"] = rows_json(motion);
    if (!text.empty()) j["paired_text_rows"] = rows_json(text);
    if (!group_ids.empty()) j["group_ids"] = group_ids;
    write_json_file(path, j);
}

double r_precision(const FeatureSet& features, int k, int batch_size, std::uint64_t seed) {
    features.validate();
    if (!features.paired())
        throw InputError("r-precision needs paired text features");
    if (k < 1) throw std::invalid_argument("r-precision k must be >= 1");
    const int rows = features.rows();
    if (rows < batch_size)
        throw InputError("r-precision needs at least batch_size rows (" +
                         std::to_string(rows) + " < " + std::to_string(batch_size) + ")");

    Rng rng(derive_seed(seed, "rprecision-batches"));
    std::vector<std::size_t> order = shuffled_indices(rows, rng);
    const int n_batches = rows / batch_size;

    int hits = 0;
    int total = 0;
    for (int b = 0; b < n_batches; ++b) {
        const std::size_t* batch = order.data() + static_cast<std::size_t>(b) * batch_size;
        for (int i = 0; i < batch_size; ++i) {
            const double* m = features.motion_row(static_cast<int>(batch[i]));
            double own = row_dist(m, features.text_row(static_cast<int>(batch[i])), features.dim);
            int closer = 0;
            for (int jj = 0; jj < batch_size; ++jj) {
                if (jj == i) continue;
                if (row_dist(m, features.text_row(static_cast<int>(batch[jj])), features.dim) <
                    own)
                    ++closer;
            }
            if (closer < k) ++hits;  // own text ranks closer+1
            ++total;
        }
    }
    return static_cast<double>(hits) / total;
}

std::vector<double> matrix_sqrt_psd(const std::vector<double>& a, int dim) {
    if (static_cast<int>(a.size()) != dim * dim)
        throw std::invalid_argument("matrix size does not match dim");
    Eigen::Map<const RowMatrix> m(a.data(), dim, dim);
    double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-8)
        throw std::invalid_argument("matrix is not symmetric (max asymmetry " +
                                    std::to_string(asym) + ")");

    RowMatrix sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<RowMatrix> es(sym);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("eigendecomposition failed");
    Eigen::VectorXd lam = es.eigenvalues();
    for (int i = 0; i < dim; ++i) {
        if (lam[i] < -1e-8)
            throw std::invalid_argument("matrix is not positive semidefinite (eigenvalue " +
                                        std::to_string(lam[i]) + ")");
        lam[i] = std::sqrt(std::max(lam[i], 0.0));
    }
    RowMatrix s = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    return std::vector<double>(s.data(), s.data() + static_cast<std::size_t>(dim) * dim);
}

double fid_from_moments(const std::vector<double>& mean_a, const std::vector<double>& cov_a,
                        const std::vector<double>& mean_b, const std::vector<double>& cov_b,
                        int dim) {
    if (static_cast<int>(mean_a.size()) != dim || static_cast<int>(mean_b.size()) != dim ||
        static_cast<int>(cov_a.size()) != dim * dim ||
        static_cast<int>(cov_b.size()) != dim * dim)
        throw std::invalid_argument("moment sizes do not match dim");

    double dmu2 = 0.0;
    for (int i = 0; i < dim; ++i) {
        double d = mean_a[i] - mean_b[i];
        dmu2 += d * d;
    }

    // Tr((S1 S2)^{1/2}) computed as Tr(sqrt(sqrt(S1) S2 sqrt(S1))), which
    // keeps the argument symmetric PSD.
    std::vector<double> s1 = matrix_sqrt_psd(cov_a, dim);
    Eigen::Map<const RowMatrix> s1m(s1.data(), dim, dim);
    Eigen::Map<const RowMatrix> c2m(cov_b.data(), dim, dim);
    RowMatrix inner = s1m * c2m * s1m;
    inner = 0.5 * (inner + inner.transpose().eval());
    std::vector<double> inner_v(inner.data(), inner.data() + static_cast<std::size_t>(dim) * dim);
    std::vector<double> root = matrix_sqrt_psd(inner_v, dim);

    double trace = 0.0;
    for (int i = 0; i < dim; ++i) {
        trace += cov_a[static_cast<std::size_t>(i) * dim + i] +
                 cov_b[static_cast<std::size_t>(i) * dim + i] -
                 2.0 * root[static_cast<std::size_t>(i) * dim + i];
    }

    double d = dmu2 + trace;
    if (d < 0.0) {
        if (d < -1e-6)
            throw std::runtime_error("fid came out negative beyond numerical tolerance: " +
                                     std::to_string(d));
        d = 0.0;
    }
    return d;
}

double fid(const std::vector<double>& rows_a, const std::vector<double>& rows_b, int dim) {
    if (dim < 1) throw std::invalid_argument("fid needs dim >= 1");
    if (rows_a.size() % dim != 0 || rows_b.size() % dim != 0)
        throw std::invalid_argument("row data is not a whole number of rows");
    int na = static_cast<int>(rows_a.size()) / dim;
    int nb = static_cast<int>(rows_b.size()) / dim;
    if (na < 2 || nb < 2) throw InputError("fid needs at least 2 rows per set");

    std::vector<double> mean_a(dim), mean_b(dim);
    std::vector<double> cov_a(static_cast<std::size_t>(dim) * dim);
    std::vector<double> cov_b(static_cast<std::size_t>(dim) * dim);
    kernels::mean_cov(rows_a.data(), na, dim, mean_a.data(), cov_a.data());
    kernels::mean_cov(rows_b.data(), nb, dim, mean_b.data(), cov_b.data());
    return fid_from_moments(mean_a, cov_a, mean_b, cov_b, dim);
}

double diversity(const FeatureSet& features, int n_pairs, std::uint64_t seed) {
    features.validate();
    if (features.rows() < 2) throw InputError("diversity needs at least 2 rows");
    if (n_pairs < 1) throw std::invalid_argument("diversity needs n_pairs >= 1");
    std::vector<int> pool(features.rows());
    for (int i = 0; i < features.rows(); ++i) pool[i] = i;
    return paired_stream_distance(features, pool, n_pairs, derive_seed(seed, "diversity-a"),
                                  derive_seed(seed, "diversity-b"));
}

double multimodality(const FeatureSet& features, int n_per_group, std::uint64_t seed) {
    features.validate();
    if (features.group_ids.empty()) throw InputError("multimodality needs group_ids");
    if (n_per_group < 1) throw std::invalid_argument("multimodality needs n_per_group >= 1");

    std::map<std::string, std::vector<int>> groups;
    for (int i = 0; i < features.rows(); ++i) groups[features.group_ids[i]].push_back(i);

    std::vector<double> group_means;
    for (const auto& [gid, pool] : groups) {
        if (static_cast<int>(pool.size()) < 2 * n_per_group)
            throw InputError("group \"" + gid + "\" has " + std::to_string(pool.size()) +
                             " rows, needs at least " + std::to_string(2 * n_per_group));
        group_means.push_back(paired_stream_distance(
            features, pool, n_per_group, derive_seed(seed, "multimodality-a/" + gid),
            derive_seed(seed, "multimodality-b/" + gid)));
    }
    return mean_of(group_means);
}

double mm_dist(const FeatureSet& features) {
    features.validate();
    if (!features.paired()) throw InputError("mm-dist needs paired text features");
    if (features.rows() < 1) throw InputError("mm-dist needs at least 1 row");
    std::vector<double> dist(features.rows());
    kernels::pair_distances(features.motion.data(), features.text.data(), features.rows(),
                            features.dim, dist.data());
    return mean_of(dist);
}

namespace {

json metric_json(const std::optional<MetricValue>& m) {
    if (!m) return nullptr;
    return json{{"value", quantize9(m->value)}, {"ci95", quantize9(m->ci95)}};
}

MetricValue summarize(const std::vector<double>& values) {
    MetricValue out;
    out.value = mean_of(values);
    if (values.size() > 1) {
        double var = 0.0;
        for (double v : values) var += (v - out.value) * (v - out.value);
        var /= static_cast<double>(values.size() - 1);
        out.ci95 = 1.96 * std::sqrt(var / static_cast<double>(values.size()));
    }
    return out;
}

template <typename F>
MetricValue over_reps(int reps, std::uint64_t seed, const std::string& name, F metric) {
    std::vector<double> values;
    values.reserve(reps);
    for (int r = 0; r < reps; ++r) values.push_back(metric(derive_seed(seed, "rep/" + name, r)));
    return summarize(values);
}

}  // namespace

json MetricReport::to_json() const {
    json r;
    r["r_precision"] =
        json{{"top1", metric_json(top1)}, {"top2", metric_json(top2)}, {"top3", metric_json(top3)}};
    r["fid"] = metric_json(fid);
    r["mm_dist"] = metric_json(mm_dist);
    r["diversity"] = metric_json(diversity);
    r["multimodality"] = metric_json(multimodality);
    return r;
}

MetricReport evaluate(const FeatureSet& generated, const FeatureSet* reference,
                      const MetricsConfig& config) {
    generated.validate();
    if (reference) reference->validate();
    if (config.reps < 1) throw std::invalid_argument("confidence intervals need reps >= 1");

    MetricReport report;
    if (generated.paired()) {
        for (int k = 1; k <= 3; ++k) {
            MetricValue v = over_reps(config.reps, config.seed, "rprecision", [&](std::uint64_t s) {
                return r_precision(generated, k, config.batch_size, s);
            });
            (k == 1 ? report.top1 : k == 2 ? report.top2 : report.top3) = v;
        }
        report.mm_dist = MetricValue{mm_dist(generated), 0.0};
    }
    if (reference) {
        if (reference->dim != generated.dim)
            throw std::invalid_argument("reference feature dim does not match generated");
        report.fid = MetricValue{fid(generated.motion, reference->motion, generated.dim), 0.0};
    }
    if (generated.rows() >= 2) {
        report.diversity = over_reps(config.reps, config.seed, "diversity", [&](std::uint64_t s) {
            return diversity(generated, config.n_pairs, s);
        });
    }
    if (!generated.group_ids.empty()) {
        report.multimodality =
            over_reps(config.reps, config.seed, "multimodality", [&](std::uint64_t s) {
                return multimodality(generated, config.n_per_group, s);
            });
    }
    return report;
}

}  // namespace rmd
