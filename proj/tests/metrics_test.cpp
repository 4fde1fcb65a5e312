#include <doctest.h>

#include <cmath>
#include <vector>

#include "rmd/errors.hpp"
#include "rmd/metrics.hpp"
#include "rmd/rng.hpp"
#include "test_helpers.hpp"

using namespace rmd;
using namespace rmdtest;

namespace {

FeatureSet random_set(int rows, int dim, std::uint64_t seed, bool paired = false,
                      int groups = 0) {
    FeatureSet fs;
    fs.dim = dim;
    Rng rng(seed);
    fs.motion.resize(static_cast<std::size_t>(rows) * dim);
    for (double& v : fs.motion) v = rng.normal();
    if (paired) {
        fs.text.resize(fs.motion.size());
        for (double& v : fs.text) v = rng.normal();
    }
    if (groups > 0)
        for (int i = 0; i < rows; ++i) fs.group_ids.push_back("g" + std::to_string(i % groups));
    return fs;
}

}  // namespace

TEST_CASE("feature sets roundtrip through JSON and validate their shape") {
    TempDir tmp;
    FeatureSet fs = random_set(6, 3, 99, /*paired=*/true, /*groups=*/2);
    std::string path = tmp.file("features.json");
    fs.save(path);

    FeatureSet back = FeatureSet::load(path);
    CHECK(back.dim == 3);
    CHECK(back.rows() == 6);
    REQUIRE(back.motion.size() == fs.motion.size());
    for (std::size_t i = 0; i < fs.motion.size(); ++i)
        CHECK(back.motion[i] == doctest::Approx(fs.motion[i]).epsilon(1e-8));
    CHECK(back.paired());
    CHECK(back.group_ids == fs.group_ids);

    // A second save emits identical bytes: values are already quantized.
    std::string again = tmp.file("features2.json");
    back.save(again);
    CHECK(read_text(path) == read_text(again));

    SUBCASE("validate rejects inconsistent shapes") {
        FeatureSet bad = fs;
        bad.dim = 0;
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        bad = fs;
        bad.motion.pop_back();
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        bad = fs;
        bad.text.pop_back();
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        bad = fs;
        bad.group_ids.pop_back();
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        bad = fs;
        bad.motion[0] = std::nan("");
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    }
    SUBCASE("loader reports wrong row widths") {
        write_json_file(tmp.file("bad.json"),
                        json{{"dim", 3}, {"rows", json::array({json::array({1.0, 2.0})})}});
        CHECK_THROWS_WITH_AS(FeatureSet::load(tmp.file("bad.json")),
                             doctest::Contains("feature row width 2 != dim 3"), InputError);
    }
    SUBCASE("numeric group ids load as their JSON dump") {
        write_json_file(tmp.file("numeric.json"),
                        json{{"dim", 1},
                             {"rows", json::array({json::array({1.0}), json::array({2.0})})},
                             {"group_ids", json::array({7, "g1"})}});
        FeatureSet loaded = FeatureSet::load(tmp.file("numeric.json"));
        CHECK(loaded.group_ids == std::vector<std::string>{"7", "g1"});
    }
    SUBCASE("malformed documents name the file") {
        write_json_file(tmp.file("broken.json"), json{{"rows", json::array()}});
        CHECK_THROWS_WITH_AS(FeatureSet::load(tmp.file("broken.json")),
                             doctest::Contains("bad feature file"), InputError);
    }
}

TEST_CASE("r-precision ranks each motion against its batch's texts") {
    SUBCASE("a single handmade batch has an exact answer") {
        FeatureSet fs;
        fs.dim = 1;
        fs.motion = {0.0, 1.0, 2.0, 3.0};
        fs.text = {0.4, 1.05, 2.2, 10.0};
        // Rows 0-2 rank their own text first; row 3's text is farther than
        // every other text, so it misses even at k = 3.
        for (std::uint64_t seed : {0ull, 123ull, 9999ull}) {
            CHECK(r_precision(fs, 1, 4, seed) == 0.75);
            CHECK(r_precision(fs, 2, 4, seed) == 0.75);
            CHECK(r_precision(fs, 3, 4, seed) == 0.75);
            CHECK(r_precision(fs, 4, 4, seed) == 1.0);
        }
    }
    SUBCASE("motions identical to their texts score a perfect 1.0") {
        FeatureSet fs = random_set(64, 4, 5);
        fs.text = fs.motion;
        CHECK(r_precision(fs, 1, 32, 7) == 1.0);
        CHECK(r_precision(fs, 3, 32, 7) == 1.0);
    }
    SUBCASE("independent motion and text converge to k/batch_size") {
        FeatureSet fs = random_set(3200, 4, 77, /*paired=*/true);
        for (int k = 1; k <= 3; ++k) {
            double sum = 0.0;
            const int reps = 50;
            for (int r = 0; r < reps; ++r) sum += r_precision(fs, k, 32, 1000 + r);
            double mean = sum / reps;
            // Data-level noise dominates: SE ~ sqrt(p(1-p)/3200) < 0.0055.
            CHECK(std::abs(mean - k / 32.0) < 0.016);  // ~3 standard errors
        }
    }
    SUBCASE("a trailing partial batch is dropped") {
        FeatureSet fs = random_set(10, 2, 3);
        fs.text = fs.motion;
        CHECK(r_precision(fs, 1, 4, 11) == 1.0);  // uses 8 of 10 rows, all hits
    }
    SUBCASE("bad inputs are rejected") {
        FeatureSet fs = random_set(40, 2, 3);
        CHECK_THROWS_WITH_AS(r_precision(fs, 1, 32, 0),
                             doctest::Contains("needs paired text"), InputError);
        fs.text = fs.motion;
        CHECK_THROWS_AS(r_precision(fs, 0, 32, 0), std::invalid_argument);
        CHECK_THROWS_WITH_AS(r_precision(fs, 1, 64, 0), doctest::Contains("at least batch_size"),
                             InputError);
    }
    SUBCASE("the same seed reproduces the same value") {
        FeatureSet fs = random_set(96, 3, 8, /*paired=*/true);
        CHECK(r_precision(fs, 1, 32, 42) == r_precision(fs, 1, 32, 42));
    }
}

TEST_CASE("psd matrix square root reconstructs and rejects bad matrices") {
    SUBCASE("diagonal and closed-form 2x2 roots") {
        std::vector<double> d = matrix_sqrt_psd({4.0, 0.0, 0.0, 9.0}, 2);
        CHECK(d[0] == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(d[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
        CHECK(d[3] == doctest::Approx(3.0).epsilon(1e-12));

        // [[2,1],[1,2]] has eigenvalues 1 and 3: sqrt = [[(r3+1)/2,(r3-1)/2],..].
        std::vector<double> s = matrix_sqrt_psd({2.0, 1.0, 1.0, 2.0}, 2);
        double r3 = std::sqrt(3.0);
        CHECK(s[0] == doctest::Approx((r3 + 1) / 2).epsilon(1e-12));
        CHECK(s[1] == doctest::Approx((r3 - 1) / 2).epsilon(1e-12));
        CHECK(s[2] == doctest::Approx((r3 - 1) / 2).epsilon(1e-12));
        CHECK(s[3] == doctest::Approx((r3 + 1) / 2).epsilon(1e-12));
    }
    SUBCASE("random PSD matrices: S*S recovers A and S is symmetric") {
        Rng rng(314);
        for (int trial = 0; trial < 100; ++trial) {
            int dim = 1 + static_cast<int>(rng.uniform_int(16));
            // A = B^T B is PSD by construction.
            std::vector<double> b(static_cast<std::size_t>(dim) * dim);
            for (double& v : b) v = rng.normal();
            std::vector<double> a(static_cast<std::size_t>(dim) * dim, 0.0);
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j) {
                    double s = 0.0;
                    for (int l = 0; l < dim; ++l)
                        s += b[static_cast<std::size_t>(l) * dim + i] *
                             b[static_cast<std::size_t>(l) * dim + j];
                    a[static_cast<std::size_t>(i) * dim + j] = s;
                }

            std::vector<double> s = matrix_sqrt_psd(a, dim);
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j) {
                    double ss = 0.0;
                    for (int l = 0; l < dim; ++l)
                        ss += s[static_cast<std::size_t>(i) * dim + l] *
                              s[static_cast<std::size_t>(l) * dim + j];
                    CHECK(ss == doctest::Approx(a[static_cast<std::size_t>(i) * dim + j])
                                    .epsilon(1e-7)
                                    .scale(1.0));
                    CHECK(s[static_cast<std::size_t>(i) * dim + j] ==
                          doctest::Approx(s[static_cast<std::size_t>(j) * dim + i])
                              .epsilon(1e-9)
                              .scale(1.0));
                }
        }
    }
    SUBCASE("tiny negative eigenvalues clamp to zero") {
        std::vector<double> s = matrix_sqrt_psd({1.0, 0.0, 0.0, -1e-9}, 2);
        CHECK(s[0] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(s[3] == doctest::Approx(0.0).scale(1.0).epsilon(1e-4));
    }
    SUBCASE("asymmetric, indefinite and mis-sized inputs raise") {
        CHECK_THROWS_WITH_AS(matrix_sqrt_psd({0.0, 1.0, 0.0, 0.0}, 2),
                             doctest::Contains("not symmetric"), std::invalid_argument);
        CHECK_THROWS_WITH_AS(matrix_sqrt_psd({1.0, 0.0, 0.0, -1.0}, 2),
                             doctest::Contains("not positive semidefinite"),
                             std::invalid_argument);
        CHECK_THROWS_AS(matrix_sqrt_psd({1.0, 2.0, 3.0}, 2), std::invalid_argument);
    }
}

TEST_CASE("frechet distance matches closed forms for gaussian moments") {
    SUBCASE("identical sample sets give zero") {
        FeatureSet fs = random_set(50, 5, 21);
        CHECK(fid(fs.motion, fs.motion, 5) < 1e-6);
    }
    SUBCASE("unit gaussians shifted by 1 are at distance 1") {
        double d = fid_from_moments({0.0}, {1.0}, {1.0}, {1.0}, 1);
        CHECK(d == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("two dimensions add the squared mean shift per axis") {
        double d = fid_from_moments({0.0, 0.0}, {1.0, 0.0, 0.0, 1.0}, {1.0, 1.0},
                                    {1.0, 0.0, 0.0, 1.0}, 2);
        CHECK(d == doctest::Approx(2.0).epsilon(1e-9));
    }
    SUBCASE("same mean, different variances: (sqrt(a)-sqrt(b))^2 per axis") {
        double d = fid_from_moments({0.0}, {4.0}, {0.0}, {9.0}, 1);
        CHECK(d == doctest::Approx(1.0).epsilon(1e-9));  // (2-3)^2

        double d2 = fid_from_moments({0.0, 0.0}, {4.0, 0.0, 0.0, 1.0}, {0.5, 0.0},
                                     {1.0, 0.0, 0.0, 9.0}, 2);
        CHECK(d2 == doctest::Approx(0.25 + 1.0 + 4.0).epsilon(1e-9));
    }
    SUBCASE("sample-based fid agrees with hand-computed moments") {
        // rows {0,2} have mean 1 and unbiased variance 2.
        std::vector<double> a = {0.0, 2.0};
        std::vector<double> b = {3.0, 3.0, 4.0, 4.0};  // 2-rows of {3,4}: mean 3.5, var 1/3? no:
        // b as 1-D rows {3,3,4,4}: mean 3.5, var = (0.25*4)/3 = 1/3.
        double expect = fid_from_moments({1.0}, {2.0}, {3.5}, {1.0 / 3.0}, 1);
        CHECK(fid(a, b, 1) == doctest::Approx(expect).epsilon(1e-12));
    }
    SUBCASE("fid is symmetric in its arguments") {
        FeatureSet a = random_set(40, 4, 1);
        FeatureSet b = random_set(60, 4, 2);
        CHECK(fid(a.motion, b.motion, 4) ==
              doctest::Approx(fid(b.motion, a.motion, 4)).epsilon(1e-9));
    }
    SUBCASE("bad shapes raise") {
        CHECK_THROWS_AS(fid({1.0}, {1.0, 2.0}, 1), InputError);  // < 2 rows
        CHECK_THROWS_AS(fid({1.0, 2.0, 3.0}, {1.0, 2.0}, 2), std::invalid_argument);
        CHECK_THROWS_AS(fid_from_moments({0.0}, {1.0}, {0.0, 0.0}, {1.0}, 1),
                        std::invalid_argument);
    }
}

TEST_CASE("diversity is the seeded mean pairwise distance") {
    SUBCASE("identical rows give exactly zero") {
        FeatureSet fs;
        fs.dim = 2;
        for (int i = 0; i < 5; ++i) {
            fs.motion.push_back(1.5);
            fs.motion.push_back(-2.0);
        }
        for (std::uint64_t seed : {1ull, 2ull, 3ull}) CHECK(diversity(fs, 7, seed) == 0.0);
    }
    SUBCASE("values are deterministic per seed and bounded by the diameter") {
        FeatureSet fs = random_set(20, 3, 55);
        double a = diversity(fs, 50, 9);
        CHECK(a == diversity(fs, 50, 9));
        double diameter = 0.0;
        for (int i = 0; i < 20; ++i)
            for (int j = 0; j < 20; ++j) {
                double d2 = 0.0;
                for (int c = 0; c < 3; ++c) {
                    double d = fs.motion[i * 3 + c] - fs.motion[j * 3 + c];
                    d2 += d * d;
                }
                diameter = std::max(diameter, std::sqrt(d2));
            }
        CHECK(a >= 0.0);
        CHECK(a <= diameter);
    }
    SUBCASE("two rows at distance 6 average to 3 over many seeds") {
        FeatureSet fs;
        fs.dim = 1;
        fs.motion = {0.0, 6.0};
        double sum = 0.0;
        const int seeds = 2000;
        for (int s = 0; s < seeds; ++s) sum += diversity(fs, 1, 10000 + s);
        // Each draw is 0 or 6 with equal probability; SE = 3/sqrt(2000).
        CHECK(sum / seeds == doctest::Approx(3.0).epsilon(0.1));
    }
    SUBCASE("bad inputs raise") {
        FeatureSet fs = random_set(1, 2, 0);
        CHECK_THROWS_AS(diversity(fs, 5, 0), InputError);
        FeatureSet ok = random_set(4, 2, 0);
        CHECK_THROWS_AS(diversity(ok, 0, 0), std::invalid_argument);
    }
}

TEST_CASE("multimodality averages within-group spread over sorted groups") {
    SUBCASE("groups of duplicated rows have zero spread") {
        FeatureSet fs;
        fs.dim = 2;
        for (int i = 0; i < 8; ++i) {
            bool second = i >= 4;
            fs.motion.push_back(second ? 9.0 : -3.0);
            fs.motion.push_back(second ? 1.0 : 2.0);
            fs.group_ids.push_back(second ? "gb" : "ga");
        }
        for (std::uint64_t seed : {5ull, 6ull}) CHECK(multimodality(fs, 2, seed) == 0.0);
    }
    SUBCASE("one tight and one spread group average their means") {
        // ga: four copies of the same point (spread 0). gb: rows at 0 and 10.
        FeatureSet fs;
        fs.dim = 1;
        fs.motion = {4.0, 4.0, 4.0, 4.0, 0.0, 10.0};
        fs.group_ids = {"ga", "ga", "ga", "ga", "gb", "gb"};
        double sum = 0.0;
        const int seeds = 2000;
        for (int s = 0; s < seeds; ++s) sum += multimodality(fs, 1, 500 + s);
        // gb contributes 0 or 10 with equal probability, ga always 0, so the
        // group mean is 0 or 5 -> expectation 2.5.
        CHECK(sum / seeds == doctest::Approx(2.5).epsilon(0.1));
    }
    SUBCASE("deterministic per seed") {
        FeatureSet fs = random_set(24, 3, 12, false, 3);
        CHECK(multimodality(fs, 4, 77) == multimodality(fs, 4, 77));
    }
    SUBCASE("bad inputs raise") {
        FeatureSet fs = random_set(8, 2, 1);
        CHECK_THROWS_WITH_AS(multimodality(fs, 1, 0), doctest::Contains("needs group_ids"),
                             InputError);
        FeatureSet grouped = random_set(8, 2, 1, false, 2);
        CHECK_THROWS_WITH_AS(multimodality(grouped, 3, 0),
                             doctest::Contains("needs at least 6"), InputError);
        CHECK_THROWS_AS(multimodality(grouped, 0, 0), std::invalid_argument);
    }
}

TEST_CASE("mm-dist is the mean motion-to-own-text distance") {
    FeatureSet fs;
    fs.dim = 2;
    fs.motion = {0.0, 0.0, 3.0, 4.0};
    fs.text = {1.0, 0.0, 3.0, 0.0};  // distances 1 and 4
    CHECK(mm_dist(fs) == 2.5);

    FeatureSet unpaired = random_set(4, 2, 0);
    CHECK_THROWS_WITH_AS(mm_dist(unpaired), doctest::Contains("paired text"), InputError);
}

TEST_CASE("evaluate assembles the report and its confidence intervals") {
    MetricsConfig config;
    config.batch_size = 16;
    config.n_pairs = 40;
    config.n_per_group = 4;
    config.reps = 10;
    config.seed = 2024;

    FeatureSet gen = random_set(64, 3, 42, /*paired=*/true, /*groups=*/2);
    FeatureSet ref = random_set(80, 3, 43);

    MetricReport report = evaluate(gen, &ref, config);
    REQUIRE(report.top1.has_value());
    REQUIRE(report.top2.has_value());
    REQUIRE(report.top3.has_value());
    REQUIRE(report.fid.has_value());
    REQUIRE(report.mm_dist.has_value());
    REQUIRE(report.diversity.has_value());
    REQUIRE(report.multimodality.has_value());

    // Deterministic metrics carry a zero interval.
    CHECK(report.fid->ci95 == 0.0);
    CHECK(report.mm_dist->ci95 == 0.0);
    CHECK(report.fid->value == doctest::Approx(fid(gen.motion, ref.motion, 3)).epsilon(1e-12));
    CHECK(report.mm_dist->value == doctest::Approx(mm_dist(gen)).epsilon(1e-12));

    // Seeded metrics reproduce from the documented rep-seed derivation.
    auto replay = [&](const std::string& name, auto metric) {
        std::vector<double> values;
        for (int r = 0; r < config.reps; ++r)
            values.push_back(metric(derive_seed(config.seed, "rep/" + name, r)));
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= values.size();
        double var = 0.0;
        for (double v : values) var += (v - mean) * (v - mean);
        var /= (values.size() - 1);
        return std::pair<double, double>(mean, 1.96 * std::sqrt(var / values.size()));
    };
    auto [dmean, dci] = replay("diversity", [&](std::uint64_t s) {
        return diversity(gen, config.n_pairs, s);
    });
    CHECK(report.diversity->value == doctest::Approx(dmean).epsilon(1e-12));
    CHECK(report.diversity->ci95 == doctest::Approx(dci).epsilon(1e-12).scale(1.0));

    auto [t1mean, t1ci] = replay("rprecision", [&](std::uint64_t s) {
        return r_precision(gen, 1, config.batch_size, s);
    });
    CHECK(report.top1->value == doctest::Approx(t1mean).epsilon(1e-12));
    CHECK(report.top1->ci95 == doctest::Approx(t1ci).epsilon(1e-12).scale(1.0));

    auto [mmean, mci] = replay("multimodality", [&](std::uint64_t s) {
        return multimodality(gen, config.n_per_group, s);
    });
    CHECK(report.multimodality->value == doctest::Approx(mmean).epsilon(1e-12));
    CHECK(report.multimodality->ci95 == doctest::Approx(mci).epsilon(1e-12).scale(1.0));

    SUBCASE("json shape, including nulls for missing metrics") {
        json j = report.to_json();
        CHECK(j.at("r_precision").at("top1").at("value").is_number());
        CHECK(j.at("r_precision").at("top3").at("ci95").is_number());
        CHECK(j.at("fid").at("value").is_number());
        CHECK(j.at("diversity").at("ci95").is_number());

        FeatureSet bare = random_set(48, 3, 44);
        MetricReport partial = evaluate(bare, nullptr, config);
        CHECK(!partial.top1.has_value());
        CHECK(!partial.fid.has_value());
        CHECK(!partial.mm_dist.has_value());
        REQUIRE(partial.diversity.has_value());
        CHECK(!partial.multimodality.has_value());
        json pj = partial.to_json();
        CHECK(pj.at("r_precision").at("top1").is_null());
        CHECK(pj.at("fid").is_null());
        CHECK(pj.at("mm_dist").is_null());
        CHECK(pj.at("diversity").at("value").is_number());
        CHECK(pj.at("multimodality").is_null());
    }
    SUBCASE("mismatched reference dims and bad reps raise") {
        FeatureSet wrong = random_set(12, 4, 9);
        CHECK_THROWS_AS(evaluate(gen, &wrong, config), std::invalid_argument);
        MetricsConfig bad = config;
        bad.reps = 0;
        CHECK_THROWS_AS(evaluate(gen, nullptr, bad), std::invalid_argument);
    }
    SUBCASE("a single rep yields a zero interval") {
        MetricsConfig one = config;
        one.reps = 1;
        MetricReport r1 = evaluate(gen, nullptr, one);
        REQUIRE(r1.diversity.has_value());
        CHECK(r1.diversity->ci95 == 0.0);
    }
}
