#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rmd/pose_features.hpp"
#include "rmd/rng.hpp"

namespace rmd {

// Variance-exploding geometric schedule: sigma(t) = sigma_min *
// (sigma_max/sigma_min)^t on t in [0, 1]. sigma_max = 10 is large enough that
// starting at t0 = 1 effectively erases a unit-scale guide.
struct NoiseSchedule {
    double sigma_min = 0.01;
    double sigma_max = 10.0;

    double sigma(double t) const;  // throws outside [0, 1]
};

// Pluggable denoiser. Implementations must return a sequence with the same
// frame count and width as the input and be safe for concurrent read-only use.
class ScoreModel {
public:
    virtual ~ScoreModel() = default;
    virtual PoseFeatureSequence score(const PoseFeatureSequence& x, double t,
                                      const std::string& condition) = 0;
};

// Analytic verification model: for a diagonal Gaussian prior N(mu, v) under
// the VE forward process, the marginal score at time t is
// -(x - mu) / (v + sigma(t)^2) per channel. Mean/var are per-channel vectors;
// a single element broadcasts.
class GaussianPriorScoreModel : public ScoreModel {
public:
    GaussianPriorScoreModel(std::vector<double> mean, std::vector<double> var,
                            NoiseSchedule schedule);
    GaussianPriorScoreModel(double mean, double var, NoiseSchedule schedule);

    PoseFeatureSequence score(const PoseFeatureSequence& x, double t,
                              const std::string& condition) override;

private:
    std::vector<double> mean_, var_;
    NoiseSchedule schedule_;
};

// Returns all zeros; refinement with it is the identity.
class ZeroScoreModel : public ScoreModel {
public:
    PoseFeatureSequence score(const PoseFeatureSequence& x, double t,
                              const std::string& condition) override;
};

// Reads {"kind": "gaussian", "mean": [...], "var": [...]} or {"kind": "zero"}.
std::unique_ptr<ScoreModel> load_score_model(const std::string& path,
                                             const NoiseSchedule& schedule);

enum class SdeditMode { Stochastic, Deterministic };
SdeditMode sdedit_mode_from_string(const std::string& name);
std::string to_string(SdeditMode mode);

struct SdeditConfig {
    double t0 = 0.96;  // noising depth; 0 keeps the guide untouched
    int steps = 50;    // N reverse steps from t0 down to 0
    SdeditMode mode = SdeditMode::Deterministic;
    std::uint64_t seed = 0;
};

// x = x_g + sigma(t0) * z with z ~ N(0, I), drawn row-major from the seed.
// t0 = 0 is special-cased to return the guide untouched.
PoseFeatureSequence noise_guide(const PoseFeatureSequence& x_g, double t0,
                                const NoiseSchedule& schedule, std::uint64_t seed);

// One reverse update from time t to t - dt. eps^2 = sigma(t)^2 -
// sigma(t-dt)^2; stochastic mode applies x + eps^2 * s + eps * z, the
// deterministic (probability-flow) mode x + eps^2/2 * s.
PoseFeatureSequence reverse_step(const PoseFeatureSequence& x, double t, double dt,
                                 ScoreModel& model, const std::string& condition, SdeditMode mode,
                                 const NoiseSchedule& schedule, Rng& rng);

// Full refinement: noise the guide to depth t0, then walk N reverse steps at
// t = t0*n/N, n = N..1. Deterministic given the config seed.
PoseFeatureSequence sdedit(const PoseFeatureSequence& x_g, const SdeditConfig& config,
                           const NoiseSchedule& schedule, ScoreModel& model,
                           const std::string& condition);

}  // namespace rmd
