#include "rmd/diffusion.hpp"

#include <cmath>
#include <stdexcept>

#include "rmd/errors.hpp"
#include "rmd/json_io.hpp"
#include "rmd/kernels.hpp"

namespace rmd {

double NoiseSchedule::sigma(double t) const {
    if (sigma_min <= 0 || sigma_min >= sigma_max)
        throw std::invalid_argument("noise schedule requires 0 < sigma_min < sigma_max");
    if (t < 0.0 || t > 1.0)
        throw std::invalid_argument("sigma(t) is defined on [0, 1], got t=" + std::to_string(t));
    return sigma_min * std::pow(sigma_max / sigma_min, t);
}

GaussianPriorScoreModel::GaussianPriorScoreModel(std::vector<double> mean, std::vector<double> var,
                                                 NoiseSchedule schedule)
    : mean_(std::move(mean)), var_(std::move(var)), schedule_(schedule) {
    if (mean_.empty() || var_.empty())
        throw std::invalid_argument("gaussian prior needs mean and var");
    if (mean_.size() != var_.size() && mean_.size() != 1 && var_.size() != 1)
        throw std::invalid_argument("gaussian prior mean/var length mismatch");
    for (double v : var_)
        if (v <= 0.0) throw std::invalid_argument("gaussian prior variance must be positive");
}

GaussianPriorScoreModel::GaussianPriorScoreModel(double mean, double var, NoiseSchedule schedule)
    : GaussianPriorScoreModel(std::vector<double>{mean}, std::vector<double>{var}, schedule) {}

PoseFeatureSequence GaussianPriorScoreModel::score(const PoseFeatureSequence& x, double t,
                                                   const std::string& /*condition*/) {
    auto broadcast_ok = [&](std::size_t n) {
        return n == 1 || n == static_cast<std::size_t>(x.width);
    };
    if (!broadcast_ok(mean_.size()) || !broadcast_ok(var_.size()))
        throw std::invalid_argument("gaussian prior channel count does not match feature width");

    double s2 = schedule_.sigma(t);
    s2 *= s2;
    PoseFeatureSequence out = PoseFeatureSequence::zeros(x.frames(), x.width);
    for (int f = 0; f < x.frames(); ++f) {
        const double* xin = x.row(f);
        double* o = out.row(f);
        for (int c = 0; c < x.width; ++c) {
            double mu = mean_[mean_.size() == 1 ? 0 : c];
            double v = var_[var_.size() == 1 ? 0 : c];
            o[c] = -(xin[c] - mu) / (v + s2);
        }
    }
    return out;
}

PoseFeatureSequence ZeroScoreModel::score(const PoseFeatureSequence& x, double /*t*/,
                                          const std::string& /*condition*/) {
    return PoseFeatureSequence::zeros(x.frames(), x.width);
}

std::unique_ptr<ScoreModel> load_score_model(const std::string& path,
                                             const NoiseSchedule& schedule) {
    json j = read_json_file(path);
    std::string kind;
    try {
        kind = j.at("kind").get<std::string>();
        if (kind == "zero") return std::make_unique<ZeroScoreModel>();
        if (kind == "gaussian") {
            auto as_vector = [&](const json& node) {
                if (node.is_number()) return std::vector<double>{node.get<double>()};
                return node.get<std::vector<double>>();
            };
            return std::make_unique<GaussianPriorScoreModel>(
                as_vector(j.at("mean")), as_vector(j.at("var")), schedule);
        }
    } catch (const json::exception& e) {
        throw InputError(path + ": bad score model file: " + e.what());
    }
    throw InputError(path + ": unknown score model kind \"" + kind + "\"");
}

SdeditMode sdedit_mode_from_string(const std::string& name) {
    if (name == "stochastic") return SdeditMode::Stochastic;
    if (name == "deterministic") return SdeditMode::Deterministic;
    throw InputError("unknown refinement mode \"" + name +
                     "\" (expected stochastic or deterministic)");
}

std::string to_string(SdeditMode mode) {
    return mode == SdeditMode::Stochastic ? "stochastic" : "deterministic";
}

PoseFeatureSequence noise_guide(const PoseFeatureSequence& x_g, double t0,
                                const NoiseSchedule& schedule, std::uint64_t seed) {
    if (t0 < 0.0 || t0 > 1.0) throw std::invalid_argument("t0 must be in [0, 1]");
    if (t0 == 0.0) return x_g;  // the limit keeps the guide untouched

    double s = schedule.sigma(t0);
    PoseFeatureSequence out = x_g;
    Rng rng(seed);
    for (double& v : out.data) v += s * rng.normal();
    return out;
}

namespace {

void check_score_shape(const PoseFeatureSequence& x, const PoseFeatureSequence& s) {
    if (s.width != x.width || s.frames() != x.frames())
        throw std::runtime_error("score model returned shape " + std::to_string(s.frames()) +
                                 "x" + std::to_string(s.width) + " for input " +
                                 std::to_string(x.frames()) + "x" + std::to_string(x.width));
}

}  // namespace

PoseFeatureSequence reverse_step(const PoseFeatureSequence& x, double t, double dt,
                                 ScoreModel& model, const std::string& condition, SdeditMode mode,
                                 const NoiseSchedule& schedule, Rng& rng) {
    if (dt <= 0.0) throw std::invalid_argument("reverse step requires dt > 0");
    double t_prev = t - dt;
    if (t_prev < 0.0) {
        if (t_prev < -1e-12) throw std::invalid_argument("reverse step would cross t = 0");
        t_prev = 0.0;
    }
    if (t > 1.0) throw std::invalid_argument("reverse step requires t <= 1");

    double sig_t = schedule.sigma(t);
    double sig_prev = schedule.sigma(t_prev);
    double eps2 = sig_t * sig_t - sig_prev * sig_prev;
    double eps = std::sqrt(eps2);

    PoseFeatureSequence s = model.score(x, t, condition);
    check_score_shape(x, s);

    PoseFeatureSequence out = x;
    if (mode == SdeditMode::Stochastic) {
        // Noise is drawn serially in row-major order so the sequence depends
        // only on the rng state, never on thread count.
        std::vector<double> z(out.data.size());
        for (double& v : z) v = rng.normal();
        kernels::apply_score_step(out.data.data(), s.data.data(), z.data(), eps2, eps,
                                  out.data.size());
    } else {
        kernels::apply_score_step(out.data.data(), s.data.data(), nullptr, 0.5 * eps2, 0.0,
                                  out.data.size());
    }
    return out;
}

PoseFeatureSequence sdedit(const PoseFeatureSequence& x_g, const SdeditConfig& config,
                           const NoiseSchedule& schedule, ScoreModel& model,
                           const std::string& condition) {
    if (config.steps < 1) throw std::invalid_argument("refinement needs at least 1 step");
    if (config.t0 < 0.0 || config.t0 > 1.0) throw std::invalid_argument("t0 must be in [0, 1]");
    if (config.t0 == 0.0) return x_g;

    PoseFeatureSequence x =
        noise_guide(x_g, config.t0, schedule, derive_seed(config.seed, "guide-noise"));
    Rng rng(derive_seed(config.seed, "reverse-noise"));

    const int N = config.steps;
    for (int n = N; n >= 1; --n) {
        double t = config.t0 * n / N;
        double t_prev = config.t0 * (n - 1) / N;
        try {
            x = reverse_step(x, t, t - t_prev, model, condition, config.mode, schedule, rng);
        } catch (const std::exception& e) {
            throw std::runtime_error("reverse step " + std::to_string(N - n + 1) + "/" +
                                     std::to_string(N) + " (t=" + std::to_string(t) +
                                     ") failed: " + e.what());
        }
    }
    return x;
}

}  // namespace rmd
