#pragma once

#include <array>
#include <string>
#include <vector>

#include "rmd/motion.hpp"

namespace rmd {

// Channel offsets of the framewise feature vector for a J-joint skeleton:
// [r_va, r_vx, r_vz, r_h | (J-1)x3 local joint positions | (J-1)x6 rotations |
//  Jx3 joint velocities | 4 foot contact flags], 263 scalars for J=22.
struct FeatureLayout {
    int joints = 22;
    int root_offset = 0;
    int jp_offset = 4;
    int jr_offset = 0;
    int jv_offset = 0;
    int contacts_offset = 0;
    int width = 0;

    static FeatureLayout for_joints(int joints);
};

struct PoseFeatureSequence {
    int width = 0;
    std::vector<double> data;  // frames x width, row-major

    int frames() const { return width == 0 ? 0 : static_cast<int>(data.size()) / width; }
    double* row(int f) { return data.data() + static_cast<std::size_t>(f) * width; }
    const double* row(int f) const { return data.data() + static_cast<std::size_t>(f) * width; }

    static PoseFeatureSequence zeros(int frames, int width);
};

struct PoseFeatureOptions {
    // Contact flag fires when the squared per-frame foot displacement drops
    // below this (m/frame)^2.
    double contact_threshold_sq = 2e-3;
    // left ankle, left foot, right ankle, right foot on the default skeleton.
    std::array<int, 4> foot_joints = {7, 10, 8, 11};
};

// Clip -> features. Velocities are forward differences; the last frame copies
// the one before it. Root-relative quantities are expressed in the root yaw
// frame. Requires length >= 2.
PoseFeatureSequence to_pose_features(const MotionClip& clip, const SkeletonDef& skeleton,
                                     const PoseFeatureOptions& options = {});

// Features -> clip. Integrates the yaw deltas and the yaw-frame root
// velocities back into a world trajectory starting at the origin facing
// forward; joint rotations decode from their 6D blocks.
MotionClip from_pose_features(const PoseFeatureSequence& features, const SkeletonDef& skeleton,
                              double fps = 20.0);

// Feature JSON: schema_version, feature_dim, frames (L x dim, row-major).
PoseFeatureSequence load_features(const std::string& path);
void save_features(const std::string& path, const PoseFeatureSequence& features);

// Per-channel z-score statistics, computed over a corpus and stored in the
// index header so diffusion operates on normalized features.
struct FeatureStats {
    std::vector<double> mean;
    std::vector<double> std_dev;

    PoseFeatureSequence normalize(const PoseFeatureSequence& f) const;
    PoseFeatureSequence denormalize(const PoseFeatureSequence& f) const;
};

class FeatureStatsAccumulator {
public:
    void add(const PoseFeatureSequence& f);
    FeatureStats finalize() const;  // std floored at 1e-6

private:
    std::vector<double> sum_, sum_sq_;
    std::size_t count_ = 0;
};

}  // namespace rmd
