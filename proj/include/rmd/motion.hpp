#pragma once

#include <string>
#include <vector>

#include "rmd/quaternion.hpp"
#include "rmd/skeleton.hpp"

namespace rmd {

// Framewise root translation (world, meters) plus per-joint parent-local unit
// quaternions. The retrieval / composition currency.
struct MotionClip {
    double fps = 20.0;
    std::vector<Vec3> root_translation;                 // length L
    std::vector<std::vector<Quaternion>> joint_rotations;  // L x J

    int length() const { return static_cast<int>(root_translation.size()); }
    int joint_count() const {
        return joint_rotations.empty() ? 0 : static_cast<int>(joint_rotations[0].size());
    }

    void validate() const;  // throws std::invalid_argument
};

// Uniform time remap to target_len frames: linear interpolation on the
// translation, slerp on rotations. Endpoints map exactly; fps is unchanged.
MotionClip resample_clip(const MotionClip& clip, int target_len);

// World positions per frame (L x J). Root sits at root_translation; each child
// is parent position plus the parent's global rotation applied to its offset.
std::vector<std::vector<Vec3>> forward_kinematics(const MotionClip& clip,
                                                  const SkeletonDef& skeleton);

// Global (world) joint rotations per frame.
std::vector<std::vector<Quaternion>> global_rotations(const MotionClip& clip,
                                                      const SkeletonDef& skeleton);

struct MotionFile {
    MotionClip clip;
    SkeletonDef skeleton;
};

// Motion JSON: schema_version, fps, joint_names, parent_index, rest_offsets,
// root_translation (Lx3), joint_rotations (LxJx4, order w,x,y,z).
MotionFile load_motion(const std::string& path);
void save_motion(const std::string& path, const MotionClip& clip, const SkeletonDef& skeleton);

}  // namespace rmd
