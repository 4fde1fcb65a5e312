#pragma once

#include <map>
#include <string>
#include <vector>

#include "rmd/motion.hpp"

namespace rmd {

enum class BodyPart { Head, Torso, LeftArm, RightArm, LowerBody, Trajectory, UpperBody, Full };
enum class RetrievalLevel { Full, Half, Fine };

std::string to_string(BodyPart part);
BodyPart body_part_from_string(const std::string& name);
std::string to_string(RetrievalLevel level);
RetrievalLevel level_from_string(const std::string& name);

// Human-readable part names used in the retrieval-agent prompt.
std::string prompt_name(BodyPart part);

// Channel ownership for one retrievable part: a set of joint rotation
// channels, optionally the root translation and the root (pelvis) rotation.
struct BodyPartMask {
    BodyPart part = BodyPart::Full;
    std::vector<int> joint_indices;
    bool carries_translation = false;
    bool carries_root_rotation = false;
};

// Joint grouping, loaded from a data file so skeletons other than the default
// 22-joint one can supply their own masks.
class BodyPartConfig {
public:
    static BodyPartConfig load(const std::string& path, int joint_count);
    static BodyPartConfig defaults_for_22();

    // The six fine-grained masks, or the {upper, lower} pair, or the single
    // full mask. The returned masks partition every channel exactly once;
    // construction validates this and throws std::invalid_argument otherwise.
    std::vector<BodyPartMask> masks_for_level(RetrievalLevel level) const;
    std::vector<BodyPart> parts_for_level(RetrievalLevel level) const;

    int joint_count() const { return joint_count_; }
    BodyPart root_rotation_owner() const { return root_rotation_owner_; }

private:
    BodyPartConfig() = default;
    void validate() const;

    std::map<BodyPart, std::vector<int>> fine_joints_;
    BodyPart root_rotation_owner_ = BodyPart::Trajectory;
    int joint_count_ = 22;
};

// Re-combine per-part sources into one clip: every source is resampled to
// target_len, then each channel is copied from the part that owns it. The
// translation-carrying part also supplies fps.
MotionClip compose_parts(const std::map<BodyPart, MotionClip>& sources, RetrievalLevel level,
                         int target_len, const SkeletonDef& skeleton,
                         const BodyPartConfig& config);

}  // namespace rmd
