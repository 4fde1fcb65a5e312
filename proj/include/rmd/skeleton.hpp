#pragma once

#include <string>
#include <vector>

#include "rmd/quaternion.hpp"

namespace rmd {

// Fixed skeleton: joint names, parent links (topologically ordered, one root
// at index 0), and parent-local rest offsets in meters.
struct SkeletonDef {
    std::vector<std::string> joint_names;
    std::vector<int> parent_index;
    std::vector<Vec3> rest_offsets;

    int joint_count() const { return static_cast<int>(joint_names.size()); }

    // Throws std::invalid_argument if sizes disagree, the topology is not
    // parent_index[i] < i, or there is more than one root.
    void validate() const;

    int index_of(const std::string& name) const;
};

SkeletonDef load_skeleton(const std::string& path);

}  // namespace rmd
