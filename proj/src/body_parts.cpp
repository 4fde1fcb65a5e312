#include "rmd/body_parts.hpp"

#include <algorithm>
#include <set>

#include "rmd/errors.hpp"
#include "rmd/json_io.hpp"

namespace rmd {

std::string to_string(BodyPart part) {
    switch (part) {
        case BodyPart::Head: return "head";
        case BodyPart::Torso: return "torso";
        case BodyPart::LeftArm: return "left_arm";
        case BodyPart::RightArm: return "right_arm";
        case BodyPart::LowerBody: return "lower_body";
        case BodyPart::Trajectory: return "trajectory";
        case BodyPart::UpperBody: return "upper_body";
        case BodyPart::Full: return "full";
    }
    return "?";
}

BodyPart body_part_from_string(const std::string& name) {
    if (name == "head") return BodyPart::Head;
    if (name == "torso") return BodyPart::Torso;
    if (name == "left_arm") return BodyPart::LeftArm;
    if (name == "right_arm") return BodyPart::RightArm;
    if (name == "lower_body") return BodyPart::LowerBody;
    if (name == "trajectory") return BodyPart::Trajectory;
    if (name == "upper_body") return BodyPart::UpperBody;
    if (name == "full") return BodyPart::Full;
    throw std::invalid_argument("unknown body part: " + name);
}

std::string to_string(RetrievalLevel level) {
    switch (level) {
        case RetrievalLevel::Full: return "full";
        case RetrievalLevel::Half: return "half";
        case RetrievalLevel::Fine: return "fine";
    }
    return "?";
}

RetrievalLevel level_from_string(const std::string& name) {
    if (name == "full") return RetrievalLevel::Full;
    if (name == "half") return RetrievalLevel::Half;
    if (name == "fine") return RetrievalLevel::Fine;
    throw std::invalid_argument("unknown retrieval level: " + name);
}

std::string prompt_name(BodyPart part) {
    switch (part) {
        case BodyPart::Head: return "head";
        case BodyPart::Torso: return "torso";
        case BodyPart::LeftArm: return "left arm";
        case BodyPart::RightArm: return "right arm";
        case BodyPart::LowerBody: return "lower body";
        case BodyPart::Trajectory: return "trajectory";
        case BodyPart::UpperBody: return "upper body";
        case BodyPart::Full: return "full body";
    }
    return "?";
}

BodyPartConfig BodyPartConfig::load(const std::string& path, int joint_count) {
    json j = read_json_file(path);
    BodyPartConfig c;
    c.joint_count_ = joint_count;
    try {
        for (const auto& [name, indices] : j.at("parts").items())
            c.fine_joints_[body_part_from_string(name)] = indices.get<std::vector<int>>();
        if (j.contains("root_rotation_owner"))
            c.root_rotation_owner_ = body_part_from_string(j["root_rotation_owner"].get<std::string>());
    } catch (const json::exception& e) {
        throw InputError(path + ": bad body part mask file: " + e.what());
    }
    c.validate();
    return c;
}

BodyPartConfig BodyPartConfig::defaults_for_22() {
    BodyPartConfig c;
    c.joint_count_ = 22;
    c.fine_joints_[BodyPart::Head] = {12, 15};
    c.fine_joints_[BodyPart::Torso] = {3, 6, 9};
    c.fine_joints_[BodyPart::LeftArm] = {13, 16, 18, 20};
    c.fine_joints_[BodyPart::RightArm] = {14, 17, 19, 21};
    c.fine_joints_[BodyPart::LowerBody] = {1, 2, 4, 5, 7, 8, 10, 11};
    c.validate();
    return c;
}

void BodyPartConfig::validate() const {
    static const BodyPart kFineParts[] = {BodyPart::Head, BodyPart::Torso, BodyPart::LeftArm,
                                          BodyPart::RightArm, BodyPart::LowerBody};
    std::set<int> seen;
    std::size_t total = 0;
    for (BodyPart part : kFineParts) {
        auto it = fine_joints_.find(part);
        if (it == fine_joints_.end())
            throw std::invalid_argument("body part masks: missing part " + to_string(part));
        for (int idx : it->second) {
            if (idx <= 0 || idx >= joint_count_)
                throw std::invalid_argument("body part masks: joint index out of range");
            seen.insert(idx);
        }
        total += it->second.size();
    }
    if (seen.size() != total)
        throw std::invalid_argument("body part masks: overlapping joint sets");
    // Root rotation is always carried by trajectory or lower_body; every
    // non-root joint must be owned by exactly one fine part.
    if (seen.size() != static_cast<std::size_t>(joint_count_ - 1))
        throw std::invalid_argument("body part masks: joint sets do not cover all non-root joints");
    if (root_rotation_owner_ != BodyPart::Trajectory && root_rotation_owner_ != BodyPart::LowerBody)
        throw std::invalid_argument("body part masks: root_rotation_owner must be trajectory or lower_body");
}

std::vector<BodyPart> BodyPartConfig::parts_for_level(RetrievalLevel level) const {
    switch (level) {
        case RetrievalLevel::Full:
            return {BodyPart::Full};
        case RetrievalLevel::Half:
            return {BodyPart::UpperBody, BodyPart::LowerBody};
        case RetrievalLevel::Fine:
            return {BodyPart::Head, BodyPart::Torso, BodyPart::LeftArm,
                    BodyPart::RightArm, BodyPart::LowerBody, BodyPart::Trajectory};
    }
    return {};
}

std::vector<BodyPartMask> BodyPartConfig::masks_for_level(RetrievalLevel level) const {
    std::vector<BodyPartMask> masks;
    auto joints = [this](BodyPart p) { return fine_joints_.at(p); };

    switch (level) {
        case RetrievalLevel::Full: {
            BodyPartMask m;
            m.part = BodyPart::Full;
            for (int i = 0; i < joint_count_; ++i) m.joint_indices.push_back(i);
            m.carries_translation = true;
            m.carries_root_rotation = true;
            masks.push_back(std::move(m));
            break;
        }
        case RetrievalLevel::Half: {
            BodyPartMask upper;
            upper.part = BodyPart::UpperBody;
            for (BodyPart p : {BodyPart::Head, BodyPart::Torso, BodyPart::LeftArm, BodyPart::RightArm})
                for (int idx : joints(p)) upper.joint_indices.push_back(idx);
            std::sort(upper.joint_indices.begin(), upper.joint_indices.end());

            // The lower half also owns the global translation and the root
            // rotation ("copy the global translation from" the lower body).
            BodyPartMask lower;
            lower.part = BodyPart::LowerBody;
            lower.joint_indices = joints(BodyPart::LowerBody);
            lower.joint_indices.push_back(0);
            std::sort(lower.joint_indices.begin(), lower.joint_indices.end());
            lower.carries_translation = true;
            lower.carries_root_rotation = true;

            masks.push_back(std::move(upper));
            masks.push_back(std::move(lower));
            break;
        }
        case RetrievalLevel::Fine: {
            for (BodyPart p : {BodyPart::Head, BodyPart::Torso, BodyPart::LeftArm,
                               BodyPart::RightArm, BodyPart::LowerBody}) {
                BodyPartMask m;
                m.part = p;
                m.joint_indices = joints(p);
                masks.push_back(std::move(m));
            }
            BodyPartMask traj;
            traj.part = BodyPart::Trajectory;
            traj.carries_translation = true;
            masks.push_back(std::move(traj));

            BodyPart owner = root_rotation_owner_;
            for (auto& m : masks) {
                if (m.part == owner) {
                    m.carries_root_rotation = true;
                    m.joint_indices.push_back(0);
                    std::sort(m.joint_indices.begin(), m.joint_indices.end());
                }
            }
            break;
        }
    }
    return masks;
}

MotionClip compose_parts(const std::map<BodyPart, MotionClip>& sources, RetrievalLevel level,
                         int target_len, const SkeletonDef& skeleton,
                         const BodyPartConfig& config) {
    if (target_len < 1) throw std::invalid_argument("compose_parts: target_len must be >= 1");
    if (skeleton.joint_count() != config.joint_count())
        throw std::invalid_argument("compose_parts: skeleton does not match mask config");

    auto masks = config.masks_for_level(level);

    if (sources.size() != masks.size())
        throw std::invalid_argument("compose_parts: expected " + std::to_string(masks.size()) +
                                    " parts for level " + to_string(level) + ", got " +
                                    std::to_string(sources.size()));

    std::map<BodyPart, MotionClip> resampled;
    for (const auto& mask : masks) {
        auto it = sources.find(mask.part);
        if (it == sources.end())
            throw std::invalid_argument("compose_parts: missing part " + to_string(mask.part));
        if (it->second.joint_count() != skeleton.joint_count())
            throw std::invalid_argument("compose_parts: source joint count mismatch for part " +
                                        to_string(mask.part));
        resampled[mask.part] = resample_clip(it->second, target_len);
    }

    const int joints = skeleton.joint_count();
    MotionClip out;
    out.root_translation.resize(target_len);
    out.joint_rotations.assign(target_len, std::vector<Quaternion>(joints));

    // Per-channel provenance: exactly one mask owns each channel.
    std::vector<int> owner(joints, -1);
    int translation_owner = -1;
    for (std::size_t m = 0; m < masks.size(); ++m) {
        for (int idx : masks[m].joint_indices) {
            if (owner[idx] != -1)
                throw std::invalid_argument("compose_parts: overlapping masks at joint " +
                                            std::to_string(idx));
            owner[idx] = static_cast<int>(m);
        }
        if (masks[m].carries_translation) translation_owner = static_cast<int>(m);
    }
    for (int j = 0; j < joints; ++j)
        if (owner[j] < 0)
            throw std::invalid_argument("compose_parts: incomplete partition, joint " +
                                        std::to_string(j) + " unowned");
    if (translation_owner < 0)
        throw std::invalid_argument("compose_parts: no part carries the translation");

    const MotionClip& trans_src = resampled.at(masks[translation_owner].part);
    out.fps = trans_src.fps;
    for (int f = 0; f < target_len; ++f) {
        out.root_translation[f] = trans_src.root_translation[f];
        for (int j = 0; j < joints; ++j) {
            const MotionClip& src = resampled.at(masks[owner[j]].part);
            out.joint_rotations[f][j] = src.joint_rotations[f][j];
        }
    }
    return out;
}

}  // namespace rmd
