#include "rmd/motion.hpp"

#include <cmath>

#include "rmd/errors.hpp"
#include "rmd/json_io.hpp"

namespace rmd {

void MotionClip::validate() const {
    if (length() < 1) throw std::invalid_argument("motion clip: length must be >= 1");
    if (joint_rotations.size() != root_translation.size())
        throw std::invalid_argument("motion clip: frame counts disagree");
    const std::size_t j = joint_rotations[0].size();
    for (const auto& frame : joint_rotations)
        if (frame.size() != j)
            throw std::invalid_argument("motion clip: ragged joint rotations");
    for (const auto& t : root_translation)
        if (!std::isfinite(t.x) || !std::isfinite(t.y) || !std::isfinite(t.z))
            throw std::invalid_argument("motion clip: non-finite translation");
}

MotionClip resample_clip(const MotionClip& clip, int target_len) {
    if (target_len < 1) throw std::invalid_argument("resample_clip: target_len must be >= 1");
    clip.validate();

    const int src_len = clip.length();
    const int joints = clip.joint_count();

    MotionClip out;
    out.fps = clip.fps;
    out.root_translation.resize(target_len);
    out.joint_rotations.assign(target_len, std::vector<Quaternion>(joints));

    for (int f = 0; f < target_len; ++f) {
        double pos;
        if (target_len == 1 || src_len == 1) {
            pos = 0.0;
        } else {
            pos = static_cast<double>(f) * (src_len - 1) / (target_len - 1);
        }
        int i0 = static_cast<int>(pos);
        if (i0 >= src_len - 1) i0 = src_len - 1;
        int i1 = std::min(i0 + 1, src_len - 1);
        double u = pos - i0;

        if (u == 0.0 || i0 == i1) {
            out.root_translation[f] = clip.root_translation[i0];
            out.joint_rotations[f] = clip.joint_rotations[i0];
        } else {
            out.root_translation[f] = lerp(clip.root_translation[i0], clip.root_translation[i1], u);
            for (int j = 0; j < joints; ++j)
                out.joint_rotations[f][j] =
                    slerp(clip.joint_rotations[i0][j], clip.joint_rotations[i1][j], u);
        }
    }
    return out;
}

std::vector<std::vector<Quaternion>> global_rotations(const MotionClip& clip,
                                                      const SkeletonDef& skeleton) {
    if (clip.joint_count() != skeleton.joint_count())
        throw std::invalid_argument("forward kinematics: joint count mismatch");
    const int frames = clip.length();
    const int joints = skeleton.joint_count();

    std::vector<std::vector<Quaternion>> global(frames, std::vector<Quaternion>(joints));
    for (int f = 0; f < frames; ++f) {
        for (int j = 0; j < joints; ++j) {
            int p = skeleton.parent_index[j];
            if (p < 0)
                global[f][j] = clip.joint_rotations[f][j].normalized();
            else
                global[f][j] = (global[f][p] * clip.joint_rotations[f][j]).normalized();
        }
    }
    return global;
}

std::vector<std::vector<Vec3>> forward_kinematics(const MotionClip& clip,
                                                  const SkeletonDef& skeleton) {
    if (clip.joint_count() != skeleton.joint_count())
        throw std::invalid_argument("forward kinematics: joint count mismatch");
    const int frames = clip.length();
    const int joints = skeleton.joint_count();

    std::vector<std::vector<Vec3>> positions(frames, std::vector<Vec3>(joints));
    std::vector<Quaternion> global(joints);
    for (int f = 0; f < frames; ++f) {
        for (int j = 0; j < joints; ++j) {
            int p = skeleton.parent_index[j];
            if (p < 0) {
                global[j] = clip.joint_rotations[f][j].normalized();
                positions[f][j] = clip.root_translation[f];
            } else {
                positions[f][j] = positions[f][p] + global[p].rotate(skeleton.rest_offsets[j]);
                global[j] = (global[p] * clip.joint_rotations[f][j]).normalized();
            }
        }
    }
    return positions;
}

MotionFile load_motion(const std::string& path) {
    json j = read_json_file(path);
    if (!j.contains("schema_version") || j["schema_version"].get<int>() != 1)
        throw InputError(path + ": unsupported motion schema_version");

    MotionFile mf;
    try {
        mf.skeleton.joint_names = j.at("joint_names").get<std::vector<std::string>>();
        mf.skeleton.parent_index = j.at("parent_index").get<std::vector<int>>();
        for (const auto& o : j.at("rest_offsets"))
            mf.skeleton.rest_offsets.push_back(
                {o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()});
        mf.skeleton.validate();

        mf.clip.fps = j.at("fps").get<double>();
        for (const auto& t : j.at("root_translation"))
            mf.clip.root_translation.push_back(
                {t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>()});
        for (const auto& frame : j.at("joint_rotations")) {
            std::vector<Quaternion> row;
            for (const auto& q : frame)
                row.push_back(Quaternion{q.at(0).get<double>(), q.at(1).get<double>(),
                                         q.at(2).get<double>(), q.at(3).get<double>()}
                                  .normalized());
            mf.clip.joint_rotations.push_back(std::move(row));
        }
    } catch (const json::exception& e) {
        throw InputError(path + ": bad motion file: " + e.what());
    }
    mf.clip.validate();
    if (mf.clip.joint_count() != mf.skeleton.joint_count())
        throw InputError(path + ": joint count mismatch between rotations and skeleton");
    return mf;
}

void save_motion(const std::string& path, const MotionClip& clip, const SkeletonDef& skeleton) {
    clip.validate();
    if (clip.joint_count() != skeleton.joint_count())
        throw std::invalid_argument("save_motion: joint count mismatch");

    json j;
    j["schema_version"] = 1;
    j["fps"] = quantize9(clip.fps);
    j["joint_names"] = skeleton.joint_names;
    j["parent_index"] = skeleton.parent_index;
    json offsets = json::array();
    for (const auto& o : skeleton.rest_offsets)
        offsets.push_back(quantized_array({o.x, o.y, o.z}));
    j["rest_offsets"] = offsets;

    json trans = json::array();
    for (const auto& t : clip.root_translation)
        trans.push_back(quantized_array({t.x, t.y, t.z}));
    j["root_translation"] = trans;

    json rots = json::array();
    for (const auto& frame : clip.joint_rotations) {
        json row = json::array();
        for (const auto& q : frame) row.push_back(quantized_array({q.w, q.x, q.y, q.z}));
        rots.push_back(row);
    }
    j["joint_rotations"] = rots;

    write_json_file(path, j);
}

}  // namespace rmd
