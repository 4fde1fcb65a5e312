#include "rmd/pose_features.hpp"

#include <cmath>

#include "rmd/errors.hpp"
#include "rmd/json_io.hpp"

namespace rmd {

namespace {

double wrap_angle(double a) {
    while (a > M_PI) a -= 2.0 * M_PI;
    while (a <= -M_PI) a += 2.0 * M_PI;
    return a;
}

Vec3 rotate_y(double angle, const Vec3& v) {
    double c = std::cos(angle), s = std::sin(angle);
    return {c * v.x + s * v.z, v.y, -s * v.x + c * v.z};
}

}  // namespace

FeatureLayout FeatureLayout::for_joints(int joints) {
    if (joints < 2) throw std::invalid_argument("feature layout: need at least 2 joints");
    FeatureLayout l;
    l.joints = joints;
    l.root_offset = 0;
    l.jp_offset = 4;
    l.jr_offset = l.jp_offset + (joints - 1) * 3;
    l.jv_offset = l.jr_offset + (joints - 1) * 6;
    l.contacts_offset = l.jv_offset + joints * 3;
    l.width = l.contacts_offset + 4;
    return l;
}

PoseFeatureSequence PoseFeatureSequence::zeros(int frames, int width) {
    PoseFeatureSequence f;
    f.width = width;
    f.data.assign(static_cast<std::size_t>(frames) * width, 0.0);
    return f;
}

PoseFeatureSequence to_pose_features(const MotionClip& clip, const SkeletonDef& skeleton,
                                     const PoseFeatureOptions& options) {
    if (clip.length() < 2)
        throw std::invalid_argument("to_pose_features: need at least 2 frames");
    if (clip.joint_count() != skeleton.joint_count())
        throw std::invalid_argument("to_pose_features: joint count mismatch");

    const int frames = clip.length();
    const int joints = skeleton.joint_count();
    const FeatureLayout layout = FeatureLayout::for_joints(joints);
    for (int fj : options.foot_joints)
        if (fj < 0 || fj >= joints)
            throw std::invalid_argument("to_pose_features: foot joint index out of range");

    auto positions = forward_kinematics(clip, skeleton);

    std::vector<double> yaw(frames);
    for (int f = 0; f < frames; ++f) yaw[f] = clip.joint_rotations[f][0].yaw_angle();

    PoseFeatureSequence out = PoseFeatureSequence::zeros(frames, layout.width);

    for (int f = 0; f < frames; ++f) {
        double* row = out.row(f);
        const int fd = (f < frames - 1) ? f : frames - 2;  // frame used for forward differences

        row[0] = wrap_angle(yaw[fd + 1] - yaw[fd]);

        Vec3 root_delta = clip.root_translation[fd + 1] - clip.root_translation[fd];
        Vec3 local_vel = rotate_y(-yaw[fd], root_delta);
        row[1] = local_vel.x;
        row[2] = local_vel.z;
        row[3] = clip.root_translation[f].y;

        const Vec3& root = clip.root_translation[f];
        for (int j = 1; j < joints; ++j) {
            Vec3 rel = positions[f][j] - Vec3{root.x, 0.0, root.z};
            Vec3 local = rotate_y(-yaw[f], rel);
            double* p = row + layout.jp_offset + (j - 1) * 3;
            p[0] = local.x;
            p[1] = local.y;
            p[2] = local.z;
        }

        for (int j = 1; j < joints; ++j) {
            auto sixd = quat_to_6d(clip.joint_rotations[f][j].normalized());
            double* r = row + layout.jr_offset + (j - 1) * 6;
            for (int k = 0; k < 6; ++k) r[k] = sixd[k];
        }

        for (int j = 0; j < joints; ++j) {
            Vec3 v = positions[fd + 1][j] - positions[fd][j];
            double* p = row + layout.jv_offset + j * 3;
            p[0] = v.x;
            p[1] = v.y;
            p[2] = v.z;
        }

        for (int k = 0; k < 4; ++k) {
            int j = options.foot_joints[k];
            Vec3 v = positions[fd + 1][j] - positions[fd][j];
            row[layout.contacts_offset + k] = (v.dot(v) < options.contact_threshold_sq) ? 1.0 : 0.0;
        }
    }
    return out;
}

MotionClip from_pose_features(const PoseFeatureSequence& features, const SkeletonDef& skeleton,
                              double fps) {
    const int joints = skeleton.joint_count();
    const FeatureLayout layout = FeatureLayout::for_joints(joints);
    if (features.width != layout.width)
        throw std::invalid_argument("from_pose_features: feature width " +
                                    std::to_string(features.width) + " does not match skeleton (" +
                                    std::to_string(layout.width) + ")");
    const int frames = features.frames();
    if (frames < 1) throw std::invalid_argument("from_pose_features: empty sequence");

    std::vector<double> yaw(frames, 0.0);
    for (int f = 0; f + 1 < frames; ++f) yaw[f + 1] = yaw[f] + features.row(f)[0];

    MotionClip clip;
    clip.fps = fps;
    clip.root_translation.resize(frames);
    clip.joint_rotations.assign(frames, std::vector<Quaternion>(joints));

    double x = 0.0, z = 0.0;
    for (int f = 0; f < frames; ++f) {
        const double* row = features.row(f);
        clip.root_translation[f] = {x, row[3], z};
        if (f + 1 < frames) {
            Vec3 world = rotate_y(yaw[f], {row[1], 0.0, row[2]});
            x += world.x;
            z += world.z;
        }
    }

    for (int f = 0; f < frames; ++f) {
        const double* row = features.row(f);
        clip.joint_rotations[f][0] = Quaternion::yaw(yaw[f]);
        for (int j = 1; j < joints; ++j) {
            std::array<double, 6> sixd;
            const double* r = row + layout.jr_offset + (j - 1) * 6;
            for (int k = 0; k < 6; ++k) sixd[k] = r[k];
            try {
                clip.joint_rotations[f][j] = quat_from_6d(sixd);
            } catch (const std::invalid_argument& e) {
                throw std::invalid_argument("from_pose_features: frame " + std::to_string(f) +
                                            " joint " + std::to_string(j) + ": " + e.what());
            }
        }
    }
    return clip;
}

PoseFeatureSequence load_features(const std::string& path) {
    json j = read_json_file(path);
    if (!j.contains("schema_version") || j["schema_version"].get<int>() != 1)
        throw InputError(path + ": unsupported feature schema_version");
    PoseFeatureSequence f;
    try {
        f.width = j.at("feature_dim").get<int>();
        if (f.width < 1) throw InputError(path + ": feature_dim must be positive");
        for (const auto& row : j.at("frames")) {
            if (static_cast<int>(row.size()) != f.width)
                throw InputError(path + ": frame width does not match feature_dim");
            for (const auto& v : row) f.data.push_back(v.get<double>());
        }
    } catch (const json::exception& e) {
        throw InputError(path + ": bad feature file: " + e.what());
    }
    return f;
}

void save_features(const std::string& path, const PoseFeatureSequence& features) {
    json j;
    j["schema_version"] = 1;
    j["feature_dim"] = features.width;
    json frames = json::array();
    for (int f = 0; f < features.frames(); ++f) {
        const double* row = features.row(f);
        frames.push_back(quantized_array(std::vector<double>(row, row + features.width)));
    }
    j["frames"] = frames;
    write_json_file(path, j);
}

PoseFeatureSequence FeatureStats::normalize(const PoseFeatureSequence& f) const {
    if (static_cast<int>(mean.size()) != f.width)
        throw std::invalid_argument("feature stats: width mismatch");
    PoseFeatureSequence out = f;
    for (int r = 0; r < out.frames(); ++r) {
        double* row = out.row(r);
        for (int c = 0; c < out.width; ++c) row[c] = (row[c] - mean[c]) / std_dev[c];
    }
    return out;
}

PoseFeatureSequence FeatureStats::denormalize(const PoseFeatureSequence& f) const {
    if (static_cast<int>(mean.size()) != f.width)
        throw std::invalid_argument("feature stats: width mismatch");
    PoseFeatureSequence out = f;
    for (int r = 0; r < out.frames(); ++r) {
        double* row = out.row(r);
        for (int c = 0; c < out.width; ++c) row[c] = row[c] * std_dev[c] + mean[c];
    }
    return out;
}

void FeatureStatsAccumulator::add(const PoseFeatureSequence& f) {
    if (sum_.empty()) {
        sum_.assign(f.width, 0.0);
        sum_sq_.assign(f.width, 0.0);
    }
    if (static_cast<int>(sum_.size()) != f.width)
        throw std::invalid_argument("feature stats: width mismatch across clips");
    for (int r = 0; r < f.frames(); ++r) {
        const double* row = f.row(r);
        for (int c = 0; c < f.width; ++c) {
            sum_[c] += row[c];
            sum_sq_[c] += row[c] * row[c];
        }
        ++count_;
    }
}

FeatureStats FeatureStatsAccumulator::finalize() const {
    if (count_ == 0) throw std::invalid_argument("feature stats: no frames accumulated");
    FeatureStats s;
    s.mean.resize(sum_.size());
    s.std_dev.resize(sum_.size());
    for (std::size_t c = 0; c < sum_.size(); ++c) {
        double mean = sum_[c] / static_cast<double>(count_);
        double var = sum_sq_[c] / static_cast<double>(count_) - mean * mean;
        if (var < 0.0) var = 0.0;
        s.mean[c] = mean;
        s.std_dev[c] = std::max(std::sqrt(var), 1e-6);
    }
    return s;
}

}  // namespace rmd
