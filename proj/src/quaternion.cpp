#include "rmd/quaternion.hpp"

#include <algorithm>

namespace rmd {

Quaternion slerp(const Quaternion& q0_in, const Quaternion& q1_in, double u) {
    Quaternion q0 = q0_in.normalized();
    Quaternion q1 = q1_in.normalized();

    double d = q0.dot(q1);
    if (d < 0.0) {
        q1 = {-q1.w, -q1.x, -q1.y, -q1.z};
        d = -d;
    }

    if (d > 1.0 - 1e-7) {
        // Near-parallel: nlerp, indistinguishable at this angle.
        Quaternion q{q0.w + (q1.w - q0.w) * u, q0.x + (q1.x - q0.x) * u,
                     q0.y + (q1.y - q0.y) * u, q0.z + (q1.z - q0.z) * u};
        return q.normalized();
    }

    double theta = std::acos(std::clamp(d, -1.0, 1.0));
    double s = std::sin(theta);
    double a = std::sin((1.0 - u) * theta) / s;
    double b = std::sin(u * theta) / s;
    Quaternion q{a * q0.w + b * q1.w, a * q0.x + b * q1.x,
                 a * q0.y + b * q1.y, a * q0.z + b * q1.z};
    return q.normalized();
}

double angle_between(const Quaternion& q0, const Quaternion& q1) {
    double d = std::abs(q0.normalized().dot(q1.normalized()));
    return 2.0 * std::acos(std::clamp(d, 0.0, 1.0));
}

std::array<double, 6> quat_to_6d(const Quaternion& q) {
    auto m = q.to_matrix();
    return {m[0], m[3], m[6], m[1], m[4], m[7]};
}

Quaternion quat_from_6d(const std::array<double, 6>& v) {
    Vec3 a1{v[0], v[1], v[2]};
    Vec3 a2{v[3], v[4], v[5]};

    double n1 = a1.norm();
    if (n1 < 1e-12) throw std::invalid_argument("6d rotation: first column is zero");
    Vec3 b1 = a1 * (1.0 / n1);

    Vec3 proj = b1 * b1.dot(a2);
    Vec3 r2 = a2 - proj;
    double n2 = r2.norm();
    if (n2 < 1e-12) throw std::invalid_argument("6d rotation: columns are parallel");
    Vec3 b2 = r2 * (1.0 / n2);

    Vec3 b3 = b1.cross(b2);
    return Quaternion::from_matrix({b1.x, b2.x, b3.x,
                                    b1.y, b2.y, b3.y,
                                    b1.z, b2.z, b3.z});
}

}  // namespace rmd
