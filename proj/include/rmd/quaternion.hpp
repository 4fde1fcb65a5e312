#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace rmd {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
};

inline Vec3 lerp(const Vec3& a, const Vec3& b, double u) {
    return {a.x + (b.x - a.x) * u, a.y + (b.y - a.y) * u, a.z + (b.z - a.z) * u};
}

// Unit quaternion (w, x, y, z). q and -q are the same rotation; canonicalized
// forms keep w >= 0.
struct Quaternion {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    static Quaternion identity() { return {1.0, 0.0, 0.0, 0.0}; }

    static Quaternion from_axis_angle(const Vec3& axis, double angle) {
        double n = axis.norm();
        if (n == 0.0) return identity();
        double h = 0.5 * angle;
        double s = std::sin(h) / n;
        return {std::cos(h), axis.x * s, axis.y * s, axis.z * s};
    }

    static Quaternion yaw(double angle) { return from_axis_angle({0, 1, 0}, angle); }

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

    Quaternion normalized() const {
        double n = norm();
        if (n == 0.0) return identity();
        return {w / n, x / n, y / n, z / n};
    }

    Quaternion canonical() const {
        Quaternion q = normalized();
        if (q.w < 0.0) return {-q.w, -q.x, -q.y, -q.z};
        return q;
    }

    Quaternion conjugate() const { return {w, -x, -y, -z}; }

    double dot(const Quaternion& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }

    Quaternion operator*(const Quaternion& o) const {
        return {w * o.w - x * o.x - y * o.y - z * o.z,
                w * o.x + x * o.w + y * o.z - z * o.y,
                w * o.y - x * o.z + y * o.w + z * o.x,
                w * o.z + x * o.y - y * o.x + z * o.w};
    }

    Vec3 rotate(const Vec3& v) const {
        // q v q* with v as a pure quaternion, expanded.
        Vec3 u{x, y, z};
        Vec3 t = u.cross(v) * 2.0;
        return v + t * w + u.cross(t);
    }

    // Row-major 3x3 rotation matrix.
    std::array<double, 9> to_matrix() const {
        double xx = x * x, yy = y * y, zz = z * z;
        double xy = x * y, xz = x * z, yz = y * z;
        double wx = w * x, wy = w * y, wz = w * z;
        return {1 - 2 * (yy + zz), 2 * (xy - wz),     2 * (xz + wy),
                2 * (xy + wz),     1 - 2 * (xx + zz), 2 * (yz - wx),
                2 * (xz - wy),     2 * (yz + wx),     1 - 2 * (xx + yy)};
    }

    static Quaternion from_matrix(const std::array<double, 9>& m) {
        // Shepperd's method: branch on the largest diagonal term.
        double trace = m[0] + m[4] + m[8];
        Quaternion q;
        if (trace > 0.0) {
            double s = std::sqrt(trace + 1.0) * 2.0;
            q = {0.25 * s, (m[7] - m[5]) / s, (m[2] - m[6]) / s, (m[3] - m[1]) / s};
        } else if (m[0] > m[4] && m[0] > m[8]) {
            double s = std::sqrt(1.0 + m[0] - m[4] - m[8]) * 2.0;
            q = {(m[7] - m[5]) / s, 0.25 * s, (m[1] + m[3]) / s, (m[2] + m[6]) / s};
        } else if (m[4] > m[8]) {
            double s = std::sqrt(1.0 + m[4] - m[0] - m[8]) * 2.0;
            q = {(m[2] - m[6]) / s, (m[1] + m[3]) / s, 0.25 * s, (m[5] + m[7]) / s};
        } else {
            double s = std::sqrt(1.0 + m[8] - m[0] - m[4]) * 2.0;
            q = {(m[3] - m[1]) / s, (m[2] + m[6]) / s, (m[5] + m[7]) / s, 0.25 * s};
        }
        return q.normalized();
    }

    // Rotation angle about the Y axis (twist component of the swing-twist
    // decomposition), in (-pi, pi].
    double yaw_angle() const {
        double tw = w, ty = y;
        double n = std::sqrt(tw * tw + ty * ty);
        if (n == 0.0) return 0.0;
        double angle = 2.0 * std::atan2(ty / n, tw / n);
        if (angle > M_PI) angle -= 2.0 * M_PI;
        if (angle <= -M_PI) angle += 2.0 * M_PI;
        return angle;
    }
};

// Shortest-arc spherical interpolation; inputs are normalized defensively.
// Falls back to normalized lerp when the arc is too small for sin division.
Quaternion slerp(const Quaternion& q0, const Quaternion& q1, double u);

// Angle of the relative rotation between two unit quaternions, in [0, pi].
double angle_between(const Quaternion& q0, const Quaternion& q1);

// 6D continuous rotation encoding: the first two columns of the rotation
// matrix, stacked (r00, r10, r20, r01, r11, r21).
std::array<double, 6> quat_to_6d(const Quaternion& q);

// Decode via Gram-Schmidt; the third column is the cross product. Throws
// std::invalid_argument on zero or parallel input columns.
Quaternion quat_from_6d(const std::array<double, 6>& v);

}  // namespace rmd
