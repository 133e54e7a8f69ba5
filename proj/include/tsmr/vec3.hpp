#pragma once

#include <cmath>

namespace tsmr {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }

    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    Vec3& operator-=(const Vec3& o) {
        x -= o.x;
        y -= o.y;
        z -= o.z;
        return *this;
    }
    Vec3& operator*=(double s) {
        x *= s;
        y *= s;
        z *= s;
        return *this;
    }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm2() const { return dot(*this); }
    double norm() const { return std::sqrt(norm2()); }
    Vec3 normalized() const {
        const double n = norm();
        return n > 0.0 ? *this / n : Vec3{};
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// 3x3 rotation matrix, row-major.
struct Mat3 {
    double m[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

    Vec3 apply(const Vec3& v) const {
        return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
                m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
                m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
    }
};

// Minimal rotation taking unit vector a onto unit vector b (Rodrigues).
inline Mat3 rotation_between(const Vec3& a, const Vec3& b) {
    const Vec3 v = a.cross(b);
    const double c = a.dot(b);
    Mat3 r;
    if (c < -1.0 + 1e-12) {
        // Opposite vectors: rotate pi about any axis orthogonal to a.
        Vec3 axis = std::fabs(a.x) < 0.9 ? Vec3{1, 0, 0}.cross(a) : Vec3{0, 1, 0}.cross(a);
        axis = axis.normalized();
        const double ax = axis.x, ay = axis.y, az = axis.z;
        r.m[0][0] = 2 * ax * ax - 1;
        r.m[0][1] = 2 * ax * ay;
        r.m[0][2] = 2 * ax * az;
        r.m[1][0] = 2 * ay * ax;
        r.m[1][1] = 2 * ay * ay - 1;
        r.m[1][2] = 2 * ay * az;
        r.m[2][0] = 2 * az * ax;
        r.m[2][1] = 2 * az * ay;
        r.m[2][2] = 2 * az * az - 1;
        return r;
    }
    const double k = 1.0 / (1.0 + c);
    r.m[0][0] = v.x * v.x * k + c;
    r.m[0][1] = v.x * v.y * k - v.z;
    r.m[0][2] = v.x * v.z * k + v.y;
    r.m[1][0] = v.y * v.x * k + v.z;
    r.m[1][1] = v.y * v.y * k + c;
    r.m[1][2] = v.y * v.z * k - v.x;
    r.m[2][0] = v.z * v.x * k - v.y;
    r.m[2][1] = v.z * v.y * k + v.x;
    r.m[2][2] = v.z * v.z * k + c;
    return r;
}

} // namespace tsmr
