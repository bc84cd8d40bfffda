// geometry.hpp - small fixed-capacity vector/matrix types for 2D/3D work.
//
// Vectors are stored 3-wide regardless of the ambient dimension; a 2D vector
// keeps its third component at exactly 0.0, so all arithmetic below is
// dimension-agnostic and planar data stays planar bit-for-bit.

#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace varmatch {

struct Vec {
    std::array<double, 3> c{0.0, 0.0, 0.0};

    Vec() = default;
    Vec(double x, double y) : c{x, y, 0.0} {}
    Vec(double x, double y, double z) : c{x, y, z} {}

    double& operator[](int i) { return c[static_cast<size_t>(i)]; }
    double operator[](int i) const { return c[static_cast<size_t>(i)]; }

    Vec& operator+=(const Vec& o) {
        c[0] += o.c[0]; c[1] += o.c[1]; c[2] += o.c[2];
        return *this;
    }
    Vec& operator-=(const Vec& o) {
        c[0] -= o.c[0]; c[1] -= o.c[1]; c[2] -= o.c[2];
        return *this;
    }
    Vec& operator*=(double s) {
        c[0] *= s; c[1] *= s; c[2] *= s;
        return *this;
    }
};

inline Vec operator+(Vec a, const Vec& b) { return a += b; }
inline Vec operator-(Vec a, const Vec& b) { return a -= b; }
inline Vec operator*(Vec a, double s) { return a *= s; }
inline Vec operator*(double s, Vec a) { return a *= s; }
inline Vec operator-(const Vec& a) { return {-a.c[0], -a.c[1], -a.c[2]}; }

inline double dot(const Vec& a, const Vec& b) {
    return a.c[0] * b.c[0] + a.c[1] * b.c[1] + a.c[2] * b.c[2];
}
inline double squared_norm(const Vec& a) { return dot(a, a); }
inline double norm(const Vec& a) { return std::sqrt(squared_norm(a)); }

inline Vec normalized(const Vec& a) {
    const double n = norm(a);
    if (n < 1e-300) throw std::invalid_argument("cannot normalize a zero vector");
    return a * (1.0 / n);
}

inline Vec cross(const Vec& a, const Vec& b) {
    return {a.c[1] * b.c[2] - a.c[2] * b.c[1],
            a.c[2] * b.c[0] - a.c[0] * b.c[2],
            a.c[0] * b.c[1] - a.c[1] * b.c[0]};
}

inline double max_abs(const Vec& a) {
    return std::max({std::fabs(a.c[0]), std::fabs(a.c[1]), std::fabs(a.c[2])});
}

// Orthogonal projection onto the complement of d: (I - d d^T) v.
inline Vec project_orthogonal(const Vec& d, const Vec& v) {
    return v - d * dot(d, v);
}

// Row-major 3x3 matrix. 2D matrices embed with third row/column equal to e3
// (for transforms) or zero (for velocity Jacobians of planar fields).
struct Mat {
    std::array<double, 9> m{0, 0, 0, 0, 0, 0, 0, 0, 0};

    double& operator()(int i, int j) { return m[static_cast<size_t>(3 * i + j)]; }
    double operator()(int i, int j) const { return m[static_cast<size_t>(3 * i + j)]; }

    static Mat identity() {
        Mat r;
        r(0, 0) = r(1, 1) = r(2, 2) = 1.0;
        return r;
    }

    Vec apply(const Vec& v) const {
        return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
                m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
                m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
    }
    Vec apply_transpose(const Vec& v) const {
        return {m[0] * v[0] + m[3] * v[1] + m[6] * v[2],
                m[1] * v[0] + m[4] * v[1] + m[7] * v[2],
                m[2] * v[0] + m[5] * v[1] + m[8] * v[2]};
    }

    Mat transposed() const {
        Mat r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
        return r;
    }

    Mat& operator+=(const Mat& o) {
        for (size_t i = 0; i < 9; ++i) m[i] += o.m[i];
        return *this;
    }

    double det() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }

    Mat inverse() const {
        const double d = det();
        if (std::fabs(d) < 1e-300) throw std::invalid_argument("singular matrix");
        Mat r;
        r(0, 0) = (m[4] * m[8] - m[5] * m[7]) / d;
        r(0, 1) = (m[2] * m[7] - m[1] * m[8]) / d;
        r(0, 2) = (m[1] * m[5] - m[2] * m[4]) / d;
        r(1, 0) = (m[5] * m[6] - m[3] * m[8]) / d;
        r(1, 1) = (m[0] * m[8] - m[2] * m[6]) / d;
        r(1, 2) = (m[2] * m[3] - m[0] * m[5]) / d;
        r(2, 0) = (m[3] * m[7] - m[4] * m[6]) / d;
        r(2, 1) = (m[1] * m[6] - m[0] * m[7]) / d;
        r(2, 2) = (m[0] * m[4] - m[1] * m[3]) / d;
        return r;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (double v : m) s += v * v;
        return std::sqrt(s);
    }
};

inline Mat operator*(const Mat& a, const Mat& b) {
    Mat r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += a(i, k) * b(k, j);
            r(i, j) = s;
        }
    return r;
}

// Outer product a b^T.
inline Mat outer(const Vec& a, const Vec& b) {
    Mat r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r(i, j) = a[i] * b[j];
    return r;
}

// Rotation by angle (radians) in the xy-plane, embedded as a 3x3 transform.
inline Mat rotation_2d(double angle) {
    Mat r = Mat::identity();
    const double cs = std::cos(angle), sn = std::sin(angle);
    r(0, 0) = cs; r(0, 1) = -sn;
    r(1, 0) = sn; r(1, 1) = cs;
    return r;
}

// Rotation about a 3D axis by angle (Rodrigues).
inline Mat rotation_3d(const Vec& axis, double angle) {
    const Vec k = normalized(axis);
    const double cs = std::cos(angle), sn = std::sin(angle);
    Mat r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r(i, j) = (i == j ? cs : 0.0) + (1.0 - cs) * k[i] * k[j];
    r(0, 1) += -sn * k[2]; r(0, 2) += sn * k[1];
    r(1, 0) += sn * k[2];  r(1, 2) += -sn * k[0];
    r(2, 0) += -sn * k[1]; r(2, 1) += sn * k[0];
    return r;
}

// Frobenius-based condition estimate, an upper bound on the 2-norm condition.
inline double condition_estimate(const Mat& a) {
    return a.frobenius_norm() * a.inverse().frobenius_norm();
}

}  // namespace varmatch
