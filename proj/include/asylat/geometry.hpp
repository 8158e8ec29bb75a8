#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <numeric>
#include <optional>

namespace asylat {

/// A point or displacement in the spectral plane.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
    friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend constexpr Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
    friend constexpr bool operator==(Vec2, Vec2) = default;
};

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
constexpr double norm2(Vec2 a) { return dot(a, a); }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

/// Strict total order used for tie-breaking equidistant candidates.
constexpr bool lex_less(Vec2 a, Vec2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); }

/// Real 2x2 matrix, row major: [[a, b], [c, d]].
struct Mat2 {
    double a = 1.0, b = 0.0, c = 0.0, d = 1.0;

    static constexpr Mat2 identity() { return {}; }
    static constexpr Mat2 from_columns(Vec2 c0, Vec2 c1) { return {c0.x, c1.x, c0.y, c1.y}; }

    constexpr double det() const { return a * d - b * c; }
    constexpr Vec2 col0() const { return {a, c}; }
    constexpr Vec2 col1() const { return {b, d}; }

    /// Inverse; nullopt when the determinant is exactly zero.
    constexpr std::optional<Mat2> inverse() const {
        const double dt = det();
        if (dt == 0.0) return std::nullopt;
        return Mat2{d / dt, -b / dt, -c / dt, a / dt};
    }

    friend constexpr Vec2 operator*(const Mat2& m, Vec2 v) {
        return {m.a * v.x + m.b * v.y, m.c * v.x + m.d * v.y};
    }
    friend constexpr Mat2 operator*(const Mat2& m, const Mat2& n) {
        return {m.a * n.a + m.b * n.c, m.a * n.b + m.b * n.d,
                m.c * n.a + m.d * n.c, m.c * n.b + m.d * n.d};
    }
    friend constexpr Mat2 operator+(const Mat2& m, const Mat2& n) {
        return {m.a + n.a, m.b + n.b, m.c + n.c, m.d + n.d};
    }
    friend constexpr Mat2 operator-(const Mat2& m, const Mat2& n) {
        return {m.a - n.a, m.b - n.b, m.c - n.c, m.d - n.d};
    }
    friend constexpr bool operator==(const Mat2&, const Mat2&) = default;

    constexpr double max_abs() const {
        auto ab = [](double v) { return v < 0 ? -v : v; };
        double m = ab(a);
        for (double v : {b, c, d}) m = ab(v) > m ? ab(v) : m;
        return m;
    }
};

/// An integer lattice index (k1, k2).
struct Label {
    std::int64_t k1 = 0;
    std::int64_t k2 = 0;

    friend constexpr Label operator+(Label a, Label b) { return {a.k1 + b.k1, a.k2 + b.k2}; }
    friend constexpr Label operator-(Label a, Label b) { return {a.k1 - b.k1, a.k2 - b.k2}; }
    friend constexpr Label operator-(Label a) { return {-a.k1, -a.k2}; }
    friend constexpr auto operator<=>(Label, Label) = default;
};

/// Integer 2x2 matrix acting on labels.
struct IntMat2 {
    std::int64_t a = 1, b = 0, c = 0, d = 1;

    static constexpr IntMat2 identity() { return {}; }
    constexpr std::int64_t det() const { return a * d - b * c; }
    constexpr bool is_identity() const { return a == 1 && b == 0 && c == 0 && d == 1; }

    /// Inverse of a unimodular matrix (det = +-1).
    constexpr IntMat2 unimodular_inverse() const {
        const std::int64_t dt = det();
        return {d * dt, -b * dt, -c * dt, a * dt};
    }

    Mat2 to_real() const {
        return {static_cast<double>(a), static_cast<double>(b), static_cast<double>(c),
                static_cast<double>(d)};
    }

    friend constexpr Label operator*(const IntMat2& m, Label v) {
        return {m.a * v.k1 + m.b * v.k2, m.c * v.k1 + m.d * v.k2};
    }
    friend constexpr IntMat2 operator*(const IntMat2& m, const IntMat2& n) {
        return {m.a * n.a + m.b * n.c, m.a * n.b + m.b * n.d,
                m.c * n.a + m.d * n.c, m.c * n.b + m.d * n.d};
    }
    friend constexpr bool operator==(const IntMat2&, const IntMat2&) = default;
};

inline Vec2 to_vec(Label k) { return {static_cast<double>(k.k1), static_cast<double>(k.k2)}; }

/// An affine relabelling k -> M k + t.
struct Witness {
    IntMat2 matrix;
    Label shift;

    constexpr Label apply(Label k) const { return matrix * k + shift; }
    /// (M, t)^-1 = (M^-1, -M^-1 t), valid for unimodular M.
    constexpr Witness inverse() const {
        const IntMat2 inv = matrix.unimodular_inverse();
        return {inv, -(inv * shift)};
    }
    friend constexpr bool operator==(const Witness&, const Witness&) = default;
};

/// Axis-aligned rectangle [min, max].
struct Rect {
    Vec2 min;
    Vec2 max;

    constexpr double width() const { return max.x - min.x; }
    constexpr double height() const { return max.y - min.y; }
    constexpr Vec2 center() const { return {(min.x + max.x) / 2, (min.y + max.y) / 2}; }

    /// Closed containment with a relative slack of `rel_tol` of the larger side.
    bool contains(Vec2 p, double rel_tol = 1e-12) const {
        const double tol = rel_tol * std::max(width(), height());
        return p.x >= min.x - tol && p.x <= max.x + tol && p.y >= min.y - tol &&
               p.y <= max.y + tol;
    }
    constexpr Rect shrunk(double margin) const {
        return {{min.x + margin, min.y + margin}, {max.x - margin, max.y - margin}};
    }
    friend constexpr bool operator==(const Rect&, const Rect&) = default;
};

}  // namespace asylat
