#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "asylat/errors.hpp"
#include "asylat/geometry.hpp"

namespace asylat {

/// Number of bivariate monomials of total degree <= `degree`.
constexpr std::size_t monomial_count(int degree) {
    return static_cast<std::size_t>((degree + 1) * (degree + 2) / 2);
}

/// Exponents (p, q) of the monomial u^p v^q at position `index`.
/// Ordering: by total degree, then by ascending power of v.
inline std::pair<int, int> monomial_exponents(std::size_t index) {
    int t = 0;
    while (monomial_count(t) <= index) ++t;
    const std::size_t base = t == 0 ? 0 : monomial_count(t - 1);
    const int q = static_cast<int>(index - base);
    return {t - q, q};
}

inline std::size_t monomial_index(int p, int q) {
    const int t = p + q;
    return (t == 0 ? 0 : monomial_count(t - 1)) + static_cast<std::size_t>(q);
}

/// Polynomial map R^2 -> R^2 in normalized monomials
/// u = (x - center.x) / scale.x, v = (y - center.y) / scale.y.
class PolyMap2 {
public:
    PolyMap2() : PolyMap2(0) {}

    explicit PolyMap2(int degree, Vec2 center = {0.0, 0.0}, Vec2 scale = {1.0, 1.0})
        : degree_(degree),
          center_(center),
          scale_(scale),
          cx_(monomial_count(degree), 0.0),
          cy_(monomial_count(degree), 0.0) {
        if (degree < 0) throw InvalidArgument("polynomial degree must be nonnegative");
        if (!(scale.x > 0.0) || !(scale.y > 0.0))
            throw InvalidArgument("polynomial scale must be positive");
    }

    PolyMap2(int degree, Vec2 center, Vec2 scale, std::vector<double> cx, std::vector<double> cy)
        : PolyMap2(degree, center, scale) {
        if (cx.size() != monomial_count(degree) || cy.size() != monomial_count(degree))
            throw InvalidArgument("coefficient array length does not match degree");
        cx_ = std::move(cx);
        cy_ = std::move(cy);
    }

    static PolyMap2 constant(Vec2 value) {
        PolyMap2 m(0);
        m.cx_[0] = value.x;
        m.cy_[0] = value.y;
        return m;
    }

    /// (x, y) -> A (x, y) + b.
    static PolyMap2 affine(const Mat2& a, Vec2 b) {
        PolyMap2 m(1);
        m.cx_ = {b.x, a.a, a.b};
        m.cy_ = {b.y, a.c, a.d};
        return m;
    }

    int degree() const { return degree_; }
    Vec2 center() const { return center_; }
    Vec2 scale() const { return scale_; }
    const std::vector<double>& coeffs_x() const { return cx_; }
    const std::vector<double>& coeffs_y() const { return cy_; }

    /// Sets the coefficient of u^p v^q for both output components.
    void set(int p, int q, Vec2 value) {
        const auto i = monomial_index(p, q);
        if (i >= cx_.size()) throw InvalidArgument("monomial exceeds polynomial degree");
        cx_[i] = value.x;
        cy_[i] = value.y;
    }
    Vec2 get(int p, int q) const {
        const auto i = monomial_index(p, q);
        if (i >= cx_.size()) return {};
        return {cx_[i], cy_[i]};
    }

    Vec2 normalize(Vec2 p) const {
        return {(p.x - center_.x) / scale_.x, (p.y - center_.y) / scale_.y};
    }

    /// Values of every normalized monomial at `p`, in coefficient order.
    std::vector<double> basis(Vec2 p) const { return basis_values(degree_, normalize(p)); }

    static std::vector<double> basis_values(int degree, Vec2 uv) {
        std::vector<double> out(monomial_count(degree));
        std::vector<double> up(degree + 1, 1.0), vp(degree + 1, 1.0);
        for (int i = 1; i <= degree; ++i) {
            up[i] = up[i - 1] * uv.x;
            vp[i] = vp[i - 1] * uv.y;
        }
        std::size_t i = 0;
        for (int t = 0; t <= degree; ++t)
            for (int q = 0; q <= t; ++q) out[i++] = up[t - q] * vp[q];
        return out;
    }

    /// Partial derivatives of every monomial with respect to the raw x and y.
    std::pair<std::vector<double>, std::vector<double>> basis_gradient(Vec2 p) const {
        const Vec2 uv = normalize(p);
        const std::size_t n = monomial_count(degree_);
        std::vector<double> dx(n, 0.0), dy(n, 0.0);
        auto pw = [](double b, int e) {
            double r = 1.0;
            for (int i = 0; i < e; ++i) r *= b;
            return r;
        };
        std::size_t i = 0;
        for (int t = 0; t <= degree_; ++t) {
            for (int q = 0; q <= t; ++q, ++i) {
                const int pe = t - q;
                if (pe > 0) dx[i] = pe * pw(uv.x, pe - 1) * pw(uv.y, q) / scale_.x;
                if (q > 0) dy[i] = q * pw(uv.x, pe) * pw(uv.y, q - 1) / scale_.y;
            }
        }
        return {std::move(dx), std::move(dy)};
    }

    Vec2 operator()(Vec2 p) const {
        const auto b = basis(p);
        Vec2 r;
        for (std::size_t i = 0; i < b.size(); ++i) {
            r.x += cx_[i] * b[i];
            r.y += cy_[i] * b[i];
        }
        return r;
    }

    /// Exact Jacobian [[dX/dx, dX/dy], [dY/dx, dY/dy]].
    Mat2 jacobian(Vec2 p) const {
        const auto [dx, dy] = basis_gradient(p);
        Mat2 j{0, 0, 0, 0};
        for (std::size_t i = 0; i < dx.size(); ++i) {
            j.a += cx_[i] * dx[i];
            j.b += cx_[i] * dy[i];
            j.c += cy_[i] * dx[i];
            j.d += cy_[i] * dy[i];
        }
        return j;
    }

    /// The same map expressed in raw monomials x^p y^q (center 0, scale 1).
    PolyMap2 to_raw() const {
        PolyMap2 raw(degree_);
        auto binom = [](int n, int k) {
            double r = 1.0;
            for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
            return r;
        };
        auto pw = [](double b, int e) {
            double r = 1.0;
            for (int i = 0; i < e; ++i) r *= b;
            return r;
        };
        std::size_t idx = 0;
        for (int t = 0; t <= degree_; ++t) {
            for (int q = 0; q <= t; ++q, ++idx) {
                const int p = t - q;
                // ((x - cx)/sx)^p ((y - cy)/sy)^q expanded term by term.
                const double norm = 1.0 / (pw(scale_.x, p) * pw(scale_.y, q));
                for (int i = 0; i <= p; ++i) {
                    const double fx = binom(p, i) * pw(-center_.x, p - i);
                    for (int j = 0; j <= q; ++j) {
                        const double f = norm * fx * binom(q, j) * pw(-center_.y, q - j);
                        const auto r = monomial_index(i, j);
                        raw.cx_[r] += f * cx_[idx];
                        raw.cy_[r] += f * cy_[idx];
                    }
                }
            }
        }
        return raw;
    }

    friend bool operator==(const PolyMap2&, const PolyMap2&) = default;

private:
    int degree_;
    Vec2 center_;
    Vec2 scale_;
    std::vector<double> cx_;
    std::vector<double> cy_;
};

/// Largest absolute difference between the raw-monomial coefficients of two maps.
inline double max_coefficient_difference(const PolyMap2& f, const PolyMap2& g) {
    const PolyMap2 rf = f.to_raw();
    const PolyMap2 rg = g.to_raw();
    const int deg = std::max(rf.degree(), rg.degree());
    double worst = 0.0;
    for (int t = 0; t <= deg; ++t) {
        for (int q = 0; q <= t; ++q) {
            const Vec2 d = rf.get(t - q, q) - rg.get(t - q, q);
            worst = std::max({worst, std::abs(d.x), std::abs(d.y)});
        }
    }
    return worst;
}

}  // namespace asylat
