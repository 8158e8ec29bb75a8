#pragma once

// Inverse problem: from labelled slices, fit the chart jet G_hbar = G_0 + hbar G_1
// by linear least squares, then read Jacobians and rotation numbers off the fitted G_0.
//
// Rotation-number convention: rho = (DG0^-1)_21 / (DG0^-1)_11 = -J_21 / J_22, where
// J = DG0 at the preimage of the requested spectral point. The full inverse Jacobian is
// returned alongside so callers can form other conventions.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "asylat/errors.hpp"
#include "asylat/geometry.hpp"
#include "asylat/lattice_model.hpp"
#include "asylat/polynomial.hpp"

namespace asylat {

enum class OriginMode {
    /// Labels are absolute: hbar k is the true action.
    absolute,
    /// Each slice carries its own label origin; a free action-space shift s_j is fitted
    /// per slice, G_hbar(hbar k + s_j) (slice 0 is the reference).
    per_slice,
};

inline std::string_view to_string(OriginMode m) {
    return m == OriginMode::per_slice ? "per_slice" : "absolute";
}

struct FitOptions {
    int degree = 1;
    int jet_order = 0;
    OriginMode origin = OriginMode::absolute;
    /// Relative threshold for the column-pivoted QR rank decision.
    double rank_threshold = 1e-9;
};

struct SliceResidual {
    double hbar = 0.0;
    std::size_t count = 0;
    double max = 0.0;
    double rms = 0.0;
    friend bool operator==(const SliceResidual&, const SliceResidual&) = default;
};

struct JacobianEntry {
    Vec2 point;     // spectral point
    Vec2 preimage;  // fitted G0^-1(point)
    Mat2 jacobian;  // DG0 at the preimage
    bool extrapolated = false;
    friend bool operator==(const JacobianEntry&, const JacobianEntry&) = default;
};

struct RotationEntry {
    Vec2 point;
    double rho = 0.0;
    double radius = 0.0;
    friend bool operator==(const RotationEntry&, const RotationEntry&) = default;
};

struct RecoveryReport {
    ChartJet fitted_chart;
    OriginMode origin = OriginMode::absolute;
    std::vector<Vec2> slice_offsets;  // per_slice: action-space origin shift per slice; entry 0 is zero
    std::vector<SliceResidual> residuals;
    std::vector<JacobianEntry> jacobian_field;
    std::vector<RotationEntry> rotation;
    /// Unscaled covariance (X^T X)^-1 of the G0 coefficients, row major.
    std::vector<double> g0_covariance;
    /// Residual variance of the two spectral components.
    Vec2 residual_variance;
    bool jacobian_consistent = true;
    std::vector<std::string> warnings;

    friend bool operator==(const RecoveryReport&, const RecoveryReport&) = default;
};

namespace detail {

inline std::string column_name(std::size_t col, std::size_t per_order, int jet_order) {
    const std::size_t poly = per_order * static_cast<std::size_t>(jet_order + 1);
    if (col < 2 * poly) {
        const std::size_t c = col % poly;
        const auto [p, q] = monomial_exponents(c % per_order);
        return "G" + std::to_string(c / per_order) + (col < poly ? ".x" : ".y") + "[u^" + std::to_string(p) +
               " v^" + std::to_string(q) + "]";
    }
    const std::size_t k = col - 2 * poly;
    return "shift[slice " + std::to_string(k / 2 + 1) + "]" + (k % 2 ? ".y" : ".x");
}

}  // namespace detail

/// Preimage of `target` under `g` by Newton's method started at `start`.
inline std::optional<Vec2> invert_polynomial(const PolyMap2& g, Vec2 target, Vec2 start,
                                             int max_iter = 60) {
    Vec2 y = start;
    for (int it = 0; it < max_iter; ++it) {
        const Vec2 r = target - g(y);
        const auto inv = g.jacobian(y).inverse();
        if (!inv) return std::nullopt;
        const Vec2 step = (*inv) * r;
        y = y + step;
        if (norm(step) <= 1e-15 * (1.0 + norm(y))) return y;
    }
    if (norm(target - g(y)) <= 1e-12 * (1.0 + norm(target))) return y;
    return std::nullopt;
}

struct RotationEstimate {
    double rho = 0.0;
    double radius = 0.0;
    Vec2 preimage;
    Mat2 inverse_jacobian;
};

/// Exact derivatives of the fitted G0 at spectral points.
inline std::vector<JacobianEntry> jacobian_field(const RecoveryReport& report, std::span<const Vec2> at);

/// Rotation number at spectral point `at`, with first-order confidence radius.
inline RotationEstimate rotation_number(const RecoveryReport& report, Vec2 at);

/// Least-squares fit of sum_{i <= jet_order} hbar^i G_i(hbar k) to the labelled points.
/// Jacobians and rotation numbers are evaluated at the labelled points of the coarsest slice.
inline RecoveryReport fit_chart(const LinearLabelling& labelling, const AsymptoticLattice& lattice,
                                FitOptions opts) {
    if (opts.degree < 1) throw InvalidArgument("fit degree must be >= 1");
    if (opts.jet_order < 0 || opts.jet_order > 1) throw InvalidArgument("jet order must be 0 or 1");
    const auto& maps = labelling.maps;
    if (maps.size() != lattice.size())
        throw InvalidArgument("labelling and lattice have different slice counts");
    for (std::size_t j = 0; j < maps.size(); ++j)
        if (maps[j].hbar() != lattice[j].hbar())
            throw InvalidArgument("labelling and lattice disagree on hbar at slice " + std::to_string(j));

    std::vector<std::string> warnings;
    std::vector<std::size_t> used;
    for (std::size_t j = 0; j < maps.size(); ++j)
        if (!maps[j].empty()) used.push_back(j);
    if (used.size() < 2 && opts.jet_order > 0) {
        opts.jet_order = 0;
        warnings.push_back("only one labelled slice: jet order forced to 0");
    }
    const bool per_slice = opts.origin == OriginMode::per_slice;

    // Check the labelled points belong to their slices.
    for (std::size_t j : used) {
        GridIndex idx(lattice[j].points());
        for (const auto& e : maps[j].entries()) {
            const auto i = idx.nearest(e.point);
            if (!i || distance(lattice[j].points()[*i], e.point) > 1e-9 * (1.0 + norm(e.point)))
                throw InvalidArgument("labelled point not present in lattice slice " + std::to_string(j));
        }
    }

    std::size_t n = 0;
    Vec2 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    Vec2 hi = -lo;
    for (std::size_t j : used) {
        for (const auto& e : maps[j].entries()) {
            const Vec2 x = maps[j].hbar() * to_vec(e.k);
            lo = {std::min(lo.x, x.x), std::min(lo.y, x.y)};
            hi = {std::max(hi.x, x.x), std::max(hi.y, x.y)};
            ++n;
        }
    }
    const std::size_t per_order = monomial_count(opts.degree);
    const std::size_t needed = 3 * per_order * static_cast<std::size_t>(opts.jet_order + 1);
    if (n < needed)
        throw UnderdeterminedFit("only " + std::to_string(n) + " labelled points; need at least " +
                                 std::to_string(needed));
    if (!(hi.x > lo.x) || !(hi.y > lo.y))
        throw UnderdeterminedFit("labels are confined to a line; deficient subspace: the transverse "
                                 "direction of the action domain");

    const Rect domain{lo, hi};
    const Vec2 center = domain.center();
    const Vec2 scale{domain.width() / 2, domain.height() / 2};
    const int jo = opts.jet_order;
    const std::size_t poly_cols = per_order * static_cast<std::size_t>(jo + 1);
    const std::size_t shift_cols = per_slice ? 2 * (used.size() - 1) : 0;
    const std::size_t cols = 2 * poly_cols + shift_cols;
    const auto rows = static_cast<Eigen::Index>(2 * n);

    struct Row {
        Vec2 action;  // hbar k
        double hbar;
        std::size_t slice;  // index into `used`
        Vec2 target;
    };
    std::vector<Row> data;
    data.reserve(n);
    for (std::size_t s = 0; s < used.size(); ++s) {
        const LabelMap& m = maps[used[s]];
        for (const auto& e : m.entries()) data.push_back({m.hbar() * to_vec(e.k), m.hbar(), s, e.point});
    }
    // Action-space origin shift of each used slice; slice 0 is the reference.
    std::vector<Vec2> shifts(used.size());

    auto terms_of = [&](const Eigen::VectorXd& beta) {
        std::vector<PolyMap2> terms;
        for (int i = 0; i <= jo; ++i) {
            std::vector<double> cx(per_order), cy(per_order);
            for (std::size_t m = 0; m < per_order; ++m) {
                cx[m] = beta(static_cast<Eigen::Index>(static_cast<std::size_t>(i) * per_order + m));
                cy[m] = beta(static_cast<Eigen::Index>(poly_cols + static_cast<std::size_t>(i) * per_order + m));
            }
            terms.emplace_back(opts.degree, center, scale, std::move(cx), std::move(cy));
        }
        return terms;
    };
    auto evaluate = [&](const std::vector<PolyMap2>& terms, Vec2 a, double h, Mat2* jac) {
        Vec2 v;
        Mat2 d{0, 0, 0, 0};
        double hp = 1.0;
        for (const auto& t : terms) {
            v = v + hp * t(a);
            if (jac) d = d + Mat2{hp, 0, 0, hp} * t.jacobian(a);
            hp *= h;
        }
        if (jac) *jac = d;
        return v;
    };

    // Stacked system, rows 2r (x) and 2r + 1 (y). Columns: x coefficients, y coefficients,
    // then two columns per shifted slice. Without `lin` those hold unit spectral offsets;
    // with it, the linearization DG_hbar(x + s) of the model in the shift.
    Eigen::MatrixXd x(rows, static_cast<Eigen::Index>(cols));
    Eigen::VectorXd rhs(rows);
    auto assemble = [&](const std::vector<PolyMap2>* lin) {
        x.setZero();
        for (std::size_t r = 0; r < n; ++r) {
            const Row& d = data[r];
            const Vec2 a = d.action + shifts[d.slice];
            const auto phi =
                PolyMap2::basis_values(opts.degree, {(a.x - center.x) / scale.x, (a.y - center.y) / scale.y});
            const auto rx = static_cast<Eigen::Index>(2 * r), ry = rx + 1;
            double hp = 1.0;
            for (int i = 0; i <= jo; ++i) {
                for (std::size_t m = 0; m < per_order; ++m) {
                    const auto c = static_cast<Eigen::Index>(static_cast<std::size_t>(i) * per_order + m);
                    x(rx, c) = hp * phi[m];
                    x(ry, static_cast<Eigen::Index>(poly_cols) + c) = hp * phi[m];
                }
                hp *= d.hbar;
            }
            if (per_slice && d.slice > 0) {
                Mat2 g = Mat2::identity();
                if (lin) evaluate(*lin, a, d.hbar, &g);
                const auto c = static_cast<Eigen::Index>(2 * poly_cols + 2 * (d.slice - 1));
                x(rx, c) = g.a;
                x(rx, c + 1) = g.b;
                x(ry, c) = g.c;
                x(ry, c + 1) = g.d;
            }
            rhs(rx) = d.target.x;
            rhs(ry) = d.target.y;
        }
    };

    Eigen::VectorXd colnorm;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
    auto solve = [&]() -> Eigen::VectorXd {
        colnorm = x.colwise().norm();
        for (Eigen::Index c = 0; c < colnorm.size(); ++c)
            if (colnorm(c) == 0.0) colnorm(c) = 1.0;
        const Eigen::MatrixXd xn = x * colnorm.cwiseInverse().asDiagonal();
        qr.setThreshold(opts.rank_threshold);
        qr.compute(xn);
        if (qr.rank() < static_cast<Eigen::Index>(cols)) {
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(xn, Eigen::ComputeThinV);
            const Eigen::VectorXd null = svd.matrixV().col(svd.matrixV().cols() - 1);
            std::ostringstream msg;
            msg << "rank-deficient fit (rank " << qr.rank() << " of " << cols << "); deficient direction:";
            for (Eigen::Index c = 0; c < null.size(); ++c)
                if (std::abs(null(c)) > 1e-3)
                    msg << " " << null(c) << "*"
                        << detail::column_name(static_cast<std::size_t>(c), per_order, jo);
            throw UnderdeterminedFit(msg.str());
        }
        return colnorm.cwiseInverse().asDiagonal() * qr.solve(rhs);
    };

    assemble(nullptr);
    Eigen::VectorXd beta = solve();
    std::vector<PolyMap2> terms = terms_of(beta);
    if (per_slice && used.size() > 1) {
        // The first pass fits constant spectral offsets; turn them into action shifts and
        // refine by Gauss-Newton (the model is linear in the coefficients, so each step
        // re-solves those exactly).
        for (std::size_t s = 1; s < used.size(); ++s) {
            const auto c = static_cast<Eigen::Index>(2 * poly_cols + 2 * (s - 1));
            const auto inv = terms[0].jacobian(center).inverse();
            if (inv) shifts[s] = (*inv) * Vec2{beta(c), beta(c + 1)};
        }
        bool converged = false;
        for (int it = 0; it < 100 && !converged; ++it) {
            assemble(&terms);
            beta = solve();
            terms = terms_of(beta);
            double step = 0.0, size = 0.0;
            for (std::size_t s = 1; s < used.size(); ++s) {
                const auto c = static_cast<Eigen::Index>(2 * poly_cols + 2 * (s - 1));
                const Vec2 ds{beta(c), beta(c + 1)};
                shifts[s] = shifts[s] + ds;
                step = std::max(step, norm(ds));
                size = std::max(size, norm(shifts[s]));
            }
            converged = step <= 1e-13 * (1.0 + size);
        }
        if (!converged) warnings.push_back("origin-shift refinement did not converge");
        assemble(&terms);
        beta = solve();
        terms = terms_of(beta);
    }

    std::optional<ChartJet> chart;
    try {
        chart.emplace(domain, terms);
    } catch (const InvalidArgument&) {
        throw FitFailure("fitted G0 has a vanishing Jacobian on the action domain");
    }

    RecoveryReport report{*chart, opts.origin, {}, {}, {}, {}, {}, {}, true, std::move(warnings)};
    if (per_slice) {
        report.slice_offsets.assign(maps.size(), Vec2{});
        for (std::size_t s = 1; s < used.size(); ++s) report.slice_offsets[used[s]] = shifts[s];
    }

    // Residuals against the fitted model at the shifted actions.
    std::vector<SliceResidual> res(used.size());
    double rss_x = 0.0, rss_y = 0.0;
    for (const Row& d : data) {
        const Vec2 e = d.target - evaluate(terms, d.action + shifts[d.slice], d.hbar, nullptr);
        SliceResidual& sr = res[d.slice];
        ++sr.count;
        sr.max = std::max(sr.max, norm(e));
        sr.rms += norm2(e);
        rss_x += e.x * e.x;
        rss_y += e.y * e.y;
    }
    for (std::size_t s = 0; s < used.size(); ++s) {
        res[s].hbar = maps[used[s]].hbar();
        res[s].rms = std::sqrt(res[s].rms / static_cast<double>(std::max<std::size_t>(res[s].count, 1)));
    }
    report.residuals = std::move(res);
    // Each component has n observations and (cols / 2) parameters.
    const double dof = 2 * n > cols ? static_cast<double>(2 * n - cols) / 2.0 : 1.0;
    report.residual_variance = {rss_x / dof, rss_y / dof};

    // Unscaled covariance of the y-component G0 block: P R^-1 R^-T P^T, then undo column
    // scaling. The rotation number only depends on that component.
    {
        const auto k = static_cast<Eigen::Index>(cols);
        const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
        const Eigen::MatrixXd rinv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
        const Eigen::MatrixXd cov_perm = rinv * rinv.transpose();
        const Eigen::MatrixXd cov_n = qr.colsPermutation() * cov_perm * qr.colsPermutation().transpose();
        const auto p0 = static_cast<Eigen::Index>(per_order);
        const auto off = static_cast<Eigen::Index>(poly_cols);
        report.g0_covariance.resize(per_order * per_order);
        for (Eigen::Index a = 0; a < p0; ++a)
            for (Eigen::Index b = 0; b < p0; ++b)
                report.g0_covariance[static_cast<std::size_t>(a * p0 + b)] =
                    cov_n(off + a, off + b) / (colnorm(off + a) * colnorm(off + b));
    }

    // Jacobian field and rotation numbers at the coarsest slice's labelled points.
    std::vector<Vec2> eval_points;
    for (const auto& e : maps[used.front()].entries()) eval_points.push_back(e.point);
    report.jacobian_field = jacobian_field(report, eval_points);
    int sign = 0;
    for (const auto& je : report.jacobian_field) {
        const double dt = je.jacobian.det();
        const int s = dt > 0 ? 1 : (dt < 0 ? -1 : 0);
        if (s == 0 || (sign != 0 && s != sign)) report.jacobian_consistent = false;
        if (sign == 0) sign = s;
    }
    if (!report.jacobian_consistent) report.warnings.push_back("Jacobian determinant changes sign");
    std::size_t poles = 0;
    for (const Vec2& p : eval_points) {
        try {
            const auto est = rotation_number(report, p);
            report.rotation.push_back({p, est.rho, est.radius});
        } catch (const PoleError&) {
            ++poles;
        }
    }
    if (poles > 0)
        report.warnings.push_back(std::to_string(poles) + " evaluation points sit on a rotation-number pole");
    return report;
}

inline std::vector<JacobianEntry> jacobian_field(const RecoveryReport& report, std::span<const Vec2> at) {
    const PolyMap2& g0 = report.fitted_chart.term(0);
    const Rect& dom = report.fitted_chart.domain();
    std::vector<JacobianEntry> out;
    out.reserve(at.size());
    for (const Vec2& p : at) {
        JacobianEntry e;
        e.point = p;
        // Start Newton from the affine part around the domain centre.
        const Vec2 c = dom.center();
        Vec2 start = c;
        if (const auto inv = g0.jacobian(c).inverse()) start = c + (*inv) * (p - g0(c));
        const auto y = invert_polynomial(g0, p, start);
        if (y) {
            e.preimage = *y;
            e.extrapolated = !dom.contains(*y, 1e-9);
        } else {
            e.preimage = start;
            e.extrapolated = true;
        }
        e.jacobian = g0.jacobian(e.preimage);
        out.push_back(e);
    }
    return out;
}

inline RotationEstimate rotation_number(const RecoveryReport& report, Vec2 at) {
    const std::array<Vec2, 1> pts{at};
    const JacobianEntry je = jacobian_field(report, pts).front();
    const Mat2& j = je.jacobian;
    const auto inv = j.inverse();
    if (!inv || std::abs(j.det()) <= 1e-14 * j.max_abs() * j.max_abs())
        throw PoleError("Jacobian is singular at the requested point");
    if (std::abs(j.d) <= 1e-14 * j.max_abs())
        throw PoleError("(DG0^-1)_11 vanishes: rotation number diverges at this point");
    RotationEstimate est;
    est.preimage = je.preimage;
    est.inverse_jacobian = *inv;
    est.rho = inv->c / inv->a;

    // First-order propagation through rho = -J21 / J22, using the G0 coefficient covariance
    // of the second spectral component.
    const PolyMap2& g0 = report.fitted_chart.term(0);
    const auto [dx, dy] = g0.basis_gradient(je.preimage);
    const std::size_t p0 = dx.size();
    std::vector<double> grad(p0);
    for (std::size_t m = 0; m < p0; ++m) grad[m] = -dx[m] / j.d + j.c * dy[m] / (j.d * j.d);
    double var = 0.0;
    if (report.g0_covariance.size() == p0 * p0)
        for (std::size_t a = 0; a < p0; ++a)
            for (std::size_t b = 0; b < p0; ++b)
                var += grad[a] * report.g0_covariance[a * p0 + b] * grad[b];
    est.radius = std::sqrt(std::max(0.0, var * report.residual_variance.y));
    return est;
}

}  // namespace asylat
