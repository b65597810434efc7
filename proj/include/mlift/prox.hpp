#pragma once

#include "common.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <span>

namespace mlift {

// Euclidean projection onto the unit simplex {x >= 0, sum x = 1} by sorting
// and thresholding.
inline void project_simplex_inplace(double* x, int n, std::vector<double>& scratch) {
    scratch.assign(x, x + n);
    std::sort(scratch.begin(), scratch.end(), std::greater<double>());
    double css = 0.0, tau = 0.0;
    int k = 0;
    for (int i = 0; i < n; ++i) {
        css += scratch[i];
        double cand = (css - 1.0) / (i + 1);
        if (scratch[i] - cand > 0.0) {
            k = i + 1;
            tau = cand;
        }
    }
    (void)k;
    for (int i = 0; i < n; ++i) x[i] = std::max(x[i] - tau, 0.0);
}

inline Eigen::VectorXd project_simplex(const Eigen::VectorXd& v) {
    Eigen::VectorXd x = v;
    std::vector<double> scratch;
    project_simplex_inplace(x.data(), static_cast<int>(x.size()), scratch);
    return x;
}

enum class BallNorm { frobenius, spectral };

// Projection onto a norm ball of the given radius. Spectral projection clamps
// the singular values (shapes up to 3x3).
inline Eigen::MatrixXd project_ball(const Eigen::MatrixXd& zeta, double radius, BallNorm norm) {
    if (radius <= 0.0) throw invalid_argument_error("project_ball: radius must be positive");
    if (norm == BallNorm::frobenius) {
        double n = zeta.norm();
        if (n <= radius) return zeta;
        return zeta * (radius / n);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(zeta, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::VectorXd sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) <= radius) return zeta;
    for (int i = 0; i < sv.size(); ++i) sv(i) = std::min(sv(i), radius);
    return svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();
}

namespace detail {

// Real roots of x^3 + p x + q = 0.
inline int cubic_roots(double p, double q, double roots[3]) {
    double disc = -4.0 * p * p * p - 27.0 * q * q;
    if (disc > 0.0) {
        // three real roots, trigonometric form (p < 0 here)
        double m = 2.0 * std::sqrt(-p / 3.0);
        double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
        double theta = std::acos(arg) / 3.0;
        for (int k = 0; k < 3; ++k)
            roots[k] = m * std::cos(theta - 2.0 * kPi * k / 3.0);
        return 3;
    }
    double half_q = 0.5 * q;
    double inner = half_q * half_q + p * p * p / 27.0;
    double sq = std::sqrt(std::max(inner, 0.0));
    double u = std::cbrt(-half_q + sq), v = std::cbrt(-half_q - sq);
    roots[0] = u + v;
    return 1;
}

// Projection of (x0, t0) onto {(x, t): x >= 0, t >= c x^2 / 2} in the radial
// half-plane. Returns the radial coordinate; the height is c x^2 / 2 for
// boundary points.
inline double parabola_radial_project(double x0, double t0, double c) {
    if (x0 <= 0.0) return 0.0;
    // stationarity: (c^2/2) x^3 + (1 - c t0) x - x0 = 0
    double a = 0.5 * c * c;
    double p = (1.0 - c * t0) / a;
    double q = -x0 / a;
    double roots[3];
    int nr = cubic_roots(p, q, roots);
    double best_x = 0.0, best_val = x0 * x0 + (0.0 - t0) * (0.0 - t0); // vertex fallback
    (void)best_val;
    best_val = (0.0 - x0) * (0.0 - x0) + t0 * t0;
    for (int i = 0; i < nr; ++i) {
        double x = roots[i];
        if (x < 0.0) continue;
        // Newton polish on the stationarity residual
        for (int it = 0; it < 3; ++it) {
            double f = a * x * x * x + (1.0 - c * t0) * x - x0;
            double fp = 3.0 * a * x * x + (1.0 - c * t0);
            if (std::abs(fp) < 1e-300) break;
            x -= f / fp;
        }
        if (x < 0.0) continue;
        double h = 0.5 * c * x * x;
        double val = (x - x0) * (x - x0) + (h - t0) * (h - t0);
        if (val < best_val) {
            best_val = val;
            best_x = x;
        }
    }
    return best_x;
}

} // namespace detail

// Exact projection onto the epigraph {(zeta, t): (c/2) ||zeta||^2 <= t}.
inline std::pair<Eigen::VectorXd, double> project_parabola_epi(const Eigen::VectorXd& zeta, double t,
                                                               double c) {
    if (c <= 0.0) throw invalid_argument_error("project_parabola_epi: curvature must be positive");
    double x0 = zeta.norm();
    if (0.5 * c * x0 * x0 <= t) return {zeta, t};
    double x = detail::parabola_radial_project(x0, t, c);
    double h = 0.5 * c * x * x;
    if (x0 < 1e-300) return {Eigen::VectorXd::Zero(zeta.size()), std::max(t, 0.0)};
    return {zeta * (x / x0), h};
}

// Exact projection onto {(zeta, t): (c/2) ||zeta||^2 <= t, ||zeta|| <= r}.
inline std::pair<Eigen::VectorXd, double> project_truncated_parabola_epi(const Eigen::VectorXd& zeta,
                                                                         double t, double c, double r) {
    if (c <= 0.0 || r <= 0.0)
        throw invalid_argument_error("project_truncated_parabola_epi: c and r must be positive");
    double x0 = zeta.norm();
    if (x0 <= r && 0.5 * c * x0 * x0 <= t) return {zeta, t};
    auto [pz, pt] = project_parabola_epi(zeta, t, c);
    if (pz.norm() <= r * (1.0 + 1e-14)) return {pz, pt};
    // projection lies on the wall {||zeta|| = r, t >= c r^2 / 2}
    double x = r;
    double h = std::max(t, 0.5 * c * r * r);
    if (x0 < 1e-300) return {Eigen::VectorXd::Zero(zeta.size()), h};
    return {zeta * (x / x0), h};
}

// <normal, x> <= offset
struct Halfspace {
    Eigen::VectorXd normal;
    double offset;
};
using HalfspaceSet = std::vector<Halfspace>;

namespace detail {

// Dual active-set projection onto an intersection of halfspaces
// (Goldfarb-Idnani specialized to an identity Hessian). Row-major
// normals[count][m]. Starts from the unconstrained point, adds the most
// violated constraint with partial steps that keep multipliers nonnegative,
// drops blocking constraints along the way. The invariant
// x = x0 - sum_i u_i a_i with u >= 0 and a_i^T x = b_i on the working set
// holds throughout; finite termination for feasible sets. The working set is
// carried between calls through `active` as a warm start.
inline void project_halfspaces_raw(int m, const double* normals, const double* offsets, int count,
                                   const double* x0, double* x, int* active, int* n_active) {
    using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 6, 6>;
    using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 6, 1>;

    double scale = 0.0;
    for (int j = 0; j < m; ++j) scale = std::max(scale, std::abs(x0[j]));
    for (int i = 0; i < count; ++i) scale = std::max(scale, std::abs(offsets[i]));
    const double feas_tol = 1e-11 * (1.0 + scale);

    int W[6];
    double u[6];
    int nw = 0;

    auto solve_gram = [&](const double* ap, SmallVec& r) {
        SmallMat G(nw, nw);
        SmallVec rhs(nw);
        for (int a = 0; a < nw; ++a) {
            const double* na = normals + static_cast<std::ptrdiff_t>(W[a]) * m;
            double d = 0.0;
            for (int j = 0; j < m; ++j) d += na[j] * ap[j];
            rhs(a) = d;
            for (int b = 0; b <= a; ++b) {
                const double* nb = normals + static_cast<std::ptrdiff_t>(W[b]) * m;
                double g = 0.0;
                for (int j = 0; j < m; ++j) g += na[j] * nb[j];
                G(a, b) = g;
                G(b, a) = g;
            }
        }
        Eigen::LDLT<SmallMat> ldlt(G);
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) r = ldlt.solve(rhs);
        else r = Eigen::CompleteOrthogonalDecomposition<SmallMat>(G).solve(rhs);
    };

    // warm start: re-derive (x, u) from a previous working set if it yields
    // nonnegative multipliers, otherwise start cold
    {
        int cand[6];
        int ncand = std::min(*n_active, 6);
        int valid = 0;
        for (int i = 0; i < ncand; ++i)
            if (active[i] >= 0 && active[i] < count) cand[valid++] = active[i];
        if (valid > 0) {
            nw = valid;
            for (int i = 0; i < nw; ++i) W[i] = cand[i];
            SmallMat G(nw, nw);
            SmallVec rhs(nw), nu;
            for (int a = 0; a < nw; ++a) {
                const double* na = normals + static_cast<std::ptrdiff_t>(W[a]) * m;
                double d = 0.0;
                for (int j = 0; j < m; ++j) d += na[j] * x0[j];
                rhs(a) = d - offsets[W[a]];
                for (int b = 0; b <= a; ++b) {
                    const double* nb = normals + static_cast<std::ptrdiff_t>(W[b]) * m;
                    double gg = 0.0;
                    for (int j = 0; j < m; ++j) gg += na[j] * nb[j];
                    G(a, b) = gg;
                    G(b, a) = gg;
                }
            }
            Eigen::LDLT<SmallMat> ldlt(G);
            bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive();
            if (ok) {
                nu = ldlt.solve(rhs);
                double resid = (G * nu - rhs).cwiseAbs().maxCoeff();
                for (int a = 0; a < nw; ++a)
                    if (nu(a) < 0.0) ok = false;
                if (resid > feas_tol) ok = false;
            }
            if (ok) {
                for (int a = 0; a < nw; ++a) u[a] = nu(a);
            } else {
                nw = 0;
            }
        }
    }

    auto recompute_x = [&]() {
        for (int j = 0; j < m; ++j) x[j] = x0[j];
        for (int a = 0; a < nw; ++a) {
            const double* na = normals + static_cast<std::ptrdiff_t>(W[a]) * m;
            for (int j = 0; j < m; ++j) x[j] -= u[a] * na[j];
        }
    };
    recompute_x();

    const int max_outer = 10 * std::max(count, 4) + 50;
    for (int outer = 0; outer < max_outer; ++outer) {
        // most violated constraint
        int p = -1;
        double viol = feas_tol;
        for (int i = 0; i < count; ++i) {
            const double* ni = normals + static_cast<std::ptrdiff_t>(i) * m;
            double v = -offsets[i];
            for (int j = 0; j < m; ++j) v += ni[j] * x[j];
            if (v > viol) {
                viol = v;
                p = i;
            }
        }
        if (p < 0) {
            *n_active = nw;
            for (int i = 0; i < nw; ++i) active[i] = W[i];
            return;
        }

        const double* ap = normals + static_cast<std::ptrdiff_t>(p) * m;
        double ap2 = 0.0;
        for (int j = 0; j < m; ++j) ap2 += ap[j] * ap[j];
        double up = 0.0;

        for (int inner = 0; inner < 2 * count + 16; ++inner) {
            SmallVec r;
            double z[4];
            double z2 = 0.0;
            if (nw > 0) {
                solve_gram(ap, r);
                for (int j = 0; j < m; ++j) {
                    double zz = ap[j];
                    for (int a = 0; a < nw; ++a)
                        zz -= r(a) * normals[static_cast<std::ptrdiff_t>(W[a]) * m + j];
                    z[j] = zz;
                    z2 += zz * zz;
                }
            } else {
                for (int j = 0; j < m; ++j) {
                    z[j] = ap[j];
                    z2 += ap[j] * ap[j];
                }
            }

            double v = -offsets[p];
            for (int j = 0; j < m; ++j) v += ap[j] * x[j];
            if (v <= feas_tol) break; // became satisfied during dual steps

            double t1 = z2 > 1e-22 * ap2 ? v / z2 : std::numeric_limits<double>::infinity();
            double t2 = std::numeric_limits<double>::infinity();
            int blk = -1;
            for (int a = 0; a < nw; ++a)
                if (r(a) > 1e-14) {
                    double cand = u[a] / r(a);
                    if (cand < t2) {
                        t2 = cand;
                        blk = a;
                    }
                }
            double t = std::min(t1, t2);
            if (!std::isfinite(t))
                throw std::runtime_error("project_halfspaces: unbounded multipliers (infeasible set)");

            for (int j = 0; j < m; ++j) x[j] -= t * z[j];
            for (int a = 0; a < nw; ++a) u[a] -= t * r(a);
            up += t;

            if (t2 < t1) {
                // drop the blocking constraint, keep working on p
                for (int a = blk; a + 1 < nw; ++a) {
                    W[a] = W[a + 1];
                    u[a] = u[a + 1];
                }
                --nw;
                continue;
            }
            // full step: p joins the working set
            if (nw >= 6) throw std::runtime_error("project_halfspaces: working set overflow");
            W[nw] = p;
            u[nw] = up;
            ++nw;
            break;
        }
    }
    throw std::runtime_error("project_halfspaces: iteration cap exceeded (infeasible set?)");
}

} // namespace detail

// Exact projection onto the intersection of halfspaces by a dense active-set
// QP; intended for a handful of variables and up to a few hundred halfspaces.
inline Eigen::VectorXd project_halfspace_intersection(const Eigen::VectorXd& x0, const HalfspaceSet& H) {
    if (H.empty()) return x0;
    const int m = static_cast<int>(x0.size());
    std::vector<double> normals(H.size() * m), offsets(H.size());
    for (std::size_t i = 0; i < H.size(); ++i) {
        if (H[i].normal.size() != m || H[i].normal.norm() == 0.0)
            throw invalid_argument_error("project_halfspace_intersection: bad halfspace");
        for (int j = 0; j < m; ++j) normals[i * m + j] = H[i].normal(j);
        offsets[i] = H[i].offset;
    }
    Eigen::VectorXd x(m);
    int active[6];
    int n_active = 0;
    detail::project_halfspaces_raw(m, normals.data(), offsets.data(), static_cast<int>(H.size()),
                                   x0.data(), x.data(), active, &n_active);
    return x;
}

} // namespace mlift
