#pragma once

#include "common.hpp"

#include <array>
#include <map>

namespace mlift {

// Lower convex hull of graph samples (w_i, h_i), w in R^s, s <= 3.
// vertex_ids lists the samples on the lower hull; facets give the piecewise
// affine convexification h(w) = max over facets of <slope, w> + intercept.
struct LowerHullResult {
    struct Facet {
        VecS slope;
        double intercept;
        std::vector<int> verts;
    };
    std::vector<int> vertex_ids;
    std::vector<Facet> facets;
    bool flat = false;

    double eval(const VecS& w) const {
        double best = -std::numeric_limits<double>::max();
        for (const auto& f : facets) best = std::max(best, f.slope.dot(w) + f.intercept);
        return best;
    }
};

namespace detail {

// deterministic per-index jitter in [-1, 1]
inline double index_jitter(int i) {
    std::uint32_t x = static_cast<std::uint32_t>(i) * 2654435761u + 12345u;
    x ^= x >> 16;
    x *= 2246822519u;
    x ^= x >> 13;
    return (static_cast<double>(x) / 4294967295.0) * 2.0 - 1.0;
}

using HullVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 4, 1>;

struct HullFacet {
    std::array<int, 4> verts{};
    HullVec normal;
    double offset = 0.0;
    bool alive = true;
};

// hyperplane through m points in R^m, oriented away from `interior`
inline bool facet_plane(const std::vector<HullVec>& pts, const std::array<int, 4>& verts, int m,
                        const HullVec& interior, HullVec& normal, double& offset) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 4> E(m - 1, m);
    for (int i = 0; i < m - 1; ++i) E.row(i) = (pts[verts[i + 1]] - pts[verts[0]]).transpose();
    Eigen::JacobiSVD<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 4>> svd(
        E, Eigen::ComputeFullV);
    normal = svd.matrixV().col(m - 1);
    if (m > 1 && svd.singularValues()(m - 2) < 1e-13) return false; // degenerate ridge
    offset = normal.dot(pts[verts[0]]);
    if (normal.dot(interior) - offset > 0.0) {
        normal = -normal;
        offset = -offset;
    }
    return true;
}

} // namespace detail

// Incremental convex hull specialised to the lower-hull extraction needed for
// data-term convexification. Heights are perturbed by a deterministic jitter
// of at most `jitter_scale` to break coplanarity; facet planes are re-fitted
// through the unperturbed heights afterwards.
inline LowerHullResult lower_convex_hull(const std::vector<VecS>& w, const std::vector<double>& h,
                                         double jitter_scale = 1e-12) {
    using detail::HullVec;
    const int n = static_cast<int>(w.size());
    if (n == 0) throw invalid_argument_error("lower_convex_hull: no samples");
    const int s = static_cast<int>(w[0].size());
    const int m = s + 1;

    double scale = 1.0;
    for (int i = 0; i < n; ++i) scale = std::max({scale, w[i].cwiseAbs().maxCoeff(), std::abs(h[i])});

    // affine data: single facet through all samples
    {
        Eigen::MatrixXd A(n, m);
        Eigen::VectorXd rhs(n);
        for (int i = 0; i < n; ++i) {
            A.row(i).head(s) = w[i].transpose();
            A(i, s) = 1.0;
            rhs(i) = h[i];
        }
        Eigen::VectorXd fit = A.colPivHouseholderQr().solve(rhs);
        double resid = (A * fit - rhs).cwiseAbs().maxCoeff();
        if (resid < 1e-11 * scale || n <= m) {
            LowerHullResult out;
            out.flat = true;
            LowerHullResult::Facet f;
            f.slope = fit.head(s);
            f.intercept = fit(s);
            for (int i = 0; i < n; ++i) {
                out.vertex_ids.push_back(i);
                f.verts.push_back(i);
            }
            out.facets.push_back(std::move(f));
            return out;
        }
    }

    std::vector<HullVec> pts(n);
    for (int i = 0; i < n; ++i) {
        HullVec p(m);
        p.head(s) = w[i];
        p(s) = h[i] + jitter_scale * scale * detail::index_jitter(i);
        pts[i] = p;
    }

    // initial simplex by greedy extent
    std::vector<int> init = {0};
    {
        double best = -1.0;
        for (int i = 1; i < n; ++i) {
            double d = (pts[i] - pts[0]).norm();
            if (d > best) {
                best = d;
                init.resize(1);
                init.push_back(i);
            }
        }
        while (static_cast<int>(init.size()) < m + 1) {
            Eigen::MatrixXd E(m, static_cast<int>(init.size()) - 1);
            for (std::size_t i = 1; i < init.size(); ++i) E.col(i - 1) = pts[init[i]] - pts[init[0]];
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(E);
            Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(m, E.cols());
            int pick = -1;
            double pick_d = 1e-9 * scale;
            for (int i = 0; i < n; ++i) {
                HullVec d = pts[i] - pts[init[0]];
                double res = (d - Q * (Q.transpose() * d)).norm();
                if (res > pick_d) {
                    pick_d = res;
                    pick = i;
                }
            }
            if (pick < 0)
                throw degenerate_geometry_error("lower_convex_hull: degenerate sample geometry");
            init.push_back(pick);
        }
    }

    HullVec interior = HullVec::Zero(m);
    for (int id : init) interior += pts[id];
    interior /= static_cast<double>(init.size());

    std::vector<detail::HullFacet> facets;
    for (int drop = 0; drop < m + 1; ++drop) {
        detail::HullFacet f;
        int k = 0;
        for (int i = 0; i < m + 1; ++i)
            if (i != drop) f.verts[k++] = init[i];
        if (!detail::facet_plane(pts, f.verts, m, interior, f.normal, f.offset))
            throw degenerate_geometry_error("lower_convex_hull: degenerate initial simplex");
        facets.push_back(f);
    }

    const double eps_vis = 1e-12 * scale;
    std::vector<char> in_init(n, 0);
    for (int id : init) in_init[id] = 1;

    for (int p = 0; p < n; ++p) {
        if (in_init[p]) continue;
        std::vector<int> visible;
        for (int fi = 0; fi < static_cast<int>(facets.size()); ++fi) {
            if (!facets[fi].alive) continue;
            if (facets[fi].normal.dot(pts[p]) - facets[fi].offset > eps_vis) visible.push_back(fi);
        }
        if (visible.empty()) continue;

        // ridge -> facet incidence over alive facets
        std::map<std::vector<int>, std::vector<int>> ridge_map;
        for (int fi = 0; fi < static_cast<int>(facets.size()); ++fi) {
            if (!facets[fi].alive) continue;
            for (int drop = 0; drop < m; ++drop) {
                std::vector<int> key;
                for (int i = 0; i < m; ++i)
                    if (i != drop) key.push_back(facets[fi].verts[i]);
                std::sort(key.begin(), key.end());
                ridge_map[key].push_back(fi);
            }
        }
        std::vector<char> is_visible(facets.size(), 0);
        for (int fi : visible) is_visible[fi] = 1;

        std::vector<std::vector<int>> horizon;
        for (auto& [key, fids] : ridge_map) {
            if (fids.size() != 2) continue;
            if (is_visible[fids[0]] != is_visible[fids[1]]) horizon.push_back(key);
        }
        for (int fi : visible) facets[fi].alive = false;
        for (auto& ridge : horizon) {
            detail::HullFacet f;
            for (int i = 0; i < m - 1; ++i) f.verts[i] = ridge[i];
            f.verts[m - 1] = p;
            if (!detail::facet_plane(pts, f.verts, m, interior, f.normal, f.offset)) continue;
            facets.push_back(f);
        }
    }

    LowerHullResult out;
    std::vector<char> used(n, 0);
    for (auto& f : facets) {
        if (!f.alive) continue;
        double nn = f.normal.norm();
        if (f.normal(s) >= -1e-9 * nn) continue; // not a lower facet
        // re-fit the affine function through the true heights
        Eigen::MatrixXd A(m, m);
        Eigen::VectorXd rhs(m);
        for (int i = 0; i < m; ++i) {
            A.row(i).head(s) = w[f.verts[i]].transpose();
            A(i, s) = 1.0;
            rhs(i) = h[f.verts[i]];
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
        if (!lu.isInvertible()) continue;
        Eigen::VectorXd sol = lu.solve(rhs);
        LowerHullResult::Facet lf;
        lf.slope = sol.head(s);
        lf.intercept = sol(s);
        for (int i = 0; i < m; ++i) {
            lf.verts.push_back(f.verts[i]);
            used[f.verts[i]] = 1;
        }
        out.facets.push_back(std::move(lf));
    }
    for (int i = 0; i < n; ++i)
        if (used[i]) out.vertex_ids.push_back(i);
    if (out.facets.empty())
        throw degenerate_geometry_error("lower_convex_hull: no lower facets found");
    return out;
}

} // namespace mlift
