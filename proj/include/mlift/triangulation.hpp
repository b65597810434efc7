#pragma once

#include "common.hpp"
#include "geometry.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <numeric>

namespace mlift {

// Simplicial approximation M_h of a manifold: label vertices Z^1..Z^L plus the
// simplex list T_h. Each simplex also carries its own N x (s+1) coordinate
// block: for SO(3) a simplex may need the non-canonical sign of a vertex
// (there is no global coherent section of the S^3 -> RP^3 double cover), so
// geometric code must read coordinates through simplex_coords, not vertices.
struct Triangulation {
    ManifoldGeometry geom;
    Eigen::MatrixXd vertices;                 // L x N, canonical representatives
    std::vector<std::vector<int>> simplices;  // each of size s+1
    std::vector<Eigen::MatrixXd> simplex_coords; // per simplex: N x (s+1)
    std::vector<std::vector<int>> vertex_to_simplices;

    int num_vertices() const { return static_cast<int>(vertices.rows()); }
    int num_simplices() const { return static_cast<int>(simplices.size()); }
    int sdim() const { return geom.intrinsic_dim(); }
    int ndim() const { return geom.embed_dim(); }

    VecN vertex(int k) const { return vertices.row(k).transpose(); }

    void finalize() {
        simplex_coords.clear();
        simplex_coords.reserve(simplices.size());
        for (const auto& sx : simplices) {
            Eigen::MatrixXd C(vertices.cols(), sx.size());
            for (std::size_t i = 0; i < sx.size(); ++i) C.col(i) = vertices.row(sx[i]).transpose();
            simplex_coords.push_back(C);
        }
        vertex_to_simplices.assign(vertices.rows(), {});
        for (int t = 0; t < num_simplices(); ++t)
            for (int k : simplices[t]) vertex_to_simplices[k].push_back(t);
    }
};

inline Triangulation build_circle(int L) {
    if (L < 3) throw invalid_argument_error("build_circle: need at least 3 labels");
    Triangulation tri{ManifoldGeometry::circle(), Eigen::MatrixXd(L, 2), {}, {}, {}};
    for (int k = 0; k < L; ++k) {
        double a = 2.0 * kPi * k / L;
        tri.vertices.row(k) << std::cos(a), std::sin(a);
    }
    for (int k = 0; k < L; ++k) tri.simplices.push_back({k, (k + 1) % L});
    tri.finalize();
    return tri;
}

// Regular icosahedron refined by edge-midpoint subdivision; new vertices are
// reprojected onto the unit sphere. The base vertex order is fixed so mesh
// indices are reproducible.
inline Triangulation build_sphere2(int refine) {
    if (refine < 0) throw invalid_argument_error("build_sphere2: refine must be >= 0");
    const double phi = 0.5 * (1.0 + std::sqrt(5.0));
    std::vector<Eigen::Vector3d> verts = {
        {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
        {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
        {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
    for (auto& v : verts) v.normalize();
    std::vector<std::array<int, 3>> faces = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
        {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
        {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};

    for (int r = 0; r < refine; ++r) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            Eigen::Vector3d m = (verts[a] + verts[b]).normalized();
            verts.push_back(m);
            int idx = static_cast<int>(verts.size()) - 1;
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(faces.size() * 4);
        for (auto& f : faces) {
            int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }

    Triangulation tri{ManifoldGeometry::sphere2(), Eigen::MatrixXd(verts.size(), 3), {}, {}, {}};
    for (std::size_t i = 0; i < verts.size(); ++i) tri.vertices.row(i) = verts[i].transpose();
    for (auto& f : faces) tri.simplices.push_back({f[0], f[1], f[2]});
    tri.finalize();
    return tri;
}

namespace detail {

// The 120 vertices of the unit 600-cell: unit quaternions.
inline std::vector<Eigen::Vector4d> hexacosichoron_vertices() {
    const double phi = 0.5 * (1.0 + std::sqrt(5.0));
    std::vector<Eigen::Vector4d> out;
    for (int i = 0; i < 4; ++i)
        for (int sgn = -1; sgn <= 1; sgn += 2) {
            Eigen::Vector4d v = Eigen::Vector4d::Zero();
            v(i) = sgn;
            out.push_back(v);
        }
    for (int m = 0; m < 16; ++m) {
        Eigen::Vector4d v;
        for (int i = 0; i < 4; ++i) v(i) = (m >> i) & 1 ? 0.5 : -0.5;
        out.push_back(v);
    }
    // even permutations of (phi, 1, 1/phi, 0)/2 with all sign choices
    const std::array<std::array<int, 4>, 12> even_perms = {{
        {0, 1, 2, 3}, {0, 2, 3, 1}, {0, 3, 1, 2},
        {1, 0, 3, 2}, {1, 2, 0, 3}, {1, 3, 2, 0},
        {2, 0, 1, 3}, {2, 1, 3, 0}, {2, 3, 0, 1},
        {3, 0, 2, 1}, {3, 1, 0, 2}, {3, 2, 1, 0}}};
    const double base[4] = {0.5 * phi, 0.5, 0.5 / phi, 0.0};
    for (const auto& p : even_perms) {
        for (int m = 0; m < 8; ++m) {
            Eigen::Vector4d v;
            int bit = 0;
            bool skip = false;
            for (int i = 0; i < 4; ++i) {
                double val = base[p[i]];
                if (val == 0.0) {
                    v(i) = 0.0;
                } else {
                    v(i) = ((m >> bit) & 1) ? val : -val;
                    ++bit;
                }
            }
            if (!skip) out.push_back(v);
        }
    }
    return out;
}

} // namespace detail

// SO(3) discretization: vertices and tetrahedral cells of the 600-cell with
// antipodal identification (60 vertices, 300 tetrahedra). Each tetrahedron
// stores coherent quaternion representatives from one of its two lifts.
inline Triangulation build_so3() {
    auto quats = detail::hexacosichoron_vertices();
    const int n = static_cast<int>(quats.size());
    const double adj_thresh = 0.8; // neighbors have <p,q> = cos(36 deg) ~ 0.809

    std::vector<std::vector<int>> nbr(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (quats[i].dot(quats[j]) > adj_thresh) {
                nbr[i].push_back(j);
                nbr[j].push_back(i);
            }

    // 4-cliques of the adjacency graph are exactly the 600 tetrahedral cells.
    std::vector<std::array<int, 4>> cells;
    for (int i = 0; i < n; ++i) {
        for (int j : nbr[i]) {
            if (j <= i) continue;
            for (int k : nbr[i]) {
                if (k <= j || std::find(nbr[j].begin(), nbr[j].end(), k) == nbr[j].end()) continue;
                for (int l : nbr[i]) {
                    if (l <= k) continue;
                    if (std::find(nbr[j].begin(), nbr[j].end(), l) == nbr[j].end()) continue;
                    if (std::find(nbr[k].begin(), nbr[k].end(), l) == nbr[k].end()) continue;
                    cells.push_back({i, j, k, l});
                }
            }
        }
    }

    // antipodal classes in deterministic first-seen order
    auto canon = [](const Eigen::Vector4d& q) {
        for (int i = 0; i < 4; ++i)
            if (std::abs(q(i)) > 1e-12) return q(i) > 0 ? q : Eigen::Vector4d(-q);
        return q;
    };
    std::vector<int> cls(n, -1);
    std::vector<Eigen::Vector4d> reps;
    for (int i = 0; i < n; ++i) {
        if (cls[i] >= 0) continue;
        Eigen::Vector4d c = canon(quats[i]);
        int id = static_cast<int>(reps.size());
        reps.push_back(c);
        for (int j = i; j < n; ++j)
            if (cls[j] < 0 && std::abs(quats[j].dot(c)) > 1.0 - 1e-9) cls[j] = id;
    }

    Triangulation tri{ManifoldGeometry::so3(), Eigen::MatrixXd(reps.size(), 4), {}, {}, {}};
    for (std::size_t i = 0; i < reps.size(); ++i) tri.vertices.row(i) = reps[i].transpose();

    std::map<std::array<int, 4>, std::array<int, 4>> seen; // class tuple -> original cell
    for (auto& c : cells) {
        std::array<int, 4> key = {cls[c[0]], cls[c[1]], cls[c[2]], cls[c[3]]};
        std::array<int, 4> order = {0, 1, 2, 3};
        std::sort(order.begin(), order.end(), [&](int a, int b) { return key[a] < key[b]; });
        std::array<int, 4> skey, scell;
        for (int i = 0; i < 4; ++i) {
            skey[i] = key[order[i]];
            scell[i] = c[order[i]];
        }
        seen.emplace(skey, scell);
    }
    for (auto& [key, cell] : seen) {
        tri.simplices.push_back({key[0], key[1], key[2], key[3]});
        Eigen::MatrixXd C(4, 4);
        for (int i = 0; i < 4; ++i) C.col(i) = quats[cell[i]];
        tri.simplex_coords.push_back(C);
    }
    tri.vertex_to_simplices.assign(tri.vertices.rows(), {});
    for (int t = 0; t < tri.num_simplices(); ++t)
        for (int k : tri.simplices[t]) tri.vertex_to_simplices[k].push_back(t);
    return tri;
}

// m x n parameter grid on the figure-8 Klein immersion with the
// orientation-reversing gluing in the u direction; 2*m*n triangles, closed.
inline Triangulation build_klein(int m, int n) {
    if (m < 3 || n < 3) throw invalid_argument_error("build_klein: need m, n >= 3");
    ManifoldGeometry geom = ManifoldGeometry::klein();
    const KleinSurface& surf = geom.klein_surface();
    Triangulation tri{geom, Eigen::MatrixXd(m * n, 3), {}, {}, {}};
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            Eigen::Vector3d p = surf.embed(2.0 * kPi * i / m, 2.0 * kPi * j / n);
            tri.vertices.row(i * n + j) = p.transpose();
        }
    auto vid = [&](int i, int j) {
        bool flip = false;
        if (i < 0) { i += m; flip = !flip; }
        if (i >= m) { i -= m; flip = !flip; }
        if (flip) j = -j;
        j = ((j % n) + n) % n;
        return i * n + j;
    };
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
            tri.simplices.push_back({a, b, c});
            tri.simplices.push_back({a, c, d});
        }
    tri.finalize();
    return tri;
}

// Regular grid on [low, high] with Kuhn triangulation of each cell
// (s! simplices per cell via monotone lattice paths).
inline Triangulation build_flat_box(const VecN& low, const VecN& high, const std::vector<int>& counts) {
    ManifoldGeometry geom = ManifoldGeometry::flat_box(low, high);
    int s = geom.intrinsic_dim();
    if (static_cast<int>(counts.size()) != s)
        throw invalid_argument_error("build_flat_box: counts size must match box dimension");
    for (int c : counts)
        if (c < 2) throw invalid_argument_error("build_flat_box: counts must be >= 2");

    int L = 1;
    for (int i = 0; i < s; ++i) L *= counts[i];
    std::vector<int> stride(s, 1);
    for (int i = s - 2; i >= 0; --i) stride[i] = stride[i + 1] * counts[i + 1];

    Triangulation tri{geom, Eigen::MatrixXd(L, s), {}, {}, {}};
    std::vector<int> idx(s, 0);
    for (int flat = 0; flat < L; ++flat) {
        int rem = flat;
        for (int i = 0; i < s; ++i) {
            idx[i] = rem / stride[i];
            rem %= stride[i];
        }
        for (int i = 0; i < s; ++i)
            tri.vertices(flat, i) = low(i) + (high(i) - low(i)) * idx[i] / (counts[i] - 1);
    }

    std::vector<std::vector<int>> perms;
    std::vector<int> base(s);
    std::iota(base.begin(), base.end(), 0);
    do { perms.push_back(base); } while (std::next_permutation(base.begin(), base.end()));

    std::vector<int> cell(s, 0);
    bool done = false;
    while (!done) {
        int corner = 0;
        for (int i = 0; i < s; ++i) corner += cell[i] * stride[i];
        for (const auto& perm : perms) {
            std::vector<int> sx = {corner};
            int cur = corner;
            for (int step : perm) {
                cur += stride[step];
                sx.push_back(cur);
            }
            tri.simplices.push_back(sx);
        }
        for (int i = s - 1; i >= 0; --i) {
            if (++cell[i] < counts[i] - 1) break;
            cell[i] = 0;
            if (i == 0) done = true;
        }
        if (s == 0) break;
    }
    tri.finalize();
    return tri;
}

// Exact Euclidean projection of y onto the convex hull of the simplex columns,
// by enumeration of faces (s <= 3, at most 15 subsets).
inline VecN closest_point_in_simplex(const Eigen::MatrixXd& V, const VecN& y, VecN* point_out = nullptr) {
    const int m = static_cast<int>(V.cols());
    double best = std::numeric_limits<double>::max();
    VecN best_w = VecN::Zero(m);
    VecN best_p = VecN::Zero(V.rows());
    for (int mask = 1; mask < (1 << m); ++mask) {
        std::vector<int> sel;
        for (int i = 0; i < m; ++i)
            if (mask & (1 << i)) sel.push_back(i);
        const int r = static_cast<int>(sel.size());
        Eigen::MatrixXd K(r + 1, r + 1);
        Eigen::VectorXd rhs(r + 1);
        for (int a = 0; a < r; ++a) {
            for (int b = 0; b < r; ++b) K(a, b) = 2.0 * V.col(sel[a]).dot(V.col(sel[b]));
            K(a, r) = 1.0;
            K(r, a) = 1.0;
            rhs(a) = 2.0 * V.col(sel[a]).dot(y);
        }
        K(r, r) = 0.0;
        rhs(r) = 1.0;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
        if (!lu.isInvertible()) continue;
        Eigen::VectorXd sol = lu.solve(rhs);
        bool feasible = true;
        for (int a = 0; a < r; ++a)
            if (sol(a) < -1e-10) feasible = false;
        if (!feasible) continue;
        VecN p = VecN::Zero(V.rows());
        for (int a = 0; a < r; ++a) p += sol(a) * V.col(sel[a]);
        double d2 = (p - y).squaredNorm();
        if (d2 < best - 1e-15) {
            best = d2;
            best_w.setZero();
            for (int a = 0; a < r; ++a) best_w(sel[a]) = sol(a);
            best_p = p;
        }
    }
    if (point_out) *point_out = best_p;
    return best_w;
}

struct BarycentricLocation {
    int simplex;
    VecN weights; // s+1 convex weights
    double residual;
};

// Embed a near-manifold point into M_h: the simplex whose closest-point
// projection of y has minimal residual, with the convex weights of that
// projection. Ties break to the lowest simplex index. For SO(3) both sheet
// representatives of y are considered.
inline BarycentricLocation barycentric_locate(const Triangulation& tri, const VecN& y) {
    BarycentricLocation best{-1, VecN(), std::numeric_limits<double>::max()};
    const bool quotient = tri.geom.kind() == ManifoldKind::so3;
    for (int t = 0; t < tri.num_simplices(); ++t) {
        for (int sheet = 0; sheet < (quotient ? 2 : 1); ++sheet) {
            VecN yy = sheet == 0 ? y : VecN(-y);
            VecN p;
            VecN w = closest_point_in_simplex(tri.simplex_coords[t], yy, &p);
            double res = (p - yy).norm();
            if (res < best.residual - 1e-14) {
                best = {t, w, res};
            }
        }
    }
    for (int i = 0; i < best.weights.size(); ++i) {
        if (best.weights(i) < 0.0) best.weights(i) = 0.0;
    }
    best.weights /= best.weights.sum();
    return best;
}

} // namespace mlift
