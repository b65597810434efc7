#pragma once

#include <mlift/mlift.hpp>

#include <map>
#include <random>
#include <set>

namespace testutil {

using namespace mlift;

inline VecN random_point(const ManifoldGeometry& geom, std::mt19937& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    switch (geom.kind()) {
    case ManifoldKind::circle: {
        double a = 2.0 * kPi * uni(rng);
        VecN z(2);
        z << std::cos(a), std::sin(a);
        return z;
    }
    case ManifoldKind::sphere2:
    case ManifoldKind::so3: {
        VecN z(geom.embed_dim());
        for (int i = 0; i < z.size(); ++i) z(i) = gauss(rng);
        z.normalize();
        return geom.kind() == ManifoldKind::so3 ? geom.canonical(z) : z;
    }
    case ManifoldKind::flat_box: {
        VecN z(geom.embed_dim());
        for (int i = 0; i < z.size(); ++i)
            z(i) = geom.box_low()(i) + uni(rng) * (geom.box_high()(i) - geom.box_low()(i));
        return z;
    }
    case ManifoldKind::klein: {
        double u = 2.0 * kPi * uni(rng), v = 2.0 * kPi * uni(rng);
        Eigen::Vector3d p = geom.klein_surface().embed(u, v);
        VecN z(3);
        z << p(0), p(1), p(2);
        return z;
    }
    }
    return VecN::Zero(geom.embed_dim());
}

// point within the injectivity radius of z
inline VecN random_point_near(const ManifoldGeometry& geom, const VecN& z, std::mt19937& rng,
                              double radius_frac = 0.9) {
    for (int tries = 0; tries < 200; ++tries) {
        VecN y = random_point(geom, rng);
        double inj = geom.injectivity_radius();
        if (std::isinf(inj)) return y;
        if (geom.dist(z, y) < radius_frac * inj) return y;
    }
    return z;
}

// (s-1)-face -> incident simplex count
inline std::map<std::vector<int>, int> face_counts(const Triangulation& tri) {
    std::map<std::vector<int>, int> counts;
    const int m = tri.sdim() + 1;
    for (const auto& sx : tri.simplices) {
        for (int drop = 0; drop < m; ++drop) {
            std::vector<int> f;
            for (int i = 0; i < m; ++i)
                if (i != drop) f.push_back(sx[i]);
            std::sort(f.begin(), f.end());
            counts[f]++;
        }
    }
    return counts;
}

// Exhaustive orientation propagation over the dual graph of a surface mesh.
// Returns true when a globally consistent orientation exists.
inline bool orientable(const Triangulation& tri) {
    const int nT = tri.num_simplices();
    std::map<std::pair<int, int>, std::vector<int>> edge_tris;
    for (int t = 0; t < nT; ++t) {
        const auto& sx = tri.simplices[t];
        for (int i = 0; i < 3; ++i) {
            auto key = std::minmax(sx[i], sx[(i + 1) % 3]);
            edge_tris[{key.first, key.second}].push_back(t);
        }
    }
    // orientation of a triangle = its vertex cycle; neighbors must traverse
    // the shared edge in opposite directions
    std::vector<int> flip(nT, -1);
    auto directed_has = [&](int t, int flipped, int a, int b) {
        const auto& sx = tri.simplices[t];
        for (int i = 0; i < 3; ++i) {
            int u = sx[i], v = sx[(i + 1) % 3];
            if (flipped) std::swap(u, v);
            if (u == a && v == b) return true;
        }
        return false;
    };
    for (int seed = 0; seed < nT; ++seed) {
        if (flip[seed] >= 0) continue;
        flip[seed] = 0;
        std::vector<int> stack = {seed};
        while (!stack.empty()) {
            int t = stack.back();
            stack.pop_back();
            const auto& sx = tri.simplices[t];
            for (int i = 0; i < 3; ++i) {
                int a = sx[i], b = sx[(i + 1) % 3];
                if (flip[t]) std::swap(a, b);
                auto key = std::minmax(a, b);
                for (int other : edge_tris[{key.first, key.second}]) {
                    if (other == t) continue;
                    // consistent if the neighbor holds the edge as (b, a)
                    int want = directed_has(other, 0, b, a) ? 0 : 1;
                    if (flip[other] < 0) {
                        flip[other] = want;
                        stack.push_back(other);
                    } else if (flip[other] != want) {
                        return false;
                    }
                }
            }
        }
    }
    return true;
}

// Dykstra's alternating projection onto an intersection of halfspaces;
// independent reference for the active-set QP.
inline Eigen::VectorXd dykstra_halfspace_projection(const Eigen::VectorXd& x0, const HalfspaceSet& H,
                                                    int iters = 20000) {
    Eigen::VectorXd x = x0;
    std::vector<Eigen::VectorXd> corrections(H.size(), Eigen::VectorXd::Zero(x0.size()));
    for (int it = 0; it < iters; ++it) {
        double moved = 0.0;
        for (std::size_t i = 0; i < H.size(); ++i) {
            Eigen::VectorXd y = x + corrections[i];
            double viol = H[i].normal.dot(y) - H[i].offset;
            Eigen::VectorXd xn = y;
            if (viol > 0.0) xn -= (viol / H[i].normal.squaredNorm()) * H[i].normal;
            corrections[i] = y - xn;
            moved += (xn - x).norm();
            x = xn;
        }
        if (moved < 1e-14) break;
    }
    return x;
}

} // namespace testutil
