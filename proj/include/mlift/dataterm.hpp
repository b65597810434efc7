#pragma once

#include "common.hpp"
#include "fem.hpp"
#include "hull.hpp"
#include "prox.hpp"
#include "triangulation.hpp"

#include <functional>

namespace mlift {

enum class DataTermKind { quadratic_distance, inpainting_indicator };

// Finite stand-in for the inpainting hard constraint; keeps hulls bounded and
// projections well-conditioned while preserving the minimizer.
inline constexpr double kInpaintingCap = 1e4;

struct DataTermSpec {
    DataTermKind kind = DataTermKind::quadratic_distance;
    Eigen::MatrixXd observed;       // pixels x N, points on M
    std::vector<std::uint8_t> mask; // inpainting: nonzero = known pixel
    int subgrid_level = 4;

    void validate(const Triangulation& tri) const {
        if (subgrid_level < 1) throw invalid_argument_error("dataterm: subgrid_level must be >= 1");
        if (observed.cols() != tri.ndim())
            throw invalid_argument_error("dataterm: observed signal dimension mismatch");
        if (kind == DataTermKind::inpainting_indicator &&
            mask.size() != static_cast<std::size_t>(observed.rows()))
            throw invalid_argument_error("dataterm: mask size mismatch");
    }
};

struct SubgridSample {
    VecS local;   // P_T z, coordinates in the simplex frame
    VecN point;   // iota(z), the closest manifold point
    double rho;
};

namespace detail {

// barycentric multi-indices |beta| = level over s+1 vertices, lexicographic
inline void enumerate_subgrid(int s, int level, std::vector<std::vector<int>>& out) {
    out.clear();
    std::vector<int> beta(s + 1, 0);
    std::function<void(int, int)> rec = [&](int pos, int rem) {
        if (pos == s) {
            beta[pos] = rem;
            out.push_back(beta);
            return;
        }
        for (int b = rem; b >= 0; --b) {
            beta[pos] = b;
            rec(pos + 1, rem - b);
        }
    };
    rec(0, level);
}

} // namespace detail

// Subgrid geometry of one simplex: local coordinates and projected manifold
// points, shared across pixels.
struct SimplexSubgrid {
    std::vector<VecS> local;
    std::vector<VecN> on_manifold;
};

inline SimplexSubgrid make_subgrid(const Triangulation& tri, const SimplexCalculus& calc, int T, int level) {
    SimplexSubgrid sg;
    std::vector<std::vector<int>> betas;
    detail::enumerate_subgrid(tri.sdim(), level, betas);
    const Eigen::MatrixXd& V = tri.simplex_coords[T];
    for (const auto& beta : betas) {
        VecN z = VecN::Zero(tri.ndim());
        for (int i = 0; i <= tri.sdim(); ++i) z += (static_cast<double>(beta[i]) / level) * V.col(i);
        sg.local.push_back(calc.P * z);
        sg.on_manifold.push_back(tri.geom.project(z));
    }
    return sg;
}

// rho sampled on the subgrid of simplex T for one pixel. For the inpainting
// indicator, `zero_simplex`/`zero_sample` identify the one subgrid node that
// carries the hard constraint (globally nearest sample to the observation).
inline std::vector<SubgridSample> sample_data_term_on(const DataTermSpec& spec, const Triangulation& tri,
                                                      const SimplexSubgrid& sg, int pixel, int T,
                                                      int zero_simplex = -1, int zero_sample = -1) {
    std::vector<SubgridSample> out;
    out.reserve(sg.local.size());
    VecN obs = spec.observed.row(pixel).transpose();
    bool known = spec.kind == DataTermKind::inpainting_indicator &&
                 pixel < static_cast<int>(spec.mask.size()) && spec.mask[pixel] != 0;
    for (std::size_t j = 0; j < sg.local.size(); ++j) {
        SubgridSample s;
        s.local = sg.local[j];
        s.point = sg.on_manifold[j];
        switch (spec.kind) {
        case DataTermKind::quadratic_distance: {
            double d = tri.geom.dist(obs, s.point);
            s.rho = d * d;
            break;
        }
        case DataTermKind::inpainting_indicator:
            if (!known) {
                s.rho = 0.0;
            } else {
                s.rho = (T == zero_simplex && static_cast<int>(j) == zero_sample) ? 0.0 : kInpaintingCap;
            }
            break;
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<SubgridSample> sample_data_term(const DataTermSpec& spec, const Triangulation& tri,
                                                   int pixel, int T) {
    spec.validate(tri);
    SimplexCalculus calc = simplex_calculus(tri, T);
    SimplexSubgrid sg = make_subgrid(tri, calc, T, spec.subgrid_level);
    int zT = -1, zj = -1;
    if (spec.kind == DataTermKind::inpainting_indicator && pixel < static_cast<int>(spec.mask.size()) &&
        spec.mask[pixel] != 0) {
        VecN obs = spec.observed.row(pixel).transpose();
        double best = std::numeric_limits<double>::max();
        for (int t = 0; t < tri.num_simplices(); ++t) {
            SimplexCalculus c2 = simplex_calculus(tri, t);
            SimplexSubgrid g2 = make_subgrid(tri, c2, t, spec.subgrid_level);
            for (std::size_t j = 0; j < g2.on_manifold.size(); ++j) {
                double d = tri.geom.dist(obs, g2.on_manifold[j]);
                if (d < best - 1e-15) {
                    best = d;
                    zT = t;
                    zj = static_cast<int>(j);
                }
            }
        }
    }
    return sample_data_term_on(spec, tri, sg, pixel, T, zT, zj);
}

// Per-(pixel, simplex) convexified data term: lower-hull vertices as the
// halfspace set {<w_j, g> - b <= h_j} for the rho_T^* epigraph, plus the
// facet representation for evaluating the convexified rho itself.
struct HullEntry {
    std::vector<VecS> w;
    std::vector<double> h;
    std::vector<std::pair<VecS, double>> facets; // (slope, intercept)

    double eval(const VecS& wq) const {
        double best = -std::numeric_limits<double>::max();
        for (const auto& [slope, icpt] : facets) best = std::max(best, slope.dot(wq) + icpt);
        return best;
    }
    // rho_hat_T^*(g) = max_j <w_j, g> - h_j
    double conj(const VecS& g) const {
        double best = -std::numeric_limits<double>::max();
        for (std::size_t j = 0; j < w.size(); ++j) best = std::max(best, w[j].dot(g) - h[j]);
        return best;
    }
};

inline HullEntry convexify(const std::vector<SubgridSample>& samples, int s) {
    if (static_cast<int>(samples.size()) < s + 1)
        throw invalid_argument_error("convexify: need at least s+1 samples");
    std::vector<VecS> w(samples.size());
    std::vector<double> h(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        w[i] = samples[i].local;
        h[i] = samples[i].rho;
    }
    LowerHullResult hull = lower_convex_hull(w, h);
    HullEntry e;
    for (int id : hull.vertex_ids) {
        e.w.push_back(w[id]);
        e.h.push_back(h[id]);
    }
    for (auto& f : hull.facets) e.facets.emplace_back(f.slope, f.intercept);
    return e;
}

struct ConvexifiedDataTerm {
    int pixels = 0, nT = 0, s = 0;
    std::vector<HullEntry> entries; // pixel * nT + T

    const HullEntry& at(int pixel, int T) const { return entries[static_cast<std::size_t>(pixel) * nT + T]; }
};

// Precompute hulls for all pixels and simplices. Subgrid geometry is shared
// across pixels; hulls are per pixel.
inline ConvexifiedDataTerm convexify_data_term(const DataTermSpec& spec, const Triangulation& tri,
                                               const std::vector<SimplexCalculus>& calc) {
    spec.validate(tri);
    const int nT = tri.num_simplices();
    const int pixels = static_cast<int>(spec.observed.rows());
    std::vector<SimplexSubgrid> grids(nT);
    for (int t = 0; t < nT; ++t) grids[t] = make_subgrid(tri, calc[t], t, spec.subgrid_level);

    // inpainting: locate the globally nearest subgrid sample per known pixel
    std::vector<int> zero_T(pixels, -1), zero_j(pixels, -1);
    if (spec.kind == DataTermKind::inpainting_indicator) {
        for (int px = 0; px < pixels; ++px) {
            if (spec.mask[px] == 0) continue;
            VecN obs = spec.observed.row(px).transpose();
            double best = std::numeric_limits<double>::max();
            for (int t = 0; t < nT; ++t)
                for (std::size_t j = 0; j < grids[t].on_manifold.size(); ++j) {
                    double d = tri.geom.dist(obs, grids[t].on_manifold[j]);
                    if (d < best - 1e-15) {
                        best = d;
                        zero_T[px] = t;
                        zero_j[px] = static_cast<int>(j);
                    }
                }
        }
    }

    ConvexifiedDataTerm out;
    out.pixels = pixels;
    out.nT = nT;
    out.s = tri.sdim();
    out.entries.resize(static_cast<std::size_t>(pixels) * nT);
    parallel_for(pixels, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t px = lo; px < hi; ++px) {
            for (int t = 0; t < nT; ++t) {
                auto samples = sample_data_term_on(spec, tri, grids[t], static_cast<int>(px), t,
                                                   zero_T[px], zero_j[px]);
                out.entries[static_cast<std::size_t>(px) * nT + t] = convexify(samples, tri.sdim());
            }
        }
    });
    return out;
}

// Exact projection onto {(g, b): rho_hat_T^*(g) <= b}.
inline std::pair<VecS, double> project_rho_conj_epi(const HullEntry& entry, const VecS& g0, double b0) {
    const int s = static_cast<int>(g0.size());
    const int m = s + 1;
    std::vector<double> normals(entry.w.size() * m), offsets(entry.w.size());
    for (std::size_t j = 0; j < entry.w.size(); ++j) {
        for (int i = 0; i < s; ++i) normals[j * m + i] = entry.w[j](i);
        normals[j * m + s] = -1.0;
        offsets[j] = entry.h[j];
    }
    Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 4, 1> x0(m), x(m);
    x0.head(s) = g0;
    x0(s) = b0;
    int active[6];
    int n_active = 0;
    detail::project_halfspaces_raw(m, normals.data(), offsets.data(), static_cast<int>(entry.w.size()),
                                   x0.data(), x.data(), active, &n_active);
    return {x.head(s), x(s)};
}

// Label-resolution data vector (rho(x, Z^k))_k for the TV-only fast path.
inline Eigen::VectorXd lellmann_mode_data(const DataTermSpec& spec, const Triangulation& tri, int pixel) {
    const int L = tri.num_vertices();
    Eigen::VectorXd out(L);
    VecN obs = spec.observed.row(pixel).transpose();
    switch (spec.kind) {
    case DataTermKind::quadratic_distance:
        for (int k = 0; k < L; ++k) {
            double d = tri.geom.dist(obs, tri.vertex(k));
            out(k) = d * d;
        }
        break;
    case DataTermKind::inpainting_indicator: {
        bool known = pixel < static_cast<int>(spec.mask.size()) && spec.mask[pixel] != 0;
        if (!known) {
            out.setZero();
        } else {
            int best = 0;
            double bd = std::numeric_limits<double>::max();
            for (int k = 0; k < L; ++k) {
                double d = tri.geom.dist(obs, tri.vertex(k));
                if (d < bd - 1e-15) {
                    bd = d;
                    best = k;
                }
            }
            out.setConstant(kInpaintingCap);
            out(best) = 0.0;
        }
        break;
    }
    }
    return out;
}

} // namespace mlift
