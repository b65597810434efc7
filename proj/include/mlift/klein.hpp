#pragma once

#include "common.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <queue>
#include <unordered_map>

namespace mlift {

// Figure-8 immersion of the Klein surface in R^3 with ring radius R and lobe
// scale a. Parameters (u,v) in [0,2pi)^2 with the gluing (u+2pi, -v) ~ (u,v).
//
// The immersion self-intersects along v in {0, pi}; distances are intrinsic
// (computed in parameter connectivity), so the two sheets do not shortcut
// through the intersection circle.
//
// Geodesic distances are approximated by Dijkstra on a fine auxiliary mesh
// with chord-length edges and local straightening at both endpoints. The
// closest-point map seeds a Gauss-Newton refinement from a precomputed
// parameter grid.
class KleinSurface {
public:
    KleinSurface(double ring_radius = 1.5, double lobe = 0.5, int seed_res = 256, int mesh_res = 128)
        : radius_(ring_radius), lobe_(lobe), seed_res_(seed_res), mesh_res_(mesh_res) {
        build_seed_grid();
        build_mesh();
    }

    double ring_radius() const { return radius_; }
    double lobe() const { return lobe_; }

    Eigen::Vector3d embed(double u, double v) const {
        double cu2 = std::cos(0.5 * u), su2 = std::sin(0.5 * u);
        double sv = std::sin(v), s2v = std::sin(2.0 * v);
        double c = lobe_ * (cu2 * sv - su2 * s2v);
        double s = lobe_ * (su2 * sv + cu2 * s2v);
        return {(radius_ + c) * std::cos(u), (radius_ + c) * std::sin(u), s};
    }

    Eigen::Matrix<double, 3, 2> jacobian(double u, double v) const {
        double cu2 = std::cos(0.5 * u), su2 = std::sin(0.5 * u);
        double sv = std::sin(v), s2v = std::sin(2.0 * v);
        double cv = std::cos(v), c2v = std::cos(2.0 * v);
        double c = lobe_ * (cu2 * sv - su2 * s2v);
        double s = lobe_ * (su2 * sv + cu2 * s2v);
        double dc_du = -0.5 * s;
        double ds_du = 0.5 * c;
        double dc_dv = lobe_ * (cu2 * cv - 2.0 * su2 * c2v);
        double ds_dv = lobe_ * (su2 * cv + 2.0 * cu2 * c2v);
        double cu = std::cos(u), su = std::sin(u);
        Eigen::Matrix<double, 3, 2> J;
        J.col(0) << dc_du * cu - (radius_ + c) * su, dc_du * su + (radius_ + c) * cu, ds_du;
        J.col(1) << dc_dv * cu, dc_dv * su, ds_dv;
        return J;
    }

    // Wrap parameters into [0,2pi)^2 honoring the orientation-reversing gluing.
    static Eigen::Vector2d canonical_params(double u, double v) {
        const double two_pi = 2.0 * kPi;
        while (u < 0.0) { u += two_pi; v = -v; }
        while (u >= two_pi) { u -= two_pi; v = -v; }
        v = std::fmod(v, two_pi);
        if (v < 0.0) v += two_pi;
        return {u, v};
    }

    // Closest-point parameters: grid seed + Gauss-Newton refinement.
    Eigen::Vector2d closest_params(const Eigen::Vector3d& p) const {
        int best = 0;
        double best_d2 = std::numeric_limits<double>::max();
        for (int i = 0; i < static_cast<int>(seed_pts_.size()); ++i) {
            double d2 = (seed_pts_[i] - p).squaredNorm();
            if (d2 < best_d2) { best_d2 = d2; best = i; }
        }
        double step = 2.0 * kPi / seed_res_;
        double u = (best / seed_res_) * step, v = (best % seed_res_) * step;
        for (int it = 0; it < 30; ++it) {
            Eigen::Vector3d r = p - embed(u, v);
            Eigen::Matrix<double, 3, 2> J = jacobian(u, v);
            Eigen::Matrix2d JtJ = J.transpose() * J;
            JtJ.diagonal().array() += 1e-12;
            Eigen::Vector2d delta = JtJ.ldlt().solve(J.transpose() * r);
            // trust region: the seed is one grid cell away at most
            double cap = 2.0 * step;
            if (delta.norm() > cap) delta *= cap / delta.norm();
            u += delta(0);
            v += delta(1);
            if (delta.norm() < 1e-13) break;
        }
        return canonical_params(u, v);
    }

    Eigen::Vector3d project(const Eigen::Vector3d& p) const {
        Eigen::Vector2d uv = closest_params(p);
        return embed(uv(0), uv(1));
    }

    Eigen::Vector3d tangent_project(const Eigen::Vector3d& z, const Eigen::Vector3d& w) const {
        Eigen::Vector2d uv = closest_params(z);
        Eigen::Matrix<double, 3, 2> J = jacobian(uv(0), uv(1));
        Eigen::Matrix<double, 3, 2> Q = Eigen::HouseholderQR<Eigen::Matrix<double, 3, 2>>(J)
                                            .householderQ() * Eigen::Matrix<double, 3, 2>::Identity();
        return Q * (Q.transpose() * w);
    }

    // Intrinsic distance approximation (symmetric up to the mesh resolution).
    // Points within a few parameter cells use the chord directly; longer
    // ranges go through the Dijkstra field with endpoint straightening.
    double distance(const Eigen::Vector3d& a, const Eigen::Vector3d& b) const {
        Eigen::Vector2d pa = closest_params(a), pb = closest_params(b);
        double step = 2.0 * kPi / mesh_res_;
        if (param_separation(pa, pb) < 3.0 * step) return (a - b).norm();
        Eigen::Vector3d qa = embed(pa(0), pa(1)), qb = embed(pb(0), pb(1));
        const std::vector<float>& field = dist_field(pa, qa);
        double best = std::numeric_limits<double>::max();
        for (int idx : ring_indices(pb)) {
            double d = field[idx] + (mesh_pts_[idx] - qb).norm();
            best = std::min(best, d);
        }
        return best;
    }

    // parameter-space separation honoring both wrap identifications
    static double param_separation(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
        const double two_pi = 2.0 * kPi;
        auto wrapdiff = [&](double x) {
            x = std::abs(std::fmod(x, two_pi));
            return std::min(x, two_pi - x);
        };
        double best = std::numeric_limits<double>::max();
        for (int wrap = -1; wrap <= 1; ++wrap) {
            double u2 = b(0) + wrap * two_pi;
            double v2 = (wrap == 0) ? b(1) : -b(1);
            best = std::min(best, std::hypot(a(0) - u2, wrapdiff(a(1) - v2)));
        }
        return best;
    }

    int mesh_res() const { return mesh_res_; }

private:
    double radius_, lobe_;
    int seed_res_, mesh_res_;
    std::vector<Eigen::Vector3d> seed_pts_;
    std::vector<Eigen::Vector3d> mesh_pts_;
    std::vector<std::vector<std::pair<int, float>>> adj_;

    mutable std::mutex cache_mutex_;
    mutable std::unordered_map<std::uint64_t, std::vector<float>> field_cache_;

    void build_seed_grid() {
        seed_pts_.resize(static_cast<std::size_t>(seed_res_) * seed_res_);
        double step = 2.0 * kPi / seed_res_;
        for (int i = 0; i < seed_res_; ++i)
            for (int j = 0; j < seed_res_; ++j)
                seed_pts_[static_cast<std::size_t>(i) * seed_res_ + j] = embed(i * step, j * step);
    }

    int wrap_mesh_index(int i, int j) const {
        bool flip = false;
        if (i < 0) { i += mesh_res_; flip = !flip; }
        if (i >= mesh_res_) { i -= mesh_res_; flip = !flip; }
        if (flip) j = -j;
        j = ((j % mesh_res_) + mesh_res_) % mesh_res_;
        return i * mesh_res_ + j;
    }

    void build_mesh() {
        int n = mesh_res_ * mesh_res_;
        mesh_pts_.resize(n);
        double step = 2.0 * kPi / mesh_res_;
        for (int i = 0; i < mesh_res_; ++i)
            for (int j = 0; j < mesh_res_; ++j)
                mesh_pts_[static_cast<std::size_t>(i) * mesh_res_ + j] = embed(i * step, j * step);
        adj_.assign(n, {});
        const int offs[8][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
        for (int i = 0; i < mesh_res_; ++i) {
            for (int j = 0; j < mesh_res_; ++j) {
                int from = i * mesh_res_ + j;
                for (auto& o : offs) {
                    int to = wrap_mesh_index(i + o[0], j + o[1]);
                    float len = static_cast<float>((mesh_pts_[from] - mesh_pts_[to]).norm());
                    adj_[from].push_back({to, len});
                }
            }
        }
    }

    // 3x3 ring of mesh vertices around a parameter location.
    std::vector<int> ring_indices(const Eigen::Vector2d& uv) const {
        double step = 2.0 * kPi / mesh_res_;
        int iu = static_cast<int>(std::floor(uv(0) / step));
        int iv = static_cast<int>(std::floor(uv(1) / step));
        std::vector<int> out;
        out.reserve(9);
        for (int di = 0; di <= 1; ++di)
            for (int dj = -1; dj <= 1; ++dj)
                out.push_back(wrap_mesh_index(iu + di, iv + dj));
        return out;
    }

    static std::uint64_t param_key(const Eigen::Vector2d& uv) {
        auto q = [](double x) { return static_cast<std::uint64_t>(std::llround(x * 1e9)); };
        return (q(uv(0)) << 32) ^ q(uv(1));
    }

    const std::vector<float>& dist_field(const Eigen::Vector2d& src_uv, const Eigen::Vector3d& src_pt) const {
        std::uint64_t key = param_key(src_uv);
        std::lock_guard<std::mutex> lk(cache_mutex_);
        auto it = field_cache_.find(key);
        if (it != field_cache_.end()) return it->second;
        if (field_cache_.size() > 512) field_cache_.clear();

        int n = static_cast<int>(mesh_pts_.size());
        std::vector<float> dist(n, std::numeric_limits<float>::max());
        using Item = std::pair<float, int>;
        std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
        for (int idx : ring_indices(src_uv)) {
            float d = static_cast<float>((mesh_pts_[idx] - src_pt).norm());
            if (d < dist[idx]) { dist[idx] = d; heap.push({d, idx}); }
        }
        while (!heap.empty()) {
            auto [d, i] = heap.top();
            heap.pop();
            if (d > dist[i]) continue;
            for (auto& [j, len] : adj_[i]) {
                float nd = d + len;
                if (nd < dist[j]) { dist[j] = nd; heap.push({nd, j}); }
            }
        }
        return field_cache_.emplace(key, std::move(dist)).first->second;
    }
};

} // namespace mlift
