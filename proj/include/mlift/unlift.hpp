#pragma once

#include "common.hpp"
#include "solver.hpp"

namespace mlift {

struct MeanProblem {
    Eigen::MatrixXd anchors; // L x N
    Eigen::VectorXd weights; // L, nonnegative, sums to 1
    const ManifoldGeometry* geom = nullptr;

    void validate() const {
        if (anchors.rows() != weights.size())
            throw invalid_argument_error("mean: anchors/weights size mismatch");
        double sum = 0.0;
        for (int i = 0; i < weights.size(); ++i) {
            if (weights(i) < -1e-9) throw invalid_argument_error("mean: negative weight");
            sum += weights(i);
        }
        if (std::abs(sum - 1.0) > 1e-9) throw invalid_argument_error("mean: weights must sum to 1");
    }
};

struct KarcherResult {
    VecN point;
    int iterations = 0;
    double grad_norm = 0.0;
    bool flagged = false; // a cut-locus anchor was skipped
};

inline double mean_energy(const ManifoldGeometry& geom, const Eigen::MatrixXd& anchors,
                          const Eigen::VectorXd& weights, const VecN& z) {
    double e = 0.0;
    for (int i = 0; i < anchors.rows(); ++i) {
        double d = geom.dist(z, anchors.row(i).transpose());
        e += weights(i) * d * d;
    }
    return e;
}

// Riemannian center of mass by the classical fixed-point iteration: map the
// anchors to the tangent space at the iterate, average, map back. Starts at
// the anchor with maximum weight (lowest index on ties). Cut-locus anchors
// are skipped for that iteration with weight renormalization.
inline KarcherResult karcher_mean(const MeanProblem& prob, double tol = 1e-10, int max_iter = 200,
                                  std::vector<double>* energy_trace = nullptr) {
    prob.validate();
    const ManifoldGeometry& geom = *prob.geom;
    const int L = static_cast<int>(prob.anchors.rows());

    int start = 0;
    for (int k = 1; k < L; ++k)
        if (prob.weights(k) > prob.weights(start) + 1e-15) start = k;

    KarcherResult res;
    res.point = prob.anchors.row(start).transpose();
    for (int it = 0; it < max_iter; ++it) {
        if (energy_trace) energy_trace->push_back(mean_energy(geom, prob.anchors, prob.weights, res.point));
        VecN v = VecN::Zero(geom.embed_dim());
        double used = 0.0;
        for (int k = 0; k < L; ++k) {
            if (prob.weights(k) <= 0.0) continue;
            bool cut = false;
            VecN Vk = geom.log(res.point, prob.anchors.row(k).transpose(), &cut);
            if (cut) {
                res.flagged = true;
                continue;
            }
            v += prob.weights(k) * Vk;
            used += prob.weights(k);
        }
        if (used > 0.0 && used < 1.0 - 1e-15) v /= used;
        res.grad_norm = v.norm();
        if (res.grad_norm < tol) return res;
        res.point = geom.exp(res.point, v);
        res.iterations = it + 1;
    }
    return res;
}

// Per-pixel Karcher mean of a lifted field over the label positions.
inline Eigen::MatrixXd unlift_field(const LiftedField& v, const Triangulation& tri,
                                    std::vector<std::uint8_t>* flags = nullptr) {
    const int pixels = static_cast<int>(v.values.rows());
    Eigen::MatrixXd out(pixels, tri.ndim());
    if (flags) flags->assign(pixels, 0);
    for (int px = 0; px < pixels; ++px) {
        MeanProblem mp;
        mp.anchors = tri.vertices;
        mp.weights = v.values.row(px).transpose();
        for (int k = 0; k < mp.weights.size(); ++k) mp.weights(k) = std::max(mp.weights(k), 0.0);
        mp.weights /= mp.weights.sum();
        mp.geom = &tri.geom;
        KarcherResult r = karcher_mean(mp);
        out.row(px) = r.point.transpose();
        if (flags && r.flagged) (*flags)[px] = 1;
    }
    return out;
}

// Riemannian gradient descent on E(z) = sum_i lambda_i d(x_i, z)^2 with a
// fixed step; the local baseline of the mean comparison.
inline KarcherResult gradient_descent_mean(const ManifoldGeometry& geom, const Eigen::MatrixXd& points,
                                           const Eigen::VectorXd& weights, const VecN& start,
                                           double step = 0.5, double tol = 1e-10, int max_iter = 10000) {
    KarcherResult res;
    res.point = start;
    for (int it = 0; it < max_iter; ++it) {
        VecN grad = VecN::Zero(geom.embed_dim());
        for (int i = 0; i < points.rows(); ++i) {
            bool cut = false;
            VecN Vi = geom.log(res.point, points.row(i).transpose(), &cut);
            if (cut) res.flagged = true;
            grad -= 2.0 * weights(i) * Vi;
        }
        res.grad_norm = grad.norm();
        if (res.grad_norm < tol) return res;
        res.point = geom.exp(res.point, -step * grad);
        res.iterations = it + 1;
    }
    return res;
}

// Dense 1-D search over the circle; used as the reference optimum for the
// mean comparison.
inline std::pair<VecN, double> circle_mean_grid_oracle(const Eigen::MatrixXd& points,
                                                       const Eigen::VectorXd& weights,
                                                       int samples = 100000) {
    ManifoldGeometry geom = ManifoldGeometry::circle();
    double best_e = std::numeric_limits<double>::max();
    VecN best = VecN::Zero(2);
    for (int i = 0; i < samples; ++i) {
        double a = 2.0 * kPi * i / samples;
        VecN z(2);
        z << std::cos(a), std::sin(a);
        double e = mean_energy(geom, points, weights, z);
        if (e < best_e) {
            best_e = e;
            best = z;
        }
    }
    return {best, best_e};
}

struct LiftedMeanResult {
    VecN point;
    double energy = 0.0;
    SolveDiagnostics diagnostics;
};

// Single-pixel lifted mean problem: the data term is the weighted sum of
// squared distances sampled on the subgrid and convexified; no spatial
// coupling, so the regularizer is inert. Un-lifted via the Karcher mean.
inline LiftedMeanResult lifted_mean_demo(const Eigen::MatrixXd& points, const Eigen::VectorXd& weights,
                                         int labels, int subgrid, const SolverOptions& opts = {}) {
    Triangulation tri = build_circle(labels);
    std::vector<SimplexCalculus> calc;
    for (int t = 0; t < tri.num_simplices(); ++t) calc.push_back(simplex_calculus(tri, t));

    ConvexifiedDataTerm data;
    data.pixels = 1;
    data.nT = tri.num_simplices();
    data.s = 1;
    data.entries.resize(data.nT);
    for (int t = 0; t < data.nT; ++t) {
        SimplexSubgrid sg = make_subgrid(tri, calc[t], t, subgrid);
        std::vector<SubgridSample> samples;
        for (std::size_t j = 0; j < sg.local.size(); ++j) {
            SubgridSample s;
            s.local = sg.local[j];
            s.point = sg.on_manifold[j];
            s.rho = mean_energy(tri.geom, points, weights, s.point);
            samples.push_back(std::move(s));
        }
        data.entries[t] = convexify(samples, 1);
    }

    LiftedProblem prob;
    prob.tri = &tri;
    prob.grid = {1, 1, 1};
    prob.reg = {RegularizerKind::tv_frobenius, 1.0, 0.1};
    prob.data = &data;
    LiftedSolver solver(prob, opts);
    LiftedMeanResult out;
    out.diagnostics = solver.run();

    LiftedField f = solver.field();
    MeanProblem mp;
    mp.anchors = tri.vertices;
    mp.weights = f.values.row(0).transpose();
    for (int k = 0; k < mp.weights.size(); ++k) mp.weights(k) = std::max(mp.weights(k), 0.0);
    mp.weights /= mp.weights.sum();
    mp.geom = &tri.geom;
    out.point = karcher_mean(mp).point;
    out.energy = mean_energy(tri.geom, points, weights, out.point);
    return out;
}

} // namespace mlift
