#pragma once

#include "helpers.hpp"

#include <memory>

namespace testutil {

using namespace mlift;

// Owns the triangulation and data term a LiftedProblem points into.
struct ProblemBundle {
    Triangulation tri;
    ConvexifiedDataTerm data;
    Eigen::MatrixXd label_cost;
    DataTermSpec spec;
    LiftedProblem problem;
};

inline std::unique_ptr<ProblemBundle> make_sublabel_problem(Triangulation tri, GridShape grid,
                                                            DataTermSpec spec, RegularizerSpec reg,
                                                            FrameVariant frame = FrameVariant::orthonormal) {
    auto b = std::make_unique<ProblemBundle>();
    b->tri = std::move(tri);
    b->spec = std::move(spec);
    std::vector<SimplexCalculus> calc;
    for (int t = 0; t < b->tri.num_simplices(); ++t) calc.push_back(simplex_calculus(b->tri, t, frame));
    b->data = convexify_data_term(b->spec, b->tri, calc);
    b->problem.tri = &b->tri;
    b->problem.grid = grid;
    b->problem.reg = reg;
    b->problem.frame = frame;
    b->problem.mode = SolveMode::sublabel;
    b->problem.data = &b->data;
    return b;
}

inline std::unique_ptr<ProblemBundle> make_lellmann_problem(Triangulation tri, GridShape grid,
                                                            const DataTermSpec& spec, RegularizerSpec reg) {
    auto b = std::make_unique<ProblemBundle>();
    b->tri = std::move(tri);
    const int pixels = grid.pixels();
    b->label_cost.resize(pixels, b->tri.num_vertices());
    for (int px = 0; px < pixels; ++px)
        b->label_cost.row(px) = lellmann_mode_data(spec, b->tri, px).transpose();
    b->problem.tri = &b->tri;
    b->problem.grid = grid;
    b->problem.reg = reg;
    b->problem.mode = SolveMode::lellmann_tv;
    b->problem.label_cost = &b->label_cost;
    return b;
}

// Independent Chambolle-Pock reference for the unlifted vector-valued ROF
// problem min_u sum_x ||u(x) - f(x)||^2 + lambda sum_x ||u(x+1) - u(x)||_2
// on a 1-D grid. Deliberately self-contained.
struct UnliftedRofResult {
    Eigen::MatrixXd u;
    double energy;
};

inline double unlifted_rof_energy(const Eigen::MatrixXd& u, const Eigen::MatrixXd& f, double lambda) {
    double e = (u - f).squaredNorm();
    for (int i = 0; i + 1 < u.rows(); ++i) e += lambda * (u.row(i + 1) - u.row(i)).norm();
    return e;
}

inline UnliftedRofResult unlifted_rof_reference(const Eigen::MatrixXd& f, double lambda,
                                                int iters = 30000) {
    const int n = static_cast<int>(f.rows()), ch = static_cast<int>(f.cols());
    Eigen::MatrixXd u = f, ubar = f, p = Eigen::MatrixXd::Zero(n, ch);
    const double sigma = 0.49, tau = 0.49;
    for (int it = 0; it < iters; ++it) {
        // dual ascent on p with ball constraint ||p(x)|| <= lambda
        for (int i = 0; i + 1 < n; ++i) {
            p.row(i) += sigma * (ubar.row(i + 1) - ubar.row(i));
            double nn = p.row(i).norm();
            if (nn > lambda) p.row(i) *= lambda / nn;
        }
        p.row(n - 1).setZero();
        // primal: u <- prox of the quadratic data term
        Eigen::MatrixXd div = Eigen::MatrixXd::Zero(n, ch);
        for (int i = 0; i < n; ++i) {
            if (i + 1 < n) div.row(i) += p.row(i);
            if (i > 0) div.row(i) -= p.row(i - 1);
        }
        Eigen::MatrixXd unew = (u + tau * div + 2.0 * tau * f) / (1.0 + 2.0 * tau);
        ubar = 2.0 * unew - u;
        u = unew;
    }
    return {u, unlifted_rof_energy(u, f, lambda)};
}

// deterministic piecewise-smooth 1-D signal in R^2 (the flat ROF fixture)
inline Eigen::MatrixXd flat_rof_signal(int n = 64, unsigned seed = 2026, double sigma = 0.05) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    Eigen::MatrixXd f(n, 2);
    for (int i = 0; i < n; ++i) {
        double t = static_cast<double>(i) / (n - 1);
        double a = t < 0.35 ? 0.25 : (t < 0.7 ? 0.75 : 0.45);
        double b = 0.5 + 0.3 * std::sin(2.0 * kPi * t) * (t < 0.55 ? 1.0 : -1.0);
        f(i, 0) = std::clamp(a + gauss(rng), 0.02, 0.98);
        f(i, 1) = std::clamp(b + gauss(rng), 0.02, 0.98);
    }
    return f;
}

inline std::unique_ptr<ProblemBundle> make_flat_rof_problem(const Eigen::MatrixXd& f, int labels_per_axis,
                                                            int subgrid, double lambda) {
    VecN lo(2), hi(2);
    lo << 0.0, 0.0;
    hi << 1.0, 1.0;
    Triangulation tri = build_flat_box(lo, hi, {labels_per_axis, labels_per_axis});
    DataTermSpec spec;
    spec.kind = DataTermKind::quadratic_distance;
    spec.observed = f;
    spec.subgrid_level = subgrid;
    GridShape grid{static_cast<int>(f.rows()), 1, 1};
    return make_sublabel_problem(std::move(tri), grid, std::move(spec),
                                 {RegularizerKind::tv_frobenius, lambda, 0.1});
}

// smooth circle-valued 1-D signal embedded in R^2
inline Eigen::MatrixXd circle_signal(int n, unsigned seed = 7, double sigma = 0.0) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    Eigen::MatrixXd f(n, 2);
    for (int i = 0; i < n; ++i) {
        double t = static_cast<double>(i) / (n - 1);
        double a = 2.0 * kPi * t + 0.8 * std::sin(2.0 * kPi * t) + (sigma > 0 ? gauss(rng) : 0.0);
        f(i, 0) = std::cos(a);
        f(i, 1) = std::sin(a);
    }
    return f;
}

inline double mean_geodesic_distance(const ManifoldGeometry& geom, const Eigen::MatrixXd& a,
                                     const Eigen::MatrixXd& b) {
    double acc = 0.0;
    for (int i = 0; i < a.rows(); ++i) acc += geom.dist(a.row(i).transpose(), b.row(i).transpose());
    return acc / a.rows();
}

} // namespace testutil
