#include "helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace mlift;
using Catch::Approx;

namespace {

// independent affine interpolation via barycentric coordinates
double interp_on_simplex(const Eigen::MatrixXd& V, const Eigen::VectorXd& vals, const VecN& z) {
    const int m = static_cast<int>(V.cols());
    Eigen::MatrixXd K(V.rows() + 1, m);
    K.topRows(V.rows()) = V;
    K.bottomRows(1).setOnes();
    Eigen::VectorXd rhs(V.rows() + 1);
    rhs.head(V.rows()) = z;
    rhs(V.rows()) = 1.0;
    Eigen::VectorXd w = K.colPivHouseholderQr().solve(rhs);
    return w.dot(vals);
}

} // namespace

TEST_CASE("simplex frame", "[fem]") {
    Triangulation t4 = build_circle(4); // edge 0 joins (1,0) and (0,1)
    SimplexFrame f = simplex_frame(t4, 0);
    REQUIRE(f.P.rows() == 1);
    REQUIRE(f.P.cols() == 2);
    double sgn = f.P(0, 0) > 0 ? 1.0 : -1.0;
    CHECK(f.P(0, 0) * sgn == Approx(1.0 / std::sqrt(2.0)).margin(1e-14));
    CHECK(f.P(0, 1) * sgn == Approx(-1.0 / std::sqrt(2.0)).margin(1e-14));

    Triangulation ico = build_sphere2(1);
    for (int t = 0; t < ico.num_simplices(); t += 7) {
        SimplexFrame ft = simplex_frame(ico, t);
        Eigen::MatrixXd PPt = ft.P * ft.P.transpose();
        CHECK((PPt - Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-12);
        // isometry on the spanned subspace
        VecN e = ico.simplex_coords[t].col(1) - ico.simplex_coords[t].col(0);
        CHECK((ft.P * e).norm() == Approx(e.norm()).margin(1e-12));
    }
}

TEST_CASE("logmap frame", "[fem]") {
    Triangulation t4 = build_circle(4);
    SimplexFrame lf = logmap_frame(t4, 0);
    CHECK(lf.alpha == Approx((kPi / 2.0) / std::sqrt(2.0)).epsilon(1e-12));

    // equal spacing: alpha identical on all edges
    Triangulation t7 = build_circle(7);
    double a0 = logmap_frame(t7, 0).alpha;
    for (int t = 1; t < 7; ++t) CHECK(logmap_frame(t7, t).alpha == Approx(a0).margin(1e-10));

    // flat manifold: geodesic equals chord, logmap frame = orthonormal frame
    VecN lo(1), hi(1);
    lo << 0.0;
    hi << 2.0;
    Triangulation flat = build_flat_box(lo, hi, {5});
    for (int t = 0; t < flat.num_simplices(); ++t) {
        SimplexFrame a = simplex_frame(flat, t);
        SimplexFrame b = logmap_frame(flat, t);
        CHECK(b.alpha == Approx(1.0).margin(1e-12));
        CHECK((a.P - b.P).norm() < 1e-12);
    }

    CHECK_THROWS_AS(logmap_frame(build_sphere2(0), 0), invalid_argument_error);
}

TEST_CASE("simplex gradient", "[fem]") {
    Triangulation t4 = build_circle(4);
    Eigen::MatrixXd nodal = Eigen::MatrixXd::Zero(4, 1);
    nodal(0, 0) = 1.0; // p = 1 at (1,0), 0 at (0,1)
    Eigen::MatrixXd grad = simplex_gradient(t4, 0, nodal);
    CHECK(grad(0, 0) == Approx(0.5).margin(1e-12));
    CHECK(grad(1, 0) == Approx(-0.5).margin(1e-12));

    // closed form of the 1-D case
    VecN z1 = t4.vertex(0), z2 = t4.vertex(1);
    VecN expected = (nodal(0, 0) - nodal(1, 0)) * (z1 - z2) / (z1 - z2).squaredNorm();
    CHECK((grad.col(0) - expected).norm() < 1e-12);

    Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(4, 2, 3.7);
    CHECK(simplex_gradient(t4, 1, constant).norm() < 1e-12);

    // finite-difference oracle on a 2-simplex in R^3
    Triangulation ico = build_sphere2(0);
    std::mt19937 rng(3);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int t = 0; t < 5; ++t) {
        Eigen::MatrixXd vals(12, 1);
        for (int k = 0; k < 12; ++k) vals(k, 0) = gauss(rng);
        Eigen::MatrixXd g = simplex_gradient(ico, t, vals);
        SimplexFrame f = simplex_frame(ico, t);
        const Eigen::MatrixXd& V = ico.simplex_coords[t];
        Eigen::VectorXd vT(3);
        for (int i = 0; i < 3; ++i) vT(i) = vals(ico.simplices[t][i], 0);
        VecN centroid = (V.col(0) + V.col(1) + V.col(2)) / 3.0;
        const double eps = 1e-6;
        for (int dir = 0; dir < 2; ++dir) {
            VecN e = f.P.row(dir).transpose();
            double fd = (interp_on_simplex(V, vT, centroid + eps * e) -
                         interp_on_simplex(V, vT, centroid - eps * e)) /
                        (2.0 * eps);
            CHECK(fd == Approx(e.dot(g.col(0))).margin(1e-8));
        }
    }

    // linearity in the nodal values
    Eigen::MatrixXd u = Eigen::MatrixXd::Random(12, 2), v = Eigen::MatrixXd::Random(12, 2);
    Eigen::MatrixXd lhs = simplex_gradient(ico, 3, 2.0 * u - 0.5 * v);
    Eigen::MatrixXd rhs = 2.0 * simplex_gradient(ico, 3, u) - 0.5 * simplex_gradient(ico, 3, v);
    CHECK((lhs - rhs).norm() < 1e-12);
}

TEST_CASE("affine coefficients", "[fem]") {
    Triangulation t4 = build_circle(4);

    Eigen::VectorXd constant = Eigen::VectorXd::Constant(4, 2.5);
    auto [q1c, q2c] = affine_coeffs(t4, 0, constant);
    CHECK(q1c.norm() < 1e-12);
    CHECK(q2c == Approx(2.5).margin(1e-12));

    Eigen::VectorXd vals = Eigen::VectorXd::Zero(4);
    vals(0) = 1.0;
    auto [q1, q2] = affine_coeffs(t4, 0, vals);
    CHECK(q1(0) == Approx(0.5).margin(1e-12));
    CHECK(q1(1) == Approx(-0.5).margin(1e-12));
    CHECK(q2 == Approx(0.5).margin(1e-12));

    // reconstruction at the vertices, and consistency with the gradient
    std::mt19937 rng(9);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Triangulation ico = build_sphere2(0);
    for (int rep = 0; rep < 20; ++rep) {
        int t = rep % ico.num_simplices();
        Eigen::VectorXd nodal(12);
        for (int k = 0; k < 12; ++k) nodal(k) = gauss(rng);
        auto [g1, g2] = affine_coeffs(ico, t, nodal);
        for (int i = 0; i < 3; ++i) {
            VecN z = ico.simplex_coords[t].col(i);
            CHECK(g1.dot(z) + g2 == Approx(nodal(ico.simplices[t][i])).margin(1e-10));
        }
        Eigen::MatrixXd grad = simplex_gradient(ico, t, nodal);
        CHECK((g1 - grad.col(0)).norm() < 1e-10);
    }
}

TEST_CASE("nodal basis", "[fem]") {
    Triangulation ico = build_sphere2(0);
    CHECK(nodal_basis_eval(ico, 3, ico.vertex(3)) == Approx(1.0).margin(1e-12));
    CHECK(nodal_basis_eval(ico, 5, ico.vertex(3)) == Approx(0.0).margin(1e-12));

    const auto& sx = ico.simplices[0];
    VecN mid = 0.5 * (ico.vertex(sx[0]) + ico.vertex(sx[1]));
    CHECK(nodal_basis_eval(ico, sx[0], mid) == Approx(0.5).margin(1e-12));
    CHECK(nodal_basis_eval(ico, sx[1], mid) == Approx(0.5).margin(1e-12));

    // partition of unity at random mesh points
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        int t = static_cast<int>(uni(rng) * ico.num_simplices()) % ico.num_simplices();
        double w0 = uni(rng), w1 = uni(rng) * (1.0 - w0);
        const Eigen::MatrixXd& V = ico.simplex_coords[t];
        VecN z = w0 * V.col(0) + w1 * V.col(1) + (1.0 - w0 - w1) * V.col(2);
        double sum = 0.0;
        for (int k = 0; k < ico.num_vertices(); ++k) sum += nodal_basis_eval(ico, k, z);
        CHECK(sum == Approx(1.0).margin(1e-12));
    }

    VecN off(3);
    off << 2.0, 2.0, 2.0;
    CHECK_THROWS_AS(nodal_basis_eval(ico, 0, off), invalid_argument_error);
}

TEST_CASE("logmap vs orthonormal gradient on the circle", "[fem]") {
    Triangulation t8 = build_circle(8);
    std::mt19937 rng(21);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd nodal(8, 1);
    for (int k = 0; k < 8; ++k) nodal(k, 0) = gauss(rng);
    for (int t = 0; t < 8; ++t) {
        SimplexCalculus ortho = simplex_calculus(t8, t, FrameVariant::orthonormal);
        SimplexCalculus logm = simplex_calculus(t8, t, FrameVariant::logmap);
        Eigen::VectorXd vT(2);
        for (int i = 0; i < 2; ++i) vT(i) = nodal(t8.simplices[t][i], 0);
        double g_ortho = (ortho.Mg * vT)(0);
        double g_log = (logm.Mg * vT)(0);
        CHECK(g_ortho == Approx(g_log * logm.alpha).margin(1e-10));
    }
}
