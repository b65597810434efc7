#pragma once

#include "common.hpp"
#include "triangulation.hpp"

namespace mlift {

enum class FrameVariant { orthonormal, logmap };

// Basis representation of a simplex's direction space. The orthonormal variant
// has P * P^T = I; the logmap variant (1-D ranges only) rescales by the ratio
// alpha = geodesic / Euclidean edge length and stores the tangent-space data.
struct SimplexFrame {
    MatSN P; // s x N
    FrameVariant variant = FrameVariant::orthonormal;
    VecN base_point;                 // logmap: geodesic midpoint y_T
    Eigen::MatrixXd mapped_vertices; // logmap: N x (s+1), v_T^k = log_{y_T} Z_T^k
    double alpha = 1.0;
};

inline SimplexFrame simplex_frame(const Triangulation& tri, int T) {
    const Eigen::MatrixXd& V = tri.simplex_coords[T];
    const int s = tri.sdim(), n = tri.ndim();
    Eigen::MatrixXd E(n, s);
    for (int i = 0; i < s; ++i) E.col(i) = V.col(i + 1) - V.col(0);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(E);
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, s);
    Eigen::MatrixXd R = qr.matrixQR().topRows(s).triangularView<Eigen::Upper>();
    for (int i = 0; i < s; ++i) {
        if (std::abs(R(i, i)) < 1e-12 * E.norm())
            throw degenerate_geometry_error("simplex_frame: rank-deficient simplex");
        if (R(i, i) < 0.0) Q.col(i) = -Q.col(i);
    }
    SimplexFrame f;
    f.P = Q.transpose();
    return f;
}

// Frame variant of Lellmann et al.: vertices mapped to the tangent space at
// the simplex midpoint. Supported for s = 1; for one-dimensional simplices the
// induced gradient is the orthonormal one divided by alpha.
inline SimplexFrame logmap_frame(const Triangulation& tri, int T) {
    if (tri.sdim() != 1)
        throw invalid_argument_error("logmap_frame: only supported for 1-dimensional ranges");
    const Eigen::MatrixXd& V = tri.simplex_coords[T];
    VecN z1 = V.col(0), z2 = V.col(1);
    const ManifoldGeometry& g = tri.geom;
    VecN y = g.exp(z1, 0.5 * g.log(z1, z2));
    double geo = g.dist(z1, z2);
    double chord = (z2 - z1).norm();
    if (chord < 1e-14) throw degenerate_geometry_error("logmap_frame: coincident vertices");

    SimplexFrame f = simplex_frame(tri, T);
    f.variant = FrameVariant::logmap;
    f.alpha = geo / chord;
    f.base_point = y;
    f.mapped_vertices.resize(tri.ndim(), 2);
    f.mapped_vertices.col(0) = g.log(y, z1);
    f.mapped_vertices.col(1) = g.log(y, z2);
    f.P /= f.alpha;
    return f;
}

// Per-simplex interpolation calculus. With local vertex coordinates
// u_k = P Z_T^k, the affine interpolant of nodal values r solves
// A [ghat; q2] = r for A = [u_k^T 1]; M and o are the corresponding rows of
// A^{-1}. The projected surface gradient and the minimum-norm affine slope of
// the same nodal data coincide: ghat = M r.
struct SimplexCalculus {
    MatSN P;               // orthonormal frame, s x N
    Eigen::MatrixXd M;     // s x (s+1)
    Eigen::RowVectorXd o;  // 1 x (s+1)
    Eigen::MatrixXd Mg;    // gradient coupling (M, or M/alpha for logmap)
    Eigen::MatrixXd local_verts; // s x (s+1)
    double alpha = 1.0;
};

inline SimplexCalculus simplex_calculus(const Triangulation& tri, int T,
                                        FrameVariant variant = FrameVariant::orthonormal) {
    SimplexFrame f = simplex_frame(tri, T);
    const Eigen::MatrixXd& V = tri.simplex_coords[T];
    const int s = tri.sdim();
    SimplexCalculus c;
    c.P = f.P;
    c.local_verts = f.P * V; // s x (s+1)
    Eigen::MatrixXd A(s + 1, s + 1);
    A.leftCols(s) = c.local_verts.transpose();
    A.col(s).setOnes();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible())
        throw degenerate_geometry_error("simplex_calculus: degenerate simplex");
    Eigen::MatrixXd Ainv = lu.inverse();
    c.M = Ainv.topRows(s);
    c.o = Ainv.row(s);
    if (variant == FrameVariant::logmap) {
        SimplexFrame lf = logmap_frame(tri, T);
        c.alpha = lf.alpha;
        c.Mg = c.M / lf.alpha;
    } else {
        c.Mg = c.M;
    }
    return c;
}

// Gradient of the affine extension of nodal values on simplex T, constant in
// the simplex-normal directions. nodal is L x d.
inline Eigen::MatrixXd simplex_gradient(const Triangulation& tri, int T, const Eigen::MatrixXd& nodal) {
    if (nodal.rows() != tri.num_vertices())
        throw invalid_argument_error("simplex_gradient: nodal field size mismatch");
    SimplexCalculus c = simplex_calculus(tri, T);
    const auto& sx = tri.simplices[T];
    Eigen::MatrixXd rT(sx.size(), nodal.cols());
    for (std::size_t i = 0; i < sx.size(); ++i) rT.row(i) = nodal.row(sx[i]);
    return c.P.transpose() * (c.M * rT); // N x d
}

// Minimum-norm affine representation q(z) = <q1, z> + q2 of scalar nodal data.
inline std::pair<VecN, double> affine_coeffs(const Triangulation& tri, int T, const Eigen::VectorXd& nodal) {
    if (nodal.size() != tri.num_vertices())
        throw invalid_argument_error("affine_coeffs: nodal field size mismatch");
    SimplexCalculus c = simplex_calculus(tri, T);
    const auto& sx = tri.simplices[T];
    Eigen::VectorXd rT(sx.size());
    for (std::size_t i = 0; i < sx.size(); ++i) rT(i) = nodal(sx[i]);
    VecN q1 = c.P.transpose() * (c.M * rT);
    double q2 = c.o * rT;
    return {q1, q2};
}

// Nodal basis chi_k evaluated at a mesh point.
inline double nodal_basis_eval(const Triangulation& tri, int k, const VecN& z, double tol = 1e-8) {
    BarycentricLocation loc = barycentric_locate(tri, z);
    if (loc.residual > tol)
        throw invalid_argument_error("nodal_basis_eval: point is off the mesh");
    const auto& sx = tri.simplices[loc.simplex];
    for (std::size_t i = 0; i < sx.size(); ++i)
        if (sx[i] == k) return loc.weights(i);
    return 0.0;
}

} // namespace mlift
