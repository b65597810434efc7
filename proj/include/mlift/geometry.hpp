#pragma once

#include "common.hpp"
#include "klein.hpp"

#include <memory>

namespace mlift {

enum class ManifoldKind { circle, sphere2, so3, klein, flat_box };

// A concrete s-dimensional manifold embedded in R^N with closed-form (or, for
// the Klein surface, controlled-approximation) exponential, logarithm,
// distance and closest-point maps.
//
// SO(3) is represented by unit quaternions modulo sign; dist/log minimize over
// the two representatives, so dist(q, -q) = 0.
class ManifoldGeometry {
public:
    ManifoldGeometry() : ManifoldGeometry(ManifoldKind::flat_box, 0, 0) {} // placeholder until assigned

    static ManifoldGeometry circle() { return ManifoldGeometry(ManifoldKind::circle, 1, 2); }
    static ManifoldGeometry sphere2() { return ManifoldGeometry(ManifoldKind::sphere2, 2, 3); }
    static ManifoldGeometry so3() { return ManifoldGeometry(ManifoldKind::so3, 3, 4); }

    static ManifoldGeometry klein() {
        ManifoldGeometry g(ManifoldKind::klein, 2, 3);
        g.klein_ = std::make_shared<KleinSurface>();
        return g;
    }

    static ManifoldGeometry flat_box(const VecN& low, const VecN& high) {
        if (low.size() != high.size() || low.size() < 1 || low.size() > 3)
            throw invalid_argument_error("flat_box: bounds must agree and have dimension 1..3");
        if (((high - low).array() <= 0.0).any())
            throw invalid_argument_error("flat_box: degenerate box");
        ManifoldGeometry g(ManifoldKind::flat_box, static_cast<int>(low.size()), static_cast<int>(low.size()));
        g.low_ = low;
        g.high_ = high;
        return g;
    }

    ManifoldKind kind() const { return kind_; }
    int intrinsic_dim() const { return s_; }
    int embed_dim() const { return n_; }
    const KleinSurface& klein_surface() const { return *klein_; }

    double injectivity_radius() const {
        switch (kind_) {
        case ManifoldKind::circle: return kPi;
        case ManifoldKind::sphere2: return kPi;
        case ManifoldKind::so3: return 0.5 * kPi;
        case ManifoldKind::klein: return 0.3; // conservative; geometry is approximate
        case ManifoldKind::flat_box: return std::numeric_limits<double>::infinity();
        }
        return 0.0;
    }

    // Closest-point map iota: R^N -> M.
    VecN project(const VecN& z) const {
        switch (kind_) {
        case ManifoldKind::circle:
        case ManifoldKind::sphere2:
        case ManifoldKind::so3: {
            double n = z.norm();
            if (n < 1e-300) {
                VecN e = VecN::Zero(n_);
                e(0) = 1.0;
                return e;
            }
            return z / n;
        }
        case ManifoldKind::klein: {
            Eigen::Vector3d p = klein_->project(Eigen::Vector3d(z(0), z(1), z(2)));
            VecN out(3);
            out << p(0), p(1), p(2);
            return out;
        }
        case ManifoldKind::flat_box:
            return z.cwiseMax(low_).cwiseMin(high_);
        }
        return z;
    }

    VecN exp(const VecN& z, const VecN& v) const {
        switch (kind_) {
        case ManifoldKind::circle:
        case ManifoldKind::sphere2:
        case ManifoldKind::so3: {
            double t = v.norm();
            if (t < 1e-300) return z;
            return std::cos(t) * z + std::sin(t) * (v / t);
        }
        case ManifoldKind::flat_box:
            return z + v;
        case ManifoldKind::klein:
            return klein_exp(z, v);
        }
        return z;
    }

    // Inverse exponential map. At the cut locus the representative with the
    // lexicographically smallest tangent vector is returned and *cut_locus is
    // set when provided.
    VecN log(const VecN& z, const VecN& y, bool* cut_locus = nullptr) const {
        if (cut_locus) *cut_locus = false;
        switch (kind_) {
        case ManifoldKind::circle:
        case ManifoldKind::sphere2:
            return sphere_log(z, y, cut_locus);
        case ManifoldKind::so3: {
            VecN yy = y;
            double dot = z.dot(y);
            if (std::abs(dot) < 1e-13 && cut_locus) *cut_locus = true;
            if (dot < 0.0) yy = -yy;
            return sphere_log(z, yy, nullptr, /*lex_tiebreak_antipodal=*/false);
        }
        case ManifoldKind::flat_box:
            return y - z;
        case ManifoldKind::klein:
            return klein_log(z, y);
        }
        return VecN::Zero(n_);
    }

    double dist(const VecN& z, const VecN& y) const {
        switch (kind_) {
        case ManifoldKind::circle:
        case ManifoldKind::sphere2:
            // half-angle form, stable near 0 and pi
            return 2.0 * std::atan2((z - y).norm(), (z + y).norm());
        case ManifoldKind::so3: {
            VecN yy = z.dot(y) < 0.0 ? VecN(-y) : y;
            return 2.0 * std::atan2((z - yy).norm(), (z + yy).norm());
        }
        case ManifoldKind::flat_box:
            return (y - z).norm();
        case ManifoldKind::klein:
            return klein_->distance(Eigen::Vector3d(z(0), z(1), z(2)), Eigen::Vector3d(y(0), y(1), y(2)));
        }
        return 0.0;
    }

    // Sign canonicalization for the quaternion quotient: first nonzero
    // coordinate positive. Identity for the other manifolds.
    VecN canonical(const VecN& z) const {
        if (kind_ != ManifoldKind::so3) return z;
        for (int i = 0; i < z.size(); ++i) {
            if (std::abs(z(i)) > 1e-13) return z(i) > 0.0 ? z : VecN(-z);
        }
        return z;
    }

    const VecN& box_low() const { return low_; }
    const VecN& box_high() const { return high_; }

private:
    ManifoldGeometry(ManifoldKind k, int s, int n) : kind_(k), s_(s), n_(n) {}

    ManifoldKind kind_;
    int s_, n_;
    VecN low_, high_;
    std::shared_ptr<const KleinSurface> klein_;

    // Great-circle log on the unit sphere of any dimension.
    VecN sphere_log(const VecN& z, const VecN& y, bool* cut_locus, bool lex_tiebreak_antipodal = true) const {
        double c = std::clamp(z.dot(y), -1.0, 1.0);
        VecN w = y - c * z;
        double wn = w.norm();
        double theta = std::atan2(wn, c);
        if (wn > 1e-14) return (theta / wn) * w;
        if (c > 0.0) return VecN::Zero(n_);
        // antipodal: direction undefined, pick a deterministic tangent
        if (cut_locus) *cut_locus = true;
        VecN t = VecN::Zero(n_);
        for (int i = 0; i < n_; ++i) {
            VecN e = VecN::Zero(n_);
            e(i) = 1.0;
            t = e - z(i) * z;
            if (t.norm() > 0.5) break;
        }
        t.normalize();
        if (!lex_tiebreak_antipodal) return kPi * t;
        VecN a = kPi * t, b = -a;
        for (int i = 0; i < n_; ++i) {
            if (a(i) < b(i) - 1e-15) return a;
            if (b(i) < a(i) - 1e-15) return b;
        }
        return a;
    }

    VecN klein_log(const VecN& z, const VecN& y) const {
        Eigen::Vector3d zz(z(0), z(1), z(2)), yy(y(0), y(1), y(2));
        double d = klein_->distance(zz, yy);
        Eigen::Vector3d dir = klein_->tangent_project(zz, yy - zz);
        double dn = dir.norm();
        VecN out(3);
        if (dn < 1e-12 || d < 1e-12) {
            out.setZero();
            return out;
        }
        dir *= d / dn;
        out << dir(0), dir(1), dir(2);
        return out;
    }

    // Walk along the surface with re-projection; approximates the geodesic
    // with O(step) error, which suffices for the Karcher fixed-point use.
    VecN klein_exp(const VecN& z, const VecN& v) const {
        double len = v.norm();
        VecN out = z;
        if (len < 1e-14) return out;
        Eigen::Vector3d pos(z(0), z(1), z(2));
        Eigen::Vector3d dir(v(0), v(1), v(2));
        dir /= len;
        int steps = std::max(1, static_cast<int>(std::ceil(len / 0.05)));
        double h = len / steps;
        for (int i = 0; i < steps; ++i) {
            Eigen::Vector3d next = klein_->project(pos + h * dir);
            Eigen::Vector3d t = klein_->tangent_project(next, dir);
            if (t.norm() > 1e-12) dir = t.normalized();
            pos = next;
        }
        out << pos(0), pos(1), pos(2);
        return out;
    }
};

} // namespace mlift
