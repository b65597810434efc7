#pragma once

#include "common.hpp"
#include "geometry.hpp"
#include "io.hpp"

#include <random>

namespace mlift {

// Wrap an angle into [0, 2pi).
inline double wrap_angle(double a) {
    a = std::fmod(a, 2.0 * kPi);
    return a < 0.0 ? a + 2.0 * kPi : a;
}

inline double circular_distance(double a, double b) {
    double d = std::abs(wrap_angle(a) - wrap_angle(b));
    return std::min(d, 2.0 * kPi - d);
}

// Gaussian noise in a random tangent direction followed by reprojection.
inline VecN add_tangent_noise(const ManifoldGeometry& geom, const VecN& z, double sigma,
                              std::mt19937& rng) {
    std::normal_distribution<double> gauss(0.0, sigma);
    VecN noise(geom.embed_dim());
    for (int i = 0; i < noise.size(); ++i) noise(i) = gauss(rng);
    // keep only the tangential part via a log/exp round trip through a
    // perturbed ambient point
    VecN target = geom.project(z + noise);
    return target;
}

// Central-difference surface normals of an elevation raster; boundaries use
// one-sided differences. Output is a 3-channel unit-normal raster.
inline Raster normals_from_elevation(const Raster& elev, double grid_step = 1.0) {
    if (elev.channels != 1) throw invalid_argument_error("normals_from_elevation: single channel expected");
    Raster out;
    out.width = elev.width;
    out.height = elev.height;
    out.channels = 3;
    out.data.resize(static_cast<std::size_t>(out.width) * out.height * 3);
    for (int y = 0; y < elev.height; ++y) {
        for (int x = 0; x < elev.width; ++x) {
            int xm = std::max(x - 1, 0), xp = std::min(x + 1, elev.width - 1);
            int ym = std::max(y - 1, 0), yp = std::min(y + 1, elev.height - 1);
            double gx = (elev.at(xp, y) - elev.at(xm, y)) / ((xp - xm) * grid_step);
            double gy = (elev.at(x, yp) - elev.at(x, ym)) / ((yp - ym) * grid_step);
            Eigen::Vector3d n(-gx, -gy, 1.0);
            n.normalize();
            out.at(x, y, 0) = static_cast<float>(n(0));
            out.at(x, y, 1) = static_cast<float>(n(1));
            out.at(x, y, 2) = static_cast<float>(n(2));
        }
    }
    return out;
}

// Lambertian hillshade of a unit-normal raster, light direction (1,1,1)/sqrt(3).
inline void write_hillshade_pgm(const std::string& path, const Raster& normals) {
    if (normals.channels != 3) throw invalid_argument_error("hillshade: 3-channel raster expected");
    const Eigen::Vector3d light = Eigen::Vector3d(1.0, 1.0, 1.0).normalized();
    std::vector<std::uint8_t> pix(static_cast<std::size_t>(normals.width) * normals.height);
    for (int y = 0; y < normals.height; ++y)
        for (int x = 0; x < normals.width; ++x) {
            Eigen::Vector3d n(normals.at(x, y, 0), normals.at(x, y, 1), normals.at(x, y, 2));
            double shade = std::max(0.0, n.dot(light));
            pix[static_cast<std::size_t>(y) * normals.width + x] =
                static_cast<std::uint8_t>(std::lround(255.0 * std::min(shade, 1.0)));
        }
    write_pgm(path, normals.width, normals.height, pix);
}

struct SynthFiles {
    std::vector<std::string> written;
};

// InSAR-like wrapped phase: smooth fringes plus a localized bump, truth and
// wrapped-Gaussian noisy rasters (single channel, radians).
inline SynthFiles synth_circle_noisy(const std::string& base, unsigned seed, double sigma, int width = 64,
                                     int height = 64) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    Raster truth{width, height, 1, {}};
    truth.data.resize(static_cast<std::size_t>(width) * height);
    Raster noisy = truth;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double u = static_cast<double>(x) / width, v = static_cast<double>(y) / height;
            double bump = 2.5 * std::exp(-18.0 * ((u - 0.6) * (u - 0.6) + (v - 0.35) * (v - 0.35)));
            double phase = wrap_angle(4.0 * kPi * u + 2.0 * kPi * v * v + bump);
            truth.at(x, y) = static_cast<float>(phase);
            noisy.at(x, y) = static_cast<float>(wrap_angle(phase + gauss(rng)));
        }
    write_raster(base + "_truth.f32", truth);
    write_raster(base + "_noisy.f32", noisy);
    return {{base + "_truth.f32", base + "_noisy.f32"}};
}

// Smooth curve on S^2 (spherical spiral with wobble), tangent noise.
inline SynthFiles synth_sphere_curve(const std::string& base, unsigned seed, double sigma,
                                     int samples = 200) {
    std::mt19937 rng(seed);
    ManifoldGeometry geom = ManifoldGeometry::sphere2();
    Eigen::MatrixXd truth(samples, 3), noisy(samples, 3);
    for (int i = 0; i < samples; ++i) {
        double t = static_cast<double>(i) / (samples - 1);
        double theta = kPi * (0.25 + 0.5 * t);
        double phi = 4.0 * kPi * t + 0.5 * std::sin(6.0 * kPi * t);
        VecN z(3);
        z << std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta);
        truth.row(i) = z.transpose();
        noisy.row(i) = add_tangent_noise(geom, z, sigma, rng).transpose();
    }
    write_signal(base + "_truth.txt", truth);
    write_signal(base + "_noisy.txt", noisy);
    return {{base + "_truth.txt", base + "_noisy.txt"}};
}

// 250 samples of a closed smooth path on the Klein surface.
inline SynthFiles synth_klein_curve_250(const std::string& base, unsigned seed, double sigma) {
    const int samples = 250;
    std::mt19937 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    ManifoldGeometry geom = ManifoldGeometry::klein();
    const KleinSurface& surf = geom.klein_surface();
    Eigen::MatrixXd truth(samples, 3), noisy(samples, 3);
    for (int i = 0; i < samples; ++i) {
        double t = static_cast<double>(i) / samples;
        double u = 2.0 * kPi * t;
        double v = kPi * 0.5 + 0.9 * std::sin(4.0 * kPi * t) + 0.4 * std::cos(2.0 * kPi * t);
        Eigen::Vector3d z = surf.embed(u, v);
        truth.row(i) = z.transpose();
        Eigen::Vector3d pert = z + Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
        noisy.row(i) = surf.project(pert).transpose();
    }
    write_signal(base + "_truth.txt", truth);
    write_signal(base + "_noisy.txt", noisy);
    return {{base + "_truth.txt", base + "_noisy.txt"}};
}

// Smooth SO(3) field on a grid (quaternion raster, 4 channels) with a masked
// center block for inpainting; noise on the known region.
inline SynthFiles synth_so3_grid(const std::string& base, unsigned seed, double sigma, int width = 12,
                                 int height = 12) {
    std::mt19937 rng(seed);
    ManifoldGeometry geom = ManifoldGeometry::so3();
    Raster quat{width, height, 4, {}};
    quat.data.resize(static_cast<std::size_t>(width) * height * 4);
    Raster truth = quat;
    Raster mask{width, height, 1, {}};
    mask.data.assign(static_cast<std::size_t>(width) * height, 1.0f);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double u = static_cast<double>(x) / (width - 1), v = static_cast<double>(y) / (height - 1);
            double angle = 0.8 * kPi * u;
            Eigen::Vector3d axis(std::sin(0.7 * v), std::cos(0.7 * v), 0.4 * u);
            axis.normalize();
            VecN q(4);
            q << std::cos(0.5 * angle), std::sin(0.5 * angle) * axis(0), std::sin(0.5 * angle) * axis(1),
                std::sin(0.5 * angle) * axis(2);
            q = geom.canonical(q);
            VecN qn = geom.canonical(add_tangent_noise(geom, q, sigma, rng));
            for (int c = 0; c < 4; ++c) {
                truth.at(x, y, c) = static_cast<float>(q(c));
                quat.at(x, y, c) = static_cast<float>(qn(c));
            }
            bool hole = std::abs(u - 0.5) < 0.22 && std::abs(v - 0.5) < 0.22;
            if (hole) mask.at(x, y) = 0.0f;
        }
    write_raster(base + "_truth.f32", truth);
    write_raster(base + "_noisy.f32", quat);
    write_raster(base + "_mask.f32", mask);
    return {{base + "_truth.f32", base + "_noisy.f32", base + "_mask.f32"}};
}

// Piecewise-smooth 1-D signal in R^2 with jumps; the flat ROF fixture.
inline SynthFiles synth_flat_rof(const std::string& base, unsigned seed, double sigma, int samples = 64) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    Eigen::MatrixXd truth(samples, 2), noisy(samples, 2);
    for (int i = 0; i < samples; ++i) {
        double t = static_cast<double>(i) / (samples - 1);
        double a = t < 0.35 ? 0.25 : (t < 0.7 ? 0.75 : 0.45);
        double b = 0.5 + 0.3 * std::sin(2.0 * kPi * t) * (t < 0.55 ? 1.0 : -1.0);
        truth(i, 0) = a;
        truth(i, 1) = b;
        noisy(i, 0) = a + gauss(rng);
        noisy(i, 1) = b + gauss(rng);
    }
    write_signal(base + "_truth.txt", truth);
    write_signal(base + "_noisy.txt", noisy);
    return {{base + "_truth.txt", base + "_noisy.txt"}};
}

inline SynthFiles generate_synthetic(const std::string& kind, const std::string& base, unsigned seed,
                                     double sigma) {
    if (kind == "circle_noisy") return synth_circle_noisy(base, seed, sigma);
    if (kind == "sphere_curve") return synth_sphere_curve(base, seed, sigma);
    if (kind == "klein_curve_250") return synth_klein_curve_250(base, seed, sigma);
    if (kind == "so3_grid") return synth_so3_grid(base, seed, sigma);
    if (kind == "flat_rof") return synth_flat_rof(base, seed, sigma);
    throw invalid_argument_error("generate_synthetic: unknown kind " + kind);
}

} // namespace mlift
