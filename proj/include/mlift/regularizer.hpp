#pragma once

#include "common.hpp"
#include "prox.hpp"

namespace mlift {

enum class RegularizerKind { tv_frobenius, tv_nuclear, huber, quadratic };

struct RegularizerSpec {
    RegularizerKind kind = RegularizerKind::tv_frobenius;
    double lambda = 1.0;
    double alpha = 0.1; // huber only

    void validate() const {
        if (lambda <= 0.0) throw invalid_argument_error("regularizer: lambda must be positive");
        if (kind == RegularizerKind::huber && alpha <= 0.0)
            throw invalid_argument_error("regularizer: huber alpha must be positive");
    }
};

inline RegularizerKind regularizer_kind_from_string(const std::string& s) {
    if (s == "tv") return RegularizerKind::tv_frobenius;
    if (s == "tvnuc") return RegularizerKind::tv_nuclear;
    if (s == "huber") return RegularizerKind::huber;
    if (s == "quad") return RegularizerKind::quadratic;
    throw invalid_argument_error("unknown regularizer kind: " + s);
}

// eta(xi); ||.||_2 on matrices is the Frobenius norm, the nuclear variant sums
// singular values.
inline double regularizer_value(const RegularizerSpec& spec, const Eigen::MatrixXd& xi) {
    switch (spec.kind) {
    case RegularizerKind::tv_frobenius:
        return spec.lambda * xi.norm();
    case RegularizerKind::tv_nuclear: {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(xi);
        return spec.lambda * svd.singularValues().sum();
    }
    case RegularizerKind::quadratic:
        return 0.5 * spec.lambda * xi.squaredNorm();
    case RegularizerKind::huber: {
        double n = xi.norm();
        double phi = n <= spec.alpha ? 0.5 * n * n / spec.alpha : n - 0.5 * spec.alpha;
        return spec.lambda * phi;
    }
    }
    return 0.0;
}

// eta*(zeta); +inf outside the domain.
inline double regularizer_conjugate(const RegularizerSpec& spec, const Eigen::MatrixXd& zeta) {
    const double inf = std::numeric_limits<double>::infinity();
    switch (spec.kind) {
    case RegularizerKind::tv_frobenius:
        return zeta.norm() <= spec.lambda * (1.0 + 1e-12) ? 0.0 : inf;
    case RegularizerKind::tv_nuclear: {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(zeta);
        double top = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
        return top <= spec.lambda * (1.0 + 1e-12) ? 0.0 : inf;
    }
    case RegularizerKind::quadratic:
        return 0.5 * zeta.squaredNorm() / spec.lambda;
    case RegularizerKind::huber: {
        double n = zeta.norm();
        if (n > spec.lambda * (1.0 + 1e-12)) return inf;
        return 0.5 * spec.alpha * n * n / spec.lambda;
    }
    }
    return 0.0;
}

// Exact projection onto the epigraph {(zeta, a): eta*(zeta) <= a}.
inline std::pair<Eigen::MatrixXd, double> project_epi_conjugate(const RegularizerSpec& spec,
                                                                const Eigen::MatrixXd& zeta, double a) {
    switch (spec.kind) {
    case RegularizerKind::tv_frobenius:
        return {project_ball(zeta, spec.lambda, BallNorm::frobenius), std::max(a, 0.0)};
    case RegularizerKind::tv_nuclear:
        return {project_ball(zeta, spec.lambda, BallNorm::spectral), std::max(a, 0.0)};
    case RegularizerKind::quadratic: {
        Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(zeta.data(), zeta.size());
        auto [z, t] = project_parabola_epi(flat, a, 1.0 / spec.lambda);
        return {Eigen::Map<const Eigen::MatrixXd>(z.data(), zeta.rows(), zeta.cols()), t};
    }
    case RegularizerKind::huber: {
        Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(zeta.data(), zeta.size());
        auto [z, t] = project_truncated_parabola_epi(flat, a, spec.alpha / spec.lambda, spec.lambda);
        return {Eigen::Map<const Eigen::MatrixXd>(z.data(), zeta.rows(), zeta.cols()), t};
    }
    }
    return {zeta, a};
}

} // namespace mlift
