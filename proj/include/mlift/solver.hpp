#pragma once

#include "common.hpp"
#include "dataterm.hpp"
#include "fem.hpp"
#include "regularizer.hpp"

#include <random>

namespace mlift {

enum class SolveMode { sublabel, lellmann_tv };
enum class Precond { off, diag };

struct GridShape {
    int width = 1, height = 1, dim = 1; // dim in {1, 2}
    int pixels() const { return width * height; }
};

namespace detail {

// forward differences, Neumann boundary (last difference along each axis 0);
// field: pixels x channels, out: pixels x channels x dim
inline void grad_x_impl(const GridShape& grid, const double* field, int channels, double* out,
                        bool abs_mode) {
    const int W = grid.width, H = grid.height, d = grid.dim;
    const int npix = grid.pixels();
    for (int px = 0; px < npix; ++px) {
        int xc = px % W, yc = px / W;
        for (int k = 0; k < channels; ++k) {
            double cur = field[static_cast<std::size_t>(px) * channels + k];
            double* o = out + (static_cast<std::size_t>(px) * channels + k) * d;
            if (xc + 1 < W) {
                double nxt = field[static_cast<std::size_t>(px + 1) * channels + k];
                o[0] = abs_mode ? nxt + cur : nxt - cur;
            } else {
                o[0] = 0.0;
            }
            if (d == 2) {
                if (yc + 1 < H) {
                    double nxt = field[static_cast<std::size_t>(px + W) * channels + k];
                    o[1] = abs_mode ? nxt + cur : nxt - cur;
                } else {
                    o[1] = 0.0;
                }
            }
        }
    }
}

// out += -div p = grad^T p
inline void neg_div_x_impl(const GridShape& grid, const double* p, int channels, double* out,
                           bool abs_mode) {
    const int W = grid.width, H = grid.height, d = grid.dim;
    const int npix = grid.pixels();
    for (int px = 0; px < npix; ++px) {
        int xc = px % W, yc = px / W;
        for (int k = 0; k < channels; ++k) {
            double acc = 0.0;
            const std::size_t idx = (static_cast<std::size_t>(px) * channels + k) * d;
            if (xc + 1 < W) acc += abs_mode ? p[idx] : -p[idx];
            if (xc > 0) acc += p[(static_cast<std::size_t>(px - 1) * channels + k) * d];
            if (d == 2) {
                if (yc + 1 < H) acc += abs_mode ? p[idx + 1] : -p[idx + 1];
                if (yc > 0) acc += p[(static_cast<std::size_t>(px - W) * channels + k) * d + 1];
            }
            out[static_cast<std::size_t>(px) * channels + k] += acc;
        }
    }
}

} // namespace detail

// Spatial finite-difference operators on the pixel grid. field is
// pixels x channels; the gradient is pixels x channels x dim. div_x is the
// negative adjoint: <grad_x u, p> = -<u, div_x p> exactly.
inline std::vector<double> grad_x(const GridShape& grid, const std::vector<double>& field, int channels) {
    std::vector<double> out(field.size() * grid.dim);
    detail::grad_x_impl(grid, field.data(), channels, out.data(), false);
    return out;
}

inline std::vector<double> div_x(const GridShape& grid, const std::vector<double>& p, int channels) {
    std::vector<double> out(static_cast<std::size_t>(grid.pixels()) * channels, 0.0);
    detail::neg_div_x_impl(grid, p.data(), channels, out.data(), false);
    for (auto& e : out) e = -e;
    return out;
}

struct LiftedProblem {
    const Triangulation* tri = nullptr;
    GridShape grid;
    RegularizerSpec reg;
    FrameVariant frame = FrameVariant::orthonormal;
    SolveMode mode = SolveMode::sublabel;
    const ConvexifiedDataTerm* data = nullptr;   // sublabel mode
    const Eigen::MatrixXd* label_cost = nullptr; // lellmann mode, pixels x L
};

struct SolverOptions {
    int max_iter = 20000;
    double gap_tol = 1e-5;
    Precond precond = Precond::diag;
    int check_every = 25;
    int power_iters = 50;
    unsigned seed = 1234;
    // primal/dual step balance: tau *= step_ratio, sigma /= step_ratio
    double step_ratio = 1.0;
};

struct GapSample {
    int iter;
    double primal, dual, gap;
};

struct SolveDiagnostics {
    bool converged = false;
    int iterations = 0;
    double primal = 0.0, dual = 0.0, gap = 0.0;
    double op_norm = 0.0;
    std::vector<GapSample> trace;
};

struct LiftedField {
    GridShape grid;
    Eigen::MatrixXd values; // pixels x L, rows on the unit simplex
};

// Assembled fully-discrete saddle-point problem
//
//   min_{v in simplex, w}  max_{p, q, (G,a), (g,b)}
//     <grad_x v, p> + <v, q>
//       + sum_{x,T} [ <wG, G - Mg p_T> + <wg, g - M q_T> + we (a + b + o q_T) ]
//     s.t. eta*(G) <= a  and  rho_hat_T^*(g) <= b   per (x, T).
//
// G and g duplicate the per-simplex images of the nodal duals; the multiplier
// fields wG, wg enforce consistency in the limit and we enforces the linear
// constraint a_T + b_T + q_{T,2} = 0. Every dual prox is then an exact,
// per-(pixel, simplex) epigraph projection.
//
// In lellmann_tv mode the data term is linear in v and only p, G, wG remain;
// the dual projection is a per-simplex norm-ball projection.
//
// Primal layout: [v | wG | wg | we]; dual layout: [p | q | G | g | a | b].
class LiftedSolver {
public:
    LiftedSolver(const LiftedProblem& problem, const SolverOptions& opts = {})
        : prob_(problem), opts_(opts) {
        const Triangulation& tri = *prob_.tri;
        npix_ = prob_.grid.pixels();
        L_ = tri.num_vertices();
        nT_ = tri.num_simplices();
        s_ = tri.sdim();
        d_ = prob_.grid.dim;
        sd_ = s_ * d_;
        sublabel_ = prob_.mode == SolveMode::sublabel;
        prob_.reg.validate();
        if (!sublabel_ && prob_.reg.kind != RegularizerKind::tv_frobenius &&
            prob_.reg.kind != RegularizerKind::tv_nuclear)
            throw invalid_argument_error("lellmann_tv mode requires a TV regularizer");
        if (sublabel_ && (!prob_.data || prob_.data->pixels != npix_ || prob_.data->nT != nT_))
            throw invalid_argument_error("solver: convexified data term shape mismatch");
        if (!sublabel_ && (!prob_.label_cost || prob_.label_cost->rows() != npix_ ||
                           prob_.label_cost->cols() != L_))
            throw invalid_argument_error("solver: label cost shape mismatch");
        if (d_ != 1 && d_ != 2) throw invalid_argument_error("solver: grid dim must be 1 or 2");

        build_simplex_tables();
        if (sublabel_) build_hull_tables();
        allocate_state();
        op_norm_ = estimate_op_norm(opts_.power_iters, opts_.seed);
        set_step_sizes();
    }

    int primal_size() const { return nv_ + nw_; }
    int dual_size() const { return np_ + nq_ + nG_ + ng_ + na_ + nb_; }
    double op_norm() const { return op_norm_; }

    // y = K x (abs_mode: entrywise |K|)
    void apply_K(const std::vector<double>& x, std::vector<double>& y, bool abs_mode = false) const {
        y.assign(dual_size(), 0.0);
        const double* v = x.data();
        const double* wG = x.data() + nv_;
        const double* wg = sublabel_ ? wG + static_cast<std::size_t>(npix_) * nT_ * sd_ : nullptr;
        const double* we = sublabel_ ? wg + static_cast<std::size_t>(npix_) * nT_ * s_ : nullptr;
        double* yp = y.data();
        double* yq = sublabel_ ? yp + np_ : nullptr;
        double* yG = y.data() + np_ + nq_;
        double* yg = sublabel_ ? yG + nG_ : nullptr;
        double* ya = sublabel_ ? yg + ng_ : nullptr;
        double* yb = sublabel_ ? ya + na_ : nullptr;

        grad_x(v, yp, abs_mode);
        if (sublabel_)
            for (int i = 0; i < nq_; ++i) yq[i] = v[i];

        for (int px = 0; px < npix_; ++px) {
            for (int t = 0; t < nT_; ++t) {
                const PerSimplex& S = simp_[t];
                const std::size_t base = (static_cast<std::size_t>(px) * nT_ + t);
                const double* wGe = wG + base * sd_;
                for (int i = 0; i < sd_; ++i) yG[base * sd_ + i] = wGe[i];
                // p rows receive -Mg^T wG
                for (int i = 0; i <= s_; ++i) {
                    int k = S.verts[i];
                    for (int j = 0; j < d_; ++j) {
                        double acc = 0.0;
                        for (int r = 0; r < s_; ++r) {
                            double coef = S.Mg[r * (s_ + 1) + i];
                            acc += (abs_mode ? std::abs(coef) : -coef) * wGe[j * s_ + r];
                        }
                        yp[(static_cast<std::size_t>(px) * L_ + k) * d_ + j] += acc;
                    }
                }
                if (!sublabel_) continue;
                const double* wge = wg + base * s_;
                double wee = we[base];
                for (int i = 0; i < s_; ++i) yg[base * s_ + i] = wge[i];
                ya[base] = wee;
                yb[base] = wee;
                // q rows receive -M^T wg + o^T we
                for (int i = 0; i <= s_; ++i) {
                    int k = S.verts[i];
                    double acc = 0.0;
                    for (int r = 0; r < s_; ++r) {
                        double coef = S.M[r * (s_ + 1) + i];
                        acc += (abs_mode ? std::abs(coef) : -coef) * wge[r];
                    }
                    double oc = S.o[i];
                    acc += (abs_mode ? std::abs(oc) : oc) * wee;
                    yq[static_cast<std::size_t>(px) * L_ + k] += acc;
                }
            }
        }
    }

    // x = K^T y
    void apply_KT(const std::vector<double>& y, std::vector<double>& x, bool abs_mode = false) const {
        x.assign(primal_size(), 0.0);
        const double* p = y.data();
        const double* q = sublabel_ ? p + np_ : nullptr;
        const double* G = y.data() + np_ + nq_;
        const double* g = sublabel_ ? G + nG_ : nullptr;
        const double* a = sublabel_ ? g + ng_ : nullptr;
        const double* b = sublabel_ ? a + na_ : nullptr;
        double* xv = x.data();
        double* xwG = x.data() + nv_;
        double* xwg = sublabel_ ? xwG + static_cast<std::size_t>(npix_) * nT_ * sd_ : nullptr;
        double* xwe = sublabel_ ? xwg + static_cast<std::size_t>(npix_) * nT_ * s_ : nullptr;

        neg_div_x(p, xv, abs_mode); // -div p = grad^T p
        if (sublabel_)
            for (int i = 0; i < nq_; ++i) xv[i] += q[i];

        for (int px = 0; px < npix_; ++px) {
            for (int t = 0; t < nT_; ++t) {
                const PerSimplex& S = simp_[t];
                const std::size_t base = (static_cast<std::size_t>(px) * nT_ + t);
                double* out = xwG + base * sd_;
                for (int j = 0; j < d_; ++j)
                    for (int r = 0; r < s_; ++r) {
                        double acc = G[base * sd_ + j * s_ + r];
                        for (int i = 0; i <= s_; ++i) {
                            double coef = S.Mg[r * (s_ + 1) + i];
                            double pv = p[(static_cast<std::size_t>(px) * L_ + S.verts[i]) * d_ + j];
                            acc += (abs_mode ? std::abs(coef) : -coef) * pv;
                        }
                        out[j * s_ + r] = acc;
                    }
                if (!sublabel_) continue;
                for (int r = 0; r < s_; ++r) {
                    double acc = g[base * s_ + r];
                    for (int i = 0; i <= s_; ++i) {
                        double coef = S.M[r * (s_ + 1) + i];
                        acc += (abs_mode ? std::abs(coef) : -coef) *
                               q[static_cast<std::size_t>(px) * L_ + S.verts[i]];
                    }
                    xwg[base * s_ + r] = acc;
                }
                double acc = a[base] + b[base];
                for (int i = 0; i <= s_; ++i) {
                    double coef = S.o[i];
                    acc += (abs_mode ? std::abs(coef) : coef) *
                           q[static_cast<std::size_t>(px) * L_ + S.verts[i]];
                }
                xwe[base] = acc;
            }
        }
    }

    double estimate_op_norm(int iters, unsigned seed) const {
        std::mt19937 rng(seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::vector<double> x(primal_size()), y;
        for (auto& e : x) e = gauss(rng);
        double norm2 = 0.0;
        for (int it = 0; it < iters; ++it) {
            apply_K(x, y);
            std::vector<double> xt;
            apply_KT(y, xt);
            double xx = 0.0, xKx = 0.0;
            for (int i = 0; i < primal_size(); ++i) {
                xx += x[i] * x[i];
                xKx += x[i] * xt[i];
            }
            norm2 = xKx / xx; // Rayleigh quotient for K^T K
            double nrm = 0.0;
            for (double e : xt) nrm += e * e;
            nrm = std::sqrt(nrm);
            if (nrm < 1e-300) break;
            for (int i = 0; i < primal_size(); ++i) x[i] = xt[i] / nrm;
        }
        return std::sqrt(std::max(norm2, 0.0));
    }

    void step() {
        // dual ascent at the extrapolated primal, then exact epigraph proxes
        apply_K(xbar_, ky_);
        for (int i = 0; i < dual_size(); ++i) dual_[i] += sigma_[i] * ky_[i];
        project_duals();

        // primal descent; v rows project onto the simplex, multipliers are free
        apply_KT(dual_, kx_);
        for (int i = 0; i < primal_size(); ++i) kx_[i] = x_[i] - tau_[i] * kx_[i];
        if (!sublabel_) {
            const double* cost = prob_.label_cost->data(); // column-major pixels x L
            for (int k = 0; k < L_; ++k)
                for (int px = 0; px < npix_; ++px)
                    kx_[static_cast<std::size_t>(px) * L_ + k] -=
                        tau_[static_cast<std::size_t>(px) * L_ + k] *
                        cost[static_cast<std::size_t>(k) * npix_ + px];
        }
        for (int px = 0; px < npix_; ++px)
            project_simplex_inplace(kx_.data() + static_cast<std::size_t>(px) * L_, L_, scratch_);
        for (int i = 0; i < primal_size(); ++i) {
            xbar_[i] = 2.0 * kx_[i] - x_[i];
            x_[i] = kx_[i];
        }
        ++iter_;
    }

    // Primal energy in the perspective (mass transport) form encoded by the
    // multiplier fields: per (pixel, simplex) a mass m = -we, a barycentric
    // position wg/m with data value m rho_hat(wg/m), and the support-function
    // value of the regularizer epigraph in wG. Tight at convergence, where
    // the multipliers satisfy the consistency constraints.
    double primal_energy() const {
        double total = 0.0;
        const double lam = prob_.reg.lambda;
        const double* wG = x_.data() + nv_;
        const double* wg = sublabel_ ? wG + static_cast<std::size_t>(npix_) * nT_ * sd_ : nullptr;
        const double* we = sublabel_ ? wg + static_cast<std::size_t>(npix_) * nT_ * s_ : nullptr;

        if (!sublabel_) {
            for (int px = 0; px < npix_; ++px)
                for (int k = 0; k < L_; ++k)
                    total += (*prob_.label_cost)(px, k) * x_[static_cast<std::size_t>(px) * L_ + k];
        }

        Eigen::MatrixXd Z(s_, d_);
        VecS pos(s_);
        for (std::size_t e = 0; e < static_cast<std::size_t>(npix_) * nT_; ++e) {
            const double* wGe = wG + e * sd_;
            double n2 = 0.0;
            for (int i = 0; i < sd_; ++i) n2 += wGe[i] * wGe[i];
            double nrm = std::sqrt(n2);
            double m = sublabel_ ? std::max(-we[e], 0.0) : 0.0;
            switch (prob_.reg.kind) {
            case RegularizerKind::tv_frobenius:
                total += lam * nrm;
                break;
            case RegularizerKind::tv_nuclear: {
                if (s_ == 1 || d_ == 1) {
                    total += lam * nrm;
                } else {
                    for (int j = 0; j < d_; ++j)
                        for (int r = 0; r < s_; ++r) Z(r, j) = wGe[j * s_ + r];
                    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Z);
                    total += lam * svd.singularValues().sum();
                }
                break;
            }
            case RegularizerKind::quadratic:
                total += 0.5 * lam * n2 / std::max(m, 1e-12);
                break;
            case RegularizerKind::huber: {
                double me = std::max(m, 1e-12);
                double r = nrm / me;
                double phi = r <= prob_.reg.alpha ? 0.5 * r * r / prob_.reg.alpha : r - 0.5 * prob_.reg.alpha;
                total += me * lam * phi;
                break;
            }
            }
            if (!sublabel_) continue;
            const double* wge = wg + e * s_;
            double gn = 0.0;
            for (int i = 0; i < s_; ++i) gn += wge[i] * wge[i];
            if (m < 1e-12 && gn < 1e-18) continue;
            double me = std::max(m, 1e-12);
            for (int i = 0; i < s_; ++i) pos(i) = wge[i] / me;
            int t = static_cast<int>(e % nT_);
            const PerSimplex& S = simp_[t];
            // the envelope is only defined over the simplex; clamp positions
            // that drift outside during the iteration
            double min_bary = std::numeric_limits<double>::max();
            for (int i = 0; i <= s_; ++i) {
                double lam = S.o[i];
                for (int r = 0; r < s_; ++r) lam += S.M[r * (s_ + 1) + i] * pos(r);
                min_bary = std::min(min_bary, lam);
            }
            if (min_bary < -1e-12) {
                VecN inside;
                closest_point_in_simplex(S.local_verts, VecN(pos), &inside);
                pos = inside;
            }
            int px = static_cast<int>(e / nT_);
            total += me * prob_.data->at(px, t).eval(pos);
        }
        return total;
    }

    // Certified lower bound: duals repaired to feasibility (norm rescaling of
    // p, per-pixel shift of q), then sum of per-pixel minima.
    double dual_energy() const {
        const double lam = prob_.reg.lambda;
        // per-simplex images of the nodal duals
        std::vector<double> zeta(static_cast<std::size_t>(npix_) * nT_ * sd_);
        double max_norm = 0.0;
        Eigen::MatrixXd Z(s_, d_);
        for (int px = 0; px < npix_; ++px)
            for (int t = 0; t < nT_; ++t) {
                const PerSimplex& S = simp_[t];
                double* out = zeta.data() + (static_cast<std::size_t>(px) * nT_ + t) * sd_;
                for (int j = 0; j < d_; ++j)
                    for (int r = 0; r < s_; ++r) {
                        double acc = 0.0;
                        for (int i = 0; i <= s_; ++i)
                            acc += S.Mg[r * (s_ + 1) + i] *
                                   dual_[(static_cast<std::size_t>(px) * L_ + S.verts[i]) * d_ + j];
                        out[j * s_ + r] = acc;
                    }
                if (prob_.reg.kind == RegularizerKind::tv_nuclear) {
                    for (int j = 0; j < d_; ++j)
                        for (int r = 0; r < s_; ++r) Z(r, j) = out[j * s_ + r];
                    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Z);
                    if (svd.singularValues().size())
                        max_norm = std::max(max_norm, svd.singularValues()(0));
                } else {
                    double n2 = 0.0;
                    for (int i = 0; i < sd_; ++i) n2 += out[i] * out[i];
                    max_norm = std::max(max_norm, std::sqrt(n2));
                }
            }
        double beta = 1.0;
        if (prob_.reg.kind != RegularizerKind::quadratic && max_norm > lam)
            beta = lam / max_norm;

        std::vector<double> ndiv(static_cast<std::size_t>(npix_) * L_, 0.0);
        neg_div_x(dual_.data(), ndiv.data(), false);

        const double* q = sublabel_ ? dual_.data() + np_ : nullptr;
        double total = 0.0;
        for (int px = 0; px < npix_; ++px) {
            double shift = 0.0;
            if (sublabel_) {
                for (int t = 0; t < nT_; ++t) {
                    const PerSimplex& S = simp_[t];
                    const double* z = zeta.data() + (static_cast<std::size_t>(px) * nT_ + t) * sd_;
                    double n2 = 0.0;
                    for (int i = 0; i < sd_; ++i) n2 += z[i] * z[i];
                    double eta_star = 0.0;
                    switch (prob_.reg.kind) {
                    case RegularizerKind::tv_frobenius:
                    case RegularizerKind::tv_nuclear: eta_star = 0.0; break;
                    case RegularizerKind::quadratic: eta_star = 0.5 * n2 / lam; break;
                    case RegularizerKind::huber:
                        eta_star = 0.5 * prob_.reg.alpha * beta * beta * n2 / lam;
                        break;
                    }
                    VecS mq = VecS::Zero(s_);
                    double oq = 0.0;
                    for (int i = 0; i <= s_; ++i) {
                        double qv = q[static_cast<std::size_t>(px) * L_ + S.verts[i]];
                        for (int r = 0; r < s_; ++r) mq(r) += S.M[r * (s_ + 1) + i] * qv;
                        oq += S.o[i] * qv;
                    }
                    double viol = eta_star + hull_conj(px, t, mq) + oq;
                    shift = std::max(shift, viol);
                }
            }
            double row_min = std::numeric_limits<double>::max();
            for (int k = 0; k < L_; ++k) {
                double val = beta * ndiv[static_cast<std::size_t>(px) * L_ + k];
                if (sublabel_)
                    val += q[static_cast<std::size_t>(px) * L_ + k];
                else
                    val += (*prob_.label_cost)(px, k);
                row_min = std::min(row_min, val);
            }
            total += row_min - shift;
        }
        return total;
    }

    double relative_gap(double primal, double dual) const {
        return (primal - dual) / std::max(1.0, std::abs(primal));
    }

    SolveDiagnostics run() {
        SolveDiagnostics diag;
        diag.op_norm = op_norm_;
        while (iter_ < opts_.max_iter) {
            step();
            if (iter_ % opts_.check_every == 0 || iter_ == opts_.max_iter) {
                double pe = primal_energy(), de = dual_energy();
                double gap = relative_gap(pe, de);
                diag.trace.push_back({iter_, pe, de, gap});
                if (gap < opts_.gap_tol) {
                    diag.converged = true;
                    diag.primal = pe;
                    diag.dual = de;
                    diag.gap = gap;
                    diag.iterations = iter_;
                    return diag;
                }
            }
        }
        diag.primal = primal_energy();
        diag.dual = dual_energy();
        diag.gap = relative_gap(diag.primal, diag.dual);
        diag.iterations = iter_;
        diag.converged = diag.gap < opts_.gap_tol;
        return diag;
    }

    LiftedField field() const {
        LiftedField f;
        f.grid = prob_.grid;
        f.values.resize(npix_, L_);
        for (int px = 0; px < npix_; ++px)
            for (int k = 0; k < L_; ++k) f.values(px, k) = x_[static_cast<std::size_t>(px) * L_ + k];
        return f;
    }

    int iterations() const { return iter_; }

    Eigen::VectorXd v_row(int px) const {
        Eigen::VectorXd r(L_);
        for (int k = 0; k < L_; ++k) r(k) = x_[static_cast<std::size_t>(px) * L_ + k];
        return r;
    }

    // raw state views; layout per the class comment
    struct StateView {
        const double* v;
        const double* wG;
        const double* wg;
        const double* we;
        const double* p;
        const double* q;
        const double* G;
        const double* g;
        const double* a;
        const double* b;
    };
    StateView state_view() const {
        StateView sv{};
        sv.v = x_.data();
        sv.wG = x_.data() + nv_;
        sv.wg = sublabel_ ? sv.wG + static_cast<std::size_t>(npix_) * nT_ * sd_ : nullptr;
        sv.we = sublabel_ ? sv.wg + static_cast<std::size_t>(npix_) * nT_ * s_ : nullptr;
        sv.p = dual_.data();
        sv.q = sublabel_ ? dual_.data() + np_ : nullptr;
        sv.G = dual_.data() + np_ + nq_;
        sv.g = sublabel_ ? sv.G + nG_ : nullptr;
        sv.a = sublabel_ ? sv.g + ng_ : nullptr;
        sv.b = sublabel_ ? sv.a + na_ : nullptr;
        return sv;
    }
    double rho_conj_at(int px, int t, const VecS& g) const { return hull_conj(px, t, g); }
    double eta_conj_at(const double* Ge) const { return eta_conj_value(Ge); }

private:
    struct PerSimplex {
        std::vector<int> verts;      // s+1
        std::vector<double> M;       // s x (s+1), row-major
        std::vector<double> Mg;      // gradient coupling
        std::vector<double> o;       // s+1
        Eigen::MatrixXd local_verts; // s x (s+1)
        MatSN P_eff;                 // frame used for the reporting surrogate
    };

    LiftedProblem prob_;
    SolverOptions opts_;
    int npix_, L_, nT_, s_, d_, sd_;
    bool sublabel_;
    int nv_, nw_, np_, nq_, nG_, ng_, na_, nb_;
    double op_norm_ = 0.0;
    int iter_ = 0;

    std::vector<PerSimplex> simp_;

    // flattened hull halfspaces per (pixel, simplex): rows (w_j, -1), offset h_j
    std::vector<std::size_t> hs_start_;
    std::vector<double> hs_normals_, hs_offsets_;
    std::vector<int> qp_active_;
    std::vector<int> qp_active_cnt_;

    std::vector<double> x_, xbar_, dual_, ky_, kx_;
    std::vector<double> sigma_, tau_;
    std::vector<double> scratch_;

    void build_simplex_tables() {
        const Triangulation& tri = *prob_.tri;
        simp_.resize(nT_);
        for (int t = 0; t < nT_; ++t) {
            SimplexCalculus c = simplex_calculus(tri, t, prob_.frame);
            PerSimplex S;
            S.verts = tri.simplices[t];
            S.M.resize(static_cast<std::size_t>(s_) * (s_ + 1));
            S.Mg.resize(S.M.size());
            S.o.resize(s_ + 1);
            for (int r = 0; r < s_; ++r)
                for (int i = 0; i <= s_; ++i) {
                    S.M[r * (s_ + 1) + i] = c.M(r, i);
                    S.Mg[r * (s_ + 1) + i] = c.Mg(r, i);
                }
            for (int i = 0; i <= s_; ++i) S.o[i] = c.o(i);
            S.local_verts = c.local_verts;
            S.P_eff = c.P / c.alpha;
            simp_[t] = std::move(S);
        }
    }

    void build_hull_tables() {
        const ConvexifiedDataTerm& D = *prob_.data;
        const std::size_t nentries = static_cast<std::size_t>(npix_) * nT_;
        hs_start_.assign(nentries + 1, 0);
        for (std::size_t e = 0; e < nentries; ++e)
            hs_start_[e + 1] = hs_start_[e] + D.entries[e].w.size();
        const int m = s_ + 1;
        hs_normals_.resize(hs_start_.back() * m);
        hs_offsets_.resize(hs_start_.back());
        for (std::size_t e = 0; e < nentries; ++e) {
            const HullEntry& H = D.entries[e];
            for (std::size_t j = 0; j < H.w.size(); ++j) {
                std::size_t row = hs_start_[e] + j;
                for (int i = 0; i < s_; ++i) hs_normals_[row * m + i] = H.w[j](i);
                hs_normals_[row * m + s_] = -1.0;
                hs_offsets_[row] = H.h[j];
            }
        }
        qp_active_.assign(nentries * 6, 0);
        qp_active_cnt_.assign(nentries, 0);
    }

    double hull_conj(int px, int t, const VecS& g) const {
        std::size_t e = static_cast<std::size_t>(px) * nT_ + t;
        const int m = s_ + 1;
        double best = -std::numeric_limits<double>::max();
        for (std::size_t row = hs_start_[e]; row < hs_start_[e + 1]; ++row) {
            double val = -hs_offsets_[row];
            for (int i = 0; i < s_; ++i) val += hs_normals_[row * m + i] * g(i);
            best = std::max(best, val);
        }
        return best;
    }

    void allocate_state() {
        nv_ = npix_ * L_;
        nw_ = npix_ * nT_ * (sd_ + (sublabel_ ? s_ + 1 : 0));
        np_ = npix_ * L_ * d_;
        nq_ = sublabel_ ? npix_ * L_ : 0;
        nG_ = npix_ * nT_ * sd_;
        ng_ = sublabel_ ? npix_ * nT_ * s_ : 0;
        na_ = sublabel_ ? npix_ * nT_ : 0;
        nb_ = na_;
        x_.assign(primal_size(), 0.0);
        for (int px = 0; px < npix_; ++px)
            for (int k = 0; k < L_; ++k) x_[static_cast<std::size_t>(px) * L_ + k] = 1.0 / L_;
        xbar_ = x_;
        dual_.assign(dual_size(), 0.0);
        ky_.assign(dual_size(), 0.0);
        kx_.assign(primal_size(), 0.0);
    }

    void set_step_sizes() {
        sigma_.assign(dual_size(), 0.0);
        tau_.assign(primal_size(), 0.0);
        const double ratio = std::max(opts_.step_ratio, 1e-6);
        if (opts_.precond == Precond::off) {
            double nrm = std::max(op_norm_, 1e-12);
            std::fill(sigma_.begin(), sigma_.end(), 0.95 / nrm / ratio);
            std::fill(tau_.begin(), tau_.end(), 0.95 / nrm * ratio);
            return;
        }
        // diagonal preconditioning from |K| row/column sums; the floor keeps
        // steps finite on structurally zero rows/columns
        std::vector<double> ones(primal_size(), 1.0), rows;
        apply_K(ones, rows, /*abs=*/true);
        for (int i = 0; i < dual_size(); ++i) sigma_[i] = 0.99 / std::max(rows[i], 5e-2) / ratio;
        std::vector<double> onesd(dual_size(), 1.0), cols;
        apply_KT(onesd, cols, /*abs=*/true);
        for (int i = 0; i < primal_size(); ++i) tau_[i] = 0.99 / std::max(cols[i], 5e-2) * ratio;
        // the simplex prox needs one step size per pixel row
        for (int px = 0; px < npix_; ++px) {
            double m = std::numeric_limits<double>::max();
            for (int k = 0; k < L_; ++k)
                m = std::min(m, tau_[static_cast<std::size_t>(px) * L_ + k]);
            for (int k = 0; k < L_; ++k) tau_[static_cast<std::size_t>(px) * L_ + k] = m;
        }
        // joint projections per (pixel, simplex): (G, a) and (g, b) blocks
        // each share one step size
        if (sublabel_) {
            double* sG = sigma_.data() + np_ + nq_;
            double* sg = sG + nG_;
            double* sa = sg + ng_;
            double* sb = sa + na_;
            for (std::size_t e = 0; e < static_cast<std::size_t>(npix_) * nT_; ++e) {
                double m = sa[e];
                for (int i = 0; i < sd_; ++i) m = std::min(m, sG[e * sd_ + i]);
                for (int i = 0; i < sd_; ++i) sG[e * sd_ + i] = m;
                sa[e] = m;
                double mg = sb[e];
                for (int i = 0; i < s_; ++i) mg = std::min(mg, sg[e * s_ + i]);
                for (int i = 0; i < s_; ++i) sg[e * s_ + i] = mg;
                sb[e] = mg;
            }
        } else {
            double* sG = sigma_.data() + np_;
            for (std::size_t e = 0; e < static_cast<std::size_t>(npix_) * nT_; ++e) {
                double m = std::numeric_limits<double>::max();
                for (int i = 0; i < sd_; ++i) m = std::min(m, sG[e * sd_ + i]);
                for (int i = 0; i < sd_; ++i) sG[e * sd_ + i] = m;
            }
        }
    }

    double grad_entry(const double* v, int px, int k, int j) const {
        int x = px % prob_.grid.width, y = px / prob_.grid.width;
        if (j == 0) {
            if (x + 1 >= prob_.grid.width) return 0.0;
            return v[static_cast<std::size_t>(px + 1) * L_ + k] - v[static_cast<std::size_t>(px) * L_ + k];
        }
        if (y + 1 >= prob_.grid.height) return 0.0;
        return v[static_cast<std::size_t>(px + prob_.grid.width) * L_ + k] -
               v[static_cast<std::size_t>(px) * L_ + k];
    }

    void grad_x(const double* v, double* out, bool abs_mode) const {
        detail::grad_x_impl(prob_.grid, v, L_, out, abs_mode);
    }

    void neg_div_x(const double* p, double* out, bool abs_mode) const {
        detail::neg_div_x_impl(prob_.grid, p, L_, out, abs_mode);
    }

    // exact per-(pixel, simplex) projections of (G, a) onto epi(eta*) and
    // (g, b) onto epi(rho_hat*)
    void project_duals() {
        double* G = dual_.data() + np_ + nq_;
        double* g = sublabel_ ? G + nG_ : nullptr;
        double* a = sublabel_ ? g + ng_ : nullptr;
        double* b = sublabel_ ? a + na_ : nullptr;
        const int m = s_ + 1;
        Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 4, 1> x0(m), xq(m);

        for (std::size_t e = 0; e < static_cast<std::size_t>(npix_) * nT_; ++e) {
            double* Ge = G + e * sd_;
            if (!sublabel_) {
                project_eta_ball(Ge);
                continue;
            }
            project_eta_epi(Ge, a[e]);
            const double* nr = hs_normals_.data() + hs_start_[e] * m;
            const double* of = hs_offsets_.data() + hs_start_[e];
            const int cnt = static_cast<int>(hs_start_[e + 1] - hs_start_[e]);
            for (int i = 0; i < s_; ++i) x0(i) = g[e * s_ + i];
            x0(s_) = b[e];
            detail::project_halfspaces_raw(m, nr, of, cnt, x0.data(), xq.data(),
                                           qp_active_.data() + e * 6, &qp_active_cnt_[e]);
            for (int i = 0; i < s_; ++i) g[e * s_ + i] = xq(i);
            b[e] = xq(s_);
        }
    }

    double eta_conj_value(const double* Ge) const {
        double n2 = 0.0;
        for (int i = 0; i < sd_; ++i) n2 += Ge[i] * Ge[i];
        switch (prob_.reg.kind) {
        case RegularizerKind::tv_frobenius:
        case RegularizerKind::tv_nuclear: return 0.0;
        case RegularizerKind::quadratic: return 0.5 * n2 / prob_.reg.lambda;
        case RegularizerKind::huber: return 0.5 * prob_.reg.alpha * n2 / prob_.reg.lambda;
        }
        return 0.0;
    }

    void project_eta_ball(double* Ge) {
        if (prob_.reg.kind == RegularizerKind::tv_nuclear && s_ > 1 && d_ > 1) {
            Eigen::MatrixXd Z(s_, d_);
            for (int j = 0; j < d_; ++j)
                for (int r = 0; r < s_; ++r) Z(r, j) = Ge[j * s_ + r];
            Z = project_ball(Z, prob_.reg.lambda, BallNorm::spectral);
            for (int j = 0; j < d_; ++j)
                for (int r = 0; r < s_; ++r) Ge[j * s_ + r] = Z(r, j);
            return;
        }
        double n2 = 0.0;
        for (int i = 0; i < sd_; ++i) n2 += Ge[i] * Ge[i];
        double n = std::sqrt(n2);
        if (n > prob_.reg.lambda) {
            double sc = prob_.reg.lambda / n;
            for (int i = 0; i < sd_; ++i) Ge[i] *= sc;
        }
    }

    void project_eta_epi(double* Ge, double& ae) {
        const RegularizerSpec& reg = prob_.reg;
        switch (reg.kind) {
        case RegularizerKind::tv_frobenius:
        case RegularizerKind::tv_nuclear:
            project_eta_ball(Ge);
            ae = std::max(ae, 0.0);
            return;
        case RegularizerKind::quadratic:
        case RegularizerKind::huber: {
            double n2 = 0.0;
            for (int i = 0; i < sd_; ++i) n2 += Ge[i] * Ge[i];
            double x0 = std::sqrt(n2);
            double cc = (reg.kind == RegularizerKind::quadratic ? 1.0 : reg.alpha) / reg.lambda;
            if (0.5 * cc * x0 * x0 <= ae && (reg.kind == RegularizerKind::quadratic || x0 <= reg.lambda)) {
                return; // feasible
            }
            double xstar = detail::parabola_radial_project(x0, ae, cc);
            double hstar = 0.5 * cc * xstar * xstar;
            if (reg.kind == RegularizerKind::huber && xstar > reg.lambda) {
                xstar = reg.lambda;
                hstar = std::max(ae, 0.5 * cc * xstar * xstar);
            }
            if (x0 > 1e-300) {
                double sc = xstar / x0;
                for (int i = 0; i < sd_; ++i) Ge[i] *= sc;
            } else {
                for (int i = 0; i < sd_; ++i) Ge[i] = 0.0;
                hstar = std::max(ae, 0.0);
            }
            ae = hstar;
            return;
        }
        }
    }
};

} // namespace mlift
