#include "robustcov/solver.hpp"

#include "robustcov/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace robustcov::solver {

namespace {

constexpr int kMaxIterations = 200;
constexpr double kStepScale = 0.995;

// Target tolerances (scaled problem) and the looser tier that still counts
// as optimal when progress stalls; both sit far inside the 1e-7 contract.
constexpr double kTolDual = 1e-10;
constexpr double kTolPrimal = 1e-11;
constexpr double kTolMu = 1e-12;
constexpr double kAcceptDual = 1e-8;
constexpr double kAcceptPrimal = 1e-9;
constexpr double kAcceptMu = 1e-10;

enum class Mode { Main, FeasProbe, MinCvarProbe };

/// Variable and inequality-row layout of the epigraph formulation:
/// x = [w | t (L1 epigraph) | l_1..l_J, theta? | u_1 .. u_J].
/// Rows: t-epigraph pairs, then per CVaR block: u >= 0, the scenario link
/// rows, and the cap row.
struct Layout {
    Eigen::Index n = 0;      // assets
    bool has_t = false;      // L1 epigraph block present
    int j_cvar = 0;          // CVaR blocks
    Eigen::Index t_scen = 0; // scenarios per block
    bool has_theta = false;  // overshoot variable (feasibility probe)
    bool cap_rows = false;   // cap row present per block

    Eigen::Index t_off = 0, xi_off = 0, u_off = 0, n_vars = 0, m_ineq = 0;
    Eigen::Index a1_off = 0, a2_off = 0;
    std::vector<Eigen::Index> b_off, c_off, d_off;

    Eigen::Index n_xi() const { return j_cvar + (has_theta ? 1 : 0); }
    Eigen::Index xi_l(int j) const { return xi_off + j; }
    Eigen::Index xi_theta() const { return xi_off + j_cvar; }
    Eigen::Index u_blk(int j) const { return u_off + static_cast<Eigen::Index>(j) * t_scen; }
};

Layout make_layout(Eigen::Index n, bool has_t, int j_cvar, Eigen::Index t_scen, bool has_theta,
                   bool cap_rows) {
    Layout lay;
    lay.n = n;
    lay.has_t = has_t;
    lay.j_cvar = j_cvar;
    lay.t_scen = t_scen;
    lay.has_theta = has_theta;
    lay.cap_rows = cap_rows;
    lay.t_off = n;
    lay.xi_off = n + (has_t ? n : 0);
    lay.u_off = lay.xi_off + lay.n_xi();
    lay.n_vars = lay.u_off + static_cast<Eigen::Index>(j_cvar) * t_scen;

    Eigen::Index row = 0;
    if (has_t) {
        lay.a1_off = row;
        row += n;
        lay.a2_off = row;
        row += n;
    }
    for (int j = 0; j < j_cvar; ++j) {
        lay.b_off.push_back(row);
        row += t_scen;
        lay.c_off.push_back(row);
        row += t_scen;
        if (cap_rows) {
            lay.d_off.push_back(row);
            row += 1;
        }
    }
    lay.m_ineq = row;
    return lay;
}

/// Scaled problem data shared by the interior-point iterations.
struct IpmData {
    Layout lay;
    Eigen::MatrixXd p_w;  // w-block of the Hessian (2V scaled, or ridge)
    double q_t = 0.0;     // linear objective on each t entry
    Eigen::VectorXd q_l;  // per-block linear objective on l
    double q_theta = 0.0; // linear objective on theta
    Eigen::VectorXd q_u;  // per-block coefficient applied to every u entry
    Eigen::VectorXd w0;
    const Eigen::MatrixXd* scenarios = nullptr; // T x N
    std::vector<double> gamma;                  // 1 / ((1-alpha_j) T)
    std::vector<double> beta;
};

Eigen::VectorXd full_gradient(const IpmData& d, const Eigen::VectorXd& x) {
    const Layout& lay = d.lay;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(lay.n_vars);
    g.head(lay.n) = d.p_w * x.head(lay.n);
    if (lay.has_t) g.segment(lay.t_off, lay.n).setConstant(d.q_t);
    for (int j = 0; j < lay.j_cvar; ++j) {
        g[lay.xi_l(j)] += d.q_l[j];
        g.segment(lay.u_blk(j), lay.t_scen).array() += d.q_u[j];
    }
    if (lay.has_theta) g[lay.xi_theta()] += d.q_theta;
    return g;
}

Eigen::VectorXd h_vector(const IpmData& d) {
    const Layout& lay = d.lay;
    Eigen::VectorXd h = Eigen::VectorXd::Zero(lay.m_ineq);
    if (lay.has_t) {
        h.segment(lay.a1_off, lay.n) = d.w0;
        h.segment(lay.a2_off, lay.n) = -d.w0;
    }
    for (int j = 0; j < lay.j_cvar; ++j)
        if (lay.cap_rows) h[lay.d_off[static_cast<std::size_t>(j)]] = d.beta[j];
    return h;
}

Eigen::VectorXd mul_g(const IpmData& d, const Eigen::VectorXd& x) {
    const Layout& lay = d.lay;
    Eigen::VectorXd out(lay.m_ineq);
    const auto w = x.head(lay.n);
    if (lay.has_t) {
        const auto t = x.segment(lay.t_off, lay.n);
        out.segment(lay.a1_off, lay.n) = w - t;
        out.segment(lay.a2_off, lay.n) = -w - t;
    }
    Eigen::VectorXd rw;
    if (lay.j_cvar > 0) rw = (*d.scenarios) * w; // T-vector of r_t . w
    for (int j = 0; j < lay.j_cvar; ++j) {
        const auto u = x.segment(lay.u_blk(j), lay.t_scen);
        out.segment(lay.b_off[static_cast<std::size_t>(j)], lay.t_scen) = -u;
        out.segment(lay.c_off[static_cast<std::size_t>(j)], lay.t_scen) =
            -rw.array() - x[lay.xi_l(j)] - u.array();
        if (lay.cap_rows) {
            double cap = x[lay.xi_l(j)] + d.gamma[static_cast<std::size_t>(j)] * u.sum();
            if (lay.has_theta) cap -= x[lay.xi_theta()];
            out[lay.d_off[static_cast<std::size_t>(j)]] = cap;
        }
    }
    return out;
}

Eigen::VectorXd mul_gt(const IpmData& d, const Eigen::VectorXd& v) {
    const Layout& lay = d.lay;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(lay.n_vars);
    if (lay.has_t) {
        out.head(lay.n) += v.segment(lay.a1_off, lay.n) - v.segment(lay.a2_off, lay.n);
        out.segment(lay.t_off, lay.n) =
            -v.segment(lay.a1_off, lay.n) - v.segment(lay.a2_off, lay.n);
    }
    for (int j = 0; j < lay.j_cvar; ++j) {
        const auto vb = v.segment(lay.b_off[static_cast<std::size_t>(j)], lay.t_scen);
        const auto vc = v.segment(lay.c_off[static_cast<std::size_t>(j)], lay.t_scen);
        out.head(lay.n) -= d.scenarios->transpose() * vc;
        out[lay.xi_l(j)] -= vc.sum();
        out.segment(lay.u_blk(j), lay.t_scen) = -vb - vc;
        if (lay.cap_rows) {
            const double vd = v[lay.d_off[static_cast<std::size_t>(j)]];
            out[lay.xi_l(j)] += vd;
            out.segment(lay.u_blk(j), lay.t_scen).array() +=
                d.gamma[static_cast<std::size_t>(j)] * vd;
            if (lay.has_theta) out[lay.xi_theta()] -= vd;
        }
    }
    return out;
}

struct IpmResult {
    Eigen::VectorXd x;
    double y = 0.0;
    Eigen::VectorXd z, s;
    int iterations = 0;
    bool converged = false;
    double res_dual = 0.0, res_pri = 0.0, mu = 0.0;
};

/// Newton-step workspace: the condensed SPD system over (w, xi) after
/// eliminating the u blocks (diagonal + rank-one) and the t block (diagonal).
struct NewtonSolver {
    const IpmData* d;
    Eigen::MatrixXd s_red;   // (n + n_xi) x (n + n_xi)
    Eigen::LLT<Eigen::MatrixXd> llt;
    // Per-iteration cached pieces for the back-substitution.
    Eigen::VectorXd dwt, dtt;                 // t-block diagonals
    std::vector<Eigen::VectorXd> dinv, c_lu;  // per block
    std::vector<double> coef, wd;             // rank-one data per block
    Eigen::VectorXd weights;                  // z / s

    explicit NewtonSolver(const IpmData& data) : d(&data) {}

    /// Factorizes the condensed system for the current barrier weights.
    void factor(const Eigen::VectorXd& z, const Eigen::VectorXd& s) {
        const Layout& lay = d->lay;
        weights = z.cwiseQuotient(s);
        const Eigen::Index n = lay.n;
        const Eigen::Index nxi = lay.n_xi();
        s_red = Eigen::MatrixXd::Zero(n + nxi, n + nxi);
        s_red.topLeftCorner(n, n) = d->p_w;

        if (lay.has_t) {
            dwt.resize(n);
            dtt.resize(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double wa1 = weights[lay.a1_off + i];
                const double wa2 = weights[lay.a2_off + i];
                dwt[i] = wa2 - wa1;
                dtt[i] = wa1 + wa2;
                // w-w contribution net of the t elimination: 4 wa1 wa2 / (wa1+wa2)
                s_red(i, i) += (wa1 + wa2) - dwt[i] * dwt[i] / dtt[i];
            }
        }

        dinv.assign(static_cast<std::size_t>(lay.j_cvar), {});
        c_lu.assign(static_cast<std::size_t>(lay.j_cvar), {});
        coef.assign(static_cast<std::size_t>(lay.j_cvar), 0.0);
        wd.assign(static_cast<std::size_t>(lay.j_cvar), 0.0);
        for (int j = 0; j < lay.j_cvar; ++j) {
            const auto wb = weights.segment(lay.b_off[static_cast<std::size_t>(j)], lay.t_scen);
            const auto wc = weights.segment(lay.c_off[static_cast<std::size_t>(j)], lay.t_scen);
            const double g = d->gamma[static_cast<std::size_t>(j)];
            const double wdj = lay.cap_rows ? weights[lay.d_off[static_cast<std::size_t>(j)]] : 0.0;
            wd[static_cast<std::size_t>(j)] = wdj;

            Eigen::VectorXd dvec = (wb + wc).cwiseMax(1e-300);
            Eigen::VectorXd di = dvec.cwiseInverse();
            const double rho = wdj * g * g;
            const double sigma = di.sum();
            const double cf = lay.cap_rows ? rho / (1.0 + rho * sigma) : 0.0;
            dinv[static_cast<std::size_t>(j)] = di;
            coef[static_cast<std::size_t>(j)] = cf;

            // c_lu[t] = wc_t + wd * gamma (coupling of l_j to u_j).
            Eigen::VectorXd clu = wc;
            clu.array() += wdj * g;
            c_lu[static_cast<std::size_t>(j)] = clu;

            const Eigen::MatrixXd& r = *d->scenarios;
            // Net w-w term: sum_t wc wb / D r_t r_t' + cf * g1 g1'.
            Eigen::VectorXd scale = (wc.array() * wb.array() * di.array()).sqrt();
            Eigen::MatrixXd b = r.array().colwise() * scale.array();
            s_red.topLeftCorner(n, n).noalias() += b.transpose() * b;
            Eigen::VectorXd g1 = r.transpose() * (wc.array() * di.array()).matrix();
            s_red.topLeftCorner(n, n).noalias() += cf * g1 * g1.transpose();

            // w-l coupling: R'(wc o (1 - Kinv(c_lu))).
            Eigen::VectorXd kin_clu = kinv(j, clu);
            Eigen::VectorXd wl = r.transpose() * (wc.array() * (1.0 - kin_clu.array())).matrix();
            s_red.block(0, n + j, n, 1) = wl;
            s_red.block(n + j, 0, 1, n) = wl.transpose();

            // l-l, l-theta, theta-theta entries.
            double sll = wc.sum() + wdj - clu.dot(kin_clu);
            s_red(n + j, n + j) += sll;
            if (lay.has_theta && lay.cap_rows) {
                Eigen::VectorXd ctheta = Eigen::VectorXd::Constant(lay.t_scen, -wdj * g);
                Eigen::VectorXd kin_ct = kinv(j, ctheta);
                const Eigen::Index th = n + nxi - 1;
                const double slt = -wdj - clu.dot(kin_ct);
                s_red(n + j, th) += slt;
                s_red(th, n + j) += slt;
                s_red(th, th) += wdj - ctheta.dot(kin_ct);
                Eigen::VectorXd wt = r.transpose() * (-(wc.array() * kin_ct.array())).matrix();
                s_red.block(0, th, n, 1) += wt;
                s_red.block(th, 0, 1, n) += wt.transpose();
            }
        }

        // Degenerate complementarity (flat RU faces) can push the condensed
        // system to the PSD boundary; regularize and escalate if needed.
        double ridge = 1e-13 * (1.0 + s_red.diagonal().maxCoeff());
        for (int attempt = 0; attempt < 5; ++attempt) {
            Eigen::MatrixXd reg = s_red;
            reg.diagonal().array() += ridge;
            llt.compute(reg);
            if (llt.info() == Eigen::Success) return;
            ridge *= 1e4;
        }
        throw numerical_error("IpmFactorization", "condensed system not positive definite");
    }

    Eigen::VectorXd kinv(int j, const Eigen::VectorXd& v) const {
        const Eigen::VectorXd& di = dinv[static_cast<std::size_t>(j)];
        Eigen::VectorXd out = di.cwiseProduct(v);
        const double cf = coef[static_cast<std::size_t>(j)];
        if (cf != 0.0) out -= cf * out.sum() * di;
        return out;
    }

    /// Solves the Newton system for the given residuals and the target of
    /// the complementarity equation (z o ds + s o dz = -rsz).
    void solve(const Eigen::VectorXd& z, const Eigen::VectorXd& s, const Eigen::VectorXd& r_x,
               double r_y, const Eigen::VectorXd& r_z, const Eigen::VectorXd& rsz,
               Eigen::VectorXd& dx, double& dy, Eigen::VectorXd& dz, Eigen::VectorXd& ds) const {
        const Layout& lay = d->lay;
        const Eigen::Index n = lay.n;
        const Eigen::Index nxi = lay.n_xi();

        Eigen::VectorXd phi = (z.cwiseProduct(r_z) - rsz).cwiseQuotient(s);
        Eigen::VectorXd rt = -r_x - mul_gt(*d, phi);

        // Reduce onto (w, xi).
        Eigen::VectorXd rhs(n + nxi);
        rhs.head(n) = rt.head(n);
        for (int j = 0; j < lay.j_cvar; ++j) rhs[n + j] = rt[lay.xi_l(j)];
        if (lay.has_theta) rhs[n + nxi - 1] = rt[lay.xi_theta()];

        if (lay.has_t)
            rhs.head(n) -=
                (dwt.array() * rt.segment(lay.t_off, n).array() / dtt.array()).matrix();

        std::vector<Eigen::VectorXd> kin_ru(static_cast<std::size_t>(lay.j_cvar));
        for (int j = 0; j < lay.j_cvar; ++j) {
            const auto ru = rt.segment(lay.u_blk(j), lay.t_scen);
            Eigen::VectorXd kin = kinv(j, ru);
            kin_ru[static_cast<std::size_t>(j)] = kin;
            const auto wc = weights.segment(lay.c_off[static_cast<std::size_t>(j)], lay.t_scen);
            rhs.head(n) -= d->scenarios->transpose() * (wc.array() * kin.array()).matrix();
            rhs[n + j] -= c_lu[static_cast<std::size_t>(j)].dot(kin);
            if (lay.has_theta && lay.cap_rows)
                rhs[n + nxi - 1] -=
                    (-wd[static_cast<std::size_t>(j)] * d->gamma[static_cast<std::size_t>(j)]) *
                    kin.sum();
        }

        // Saddle solve with the budget row via the Schur complement of the
        // SPD condensed block.
        Eigen::VectorXd a = Eigen::VectorXd::Zero(n + nxi);
        a.head(n).setOnes();
        Eigen::VectorXd u1 = llt.solve(rhs);
        Eigen::VectorXd u2 = llt.solve(a);
        dy = (a.dot(u1) + r_y) / a.dot(u2);
        Eigen::VectorXd dxr = u1 - dy * u2;

        dx = Eigen::VectorXd::Zero(lay.n_vars);
        dx.head(n) = dxr.head(n);
        for (int j = 0; j < lay.j_cvar; ++j) dx[lay.xi_l(j)] = dxr[n + j];
        if (lay.has_theta) dx[lay.xi_theta()] = dxr[n + nxi - 1];

        if (lay.has_t)
            dx.segment(lay.t_off, n) =
                (rt.segment(lay.t_off, n) - dwt.cwiseProduct(dx.head(n))).cwiseQuotient(dtt);

        for (int j = 0; j < lay.j_cvar; ++j) {
            const auto wc = weights.segment(lay.c_off[static_cast<std::size_t>(j)], lay.t_scen);
            Eigen::VectorXd rw = (*d->scenarios) * dx.head(n);
            Eigen::VectorXd resid = rt.segment(lay.u_blk(j), lay.t_scen) -
                                    (wc.array() * rw.array()).matrix() -
                                    c_lu[static_cast<std::size_t>(j)] * dx[lay.xi_l(j)];
            if (lay.has_theta && lay.cap_rows)
                resid.array() -= (-wd[static_cast<std::size_t>(j)] *
                                  d->gamma[static_cast<std::size_t>(j)]) *
                                 dx[lay.xi_theta()];
            dx.segment(lay.u_blk(j), lay.t_scen) = kinv(j, resid);
        }

        ds = -r_z - mul_g(*d, dx);
        dz = (-rsz - z.cwiseProduct(ds)).cwiseQuotient(s);
    }
};

double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
    double alpha = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
    return alpha;
}

IpmResult ipm_solve(const IpmData& d, const Eigen::VectorXd& x0) {
    const Layout& lay = d.lay;
    IpmResult res;

    if (lay.m_ineq == 0) {
        // Pure equality-constrained QP: one KKT solve.
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(lay.n + 1, lay.n + 1);
        kkt.topLeftCorner(lay.n, lay.n) = d.p_w;
        kkt.topRightCorner(lay.n, 1).setOnes();
        kkt.bottomLeftCorner(1, lay.n).setOnes();
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(lay.n + 1);
        rhs[lay.n] = 1.0;
        Eigen::VectorXd sol = kkt.partialPivLu().solve(rhs);
        res.x = sol.head(lay.n);
        res.y = sol[lay.n];
        res.z.resize(0);
        res.s.resize(0);
        res.converged = true;
        res.iterations = 1;
        return res;
    }

    const Eigen::VectorXd q = full_gradient(d, Eigen::VectorXd::Zero(lay.n_vars));
    const Eigen::VectorXd h = h_vector(d);
    const double scale_d = 1.0 + q.cwiseAbs().maxCoeff() + d.p_w.cwiseAbs().maxCoeff();
    const double scale_p = 1.0 + h.cwiseAbs().maxCoeff();
    const double m_dbl = static_cast<double>(lay.m_ineq);

    Eigen::VectorXd x = x0;
    double y = 0.0;
    Eigen::VectorXd s = (h - mul_g(d, x)).cwiseMax(0.1);
    Eigen::VectorXd z = Eigen::VectorXd::Ones(lay.m_ineq);

    NewtonSolver newton(d);
    Eigen::VectorXd best_x = x;
    double best_y = y;
    Eigen::VectorXd best_z = z, best_s = s;
    double best_score = std::numeric_limits<double>::infinity();
    int stall_count = 0;

    for (int iter = 0; iter < kMaxIterations; ++iter) {
        Eigen::VectorXd r_x = full_gradient(d, x) + mul_gt(d, z);
        r_x.head(lay.n).array() += y;
        const double r_y = x.head(lay.n).sum() - 1.0;
        Eigen::VectorXd r_z = mul_g(d, x) + s - h;
        const double mu = s.dot(z) / m_dbl;

        const double nd = r_x.cwiseAbs().maxCoeff();
        const double np = std::max(std::abs(r_y), r_z.cwiseAbs().maxCoeff());
        const double score = std::max({nd / scale_d, np / scale_p, mu / scale_d});
        if (score < best_score) {
            best_score = score;
            best_x = x;
            best_y = y;
            best_z = z;
            best_s = s;
        }
        res.iterations = iter;
        res.res_dual = nd;
        res.res_pri = np;
        res.mu = mu;
        if (nd <= kTolDual * scale_d && np <= kTolPrimal * scale_p && mu <= kTolMu * scale_d) {
            res.converged = true;
            break;
        }

        Eigen::VectorXd dx, dz, ds;
        double dy;
        try {
            newton.factor(z, s);

            // Affine-scaling predictor.
            Eigen::VectorXd dx_aff, dz_aff, ds_aff;
            double dy_aff;
            Eigen::VectorXd rsz = s.cwiseProduct(z);
            newton.solve(z, s, r_x, r_y, r_z, rsz, dx_aff, dy_aff, dz_aff, ds_aff);
            const double ap_aff = max_step(s, ds_aff);
            const double ad_aff = max_step(z, dz_aff);
            const double mu_aff = (s + ap_aff * ds_aff).dot(z + ad_aff * dz_aff) / m_dbl;
            double sigma = mu > 0.0 ? std::pow(mu_aff / mu, 3) : 0.0;
            sigma = std::clamp(sigma, 0.0, 1.0);

            // Corrector.
            rsz = s.cwiseProduct(z) + ds_aff.cwiseProduct(dz_aff);
            rsz.array() -= sigma * mu;
            newton.solve(z, s, r_x, r_y, r_z, rsz, dx, dy, dz, ds);
        } catch (const Error&) {
            break; // fall back to the best iterate seen so far
        }
        if (!dx.allFinite() || !ds.allFinite() || !dz.allFinite() || !std::isfinite(dy)) break;

        const double ap = std::min(1.0, kStepScale * max_step(s, ds));
        const double ad = std::min(1.0, kStepScale * max_step(z, dz));
        x += ap * dx;
        s += ap * ds;
        y += ad * dy;
        z += ad * dz;

        if (ap < 1e-11 && ad < 1e-11) {
            if (++stall_count >= 2) break;
        } else {
            stall_count = 0;
        }
    }

    if (!res.converged) {
        // Accept the best iterate when it already sits well inside the
        // contract tolerances.
        if (best_score <= std::max({kAcceptDual, kAcceptPrimal, kAcceptMu})) res.converged = true;
        res.x = best_x;
        res.y = best_y;
        res.z = best_z;
        res.s = best_s;
        return res;
    }
    res.x = x;
    res.y = y;
    res.z = z;
    res.s = s;
    return res;
}

void validate_problem(const MinVarProblem& p, bool allow_cvar) {
    const Eigen::Index n = p.V.rows();
    if (n == 0 || p.V.cols() != n) throw config_error("ShapeMismatch", "V must be square");
    if (p.w0.size() != n) throw config_error("ShapeMismatch", "w0 must have one entry per asset");
    if ((p.V - p.V.transpose()).cwiseAbs().maxCoeff() >
        1e-8 * std::max(1.0, p.V.cwiseAbs().maxCoeff()))
        throw numerical_error("NotSpd", "V is not symmetric");
    if (p.lambda < 0.0) throw config_error("BadLambda", "lambda must be nonnegative");
    const double w0_sum = p.w0.sum();
    const bool cold_start = p.w0.isZero(0.0);
    if (!cold_start && std::abs(w0_sum - 1.0) > 1e-8)
        throw config_error("BadW0", "w0 must sum to 1 or be the zero vector");
    if (!allow_cvar && !p.cvar_constraints.empty())
        throw config_error("BadConstraints", "CVaR constraints are not allowed here");
    if (!p.cvar_constraints.empty()) {
        if (p.scenarios.rows() < 1 || p.scenarios.cols() != n)
            throw config_error("ShapeMismatch", "scenarios must be T x N when constraints exist");
        for (const CvarConstraint& c : p.cvar_constraints) {
            if (!(c.alpha > 0.0 && c.alpha < 1.0))
                throw config_error("BadConstraints", "alpha must lie in (0,1)");
            if (!(c.beta > 0.0)) throw config_error("BadConstraints", "beta must be positive");
        }
    } else if (p.scenarios.size() != 0) {
        throw config_error("BadConstraints", "scenarios present without CVaR constraints");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(((p.V + p.V.transpose()) * 0.5).eval());
    if (llt.info() != Eigen::Success) throw numerical_error("NotSpd", "V is not positive definite");
}

/// Builds the scaled IPM data for the requested mode. `v_scale` receives the
/// factor the quadratic objective was divided by.
IpmData build_data(const MinVarProblem& p, Mode mode, int single_j, double& v_scale) {
    const Eigen::Index n = p.V.rows();
    const int j_all = static_cast<int>(p.cvar_constraints.size());
    IpmData d;
    switch (mode) {
        case Mode::Main: {
            const bool has_t = p.lambda > 0.0;
            d.lay = make_layout(n, has_t, j_all, p.scenarios.rows(), false, true);
            v_scale = std::max(p.V.diagonal().maxCoeff(), 1e-300);
            d.p_w = (2.0 / v_scale) * ((p.V + p.V.transpose()) * 0.5);
            d.q_t = p.lambda / v_scale;
            break;
        }
        case Mode::FeasProbe: {
            d.lay = make_layout(n, false, j_all, p.scenarios.rows(), true, true);
            v_scale = 1.0;
            d.p_w = 2e-9 * Eigen::MatrixXd::Identity(n, n);
            d.q_theta = 1.0;
            break;
        }
        case Mode::MinCvarProbe: {
            d.lay = make_layout(n, false, 1, p.scenarios.rows(), false, false);
            v_scale = 1.0;
            d.p_w = 2e-9 * Eigen::MatrixXd::Identity(n, n);
            break;
        }
    }
    d.w0 = p.w0;
    d.scenarios = &p.scenarios;
    const double t_dbl = static_cast<double>(p.scenarios.rows());
    d.q_l = Eigen::VectorXd::Zero(d.lay.j_cvar);
    d.q_u = Eigen::VectorXd::Zero(d.lay.j_cvar);
    if (mode == Mode::MinCvarProbe) {
        const double g = 1.0 / ((1.0 - p.cvar_constraints[static_cast<std::size_t>(single_j)].alpha) * t_dbl);
        d.gamma = {g};
        d.beta = {0.0};
        d.q_l[0] = 1.0;
        d.q_u[0] = g;
    } else {
        for (int j = 0; j < j_all; ++j) {
            const CvarConstraint& c = p.cvar_constraints[static_cast<std::size_t>(j)];
            d.gamma.push_back(1.0 / ((1.0 - c.alpha) * t_dbl));
            d.beta.push_back(c.beta);
        }
    }
    return d;
}

Eigen::VectorXd initial_point(const IpmData& d, const MinVarProblem& p) {
    const Layout& lay = d.lay;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(lay.n_vars);
    const bool cold = p.w0.isZero(0.0);
    if (cold)
        x.head(lay.n).setConstant(1.0 / static_cast<double>(lay.n));
    else
        x.head(lay.n) = p.w0;
    if (lay.has_t)
        x.segment(lay.t_off, lay.n) =
            (x.head(lay.n) - p.w0).cwiseAbs().array() + 0.1;
    if (lay.j_cvar > 0) {
        Eigen::VectorXd losses = -(*d.scenarios) * x.head(lay.n);
        const double median_loss = empirical_cvar(losses, 0.5).second;
        for (int j = 0; j < lay.j_cvar; ++j) {
            x[lay.xi_l(j)] = median_loss;
            x.segment(lay.u_blk(j), lay.t_scen) =
                (losses.array() - median_loss).cwiseMax(0.0) + 0.1;
        }
        if (lay.has_theta) {
            double worst = 0.0;
            for (int j = 0; j < lay.j_cvar; ++j) {
                const double ru = x[lay.xi_l(j)] +
                                  d.gamma[static_cast<std::size_t>(j)] *
                                      x.segment(lay.u_blk(j), lay.t_scen).sum();
                worst = std::max(worst, ru - d.beta[static_cast<std::size_t>(j)]);
            }
            x[lay.xi_theta()] = worst + 0.1;
        }
    }
    return x;
}

double portfolio_objective(const MinVarProblem& p, const Eigen::VectorXd& w) {
    return w.dot(p.V * w) + p.lambda * (w - p.w0).cwiseAbs().sum();
}

Solution finish_solution(const MinVarProblem& p, const IpmData& d, const IpmResult& r,
                         double v_scale) {
    Solution sol;
    sol.weights = r.x.head(d.lay.n);
    sol.objective = portfolio_objective(p, sol.weights);
    for (int j = 0; j < d.lay.j_cvar; ++j) sol.aux_l.push_back(r.x[d.lay.xi_l(j)]);
    sol.iterations = r.iterations;
    sol.status = r.converged ? SolveStatus::Optimal : SolveStatus::MaxIter;
    sol.x_full = r.x;
    // Multipliers back on the original objective scale.
    sol.y_eq = r.y * v_scale;
    sol.z_ineq = r.z * v_scale;
    sol.s_slack = r.s;
    KktReport report = verify_kkt(p, sol);
    sol.kkt_residual = report.max_residual();
    return sol;
}

} // namespace

std::string status_name(SolveStatus status) {
    switch (status) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::MaxIter: return "max_iter";
    }
    return "unknown";
}

Eigen::VectorXd minvar_closed_form(const Eigen::MatrixXd& v) {
    const Eigen::Index n = v.rows();
    if (n == 0 || v.cols() != n) throw config_error("ShapeMismatch", "V must be square");
    if ((v - v.transpose()).cwiseAbs().maxCoeff() >
        1e-8 * std::max(1.0, v.cwiseAbs().maxCoeff()))
        throw numerical_error("NotSpd", "V is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(((v + v.transpose()) * 0.5).eval());
    if (llt.info() != Eigen::Success) throw numerical_error("NotSpd", "V is not positive definite");
    Eigen::VectorXd x = llt.solve(Eigen::VectorXd::Ones(n));
    const double denom = x.sum();
    if (denom == 0.0) throw numerical_error("NotSpd", "degenerate normalization e'V^-1 e = 0");
    return x / denom;
}

std::pair<double, double> empirical_cvar(const Eigen::VectorXd& losses, double alpha) {
    if (losses.size() < 1) throw config_error("BadConstraints", "empty loss sample");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw config_error("BadConstraints", "alpha must lie in (0,1)");
    const Eigen::Index t_obs = losses.size();
    std::vector<double> sorted(losses.data(), losses.data() + t_obs);
    std::sort(sorted.begin(), sorted.end());
    // Smallest minimizer of the Rockafellar-Uryasev functional: the lower
    // alpha-quantile. The epsilon guards the integer-boundary case.
    const double pos = alpha * static_cast<double>(t_obs);
    Eigen::Index k = static_cast<Eigen::Index>(std::ceil(pos - 1e-9));
    k = std::clamp<Eigen::Index>(k, 1, t_obs);
    const double var = sorted[static_cast<std::size_t>(k - 1)];
    double excess = 0.0;
    for (double loss : sorted) excess += std::max(loss - var, 0.0);
    const double cvar = var + excess / ((1.0 - alpha) * static_cast<double>(t_obs));
    return {cvar, var};
}

Solution solve_minvar_l1(const MinVarProblem& problem) {
    validate_problem(problem, false);
    double v_scale = 1.0;
    IpmData d = build_data(problem, Mode::Main, -1, v_scale);
    IpmResult r = ipm_solve(d, initial_point(d, problem));
    return finish_solution(problem, d, r, v_scale);
}

Solution solve_minvar_cvar(const MinVarProblem& problem) {
    validate_problem(problem, true);
    if (problem.cvar_constraints.empty()) {
        MinVarProblem plain = problem;
        plain.scenarios.resize(0, 0);
        return solve_minvar_l1(plain);
    }

    // Certify feasibility first: minimize the worst constraint overshoot.
    double probe_scale = 1.0;
    IpmData probe = build_data(problem, Mode::FeasProbe, -1, probe_scale);
    IpmResult probe_res = ipm_solve(probe, initial_point(probe, problem));
    const double overshoot = probe_res.x[probe.lay.xi_theta()];
    if (probe_res.converged && overshoot > 1e-7) {
        Solution sol;
        sol.status = SolveStatus::Infeasible;
        sol.weights = probe_res.x.head(probe.lay.n);
        sol.objective = portfolio_objective(problem, sol.weights);
        sol.iterations = probe_res.iterations;
        for (int j = 0; j < static_cast<int>(problem.cvar_constraints.size()); ++j) {
            double mc_scale = 1.0;
            IpmData mc = build_data(problem, Mode::MinCvarProbe, j, mc_scale);
            IpmResult mc_res = ipm_solve(mc, initial_point(mc, problem));
            const double min_cvar =
                mc_res.x[mc.lay.xi_l(0)] +
                mc.gamma[0] * mc_res.x.segment(mc.lay.u_blk(0), mc.lay.t_scen).sum();
            sol.min_achievable_cvar.push_back(min_cvar);
        }
        return sol;
    }

    double v_scale = 1.0;
    IpmData d = build_data(problem, Mode::Main, -1, v_scale);
    IpmResult r = ipm_solve(d, initial_point(d, problem));
    return finish_solution(problem, d, r, v_scale);
}

double KktReport::max_residual() const {
    return std::max({stationarity, primal_equality, primal_inequality, dual_feasibility,
                     complementarity});
}

KktReport verify_kkt(const MinVarProblem& problem, const Solution& solution) {
    double v_scale = 1.0;
    IpmData d = build_data(problem, Mode::Main, -1, v_scale);
    if (solution.x_full.size() != d.lay.n_vars)
        throw config_error("BadSolution", "solution lacks solver state for this problem");

    // Rebuild residuals from first principles on the original scale.
    IpmData orig = d;
    orig.p_w = (problem.V + problem.V.transpose()); // 2V
    orig.q_t = problem.lambda;

    KktReport rep;
    const Eigen::VectorXd& x = solution.x_full;
    Eigen::VectorXd grad = full_gradient(orig, x) + mul_gt(orig, solution.z_ineq);
    grad.head(d.lay.n).array() += solution.y_eq;
    rep.stationarity = grad.cwiseAbs().maxCoeff();
    rep.primal_equality = std::abs(x.head(d.lay.n).sum() - 1.0);
    Eigen::VectorXd gx = mul_g(orig, x) - h_vector(orig);
    rep.primal_inequality = d.lay.m_ineq > 0 ? gx.cwiseMax(0.0).maxCoeff() : 0.0;
    rep.dual_feasibility =
        d.lay.m_ineq > 0 ? std::max(0.0, -solution.z_ineq.minCoeff()) : 0.0;
    if (d.lay.m_ineq > 0) {
        Eigen::VectorXd slack = -gx; // h - Gx
        rep.complementarity = slack.cwiseProduct(solution.z_ineq).cwiseAbs().maxCoeff();
    }
    return rep;
}

} // namespace robustcov::solver
