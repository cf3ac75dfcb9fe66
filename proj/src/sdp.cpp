#include "hjbsos/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace hjbsos::sdp {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string format_17g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

// Dense symmetric per-block view of one sparse constraint/objective matrix.
struct BlockMats {
    std::vector<std::pair<int, MatrixXd>> blocks;  // (block index, dense symmetric)

    static BlockMats densify(const std::vector<Entry>& entries, const std::vector<int>& dims) {
        BlockMats out;
        for (const auto& e : entries) {
            MatrixXd* mat = nullptr;
            for (auto& [b, m] : out.blocks)
                if (b == e.block) mat = &m;
            if (mat == nullptr) {
                out.blocks.emplace_back(e.block,
                                        MatrixXd::Zero(dims[static_cast<std::size_t>(e.block)],
                                                       dims[static_cast<std::size_t>(e.block)]));
                mat = &out.blocks.back().second;
            }
            (*mat)(e.i, e.j) += e.value;
            if (e.i != e.j) (*mat)(e.j, e.i) += e.value;
        }
        return out;
    }

    double dot(const std::vector<MatrixXd>& X) const {
        double sum = 0.0;
        for (const auto& [b, m] : blocks)
            sum += (m.cwiseProduct(X[static_cast<std::size_t>(b)])).sum();
        return sum;
    }

    double frob_norm() const {
        double sum = 0.0;
        for (const auto& [b, m] : blocks) sum += m.squaredNorm();
        return std::sqrt(sum);
    }

    double inf_norm() const {
        double v = 0.0;
        for (const auto& [b, m] : blocks) v = std::max(v, m.cwiseAbs().maxCoeff());
        return v;
    }
};

struct Workspace {
    int nb = 0;
    int m = 0;
    int nf = 0;
    int n_total = 0;
    std::vector<int> dims;
    std::vector<BlockMats> A;  // one per constraint
    BlockMats C;
    VectorXd b;
    MatrixXd F;       // m x nf
    VectorXd c_free;  // nf

    double applyA(int k, const std::vector<MatrixXd>& X) const { return A[static_cast<std::size_t>(k)].dot(X); }

    VectorXd primal_residual(const std::vector<MatrixXd>& X, const VectorXd& f) const {
        VectorXd r = b;
        for (int k = 0; k < m; ++k) r(k) -= applyA(k, X);
        if (nf > 0) r -= F * f;
        return r;
    }

    std::vector<MatrixXd> mat_At_y(const VectorXd& y) const {
        std::vector<MatrixXd> out;
        out.reserve(static_cast<std::size_t>(nb));
        for (int b_i = 0; b_i < nb; ++b_i)
            out.emplace_back(MatrixXd::Zero(dims[static_cast<std::size_t>(b_i)],
                                            dims[static_cast<std::size_t>(b_i)]));
        for (int k = 0; k < m; ++k) {
            const double yk = y(k);
            if (yk == 0.0) continue;
            for (const auto& [b_i, mat] : A[static_cast<std::size_t>(k)].blocks)
                out[static_cast<std::size_t>(b_i)] += yk * mat;
        }
        return out;
    }
};

double block_inf_norm(const std::vector<MatrixXd>& M) {
    double v = 0.0;
    for (const auto& b : M)
        if (b.size() > 0) v = std::max(v, b.cwiseAbs().maxCoeff());
    return v;
}

double block_dot(const std::vector<MatrixXd>& A, const std::vector<MatrixXd>& B) {
    double sum = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) sum += (A[i].cwiseProduct(B[i])).sum();
    return sum;
}

// Largest alpha in (0, 1] with M + alpha*D staying PSD, given M = L L^T.
double max_step(const MatrixXd& L, const MatrixXd& D) {
    const MatrixXd Q = L.triangularView<Eigen::Lower>().solve(
        L.triangularView<Eigen::Lower>().solve(D).transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (Q + Q.transpose()),
                                               Eigen::EigenvaluesOnly);
    const double lam_min = es.eigenvalues().minCoeff();
    if (lam_min >= 0.0) return 1.0;
    return std::min(1.0, -1.0 / lam_min);
}

struct RayCheck {
    bool found = false;
    VectorXd ray;
    double improvement = 0.0;
    double violation = 0.0;
};

// Approximate Farkas certificate of primal infeasibility: a unit direction y
// with b'y > 0, sum_k y_k A_k <= delta*I (relative to the data scale) and
// F'y ~ 0.
RayCheck check_dual_ray(const Workspace& w, const VectorXd& y, double delta, double a_scale,
                        double b_scale) {
    RayCheck out;
    const double ynorm = y.norm();
    if (ynorm <= 0.0) return out;
    const VectorXd yhat = y / ynorm;
    const double by = w.b.dot(yhat);
    if (by <= 0.0) return out;
    double viol = 0.0;
    const auto aty = w.mat_At_y(yhat);
    for (const auto& blockmat : aty) {
        if (blockmat.size() == 0) continue;
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(blockmat, Eigen::EigenvaluesOnly);
        viol = std::max(viol, es.eigenvalues().maxCoeff());
    }
    if (w.nf > 0) viol = std::max(viol, (w.F.transpose() * yhat).cwiseAbs().maxCoeff());
    out.ray = yhat;
    out.improvement = by;
    out.violation = viol;
    out.found = viol <= delta * std::max(1.0, a_scale) && by > delta * (1.0 + b_scale);
    return out;
}

// Improving primal ray: directions (X, f) with A(X) + F f ~ 0, X >= 0 and
// <C, X> + c'f <= -delta, certifying dual infeasibility (unbounded primal).
RayCheck check_primal_ray(const Workspace& w, const std::vector<MatrixXd>& X, const VectorXd& f) {
    RayCheck out;
    double norm = f.norm();
    for (const auto& blockmat : X) norm += blockmat.norm();
    if (norm <= 0.0) return out;
    double obj = w.C.dot(X);
    if (w.nf > 0) obj += w.c_free.dot(f);
    obj /= norm;
    if (obj >= 0.0) return out;
    VectorXd resid = -w.primal_residual(X, f) + w.b;  // A(X) + F f
    out.violation = resid.cwiseAbs().maxCoeff() / norm;
    out.improvement = -obj;
    out.found = false;  // caller decides with its own threshold
    return out;
}

}  // namespace

void SdpProblem::validate() const {
    if (block_dims.empty() && num_free == 0)
        throw std::invalid_argument("SdpProblem: no variables");
    for (int d : block_dims)
        if (d <= 0) throw std::invalid_argument("SdpProblem: nonpositive block dimension");
    if (constraints.size() != rhs.size())
        throw std::invalid_argument("SdpProblem: constraint/rhs count mismatch");
    auto check_entries = [&](const std::vector<Entry>& entries) {
        for (const auto& e : entries) {
            if (e.block < 0 || e.block >= static_cast<int>(block_dims.size()))
                throw std::invalid_argument("SdpProblem: entry block out of range");
            const int d = block_dims[static_cast<std::size_t>(e.block)];
            if (e.i < 0 || e.j < 0 || e.i >= d || e.j >= d || e.i > e.j)
                throw std::invalid_argument("SdpProblem: entry indices invalid (need i <= j)");
        }
    };
    auto check_free = [&](const std::vector<std::pair<int, double>>& coeffs) {
        for (const auto& [idx, v] : coeffs) {
            (void)v;
            if (idx < 0 || idx >= num_free)
                throw std::invalid_argument("SdpProblem: free variable index out of range");
        }
    };
    check_entries(objective_entries);
    check_free(objective_free);
    for (const auto& c : constraints) {
        check_entries(c.entries);
        check_free(c.free_coeffs);
    }
}

std::string to_string(SdpStatus s) {
    switch (s) {
        case SdpStatus::Optimal: return "optimal";
        case SdpStatus::Infeasible: return "infeasible";
        case SdpStatus::Unbounded: return "unbounded";
        case SdpStatus::MaxIter: return "max_iter";
        case SdpStatus::NumericalFailure: return "numerical_failure";
    }
    return "unknown";
}

std::string SdpProblem::to_sdpa_sparse() const {
    validate();
    std::ostringstream os;
    os << "\"standard primal form: min <C,X>+c'f st <A_k,X>+(Ff)_k=b_k;"
       << " free vars split f=u-v into trailing diagonal block\"\n";
    os << constraints.size() << "\n";
    const bool has_free = num_free > 0;
    os << block_dims.size() + (has_free ? 1 : 0) << "\n";
    for (std::size_t i = 0; i < block_dims.size(); ++i) {
        if (i) os << " ";
        os << block_dims[i];
    }
    if (has_free) {
        if (!block_dims.empty()) os << " ";
        os << -(2 * num_free);
    }
    os << "\n";
    for (std::size_t k = 0; k < rhs.size(); ++k) {
        if (k) os << " ";
        os << format_17g(rhs[k]);
    }
    os << "\n";
    const int free_block = static_cast<int>(block_dims.size()) + 1;
    auto emit = [&](int matno, const std::vector<Entry>& entries,
                    const std::vector<std::pair<int, double>>& free_coeffs) {
        for (const auto& e : entries)
            os << matno << " " << e.block + 1 << " " << e.i + 1 << " " << e.j + 1 << " "
               << format_17g(e.value) << "\n";
        for (const auto& [idx, v] : free_coeffs) {
            os << matno << " " << free_block << " " << idx + 1 << " " << idx + 1 << " "
               << format_17g(v) << "\n";
            os << matno << " " << free_block << " " << num_free + idx + 1 << " "
               << num_free + idx + 1 << " " << format_17g(-v) << "\n";
        }
    };
    emit(0, objective_entries, objective_free);
    for (std::size_t k = 0; k < constraints.size(); ++k)
        emit(static_cast<int>(k) + 1, constraints[k].entries, constraints[k].free_coeffs);
    return os.str();
}

SdpSolution solve(const SdpProblem& problem, const SdpSettings& settings) {
    problem.validate();
    if (problem.block_dims.empty())
        throw std::invalid_argument("sdp::solve: at least one PSD block is required");

    Workspace w;
    w.dims = problem.block_dims;
    w.nb = static_cast<int>(w.dims.size());
    w.m = problem.num_constraints();
    w.nf = problem.num_free;
    w.n_total = 0;
    for (int d : w.dims) w.n_total += d;
    w.A.reserve(static_cast<std::size_t>(w.m));
    for (const auto& c : problem.constraints) w.A.push_back(BlockMats::densify(c.entries, w.dims));
    w.C = BlockMats::densify(problem.objective_entries, w.dims);
    w.b = Eigen::Map<const VectorXd>(problem.rhs.data(), static_cast<Eigen::Index>(problem.rhs.size()));
    w.F = MatrixXd::Zero(w.m, std::max(1, w.nf));
    for (int k = 0; k < w.m; ++k)
        for (const auto& [idx, v] : problem.constraints[static_cast<std::size_t>(k)].free_coeffs)
            w.F(k, idx) += v;
    w.c_free = VectorXd::Zero(std::max(1, w.nf));
    for (const auto& [idx, v] : problem.objective_free) w.c_free(idx) += v;

    // Row equilibration: scale each constraint to unit data norm. The primal
    // variables are untouched; the returned multipliers are scaled back.
    VectorXd row_scale = VectorXd::Ones(w.m);
    for (int k = 0; k < w.m; ++k) {
        const double norm = std::max(w.A[static_cast<std::size_t>(k)].frob_norm(),
                                     w.nf > 0 ? w.F.row(k).norm() : 0.0);
        if (norm > 1e-12) row_scale(k) = 1.0 / norm;
        for (auto& [bidx, mat] : w.A[static_cast<std::size_t>(k)].blocks) {
            (void)bidx;
            mat *= row_scale(k);
        }
        w.b(k) *= row_scale(k);
        if (w.nf > 0) w.F.row(k) *= row_scale(k);
    }

    // Dense symmetric C per block, used by the embedding.
    std::vector<MatrixXd> Cb;
    for (int b_i = 0; b_i < w.nb; ++b_i) {
        MatrixXd cb = MatrixXd::Zero(w.dims[static_cast<std::size_t>(b_i)],
                                     w.dims[static_cast<std::size_t>(b_i)]);
        for (const auto& [bb, mat] : w.C.blocks)
            if (bb == b_i) cb += mat;
        Cb.push_back(std::move(cb));
    }

    SdpSolution sol;
    sol.y = VectorXd::Zero(w.m);
    sol.free_values = VectorXd::Zero(w.nf);

    // Homogeneous self-dual embedding:
    //   A(X) + F f - b tau            = rp
    //   tau C - At(y) - S             = Rd   (per block)
    //   tau c_free - F' y             = rf
    //   b'y - <C,X> - c_free'f - kappa = rg
    // with X,S in the PSD cone and tau, kappa > 0. The deciding ratio at
    // convergence is tau vs kappa.
    double a_scale = 0.0;
    for (int k = 0; k < w.m; ++k)
        a_scale = std::max(a_scale, w.A[static_cast<std::size_t>(k)].frob_norm());
    const double b_norm = w.m > 0 ? w.b.cwiseAbs().maxCoeff() : 0.0;
    const double c_norm = std::max(w.C.inf_norm(),
                                   w.nf > 0 ? w.c_free.cwiseAbs().maxCoeff() : 0.0);

    const double s0 = std::max({1.0, std::sqrt(static_cast<double>(w.n_total)), b_norm, c_norm});
    std::vector<MatrixXd> X, S;
    for (int d : w.dims) {
        X.emplace_back(s0 * MatrixXd::Identity(d, d));
        S.emplace_back(s0 * MatrixXd::Identity(d, d));
    }
    VectorXd y = VectorXd::Zero(w.m);
    VectorXd f = VectorXd::Zero(std::max(1, w.nf));
    double tau = 1.0, kappa = s0 * s0;

    const double ray_delta = settings.tol * 1e2;
    const double mu0 = (s0 * s0 * w.n_total + tau * kappa) / (w.n_total + 1);

    // Free variables are eliminated through a null-space basis of F' so pure
    // equality rows (zero A_k) never make the Schur complement singular.
    MatrixXd Q1, Q2, Rf;
    bool use_qr = false;
    if (w.nf > 0) {
        Eigen::HouseholderQR<MatrixXd> qr(w.F);
        const MatrixXd Qfull = qr.householderQ();
        Rf = qr.matrixQR().topRows(w.nf).triangularView<Eigen::Upper>();
        double rmin = 1e300, rmax = 0.0;
        for (int i = 0; i < w.nf; ++i) {
            rmin = std::min(rmin, std::abs(Rf(i, i)));
            rmax = std::max(rmax, std::abs(Rf(i, i)));
        }
        if (w.m < w.nf || rmin <= 1e-12 * std::max(1.0, rmax))
            throw std::invalid_argument(
                "sdp::solve: free-variable coefficient matrix must have full column rank");
        use_qr = true;
        Q1 = Qfull.leftCols(w.nf);
        Q2 = Qfull.rightCols(w.m - w.nf);
    }

    auto llt_with_jitter = [](MatrixXd mat, Eigen::LLT<MatrixXd>& out) {
        const double scale = std::max(1.0, mat.diagonal().cwiseAbs().maxCoeff());
        for (const double jitter : {0.0, 1e-14, 1e-12, 1e-9}) {
            MatrixXd m2 = mat;
            m2.diagonal().array() += jitter * scale;
            out.compute(m2);
            if (out.info() == Eigen::Success) return true;
        }
        return false;
    };

    // Scaled-back candidate solution and its exact residuals.
    auto fill_scaled = [&](SdpSolution& out) {
        out.X.clear();
        out.S.clear();
        for (int b_i = 0; b_i < w.nb; ++b_i) {
            out.X.push_back(X[static_cast<std::size_t>(b_i)] / tau);
            out.S.push_back(S[static_cast<std::size_t>(b_i)] / tau);
        }
        out.y = row_scale.asDiagonal() * (y / tau);
        out.free_values = f.head(w.nf) / tau;
        out.primal_obj = (w.C.dot(X) + (w.nf > 0 ? w.c_free.dot(f) : 0.0)) / tau;
        out.dual_obj = w.b.dot(y) / tau;
        const auto r = residuals(problem, out);
        out.primal_residual = r.primal;
        out.dual_residual = r.dual;
        out.duality_gap = r.gap;
    };

    struct Snapshot {
        double merit = 1e300;
        std::vector<MatrixXd> X, S;
        VectorXd y, f;
        double tau = 1.0, kappa = 1.0;
    } best;

    auto finish = [&](SdpStatus status) {
        if ((status == SdpStatus::MaxIter || status == SdpStatus::NumericalFailure) &&
            best.merit < 1e300) {
            X = best.X;
            S = best.S;
            y = best.y;
            f = best.f;
            tau = best.tau;
            kappa = best.kappa;
        }
        sol.status = status;
        fill_scaled(sol);
        return sol;
    };

    auto try_certificates = [&]() -> std::optional<SdpStatus> {
        // Primal infeasibility: an improving dual ray.
        if (w.b.dot(y) > 0.0) {
            const auto ray = check_dual_ray(w, y, ray_delta, a_scale, b_norm);
            if (ray.found) {
                sol.infeasibility_ray = (row_scale.asDiagonal() * ray.ray).normalized();
                sol.ray_improvement = ray.improvement;
                sol.ray_violation = ray.violation;
                return SdpStatus::Infeasible;
            }
        }
        // Dual infeasibility: an improving primal ray.
        double obj = w.C.dot(X) + (w.nf > 0 ? w.c_free.dot(f) : 0.0);
        if (obj < 0.0) {
            const auto ray = check_primal_ray(w, X, f);
            if (ray.improvement > ray_delta * std::max(1.0, c_norm) &&
                ray.violation <= ray_delta * std::max(1.0, a_scale))
                return SdpStatus::Unbounded;
        }
        return std::nullopt;
    };

    for (int iter = 0; iter < settings.max_iter; ++iter) {
        sol.iterations = iter + 1;

        // Embedding residuals.
        VectorXd rp = tau * w.b;
        for (int k = 0; k < w.m; ++k) rp(k) -= w.applyA(k, X);
        if (w.nf > 0) rp -= w.F * f;
        std::vector<MatrixXd> Rd;
        const auto aty = w.mat_At_y(y);
        for (int b_i = 0; b_i < w.nb; ++b_i)
            Rd.push_back(tau * Cb[static_cast<std::size_t>(b_i)] -
                         aty[static_cast<std::size_t>(b_i)] - S[static_cast<std::size_t>(b_i)]);
        VectorXd rf = VectorXd::Zero(std::max(1, w.nf));
        if (w.nf > 0) rf = tau * w.c_free - w.F.transpose() * y;
        const double obj_primal = w.C.dot(X) + (w.nf > 0 ? w.c_free.dot(f) : 0.0);
        const double rg = w.b.dot(y) - obj_primal - kappa;

        const double mu = (block_dot(X, S) + tau * kappa) / (w.n_total + 1);
        sol.gap_trace.push_back(block_dot(X, S) / (tau * tau));

        // Convergence metrics of the scaled-back point.
        const double pobj = obj_primal / tau;
        const double dobj = w.b.dot(y) / tau;
        const double rel_gap =
            std::abs(pobj - dobj) / (1.0 + std::max(std::abs(pobj), std::abs(dobj)));
        const double prel = (w.m > 0 ? rp.cwiseAbs().maxCoeff() : 0.0) / (tau * (1.0 + b_norm));
        const double drel = std::max(block_inf_norm(Rd),
                                     w.nf > 0 ? rf.cwiseAbs().maxCoeff() : 0.0) /
                            (tau * (1.0 + c_norm));

        if (settings.verbosity > 0)
            std::fprintf(stderr,
                         "iter %3d  mu %.3e  gap %.3e  pinf %.3e  dinf %.3e  tau %.2e  kap %.2e\n",
                         iter, mu, rel_gap, prel, drel, tau, kappa);

        if (rel_gap <= settings.tol && prel <= settings.tol && drel <= settings.tol)
            return finish(SdpStatus::Optimal);

        // Infeasibility: tau -> 0 with kappa bounded away from zero.
        if (tau <= settings.tol * std::min(1.0, kappa) || (mu < 1e-10 * mu0 && tau < 1e-6 * kappa)) {
            if (auto status = try_certificates()) return finish(*status);
            return finish(SdpStatus::NumericalFailure);  // weakly infeasible or ill-posed
        }
        if (mu < 1e-14 * mu0) {
            if (auto status = try_certificates()) return finish(*status);
            return finish(SdpStatus::MaxIter);
        }

        const double merit = std::max({rel_gap, prel, drel});
        if (merit < best.merit) {
            best.merit = merit;
            best.X = X;
            best.S = S;
            best.y = y;
            best.f = f;
            best.tau = tau;
            best.kappa = kappa;
        }

        // Nesterov-Todd scaling per block.
        std::vector<MatrixXd> Lx, Ls, Wmat, Sinv;
        bool chol_ok = true;
        for (int b_i = 0; b_i < w.nb; ++b_i) {
            Eigen::LLT<MatrixXd> lx, ls;
            if (!llt_with_jitter(X[static_cast<std::size_t>(b_i)], lx) ||
                !llt_with_jitter(S[static_cast<std::size_t>(b_i)], ls)) {
                chol_ok = false;
                break;
            }
            Lx.push_back(lx.matrixL());
            Ls.push_back(ls.matrixL());
            Eigen::JacobiSVD<MatrixXd> svd(Ls.back().transpose() * Lx.back(),
                                           Eigen::ComputeFullU | Eigen::ComputeFullV);
            const VectorXd d = svd.singularValues();
            if (d.minCoeff() <= 0.0) {
                chol_ok = false;
                break;
            }
            const MatrixXd G = Lx.back() * svd.matrixV() * d.cwiseSqrt().cwiseInverse().asDiagonal();
            Wmat.push_back(G * G.transpose());
            const MatrixXd Lsi = Ls.back()
                                     .triangularView<Eigen::Lower>()
                                     .solve(MatrixXd::Identity(Ls.back().rows(), Ls.back().cols()));
            Sinv.push_back(Lsi.transpose() * Lsi);
        }
        if (!chol_ok) return finish(SdpStatus::NumericalFailure);

        // Schur complement M_kl = sum_b <A_k, W A_l W>.
        std::vector<std::vector<MatrixXd>> WAW(static_cast<std::size_t>(w.m));
        for (int l = 0; l < w.m; ++l)
            for (const auto& [b_i, mat] : w.A[static_cast<std::size_t>(l)].blocks)
                WAW[static_cast<std::size_t>(l)].push_back(
                    Wmat[static_cast<std::size_t>(b_i)] * mat * Wmat[static_cast<std::size_t>(b_i)]);
        MatrixXd M = MatrixXd::Zero(w.m, w.m);
        for (int k = 0; k < w.m; ++k) {
            for (int l = k; l < w.m; ++l) {
                double sum = 0.0;
                std::size_t li = 0;
                for (const auto& [b_l, dense_l] : w.A[static_cast<std::size_t>(l)].blocks) {
                    const MatrixXd& wl = WAW[static_cast<std::size_t>(l)][li++];
                    for (const auto& [b_k, dense_k] : w.A[static_cast<std::size_t>(k)].blocks)
                        if (b_k == b_l) sum += (dense_k.cwiseProduct(wl)).sum();
                }
                M(k, l) = sum;
                M(l, k) = sum;
            }
        }

        Eigen::LLT<MatrixXd> Mllt;
        MatrixXd MQ1, MQ2;
        if (use_qr) {
            MQ1 = M * Q1;
            MQ2 = M * Q2;
            if (w.m > w.nf) {
                if (!llt_with_jitter(Q2.transpose() * MQ2, Mllt))
                    return finish(SdpStatus::NumericalFailure);
            }
        } else {
            if (!llt_with_jitter(M, Mllt)) return finish(SdpStatus::NumericalFailure);
        }

        // WCW blocks, u = b + A(WCW), v = A(WCW), e = <C, WCW>.
        std::vector<MatrixXd> WCW;
        for (int b_i = 0; b_i < w.nb; ++b_i)
            WCW.push_back(Wmat[static_cast<std::size_t>(b_i)] * Cb[static_cast<std::size_t>(b_i)] *
                          Wmat[static_cast<std::size_t>(b_i)]);
        VectorXd v = VectorXd::Zero(w.m);
        for (int k = 0; k < w.m; ++k) {
            double sum = 0.0;
            for (const auto& [b_i, mat] : w.A[static_cast<std::size_t>(k)].blocks)
                sum += (mat.cwiseProduct(WCW[static_cast<std::size_t>(b_i)])).sum();
            v(k) = sum;
        }
        double e_cc = 0.0;
        for (int b_i = 0; b_i < w.nb; ++b_i)
            e_cc += (Cb[static_cast<std::size_t>(b_i)]
                         .cwiseProduct(WCW[static_cast<std::size_t>(b_i)]))
                        .sum();

        // Solve M dy + F df = h1 + u*dtau, F' dy = c_free*dtau - rf_in via the
        // null-space split, for the pair of right-hand sides.
        auto solve_base = [&](const VectorXd& h1, const VectorXd& h2, VectorXd& dy, VectorXd& df) {
            if (use_qr) {
                const VectorXd a = Rf.transpose().triangularView<Eigen::Lower>().solve(h2);
                dy = Q1 * a;
                if (w.m > w.nf) {
                    const VectorXd rhs_b = Q2.transpose() * (h1 - MQ1 * a);
                    VectorXd bvec = Mllt.solve(rhs_b);
                    bvec += Mllt.solve(rhs_b - Q2.transpose() * (MQ2 * bvec));
                    dy += Q2 * bvec;
                }
                df = Rf.triangularView<Eigen::Upper>().solve(Q1.transpose() * (h1 - M * dy));
            } else {
                df = VectorXd::Zero(1);
                dy = Mllt.solve(h1);
                dy += Mllt.solve(h1 - M * dy);
            }
        };

        VectorXd dy1, df1;  // response to the tau column
        solve_base(VectorXd(w.b + v), w.nf > 0 ? VectorXd(w.c_free) : VectorXd::Zero(1), dy1, df1);

        auto solve_direction = [&](const std::vector<MatrixXd>& Rc, double rc_tau, VectorXd& dy,
                                   VectorXd& df, std::vector<MatrixXd>& dS,
                                   std::vector<MatrixXd>& dX, double& dtau, double& dkappa) {
            VectorXd h1 = rp;
            double c_dot_rc = 0.0;
            for (int k = 0; k < w.m; ++k) {
                double sum = 0.0;
                std::size_t bi = 0;
                for (const auto& [b_i, mat] : w.A[static_cast<std::size_t>(k)].blocks) {
                    (void)bi;
                    sum += (mat.cwiseProduct(
                               (Rc[static_cast<std::size_t>(b_i)] +
                                Wmat[static_cast<std::size_t>(b_i)] * Rd[static_cast<std::size_t>(b_i)] *
                                    Wmat[static_cast<std::size_t>(b_i)])))
                               .sum();
                }
                h1(k) -= sum;
            }
            for (int b_i = 0; b_i < w.nb; ++b_i)
                c_dot_rc += (Cb[static_cast<std::size_t>(b_i)]
                                 .cwiseProduct(Rc[static_cast<std::size_t>(b_i)] +
                                               Wmat[static_cast<std::size_t>(b_i)] *
                                                   Rd[static_cast<std::size_t>(b_i)] *
                                                   Wmat[static_cast<std::size_t>(b_i)]))
                                .sum();

            VectorXd dy0, df0;
            solve_base(h1, w.nf > 0 ? VectorXd(-rf) : VectorXd::Zero(1), dy0, df0);

            // Scalar equation for dtau from the gap row.
            const double denom = w.b.dot(dy1) - (w.nf > 0 ? w.c_free.dot(df1) : 0.0) - v.dot(dy1) +
                                 e_cc + kappa / tau;
            const double numer = rg - w.b.dot(dy0) + (w.nf > 0 ? w.c_free.dot(df0) : 0.0) +
                                 c_dot_rc + v.dot(dy0) + rc_tau / tau;
            dtau = std::abs(denom) > 1e-300 ? numer / denom : 0.0;
            dy = dy0 + dtau * dy1;
            df = df0 + dtau * df1;
            dkappa = (rc_tau - kappa * dtau) / tau;

            const auto atdy = w.mat_At_y(dy);
            dS.clear();
            dX.clear();
            for (int b_i = 0; b_i < w.nb; ++b_i) {
                dS.push_back(dtau * Cb[static_cast<std::size_t>(b_i)] -
                             atdy[static_cast<std::size_t>(b_i)] - Rd[static_cast<std::size_t>(b_i)]);
                MatrixXd dx = Rc[static_cast<std::size_t>(b_i)] -
                              Wmat[static_cast<std::size_t>(b_i)] * dS.back() *
                                  Wmat[static_cast<std::size_t>(b_i)];
                dX.push_back(0.5 * (dx + dx.transpose()));
            }
        };

        auto max_alpha = [&](const std::vector<MatrixXd>& dX, const std::vector<MatrixXd>& dS,
                             double dtau, double dkappa) {
            double alpha = 1.0;
            for (int b_i = 0; b_i < w.nb; ++b_i) {
                alpha = std::min(alpha, max_step(Lx[static_cast<std::size_t>(b_i)],
                                                 dX[static_cast<std::size_t>(b_i)]));
                alpha = std::min(alpha, max_step(Ls[static_cast<std::size_t>(b_i)],
                                                 dS[static_cast<std::size_t>(b_i)]));
            }
            if (dtau < 0.0) alpha = std::min(alpha, -tau / dtau);
            if (dkappa < 0.0) alpha = std::min(alpha, -kappa / dkappa);
            return alpha;
        };

        // Predictor.
        std::vector<MatrixXd> Rc;
        for (int b_i = 0; b_i < w.nb; ++b_i) Rc.push_back(-X[static_cast<std::size_t>(b_i)]);
        VectorXd dy_aff, df_aff;
        std::vector<MatrixXd> dS_aff, dX_aff;
        double dtau_aff = 0.0, dkappa_aff = 0.0;
        solve_direction(Rc, -tau * kappa, dy_aff, df_aff, dS_aff, dX_aff, dtau_aff, dkappa_aff);
        const double alpha_aff = max_alpha(dX_aff, dS_aff, dtau_aff, dkappa_aff);

        double mu_aff = (tau + alpha_aff * dtau_aff) * (kappa + alpha_aff * dkappa_aff);
        for (int b_i = 0; b_i < w.nb; ++b_i)
            mu_aff += ((X[static_cast<std::size_t>(b_i)] + alpha_aff * dX_aff[static_cast<std::size_t>(b_i)])
                           .cwiseProduct(S[static_cast<std::size_t>(b_i)] +
                                         alpha_aff * dS_aff[static_cast<std::size_t>(b_i)]))
                          .sum();
        mu_aff = std::max(mu_aff / (w.n_total + 1), 0.0);
        double sigma = std::pow(mu_aff / mu, 3.0);
        sigma = std::clamp(sigma, 1e-8, 0.9999);

        // Corrector with the Mehrotra second-order term.
        for (int b_i = 0; b_i < w.nb; ++b_i) {
            const MatrixXd corr = dX_aff[static_cast<std::size_t>(b_i)] *
                                  dS_aff[static_cast<std::size_t>(b_i)] *
                                  Sinv[static_cast<std::size_t>(b_i)];
            Rc[static_cast<std::size_t>(b_i)] =
                sigma * mu * Sinv[static_cast<std::size_t>(b_i)] - X[static_cast<std::size_t>(b_i)] -
                0.5 * (corr + corr.transpose());
        }
        const double rc_tau = sigma * mu - tau * kappa - dtau_aff * dkappa_aff;
        VectorXd dy, df;
        std::vector<MatrixXd> dS, dX;
        double dtau = 0.0, dkappa = 0.0;
        solve_direction(Rc, rc_tau, dy, df, dS, dX, dtau, dkappa);

        bool finite = dy.allFinite() && df.allFinite() && std::isfinite(dtau) && std::isfinite(dkappa);
        for (const auto& blockmat : dX) finite = finite && blockmat.allFinite();
        for (const auto& blockmat : dS) finite = finite && blockmat.allFinite();
        if (!finite) return finish(SdpStatus::NumericalFailure);

        double alpha = max_alpha(dX, dS, dtau, dkappa);
        if (alpha < 0.2 * alpha_aff) {
            // The second-order term backfired; retry with pure centering.
            for (int b_i = 0; b_i < w.nb; ++b_i)
                Rc[static_cast<std::size_t>(b_i)] = sigma * mu * Sinv[static_cast<std::size_t>(b_i)] -
                                                    X[static_cast<std::size_t>(b_i)];
            solve_direction(Rc, sigma * mu - tau * kappa, dy, df, dS, dX, dtau, dkappa);
            alpha = max_alpha(dX, dS, dtau, dkappa);
        }
        const double step_frac = std::clamp(0.9 + 0.09 * alpha, 0.9, 0.99);
        alpha = std::min(1.0, step_frac * alpha);

        for (int b_i = 0; b_i < w.nb; ++b_i) {
            X[static_cast<std::size_t>(b_i)] += alpha * dX[static_cast<std::size_t>(b_i)];
            S[static_cast<std::size_t>(b_i)] += alpha * dS[static_cast<std::size_t>(b_i)];
        }
        y += alpha * dy;
        if (w.nf > 0) f += alpha * df;
        tau += alpha * dtau;
        kappa += alpha * dkappa;
    }

    if (auto status = try_certificates()) return finish(*status);
    return finish(SdpStatus::MaxIter);
}


Residuals residuals(const SdpProblem& problem, const SdpSolution& solution) {
    Residuals out;
    const auto& dims = problem.block_dims;
    Workspace w;
    w.dims = dims;
    w.nb = static_cast<int>(dims.size());
    w.m = problem.num_constraints();
    w.nf = problem.num_free;
    for (const auto& c : problem.constraints) w.A.push_back(BlockMats::densify(c.entries, dims));
    w.C = BlockMats::densify(problem.objective_entries, dims);
    w.b = Eigen::Map<const VectorXd>(problem.rhs.data(), static_cast<Eigen::Index>(problem.rhs.size()));
    w.F = MatrixXd::Zero(w.m, std::max(1, w.nf));
    for (int k = 0; k < w.m; ++k)
        for (const auto& [idx, v] : problem.constraints[static_cast<std::size_t>(k)].free_coeffs)
            w.F(k, idx) += v;
    w.c_free = VectorXd::Zero(std::max(1, w.nf));
    for (const auto& [idx, v] : problem.objective_free) w.c_free(idx) += v;

    VectorXd f = VectorXd::Zero(std::max(1, w.nf));
    if (solution.free_values.size() > 0) f.head(solution.free_values.size()) = solution.free_values;

    if (w.m > 0) out.primal = w.primal_residual(solution.X, f).cwiseAbs().maxCoeff();
    const auto aty = w.mat_At_y(solution.y);
    double dual = 0.0;
    for (int b_i = 0; b_i < w.nb; ++b_i) {
        MatrixXd cb = MatrixXd::Zero(dims[static_cast<std::size_t>(b_i)],
                                     dims[static_cast<std::size_t>(b_i)]);
        for (const auto& [bb, mat] : w.C.blocks)
            if (bb == b_i) cb += mat;
        const MatrixXd rd = cb - aty[static_cast<std::size_t>(b_i)] -
                            solution.S[static_cast<std::size_t>(b_i)];
        if (rd.size() > 0) dual = std::max(dual, rd.cwiseAbs().maxCoeff());
    }
    if (w.nf > 0) dual = std::max(dual, (w.c_free - w.F.transpose() * solution.y).cwiseAbs().maxCoeff());
    out.dual = dual;
    const double pobj = w.C.dot(solution.X) + (w.nf > 0 ? w.c_free.dot(f) : 0.0);
    out.gap = std::abs(pobj - w.b.dot(solution.y));
    return out;
}

}  // namespace hjbsos::sdp
