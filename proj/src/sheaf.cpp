// SPDX-License-Identifier: Apache-2.0
#include "eics/sheaf.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "eics/errors.hpp"
#include "eics/rng.hpp"

namespace eics {

namespace {
constexpr double kKernelFloor = 1e-10;
constexpr Eigen::Index kDenseGuard = 4096;
} // namespace

Cochain1 coboundary_apply(const Circuit& circuit, const Cochain0& s,
                          int* seeded_passes) {
    // Pre-check shapes so errors can name the edge.
    std::unordered_map<std::string, int> dims;
    for (const auto& n : circuit.nodes) dims[n.id] = n.dim;
    for (const auto& e : circuit.edges) {
        if (!dims.count(e.src) || !dims.count(e.dst)) {
            throw InputError("coboundary: edge " + e.src + "->" + e.dst +
                             " references an unknown node");
        }
        if (e.map.cols() != dims[e.src] || e.map.rows() != dims[e.dst]) {
            throw InputError("coboundary: edge " + e.src + "->" + e.dst +
                             " map shape does not match node dims");
        }
    }
    for (const auto& n : circuit.nodes) {
        auto it = s.find(n.id);
        if (it == s.end() || it->second.size() != n.dim) {
            throw InputError("coboundary: cochain does not match node '" + n.id + "'");
        }
    }

    // Group out-edges per source node so each node's vector is seeded once.
    std::unordered_map<std::string, std::vector<int>> out_edges;
    for (int ei = 0; ei < static_cast<int>(circuit.edges.size()); ++ei) {
        out_edges[circuit.edges[ei].src].push_back(ei);
    }

    Cochain1 result(circuit.edges.size());
    int passes = 0;
    for (const auto& n : circuit.nodes) {
        auto it = out_edges.find(n.id);
        if (it == out_edges.end()) continue;
        ++passes;
        const Eigen::VectorXd& seed = s.at(n.id);
        for (int ei : it->second) {
            const auto& e = circuit.edges[ei];
            result[ei] = e.map.apply(seed) - s.at(e.dst);
        }
    }
    if (seeded_passes) *seeded_passes = passes;
    return result;
}

SheafReport sheaf_inconsistency(const Circuit& circuit, const ActivationState& a,
                                double epsilon) {
    if (!(epsilon > 0.0)) throw InputError("sheaf_inconsistency: epsilon must be > 0");
    SheafReport report;
    report.epsilon = epsilon;
    if (circuit.edges.empty()) {
        report.degenerate_no_edges = true;
        report.c_sh = 0.0;
        return report;
    }
    Cochain1 residuals = coboundary_apply(circuit, a, &report.seeded_passes);
    report.edge_residual_norms.reserve(residuals.size());
    double num = 0.0, den = 0.0;
    for (size_t ei = 0; ei < residuals.size(); ++ei) {
        const double r2 = residuals[ei].squaredNorm();
        report.edge_residual_norms.push_back(std::sqrt(r2));
        num += r2;
        const auto& e = circuit.edges[ei];
        den += a.at(e.src).squaredNorm() + a.at(e.dst).squaredNorm();
    }
    report.numerator_energy = num;
    report.denominator_energy = den;
    report.c_sh = std::sqrt(num) / (epsilon + std::sqrt(den));
    return report;
}

Eigen::MatrixXd coboundary_matrix(const Circuit& circuit) {
    auto off = state_offsets(circuit);
    std::unordered_map<std::string, int> dims;
    for (const auto& n : circuit.nodes) dims[n.id] = n.dim;
    Eigen::Index rows = 0;
    for (const auto& e : circuit.edges) rows += dims.at(e.dst);
    Eigen::MatrixXd d0 = Eigen::MatrixXd::Zero(rows, total_dim(circuit));
    Eigen::Index at = 0;
    for (const auto& e : circuit.edges) {
        const int du = dims.at(e.src);
        const int dv = dims.at(e.dst);
        d0.block(at, off.at(e.src), dv, du) = e.map.to_dense();
        d0.block(at, off.at(e.dst), dv, dv) = -Eigen::MatrixXd::Identity(dv, dv);
        at += dv;
    }
    return d0;
}

std::pair<Cochain0, double> least_squares_section(const Circuit& circuit,
                                                  const ActivationState& a) {
    Eigen::VectorXd x = stack_state(circuit, a);
    if (circuit.edges.empty()) {
        return {a, 0.0};
    }
    Eigen::MatrixXd d0 = coboundary_matrix(circuit);
    Eigen::VectorXd b = d0 * x;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(d0);
    Eigen::VectorXd perp = cod.solve(b); // min-norm least-squares: pinv(d0) b
    Eigen::VectorXd s_hat = x - perp;
    return {unstack_state(circuit, s_hat), b.squaredNorm()};
}

std::vector<double> edge_weights(const Circuit& circuit, const EdgeWeighting& weighting) {
    const size_t m = circuit.edges.size();
    std::vector<double> w(m, 1.0);
    switch (weighting.scheme) {
        case EdgeWeighting::Scheme::kUnit:
            break;
        case EdgeWeighting::Scheme::kInverseOperatorNorm:
            for (size_t i = 0; i < m; ++i) {
                const double s = operator_norm_estimate(circuit.edges[i].map);
                w[i] = 1.0 / std::max(s * s, 1e-12);
            }
            break;
        case EdgeWeighting::Scheme::kExplicit:
            if (weighting.explicit_weights.size() != m) {
                throw InputError("edge_weights: explicit weights must cover every edge");
            }
            for (size_t i = 0; i < m; ++i) {
                const double wi = weighting.explicit_weights[i];
                if (!(wi > 0.0) || !std::isfinite(wi)) {
                    throw InputError("edge_weights: weights must be positive and finite");
                }
                w[i] = wi;
            }
            break;
    }
    return w;
}

Eigen::MatrixXd sheaf_laplacian(const Circuit& circuit, const EdgeWeighting& weighting) {
    if (total_dim(circuit) > kDenseGuard) {
        throw InputError(
            "sheaf_laplacian: total state dimension exceeds the dense guard (4096); "
            "use the operator form (spectral_gap_operator over coboundary applies)");
    }
    Eigen::MatrixXd d0 = coboundary_matrix(circuit);
    std::vector<double> w = edge_weights(circuit, weighting);
    std::unordered_map<std::string, int> dims;
    for (const auto& n : circuit.nodes) dims[n.id] = n.dim;
    // Scale edge block rows by sqrt(w_e); then L = (W^1/2 d0)^T (W^1/2 d0).
    Eigen::Index at = 0;
    for (size_t ei = 0; ei < circuit.edges.size(); ++ei) {
        const int dv = dims.at(circuit.edges[ei].dst);
        d0.middleRows(at, dv) *= std::sqrt(w[ei]);
        at += dv;
    }
    return d0.transpose() * d0;
}

double spectral_gap(const Eigen::MatrixXd& L, double beta) {
    if (L.rows() != L.cols()) throw InputError("spectral_gap: matrix is not square");
    if (L.size() == 0) return beta;
    const double scale = std::max(L.cwiseAbs().maxCoeff(), 1e-300);
    const double asym = (L - L.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-8 * scale) {
        throw NumericError("spectral_gap: input is not symmetric (relative asymmetry " +
                           std::to_string(asym / scale) + ")");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
        0.5 * (L + L.transpose()), Eigen::EigenvaluesOnly);
    Eigen::VectorXd evs = solver.eigenvalues(); // ascending
    for (Eigen::Index i = 0; i < evs.size(); ++i) {
        if (std::abs(evs[i]) <= kKernelFloor) evs[i] = 0.0;
    }
    const double lam2 = evs.size() >= 2 ? evs[1] : evs[0];
    return lam2 + beta;
}

namespace {

struct LanczosResult {
    double min_ritz = 0.0;
    double max_ritz = 0.0;
    Eigen::VectorXd min_vec; // Ritz vector for min_ritz
};

LanczosResult lanczos_extreme(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply_l,
    Eigen::Index n, std::uint64_t seed, int steps) {
    Rng rng(seed, 41);
    Eigen::VectorXd q = Eigen::VectorXd::NullaryExpr(n, [&](Eigen::Index) { return rng.normal(); });
    q.normalize();

    const int k = static_cast<int>(std::min<Eigen::Index>(steps, n));
    Eigen::MatrixXd basis(n, k);
    std::vector<double> alpha, beta;
    Eigen::VectorXd q_prev = Eigen::VectorXd::Zero(n);
    int used = 0;
    for (int j = 0; j < k; ++j) {
        basis.col(j) = q;
        ++used;
        Eigen::VectorXd w = apply_l(q);
        const double a = q.dot(w);
        alpha.push_back(a);
        w -= a * q;
        if (j > 0) w -= beta.back() * q_prev;
        // Full reorthogonalization keeps Ritz values clean at desk scale.
        for (int i = 0; i <= j; ++i) w -= basis.col(i).dot(w) * basis.col(i);
        const double b = w.norm();
        if (b < 1e-12) break;
        beta.push_back(b);
        q_prev = basis.col(j);
        q = w / b;
    }
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(used, used);
    for (int i = 0; i < used; ++i) {
        t(i, i) = alpha[i];
        if (i + 1 < used) {
            t(i, i + 1) = beta[i];
            t(i + 1, i) = beta[i];
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    LanczosResult out;
    out.min_ritz = es.eigenvalues()[0];
    out.max_ritz = es.eigenvalues()[used - 1];
    out.min_vec = basis.leftCols(used) * es.eigenvectors().col(0);
    out.min_vec.normalize();
    return out;
}

} // namespace

double spectral_gap_operator(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply_l,
    Eigen::Index dim, double beta, std::uint64_t seed, int max_steps) {
    if (dim <= 0) return beta;
    if (dim == 1) {
        Eigen::VectorXd e = Eigen::VectorXd::Ones(1);
        double v = apply_l(e)[0];
        if (std::abs(v) <= kKernelFloor) v = 0.0;
        return v + beta;
    }
    LanczosResult first = lanczos_extreme(apply_l, dim, seed, max_steps);
    const double shift = (first.max_ritz - first.min_ritz) + 1.0;
    Eigen::VectorXd v1 = first.min_vec;
    auto deflated = [&](const Eigen::VectorXd& x) {
        return (apply_l(x) + shift * v1.dot(x) * v1).eval();
    };
    LanczosResult second = lanczos_extreme(deflated, dim, seed + 1, max_steps);
    // Deflation removes one copy of the smallest eigenvalue, so the rerun's
    // minimum is the second smallest (with multiplicity).
    double lam2 = std::max(first.min_ritz, second.min_ritz);
    if (std::abs(lam2) <= kKernelFloor) lam2 = 0.0;
    return lam2 + beta;
}

StabilityReport stability_bound_check(const Circuit& circuit, const ActivationState& a,
                                      const LinearMap& coupling,
                                      const Eigen::VectorXd& eta,
                                      std::optional<double> gamma,
                                      const EdgeWeighting& weighting, double beta) {
    if (coupling.rows() != total_dim(circuit)) {
        throw InputError("stability_bound_check: coupling must land in the stacked "
                         "activation space");
    }
    StabilityReport report;
    report.lambda2 = spectral_gap(sheaf_laplacian(circuit, weighting), beta);
    if (report.lambda2 <= 0.0) {
        throw NumericError("stability_bound_check: spectral gap is zero; "
                           "regularize with beta > 0");
    }
    report.gamma = gamma ? *gamma : operator_norm_estimate(coupling);
    report.eta_norm = eta.norm();

    auto [s_base, e_base] = least_squares_section(circuit, a);
    (void)e_base;
    Eigen::VectorXd perturbed = stack_state(circuit, a) + coupling.apply(eta);
    auto [s_pert, e_pert] = least_squares_section(circuit, unstack_state(circuit, perturbed));
    (void)e_pert;
    report.lhs = (stack_state(circuit, s_pert) - stack_state(circuit, s_base)).norm();
    report.rhs = report.gamma / report.lambda2 * report.eta_norm;
    report.ratio = report.rhs == 0.0 ? (report.lhs == 0.0 ? 0.0 : std::numeric_limits<double>::infinity())
                                     : report.lhs / report.rhs;
    return report;
}

} // namespace eics
