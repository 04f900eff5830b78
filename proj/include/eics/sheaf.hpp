// SPDX-License-Identifier: Apache-2.0
//
// Cellular sheaf machinery on the circuit graph: coboundary, normalized
// inconsistency energy, least-squares consistent section, weighted Hodge
// Laplacian, and its spectral gap.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "eics/circuit.hpp"

namespace eics {

/// Node assignment (same shape contract as ActivationState).
using Cochain0 = ActivationState;

/// One vector per oriented edge, length dim(dst), in circuit edge order.
using Cochain1 = std::vector<Eigen::VectorXd>;

struct SheafReport {
    std::vector<double> edge_residual_norms; // ||rho_e a_u - a_v||, edge order
    double numerator_energy = 0.0;           // sum of squared residuals
    double denominator_energy = 0.0;         // sum over edges of ||a_u||^2 + ||a_v||^2
    double c_sh = 0.0;
    double epsilon = 0.0;
    std::optional<double> lambda2;
    std::optional<double> beta;
    bool degenerate_no_edges = false;
    int seeded_passes = 0; // node-seeded evaluation count (see coboundary_apply)
};

struct EdgeWeighting {
    enum class Scheme { kUnit, kInverseOperatorNorm, kExplicit };
    Scheme scheme = Scheme::kUnit;
    std::vector<double> explicit_weights; // one per edge when kExplicit
};

/// (delta^0 s)_e = rho_e s_u - s_v for every oriented edge, evaluated
/// node-seeded: each source node's vector is seeded once and all of its
/// outgoing edge products are computed in that single pass (one JVP per
/// source node in a matrix-free runtime). `seeded_passes`, when given,
/// receives the number of such passes.
Cochain1 coboundary_apply(const Circuit& circuit, const Cochain0& s,
                          int* seeded_passes = nullptr);

/// Normalized inconsistency energy:
///   C_sh = sqrt(sum_e ||rho_e a_u - a_v||^2)
///        / (eps + sqrt(sum_e ||a_u||^2 + ||a_v||^2))
/// Nodes are counted once per incident edge in the denominator.
SheafReport sheaf_inconsistency(const Circuit& circuit, const ActivationState& a,
                                double epsilon);

/// Stacked dense coboundary operator (rows: edge blocks in edge order,
/// cols: node blocks in declaration order).
Eigen::MatrixXd coboundary_matrix(const Circuit& circuit);

/// Orthogonal projection of `a` onto the space of global sections
/// (ker delta^0): s_hat = a - pinv(delta^0) (delta^0 a). Second element is
/// the removed energy ||delta^0 a||^2.
std::pair<Cochain0, double> least_squares_section(const Circuit& circuit,
                                                  const ActivationState& a);

/// Per-edge weights for the chosen scheme. Inverse-operator-norm uses
/// w_e = 1 / max(sigma_max(rho_e)^2, 1e-12).
std::vector<double> edge_weights(const Circuit& circuit, const EdgeWeighting& weighting);

/// L = delta^0T W delta^0 with W = diag(w_e) replicated per edge coordinate.
/// Dense assembly is guarded to total dimension <= 4096; beyond that build
/// the operator form yourself from coboundary pieces.
Eigen::MatrixXd sheaf_laplacian(const Circuit& circuit, const EdgeWeighting& weighting);

/// Second-smallest eigenvalue of L + beta*I (with multiplicity; eigenvalues
/// within 1e-10 of zero count as exact zeros). A 1x1 matrix returns its only
/// eigenvalue. Throws NumericError if L is not symmetric (relative asymmetry
/// above 1e-8).
double spectral_gap(const Eigen::MatrixXd& L, double beta = 0.0);

/// Matrix-free variant: Lanczos (full reorthogonalization) for the smallest
/// eigenpair, then one deflated rerun for the second. Deterministic given
/// the seed.
double spectral_gap_operator(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply_l,
    Eigen::Index dim, double beta = 0.0, std::uint64_t seed = 7,
    int max_steps = 200);

struct StabilityReport {
    double lhs = 0.0;     // ||s_hat(a + C eta) - s_hat(a)||
    double rhs = 0.0;     // (gamma / lambda2) * ||eta||
    double ratio = 0.0;   // lhs / rhs, 0 when both vanish
    double lambda2 = 0.0;
    double gamma = 0.0;
    double eta_norm = 0.0;
};

/// Empirical check of the section-stability bound. `coupling` carries the
/// perturbation eta into the stacked activation space; gamma defaults to the
/// coupling's operator norm. Throws NumericError when the spectral gap is
/// zero and beta == 0 (regularize with beta > 0).
StabilityReport stability_bound_check(const Circuit& circuit, const ActivationState& a,
                                      const LinearMap& coupling,
                                      const Eigen::VectorXd& eta,
                                      std::optional<double> gamma = std::nullopt,
                                      const EdgeWeighting& weighting = {},
                                      double beta = 0.0);

} // namespace eics
