// SPDX-License-Identifier: Apache-2.0
//
// Linear maps attached to circuit edges: either an explicit dense matrix or
// a matrix-free (apply, apply-adjoint) callback pair with declared shape.
// The two forms are interchangeable for every operation in the library.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace eics {

class LinearMap {
public:
    using Index = Eigen::Index;
    using ApplyFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

    LinearMap() = default;

    static LinearMap Dense(Eigen::MatrixXd m);
    static LinearMap Operator(Index rows, Index cols, ApplyFn apply,
                              ApplyFn apply_adjoint);
    static LinearMap Zero(Index rows, Index cols);
    static LinearMap Identity(Index n);

    Index rows() const { return impl_ ? impl_->rows : 0; }
    Index cols() const { return impl_ ? impl_->cols : 0; }
    bool valid() const { return impl_ != nullptr; }
    bool is_dense() const { return impl_ && impl_->is_dense; }

    /// y = A x. Throws InputError on a shape mismatch.
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
    /// y = A^T x.
    Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& x) const;

    /// Dense coefficient access; throws if this map is operator-form.
    const Eigen::MatrixXd& matrix() const;
    /// Materializes operator-form maps column by column.
    Eigen::MatrixXd to_dense() const;

    /// outer ∘ inner (matrix product outer * inner).
    static LinearMap Compose(const LinearMap& outer, const LinearMap& inner);
    static LinearMap Sum(const LinearMap& a, const LinearMap& b);
    /// [A | B | ...]: acts on vertically stacked inputs.
    static LinearMap HConcat(const std::vector<LinearMap>& blocks);

private:
    struct Impl {
        Index rows = 0;
        Index cols = 0;
        bool is_dense = false;
        Eigen::MatrixXd mat;
        ApplyFn fwd;
        ApplyFn adj;
    };
    explicit LinearMap(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<const Impl> impl_;
};

/// Largest singular value by seeded power iteration on A^T A
/// (50 iterations or relative change < 1e-10).
double operator_norm_estimate(const LinearMap& map, int max_iters = 50,
                              double tol = 1e-10);

/// Max relative defect of <Ax, y> = <x, A^T y> over random probe pairs.
double adjoint_mismatch(const LinearMap& map, std::uint64_t seed = 0,
                        int probes = 8);

} // namespace eics
