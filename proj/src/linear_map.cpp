// SPDX-License-Identifier: Apache-2.0
#include "eics/linear_map.hpp"

#include <cmath>
#include <utility>

#include "eics/errors.hpp"
#include "eics/rng.hpp"

namespace eics {

LinearMap LinearMap::Dense(Eigen::MatrixXd m) {
    auto impl = std::make_shared<Impl>();
    impl->rows = m.rows();
    impl->cols = m.cols();
    impl->is_dense = true;
    impl->mat = std::move(m);
    return LinearMap(std::move(impl));
}

LinearMap LinearMap::Operator(Index rows, Index cols, ApplyFn apply,
                              ApplyFn apply_adjoint) {
    if (rows < 0 || cols < 0 || !apply || !apply_adjoint) {
        throw InputError("LinearMap::Operator: bad shape or missing callback");
    }
    auto impl = std::make_shared<Impl>();
    impl->rows = rows;
    impl->cols = cols;
    impl->is_dense = false;
    impl->fwd = std::move(apply);
    impl->adj = std::move(apply_adjoint);
    return LinearMap(std::move(impl));
}

LinearMap LinearMap::Zero(Index rows, Index cols) {
    return Dense(Eigen::MatrixXd::Zero(rows, cols));
}

LinearMap LinearMap::Identity(Index n) {
    return Dense(Eigen::MatrixXd::Identity(n, n));
}

Eigen::VectorXd LinearMap::apply(const Eigen::VectorXd& x) const {
    if (!impl_) throw InputError("LinearMap::apply: empty map");
    if (x.size() != impl_->cols) {
        throw InputError("LinearMap::apply: expected input of length " +
                         std::to_string(impl_->cols) + ", got " +
                         std::to_string(x.size()));
    }
    if (impl_->is_dense) return impl_->mat * x;
    Eigen::VectorXd y = impl_->fwd(x);
    if (y.size() != impl_->rows) {
        throw NumericError("LinearMap operator callback returned length " +
                           std::to_string(y.size()) + ", declared " +
                           std::to_string(impl_->rows));
    }
    return y;
}

Eigen::VectorXd LinearMap::apply_adjoint(const Eigen::VectorXd& x) const {
    if (!impl_) throw InputError("LinearMap::apply_adjoint: empty map");
    if (x.size() != impl_->rows) {
        throw InputError("LinearMap::apply_adjoint: expected input of length " +
                         std::to_string(impl_->rows) + ", got " +
                         std::to_string(x.size()));
    }
    if (impl_->is_dense) return impl_->mat.transpose() * x;
    Eigen::VectorXd y = impl_->adj(x);
    if (y.size() != impl_->cols) {
        throw NumericError("LinearMap adjoint callback returned length " +
                           std::to_string(y.size()) + ", declared " +
                           std::to_string(impl_->cols));
    }
    return y;
}

const Eigen::MatrixXd& LinearMap::matrix() const {
    if (!impl_ || !impl_->is_dense) {
        throw InputError("LinearMap::matrix: map is not in dense form");
    }
    return impl_->mat;
}

Eigen::MatrixXd LinearMap::to_dense() const {
    if (!impl_) return Eigen::MatrixXd(0, 0);
    if (impl_->is_dense) return impl_->mat;
    Eigen::MatrixXd m(impl_->rows, impl_->cols);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(impl_->cols);
    for (Index j = 0; j < impl_->cols; ++j) {
        e[j] = 1.0;
        m.col(j) = apply(e);
        e[j] = 0.0;
    }
    return m;
}

LinearMap LinearMap::Compose(const LinearMap& outer, const LinearMap& inner) {
    if (outer.cols() != inner.rows()) {
        throw InputError("LinearMap::Compose: shape mismatch " +
                         std::to_string(outer.cols()) + " vs " +
                         std::to_string(inner.rows()));
    }
    if (outer.is_dense() && inner.is_dense()) {
        return Dense(outer.matrix() * inner.matrix());
    }
    return Operator(
        outer.rows(), inner.cols(),
        [outer, inner](const Eigen::VectorXd& x) {
            return outer.apply(inner.apply(x));
        },
        [outer, inner](const Eigen::VectorXd& y) {
            return inner.apply_adjoint(outer.apply_adjoint(y));
        });
}

LinearMap LinearMap::Sum(const LinearMap& a, const LinearMap& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw InputError("LinearMap::Sum: shape mismatch");
    }
    if (a.is_dense() && b.is_dense()) {
        return Dense(a.matrix() + b.matrix());
    }
    return Operator(
        a.rows(), a.cols(),
        [a, b](const Eigen::VectorXd& x) {
            return (a.apply(x) + b.apply(x)).eval();
        },
        [a, b](const Eigen::VectorXd& y) {
            return (a.apply_adjoint(y) + b.apply_adjoint(y)).eval();
        });
}

LinearMap LinearMap::HConcat(const std::vector<LinearMap>& blocks) {
    if (blocks.empty()) throw InputError("LinearMap::HConcat: no blocks");
    Index rows = blocks.front().rows();
    Index cols = 0;
    bool all_dense = true;
    for (const auto& b : blocks) {
        if (b.rows() != rows) {
            throw InputError("LinearMap::HConcat: inconsistent row counts");
        }
        cols += b.cols();
        all_dense = all_dense && b.is_dense();
    }
    if (all_dense) {
        Eigen::MatrixXd m(rows, cols);
        Index at = 0;
        for (const auto& b : blocks) {
            m.middleCols(at, b.cols()) = b.matrix();
            at += b.cols();
        }
        return Dense(std::move(m));
    }
    return Operator(
        rows, cols,
        [blocks, rows](const Eigen::VectorXd& x) {
            Eigen::VectorXd y = Eigen::VectorXd::Zero(rows);
            Index at = 0;
            for (const auto& b : blocks) {
                y += b.apply(x.segment(at, b.cols()));
                at += b.cols();
            }
            return y;
        },
        [blocks, cols](const Eigen::VectorXd& y) {
            Eigen::VectorXd x(cols);
            Index at = 0;
            for (const auto& b : blocks) {
                x.segment(at, b.cols()) = b.apply_adjoint(y);
                at += b.cols();
            }
            return x;
        });
}

double operator_norm_estimate(const LinearMap& map, int max_iters, double tol) {
    const auto n = map.cols();
    if (n == 0 || map.rows() == 0) return 0.0;
    Rng rng(0x50574954ULL, 17); // fixed probe seed keeps the estimate deterministic
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
    double vn = v.norm();
    if (vn == 0.0) return 0.0;
    v /= vn;
    double est = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        Eigen::VectorXd av = map.apply(v);
        const double cur = av.norm();
        if (cur == 0.0) return 0.0;
        Eigen::VectorXd w = map.apply_adjoint(av);
        const double wn = w.norm();
        if (wn == 0.0) return cur;
        v = w / wn;
        if (it > 0 && std::abs(cur - est) <= tol * std::max(cur, 1e-300)) {
            return cur;
        }
        est = cur;
    }
    return est;
}

double adjoint_mismatch(const LinearMap& map, std::uint64_t seed, int probes) {
    Rng rng(seed, 29);
    double worst = 0.0;
    for (int p = 0; p < probes; ++p) {
        Eigen::VectorXd x(map.cols()), y(map.rows());
        for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.normal();
        for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = rng.normal();
        const double lhs = map.apply(x).dot(y);
        const double rhs = x.dot(map.apply_adjoint(y));
        const double scale =
            std::max({std::abs(lhs), std::abs(rhs), 1e-30});
        worst = std::max(worst, std::abs(lhs - rhs) / scale);
    }
    return worst;
}

} // namespace eics
