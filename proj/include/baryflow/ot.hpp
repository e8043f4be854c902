#pragma once

#include "baryflow/measures.hpp"
#include "baryflow/network_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace baryflow {

/// Squared ground costs (p = 2), rows index the first measure.
template <class Scalar>
struct CostMatrix {
    Matrix<Scalar> values;

    Index rows() const { return values.rows(); }
    Index cols() const { return values.cols(); }
};

template <class Scalar>
struct TransportPlan {
    Matrix<Scalar> coupling;
    Vector<Scalar> row_marginal;
    Vector<Scalar> col_marginal;

    Scalar cost(const CostMatrix<Scalar>& c) const { return (coupling.array() * c.values.array()).sum(); }

    bool feasible(Scalar tol = Scalar(1e-8)) const
    {
        return coupling.minCoeff() >= 0 &&
               (coupling.rowwise().sum() - row_marginal).cwiseAbs().maxCoeff() <= tol &&
               (coupling.colwise().sum().transpose() - col_marginal).cwiseAbs().maxCoeff() <= tol;
    }
};

template <class Scalar>
struct OtSolution {
    TransportPlan<Scalar> plan;
    Scalar cost = 0;
    std::int64_t iterations = 0;
    bool converged = true;
    // Kantorovich potentials with f_i + g_j <= C_ij (exact solver only)
    Vector<Scalar> dual_a;
    Vector<Scalar> dual_b;
};

// ||x_i - y_j||^2 + beta ||l_i - l_j||^2; the label term needs labels on both sides.
template <class Scalar>
CostMatrix<Scalar> joint_cost(const ConstMatrixRef<Scalar>& x, const ConstMatrixRef<Scalar>& y,
                              const std::optional<Matrix<Scalar>>& labels_x = std::nullopt,
                              const std::optional<Matrix<Scalar>>& labels_y = std::nullopt, Scalar beta = 0)
{
    require(x.cols() == y.cols(), "joint_cost: feature dimensions differ (" + std::to_string(x.cols()) + " vs " +
                                      std::to_string(y.cols()) + ")");
    require(beta >= 0 && std::isfinite(beta), "joint_cost: beta must be finite and >= 0");
    require(labels_x.has_value() == labels_y.has_value(), "joint_cost: labels must be given for both sides or neither");

    auto sq_dist = [](const auto& a, const auto& b) {
        Matrix<Scalar> d(a.rows(), b.rows());
        for (Index j = 0; j < b.rows(); ++j)
            for (Index i = 0; i < a.rows(); ++i) d(i, j) = (a.row(i) - b.row(j)).squaredNorm();
        return d;
    };

    CostMatrix<Scalar> out{sq_dist(x, y)};
    if (labels_x && beta > 0) {
        require(labels_x->rows() == x.rows() && labels_y->rows() == y.rows(), "joint_cost: label row mismatch");
        require(labels_x->cols() == labels_y->cols(), "joint_cost: label dimensions differ");
        out.values += beta * sq_dist(*labels_x, *labels_y);
    }
    return out;
}

namespace detail {

template <class Scalar>
void check_marginals(const ConstVectorRef<Scalar>& a, const ConstVectorRef<Scalar>& b, const CostMatrix<Scalar>& c)
{
    require(c.rows() == a.size() && c.cols() == b.size(), "transport: cost shape does not match marginals");
    require(c.values.allFinite(), "transport: cost matrix has non-finite entries");
    require(a.allFinite() && b.allFinite(), "transport: non-finite marginals");
    require(a.minCoeff() >= 0 && b.minCoeff() >= 0, "transport: negative marginal mass");
    require(std::abs(a.sum() - b.sum()) <= Scalar(1e-8),
            "transport: infeasible marginals (masses differ by " + std::to_string(std::abs(a.sum() - b.sum())) + ")");
}

} // namespace detail

/// Exact optimal plan via network simplex.
template <class Scalar>
OtSolution<Scalar> solve_exact(const ConstVectorRef<Scalar>& a, const ConstVectorRef<Scalar>& b,
                               const CostMatrix<Scalar>& c)
{
    detail::check_marginals<Scalar>(a, b, c);
    detail::TransportSimplex<Scalar> simplex(a, b, c.values);
    const std::int64_t max_pivots = 50 * (a.size() + b.size()) * (a.size() + b.size()) + 10000;
    OtSolution<Scalar> out;
    out.iterations = simplex.run(max_pivots);
    if (simplex.artificial_flow() > Scalar(1e-8)) throw NumericalError("network simplex: infeasible problem");
    out.plan = {simplex.plan(), a, b};
    out.cost = out.plan.cost(c);
    out.dual_a = -simplex.potentials().head(a.size());
    out.dual_b = simplex.potentials().segment(a.size(), b.size());
    return out;
}

namespace detail {

template <class Scalar>
Scalar marginal_violation(const Matrix<Scalar>& plan, const ConstVectorRef<Scalar>& a, const ConstVectorRef<Scalar>& b)
{
    return (plan.rowwise().sum() - a).cwiseAbs().sum() + (plan.colwise().sum().transpose() - b).cwiseAbs().sum();
}

template <class Scalar>
std::optional<OtSolution<Scalar>> sinkhorn_scaling(const ConstVectorRef<Scalar>& a, const ConstVectorRef<Scalar>& b,
                                                   const CostMatrix<Scalar>& c, Scalar eps, int max_iter, Scalar tol)
{
    if (c.values.maxCoeff() / eps > std::log(std::numeric_limits<Scalar>::max()) / 2) return std::nullopt;
    const Matrix<Scalar> kernel = (-c.values.array() / eps).exp().matrix();
    Vector<Scalar> u = Vector<Scalar>::Ones(a.size());
    Vector<Scalar> v = Vector<Scalar>::Ones(b.size());
    OtSolution<Scalar> out;
    out.converged = false;
    for (int it = 1; it <= max_iter; ++it) {
        u = a.array() / (kernel * v).array();
        v = b.array() / (kernel.transpose() * u).array();
        if (!u.allFinite() || !v.allFinite()) return std::nullopt;
        out.iterations = it;
        if (it % 10 == 0 || it == max_iter) {
            const Matrix<Scalar> plan = u.asDiagonal() * kernel * v.asDiagonal();
            if (marginal_violation<Scalar>(plan, a, b) <= tol) {
                out.converged = true;
                break;
            }
        }
    }
    Matrix<Scalar> plan = u.asDiagonal() * kernel * v.asDiagonal();
    if (!plan.allFinite()) return std::nullopt;
    out.plan = {std::move(plan), a, b};
    out.cost = out.plan.cost(c);
    return out;
}

template <class Scalar>
Scalar log_sum_exp(const Eigen::Ref<const Eigen::Array<Scalar, Eigen::Dynamic, 1>>& x)
{
    const Scalar m = x.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((x - m).exp().sum());
}

template <class Scalar>
OtSolution<Scalar> sinkhorn_log(const ConstVectorRef<Scalar>& a, const ConstVectorRef<Scalar>& b,
                                const CostMatrix<Scalar>& c, Scalar eps, int max_iter, Scalar tol)
{
    using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
    constexpr Scalar neg_inf = -std::numeric_limits<Scalar>::infinity();
    const Array log_a = a.array().log();
    const Array log_b = b.array().log();
    Array f = Array::Zero(a.size());
    Array g = Array::Zero(b.size());
    Scalar cur = eps;
    auto build_plan = [&] {
        Matrix<Scalar> plan(a.size(), b.size());
        for (Index i = 0; i < a.size(); ++i)
            for (Index j = 0; j < b.size(); ++j) plan(i, j) = std::exp((f(i) + g(j) - c.values(i, j)) / cur);
        return plan;
    };
    auto sweep = [&] {
        Array tmp;
        for (Index i = 0; i < a.size(); ++i) {
            if (log_a(i) == neg_inf) {
                f(i) = neg_inf;
                continue;
            }
            tmp = (g - c.values.row(i).transpose().array()) / cur;
            f(i) = cur * (log_a(i) - log_sum_exp<Scalar>(tmp));
        }
        for (Index j = 0; j < b.size(); ++j) {
            if (log_b(j) == neg_inf) {
                g(j) = neg_inf;
                continue;
            }
            tmp = (f - c.values.col(j).array()) / cur;
            g(j) = cur * (log_b(j) - log_sum_exp<Scalar>(tmp));
        }
    };

    // anneal epsilon from the cost scale, warm-starting the potentials
    std::vector<Scalar> schedule;
    for (Scalar e = c.values.cwiseAbs().maxCoeff(); e > eps; e *= Scalar(0.5)) schedule.push_back(e);
    OtSolution<Scalar> out;
    out.converged = false;
    out.iterations = 0;
    for (Scalar e : schedule) {
        cur = e;
        for (int it = 0; it < 20 && out.iterations < max_iter; ++it, ++out.iterations) sweep();
    }
    cur = eps;
    while (out.iterations < max_iter) {
        sweep();
        ++out.iterations;
        if (out.iterations % 10 == 0 || out.iterations == max_iter) {
            if (marginal_violation<Scalar>(build_plan(), a, b) <= tol) {
                out.converged = true;
                break;
            }
        }
    }
    out.plan = {build_plan(), a, b};
    out.cost = out.plan.cost(c);
    return out;
}

} // namespace detail

/// Entropic plan by Sinkhorn iterations; falls back to log-domain updates when
/// the scaling vectors under- or overflow. The returned cost excludes the entropy term.
template <class Scalar>
OtSolution<Scalar> solve_entropic(const ConstVectorRef<Scalar>& a, const ConstVectorRef<Scalar>& b,
                                  const CostMatrix<Scalar>& c, Scalar epsilon, int max_iter = 1000,
                                  Scalar tol = Scalar(1e-9))
{
    require(epsilon > 0 && std::isfinite(epsilon), "solve_entropic: epsilon must be > 0");
    detail::check_marginals<Scalar>(a, b, c);
    if (auto scaled = detail::sinkhorn_scaling<Scalar>(a, b, c, epsilon, max_iter, tol)) return *scaled;
    return detail::sinkhorn_log<Scalar>(a, b, c, epsilon, max_iter, tol);
}

struct ExactSolver {};
struct EntropicSolver {
    double epsilon = 0; // <= 0 selects 0.05 * median(C)
    int max_iter = 1000;
    double tol = 1e-9;
};
struct AutoSolver {};
using SolverChoice = std::variant<AutoSolver, ExactSolver, EntropicSolver>;

inline constexpr Index kExactEntryLimit = 250000;

template <class Scalar>
Scalar median_cost(const CostMatrix<Scalar>& c)
{
    std::vector<Scalar> v(c.values.data(), c.values.data() + c.values.size());
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

template <class Scalar>
OtSolution<Scalar> solve(const ConstVectorRef<Scalar>& a, const ConstVectorRef<Scalar>& b, const CostMatrix<Scalar>& c,
                         const SolverChoice& choice = AutoSolver{})
{
    auto entropic = [&](const EntropicSolver& s) {
        Scalar eps = static_cast<Scalar>(s.epsilon);
        if (eps <= 0) eps = std::max(Scalar(0.05) * median_cost(c), std::numeric_limits<Scalar>::min());
        return solve_entropic<Scalar>(a, b, c, eps, s.max_iter, static_cast<Scalar>(s.tol));
    };
    if (std::holds_alternative<ExactSolver>(choice)) return solve_exact<Scalar>(a, b, c);
    if (const auto* s = std::get_if<EntropicSolver>(&choice)) return entropic(*s);
    if (c.rows() * c.cols() <= kExactEntryLimit) return solve_exact<Scalar>(a, b, c);
    return entropic(EntropicSolver{});
}

/// Conditional mean of the plan: row i = sum_j g_ij y_j / sum_j g_ij.
template <class Scalar>
Matrix<Scalar> barycentric_map(const TransportPlan<Scalar>& plan, const Matrix<Scalar>& y)
{
    require(plan.coupling.cols() == y.rows(), "barycentric_map: plan columns differ from target rows");
    const Vector<Scalar> mass = plan.coupling.rowwise().sum();
    if (mass.size() > 0 && mass.minCoeff() <= 0) throw ValidationError("barycentric_map: zero row marginal");
    return mass.cwiseInverse().asDiagonal() * (plan.coupling * y);
}

template <class Scalar>
Scalar w2_empirical(const EmpiricalMeasure<Scalar>& p, const EmpiricalMeasure<Scalar>& q)
{
    require(p.dim() == q.dim(), "w2_empirical: dimensions differ");
    const auto c = joint_cost<Scalar>(p.points(), q.points());
    return std::sqrt(std::max(Scalar(0), solve_exact<Scalar>(p.weights(), q.weights(), c).cost));
}

// Joint feature-label distance; labels enter through their softmax probabilities.
template <class Scalar>
Scalar w2_empirical(const LabeledEmpiricalMeasure<Scalar>& p, const LabeledEmpiricalMeasure<Scalar>& q, Scalar beta)
{
    require(p.dim() == q.dim(), "w2_empirical: dimensions differ");
    require(p.n_classes() == q.n_classes(), "w2_empirical: class counts differ");
    const auto c = joint_cost<Scalar>(p.points(), q.points(), p.soft_labels(), q.soft_labels(), beta);
    return std::sqrt(std::max(Scalar(0), solve_exact<Scalar>(p.weights(), q.weights(), c).cost));
}

} // namespace baryflow
