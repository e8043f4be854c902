#pragma once

#include "baryflow/gaussian.hpp"
#include "baryflow/measures.hpp"
#include "baryflow/ot.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace baryflow {

enum class RepulsionMetric { euclidean, cosine };

inline std::string to_string(RepulsionMetric m) { return m == RepulsionMetric::euclidean ? "euclidean" : "cosine"; }

inline RepulsionMetric parse_repulsion_metric(const std::string& s)
{
    if (s == "euclidean") return RepulsionMetric::euclidean;
    if (s == "cosine") return RepulsionMetric::cosine;
    throw ValidationError("unknown repulsion metric '" + s + "' (expected euclidean or cosine)");
}

/// Weights of the regularizing energies added to the barycenter objective.
template <class Scalar>
struct FunctionalSpec {
    Scalar entropy_weight = 0;
    Scalar repulsion_weight = 0;
    Scalar repulsion_margin = 0;
    RepulsionMetric repulsion_metric = RepulsionMetric::euclidean;
    Scalar target_weight = 0;
    std::optional<EmpiricalMeasure<Scalar>> target_measure;
    Scalar internal_weight = 0;

    void validate() const
    {
        auto ok = [](Scalar w) { return std::isfinite(w) && w >= 0; };
        require(ok(entropy_weight), "entropy_weight must be finite and >= 0");
        require(ok(repulsion_weight), "repulsion_weight must be finite and >= 0");
        require(ok(repulsion_margin), "repulsion_margin must be finite and >= 0");
        require(ok(target_weight), "target_weight must be finite and >= 0");
        require(ok(internal_weight), "internal_weight must be finite and >= 0");
        require(target_weight == 0 || target_measure.has_value(), "target_weight > 0 needs a target measure");
    }
};

template <class Scalar>
struct EnergyGrad {
    Scalar value = 0;
    Matrix<Scalar> grad;
};

/// Mean Shannon entropy of the softmax label rows; minimizing it sharpens labels.
template <class Derived>
EnergyGrad<typename Derived::Scalar> entropy_potential(const Eigen::MatrixBase<Derived>& logits)
{
    using Scalar = typename Derived::Scalar;
    require(logits.allFinite(), "entropy_potential: non-finite logits");
    const Index n = logits.rows();
    EnergyGrad<Scalar> out{0, Matrix<Scalar>::Zero(n, logits.cols())};
    if (n == 0) return out;
    const Matrix<Scalar> logy = log_softmax_rows(logits);
    const Matrix<Scalar> y = logy.array().exp().matrix();
    for (Index i = 0; i < n; ++i) {
        const Scalar h = -(y.row(i).array() * logy.row(i).array()).sum();
        out.value += h;
        out.grad.row(i) = -(y.row(i).array() * (logy.row(i).array() + h)).matrix() / static_cast<Scalar>(n);
    }
    out.value /= static_cast<Scalar>(n);
    return out;
}

/// (1/n^2) sum over ordered pairs with different labels of max(0, margin - d(x_i, x_j)).
/// The subgradient at the kink and at coincident points is 0.
template <class Derived>
EnergyGrad<typename Derived::Scalar> hinge_repulsion(const Eigen::MatrixBase<Derived>& points, const Labels& labels,
                                                     typename Derived::Scalar margin, RepulsionMetric metric)
{
    using Scalar = typename Derived::Scalar;
    const Index n = points.rows();
    require(labels.size() == n, "hinge_repulsion: label count differs from point count");
    require(margin >= 0, "hinge_repulsion: margin must be >= 0");
    EnergyGrad<Scalar> out{0, Matrix<Scalar>::Zero(n, points.cols())};
    if (n == 0) return out;
    Vector<Scalar> norms = points.rowwise().norm();
    if (metric == RepulsionMetric::cosine)
        for (Index i = 0; i < n; ++i)
            if (!(norms(i) > 0)) throw ValidationError("hinge_repulsion: cosine distance on a zero vector");
    const Scalar scale = Scalar(1) / static_cast<Scalar>(n * n);
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j) {
            if (labels(i) == labels(j)) continue;
            if (metric == RepulsionMetric::euclidean) {
                const Vector<Scalar> diff = (points.row(i) - points.row(j)).transpose();
                const Scalar d = diff.norm();
                if (d >= margin) continue;
                out.value += 2 * (margin - d);
                if (d > 0) {
                    const Vector<Scalar> g = -2 * scale * diff / d;
                    out.grad.row(i) += g.transpose();
                    out.grad.row(j) -= g.transpose();
                }
            } else {
                const Scalar dot = points.row(i).dot(points.row(j));
                const Scalar d = 1 - dot / (norms(i) * norms(j));
                if (d >= margin) continue;
                out.value += 2 * (margin - d);
                // d cos / d x_i = x_j/(|x_i||x_j|) - cos x_i/|x_i|^2
                const Scalar cosv = dot / (norms(i) * norms(j));
                const auto gi = points.row(j) / (norms(i) * norms(j)) - cosv * points.row(i) / (norms(i) * norms(i));
                const auto gj = points.row(i) / (norms(i) * norms(j)) - cosv * points.row(j) / (norms(j) * norms(j));
                out.grad.row(i) += 2 * scale * gi;
                out.grad.row(j) += 2 * scale * gj;
            }
        }
    out.value *= scale;
    return out;
}

template <class Scalar>
struct TargetPotential {
    Scalar value = 0;
    Matrix<Scalar> grad_points;
    Matrix<Scalar> grad_logits;
};

/// Squared W2 (feature cost only) from the particles to an unlabeled target batch.
/// The gradient holds the optimal plan fixed: 2 a_i (x_i - T(x_i)).
template <class Scalar>
TargetPotential<Scalar> target_potential(const EmpiricalMeasure<Scalar>& p, const EmpiricalMeasure<Scalar>& target,
                                         const SolverChoice& solver = AutoSolver{})
{
    require(p.dim() == target.dim(), "target_potential: dimension mismatch");
    const auto c = joint_cost<Scalar>(p.points(), target.points());
    const auto sol = solve<Scalar>(p.weights(), target.weights(), c, solver);
    const Matrix<Scalar>& g = sol.plan.coupling;
    TargetPotential<Scalar> out;
    out.value = sol.cost;
    out.grad_points = 2 * (g.rowwise().sum().asDiagonal() * p.points() - g * target.points());
    return out;
}

template <class Scalar>
TargetPotential<Scalar> target_potential(const LabeledEmpiricalMeasure<Scalar>& p, const EmpiricalMeasure<Scalar>& target,
                                         const SolverChoice& solver = AutoSolver{})
{
    auto out = target_potential(p.base(), target, solver);
    out.grad_logits = Matrix<Scalar>::Zero(p.size(), p.n_classes());
    return out;
}

template <class Scalar>
struct InternalEnergy {
    Scalar value = 0;
    std::vector<Vector<Scalar>> grad_mu;
    std::vector<Matrix<Scalar>> grad_chol;
    Vector<Scalar> grad_weight_logits;
};

/// Monte-Carlo estimate of the negative differential entropy E_P[log P(z)].
/// Sampling is stratified: n_samples reparametrized draws per component,
/// averaged with the mixture weights. With a fixed seed the estimate is a smooth
/// function of (weights, means, Cholesky factors).
template <class Scalar>
InternalEnergy<Scalar> internal_energy_mc(const LabeledGMM<Scalar>& p, Index n_samples, std::uint64_t seed)
{
    require(n_samples >= 1, "internal_energy_mc: n_samples must be >= 1");
    const Index k = p.size();
    const Index d = p.dim();
    InternalEnergy<Scalar> out;
    out.grad_mu.assign(static_cast<std::size_t>(k), Vector<Scalar>::Zero(d));
    out.grad_chol.assign(static_cast<std::size_t>(k), Matrix<Scalar>::Zero(d, d));
    out.grad_weight_logits = Vector<Scalar>::Zero(k);

    std::vector<Matrix<Scalar>> linv(static_cast<std::size_t>(k));
    for (Index j = 0; j < k; ++j)
        linv[static_cast<std::size_t>(j)] = p.component(j).chol().template triangularView<Eigen::Lower>().solve(
            Matrix<Scalar>::Identity(d, d));

    Rng rng = make_rng(seed, {0x4d43});
    Vector<Scalar> per_comp = Vector<Scalar>::Zero(k);
    Vector<Scalar> logs(k);
    std::vector<Vector<Scalar>> u(static_cast<std::size_t>(k));
    const Scalar inv_s = Scalar(1) / static_cast<Scalar>(n_samples);
    for (Index c = 0; c < k; ++c) {
        const auto& g = p.component(c);
        const Scalar wc = p.weights()(c);
        const Matrix<Scalar> eps = standard_normal<Scalar>(n_samples, d, rng);
        if (wc <= 0) continue;
        for (Index s = 0; s < n_samples; ++s) {
            const Vector<Scalar> e = eps.row(s).transpose();
            const Vector<Scalar> z = g.chol() * e + g.mean();
            for (Index j = 0; j < k; ++j) {
                const auto& gj = p.component(j);
                u[static_cast<std::size_t>(j)] = linv[static_cast<std::size_t>(j)] * (z - gj.mean());
                const Scalar wj = p.weights()(j);
                logs(j) = wj > 0 ? std::log(wj) - gj.chol().diagonal().array().log().sum() -
                                       Scalar(0.5) * u[static_cast<std::size_t>(j)].squaredNorm()
                                 : -std::numeric_limits<Scalar>::infinity();
            }
            const Scalar m = logs.maxCoeff();
            const Scalar lse = m + std::log((logs.array() - m).exp().sum());
            const Vector<Scalar> r = (logs.array() - lse).exp().matrix();
            per_comp(c) += (lse - Scalar(0.5) * static_cast<Scalar>(d) * std::log(2 * std::numbers::pi_v<Scalar>)) * inv_s;

            const Scalar w = wc * inv_s;
            Vector<Scalar> grad_z = Vector<Scalar>::Zero(d);
            for (Index j = 0; j < k; ++j) {
                if (r(j) == 0) continue;
                const auto& uj = u[static_cast<std::size_t>(j)];
                const Vector<Scalar> sj = linv[static_cast<std::size_t>(j)].transpose() * uj; // Sigma_j^-1 (z - mu_j)
                grad_z -= r(j) * sj;
                out.grad_mu[static_cast<std::size_t>(j)] += w * r(j) * sj;
                Matrix<Scalar> dl = (sj * uj.transpose()).template triangularView<Eigen::Lower>();
                dl.diagonal() -= p.component(j).chol().diagonal().cwiseInverse();
                out.grad_chol[static_cast<std::size_t>(j)] += w * r(j) * dl;
                out.grad_weight_logits(j) += w * (r(j) - p.weights()(j));
            }
            out.grad_mu[static_cast<std::size_t>(c)] += w * grad_z;
            out.grad_chol[static_cast<std::size_t>(c)] +=
                w * Matrix<Scalar>((grad_z * e.transpose()).template triangularView<Eigen::Lower>());
        }
    }
    out.value = p.weights().dot(per_comp);
    out.grad_weight_logits += (p.weights().array() * (per_comp.array() - out.value)).matrix();
    return out;
}

} // namespace baryflow
