#pragma once

#include "baryflow/types.hpp"

#include <cmath>
#include <optional>
#include <utility>

namespace baryflow {

// True iff every entry is >= -tol and the entries sum to 1 within tol.
template <class Derived>
bool validate_simplex(const Eigen::MatrixBase<Derived>& v, typename Derived::Scalar tol)
{
    using Scalar = typename Derived::Scalar;
    if (!v.allFinite()) throw ValidationError("validate_simplex: non-finite entry");
    if (v.size() == 0) return false;
    return v.minCoeff() >= -tol && std::abs(v.sum() - Scalar(1)) <= tol;
}

template <class Scalar>
Vector<Scalar> uniform_weights(Index n)
{
    require(n >= 1, "uniform_weights: n must be >= 1");
    return Vector<Scalar>::Constant(n, Scalar(1) / Scalar(n));
}

/// Barycentric coordinates lambda in the K-simplex.
template <class Scalar>
class BarycentricCoordinates {
public:
    explicit BarycentricCoordinates(Vector<Scalar> lambda) : lambda_(std::move(lambda))
    {
        require(lambda_.allFinite(), "barycentric coordinates must be finite");
        require(validate_simplex(lambda_, Scalar(1e-12)),
                "barycentric coordinates must be nonnegative and sum to 1");
    }

    static BarycentricCoordinates uniform(Index k) { return BarycentricCoordinates(uniform_weights<Scalar>(k)); }

    const Vector<Scalar>& values() const { return lambda_; }
    Scalar operator[](Index k) const { return lambda_(k); }
    Index size() const { return lambda_.size(); }

private:
    Vector<Scalar> lambda_;
};

/// Weighted point cloud: n points in R^d with simplex weights.
template <class Scalar>
class EmpiricalMeasure {
public:
    explicit EmpiricalMeasure(Matrix<Scalar> points) : EmpiricalMeasure(points, uniform_weights<Scalar>(points.rows())) {}

    EmpiricalMeasure(Matrix<Scalar> points, Vector<Scalar> weights)
        : points_(std::move(points)), weights_(std::move(weights))
    {
        require(points_.rows() >= 1, "empirical measure needs at least one point");
        require(points_.allFinite(), "empirical measure has non-finite coordinates");
        require(weights_.size() == points_.rows(), "weights length differs from point count");
        require(weights_.allFinite() && validate_simplex(weights_, Scalar(1e-9)),
                "empirical measure weights must lie on the simplex");
    }

    const Matrix<Scalar>& points() const { return points_; }
    const Vector<Scalar>& weights() const { return weights_; }
    Index size() const { return points_.rows(); }
    Index dim() const { return points_.cols(); }

private:
    Matrix<Scalar> points_;
    Vector<Scalar> weights_;
};

template <class Derived>
Matrix<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits)
{
    using Scalar = typename Derived::Scalar;
    Matrix<Scalar> out(logits.rows(), logits.cols());
    for (Index i = 0; i < logits.rows(); ++i) {
        const Scalar m = logits.row(i).maxCoeff();
        out.row(i) = (logits.row(i).array() - m).exp().matrix();
        out.row(i) /= out.row(i).sum();
    }
    return out;
}

template <class Derived>
Matrix<typename Derived::Scalar> log_softmax_rows(const Eigen::MatrixBase<Derived>& logits)
{
    using Scalar = typename Derived::Scalar;
    Matrix<Scalar> out(logits.rows(), logits.cols());
    for (Index i = 0; i < logits.rows(); ++i) {
        const Scalar m = logits.row(i).maxCoeff();
        const Scalar lse = m + std::log((logits.row(i).array() - m).exp().sum());
        out.row(i) = logits.row(i).array() - lse;
    }
    return out;
}

// Row-wise argmax, ties resolved to the lowest column.
template <class Derived>
Labels argmax_rows(const Eigen::MatrixBase<Derived>& m)
{
    Labels out(m.rows());
    for (Index i = 0; i < m.rows(); ++i) {
        Index best = 0;
        for (Index c = 1; c < m.cols(); ++c)
            if (m(i, c) > m(i, best)) best = c;
        out(i) = static_cast<int>(best);
    }
    return out;
}

template <class Scalar>
struct DecodedLabels {
    Matrix<Scalar> soft;
    Labels hard;
};

template <class Derived>
DecodedLabels<typename Derived::Scalar> softmax_decode(const Eigen::MatrixBase<Derived>& logits)
{
    if (!logits.allFinite()) throw ValidationError("softmax_decode: non-finite logits");
    auto soft = softmax_rows(logits);
    // argmax on the logits themselves; softmax can saturate ties that the logits still resolve
    Labels hard = argmax_rows(logits);
    return {std::move(soft), std::move(hard)};
}

template <class Scalar>
Matrix<Scalar> one_hot(const Labels& labels, int n_classes)
{
    require(n_classes >= 1, "one_hot: need at least one class");
    Matrix<Scalar> out = Matrix<Scalar>::Zero(labels.size(), n_classes);
    for (Index i = 0; i < labels.size(); ++i) {
        if (labels(i) < 0 || labels(i) >= n_classes)
            throw ValidationError("one_hot: label " + std::to_string(labels(i)) + " out of range [0, " +
                                  std::to_string(n_classes) + ")");
        out(i, labels(i)) = Scalar(1);
    }
    return out;
}

// log(onehot * (1 - C eps) + eps), rows of probabilities mapped to logits.
template <class Derived>
Matrix<typename Derived::Scalar> logits_from_probabilities(const Eigen::MatrixBase<Derived>& probs,
                                                           typename Derived::Scalar eps = 1e-6)
{
    using Scalar = typename Derived::Scalar;
    const Scalar c = static_cast<Scalar>(probs.cols());
    return (probs.array() * (Scalar(1) - c * eps) + eps).log().matrix();
}

/// Empirical measure on features x labels; labels are stored as unconstrained logits.
template <class Scalar>
class LabeledEmpiricalMeasure {
public:
    LabeledEmpiricalMeasure(EmpiricalMeasure<Scalar> base, Matrix<Scalar> label_logits)
        : base_(std::move(base)), logits_(std::move(label_logits))
    {
        require(logits_.rows() == base_.size(), "label logits row count differs from point count");
        require(logits_.cols() >= 1, "labeled measure needs at least one class");
        require(logits_.allFinite(), "label logits must be finite");
    }

    static LabeledEmpiricalMeasure from_labels(EmpiricalMeasure<Scalar> base, const Labels& labels, int n_classes)
    {
        return LabeledEmpiricalMeasure(std::move(base),
                                       logits_from_probabilities(one_hot<Scalar>(labels, n_classes)));
    }

    const EmpiricalMeasure<Scalar>& base() const { return base_; }
    const Matrix<Scalar>& points() const { return base_.points(); }
    const Vector<Scalar>& weights() const { return base_.weights(); }
    const Matrix<Scalar>& label_logits() const { return logits_; }
    Index size() const { return base_.size(); }
    Index dim() const { return base_.dim(); }
    int n_classes() const { return static_cast<int>(logits_.cols()); }

    Matrix<Scalar> soft_labels() const { return softmax_rows(logits_); }
    Labels hard_labels() const { return argmax_rows(logits_); }

private:
    EmpiricalMeasure<Scalar> base_;
    Matrix<Scalar> logits_;
};

/// Mini-batch drawn from input measure `source_index`; labels are one-hot rows when present.
template <class Scalar>
struct MiniBatch {
    Matrix<Scalar> points;
    std::optional<Matrix<Scalar>> labels;
    int source_index = 0;

    void validate() const
    {
        require(points.rows() >= 1, "mini-batch is empty");
        require(points.allFinite(), "mini-batch has non-finite coordinates");
        if (labels) {
            require(labels->rows() == points.rows(), "mini-batch label rows differ from point rows");
            for (Index i = 0; i < labels->rows(); ++i) {
                const auto row = labels->row(i);
                const bool binary = ((row.array() == Scalar(0)) || (row.array() == Scalar(1))).all();
                require(binary && row.sum() == Scalar(1), "mini-batch labels must be one-hot rows");
            }
        }
    }
};

} // namespace baryflow
