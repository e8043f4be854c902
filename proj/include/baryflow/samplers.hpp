#pragma once

#include "baryflow/gaussian.hpp"
#include "baryflow/measures.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

namespace baryflow {

/// Source of i.i.d. mini-batches. n_classes() is 0 for unlabeled measures.
class MeasureSampler {
public:
    virtual ~MeasureSampler() = default;
    virtual Index dim() const = 0;
    virtual int n_classes() const = 0;
    virtual MiniBatch<double> sample(Index m, std::uint64_t seed) const = 0;
    virtual std::string describe() const = 0;
};

using SamplerPtr = std::shared_ptr<const MeasureSampler>;

/// Draws rows of a finite dataset with replacement. A request for exactly the
/// dataset size returns the whole dataset in order (full batch).
class DatasetSampler : public MeasureSampler {
public:
    explicit DatasetSampler(Matrix<double> points, std::optional<Labels> labels = std::nullopt, int n_classes = 0);
    static DatasetSampler from_measure(const LabeledEmpiricalMeasure<double>& m);

    Index dim() const override { return points_.cols(); }
    int n_classes() const override { return labels_ ? n_classes_ : 0; }
    MiniBatch<double> sample(Index m, std::uint64_t seed) const override;
    std::string describe() const override;

    Index size() const { return points_.rows(); }
    const Matrix<double>& points() const { return points_; }
    const std::optional<Labels>& labels() const { return labels_; }
    MiniBatch<double> full() const;

private:
    Matrix<double> points_;
    std::optional<Labels> labels_;
    int n_classes_ = 0;
};

class GaussianSampler : public MeasureSampler {
public:
    explicit GaussianSampler(GaussianComponent<double> g) : g_(std::move(g)) {}

    Index dim() const override { return g_.dim(); }
    int n_classes() const override { return 0; }
    MiniBatch<double> sample(Index m, std::uint64_t seed) const override;
    std::string describe() const override;
    const GaussianComponent<double>& gaussian() const { return g_; }

private:
    GaussianComponent<double> g_;
};

/// Samples a mixture; when the mixture carries component labels, each point is
/// labeled with the argmax class of the component it was drawn from.
class GmmSampler : public MeasureSampler {
public:
    explicit GmmSampler(LabeledGMM<double> gmm) : gmm_(std::move(gmm)) {}

    Index dim() const override { return gmm_.dim(); }
    int n_classes() const override { return gmm_.n_classes(); }
    MiniBatch<double> sample(Index m, std::uint64_t seed) const override;
    std::string describe() const override;
    const LabeledGMM<double>& gmm() const { return gmm_; }

private:
    LabeledGMM<double> gmm_;
};

// Seed for stream (a, b, c) of a base seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

} // namespace baryflow
