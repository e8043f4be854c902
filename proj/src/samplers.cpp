#include "baryflow/samplers.hpp"

#include <sstream>

namespace baryflow {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c)
{
    Rng rng = make_rng(seed, {a, b, c});
    return rng();
}

DatasetSampler::DatasetSampler(Matrix<double> points, std::optional<Labels> labels, int n_classes)
    : points_(std::move(points)), labels_(std::move(labels)), n_classes_(n_classes)
{
    require(points_.rows() >= 1 && points_.cols() >= 1, "dataset sampler needs a non-empty dataset");
    require(points_.allFinite(), "dataset has non-finite coordinates");
    if (labels_) {
        require(labels_->size() == points_.rows(), "dataset label count differs from row count");
        require(n_classes_ >= 1, "labeled dataset needs n_classes >= 1");
        require(labels_->minCoeff() >= 0 && labels_->maxCoeff() < n_classes_, "dataset label out of range");
    }
}

DatasetSampler DatasetSampler::from_measure(const LabeledEmpiricalMeasure<double>& m)
{
    return DatasetSampler(m.points(), m.hard_labels(), m.n_classes());
}

MiniBatch<double> DatasetSampler::full() const
{
    MiniBatch<double> b{points_, std::nullopt, 0};
    if (labels_) b.labels = one_hot<double>(*labels_, n_classes_);
    return b;
}

MiniBatch<double> DatasetSampler::sample(Index m, std::uint64_t seed) const
{
    require(m >= 1, "mini-batch size must be >= 1");
    if (m == size()) return full();
    Rng rng = make_rng(seed);
    std::uniform_int_distribution<Index> pick(0, size() - 1);
    MiniBatch<double> b{Matrix<double>(m, dim()), std::nullopt, 0};
    Labels lab(m);
    for (Index i = 0; i < m; ++i) {
        const Index r = pick(rng);
        b.points.row(i) = points_.row(r);
        if (labels_) lab(i) = (*labels_)(r);
    }
    if (labels_) b.labels = one_hot<double>(lab, n_classes_);
    return b;
}

std::string DatasetSampler::describe() const
{
    std::ostringstream os;
    os << "dataset(n=" << size() << ", d=" << dim() << ", classes=" << n_classes() << ")";
    return os.str();
}

MiniBatch<double> GaussianSampler::sample(Index m, std::uint64_t seed) const
{
    require(m >= 1, "mini-batch size must be >= 1");
    Rng rng = make_rng(seed);
    const Matrix<double> eps = standard_normal<double>(m, dim(), rng);
    MiniBatch<double> b{(eps * g_.chol().transpose()).rowwise() + g_.mean().transpose(), std::nullopt, 0};
    return b;
}

std::string GaussianSampler::describe() const
{
    std::ostringstream os;
    os << "gaussian(d=" << dim() << ")";
    return os.str();
}

MiniBatch<double> GmmSampler::sample(Index m, std::uint64_t seed) const
{
    require(m >= 1, "mini-batch size must be >= 1");
    auto s = sample_reparam(gmm_, m, seed);
    MiniBatch<double> b{std::move(s.points), std::nullopt, 0};
    if (gmm_.labels()) {
        const Labels comp_class = argmax_rows(*gmm_.labels());
        Labels lab(m);
        for (Index i = 0; i < m; ++i) lab(i) = comp_class(s.component_index(i));
        b.labels = one_hot<double>(lab, gmm_.n_classes());
    }
    return b;
}

std::string GmmSampler::describe() const
{
    std::ostringstream os;
    os << "gmm(components=" << gmm_.size() << ", d=" << dim() << ", classes=" << n_classes() << ")";
    return os.str();
}

} // namespace baryflow
