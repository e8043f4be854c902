#pragma once

#include "baryflow/measures.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace baryflow {

/// x -> A x + b
struct AffineMap {
    Matrix<double> A;
    Vector<double> b;

    static AffineMap identity(Index d) { return {Matrix<double>::Identity(d, d), Vector<double>::Zero(d)}; }
    Matrix<double> apply(const Matrix<double>& points) const;
    void validate() const;
};

/// 2-D spiral (t cos t, t sin t) with t uniform on [1.5 pi, 4.5 pi], plus Gaussian
/// noise. Labels are the t-quantile bin of each point.
LabeledEmpiricalMeasure<double> swiss_roll(Index n, double noise_std, std::uint64_t seed, int n_classes = 4);

// Measure k carries points A_k x + b_k and the labels of q0.
std::vector<LabeledEmpiricalMeasure<double>> location_scatter_family(const LabeledEmpiricalMeasure<double>& q0,
                                                                     const std::vector<AffineMap>& maps);

// Affinely maps the points to zero mean and identity covariance.
LabeledEmpiricalMeasure<double> standardize(const LabeledEmpiricalMeasure<double>& q0);

/// Symmetric PD maps R(t) diag(1.3, 0.8) R(t)^T at t = 0, 45, 90, 135 degrees with
/// unit shifts at angles 0, 30, 60, 90 degrees (the first k of them).
std::vector<AffineMap> default_family(int k = 4);

struct DomainSpec {
    Matrix<double> class_means;             // C x d
    std::vector<Matrix<double>> class_chols; // C lower-triangular factors
    AffineMap shift;
    Index n_samples = 0;
    std::optional<Vector<double>> class_priors; // uniform when empty

    void validate() const;
};

struct MsdaData {
    std::vector<LabeledEmpiricalMeasure<double>> sources;
    EmpiricalMeasure<double> target_features;
};

// Target labels are kept apart from the features handed to adaptation.
struct TargetLabels {
    Labels labels;
    int n_classes = 0;
};

struct MsdaTask {
    MsdaData data;
    TargetLabels target_labels;
};

// specs[0..K-1] are sources, specs[K] is the target.
MsdaTask synthetic_msda(const std::vector<DomainSpec>& specs, std::uint64_t seed);

struct MsdaTaskOptions {
    int n_sources = 3;
    int n_classes = 3;
    Index samples_per_domain = 300;
    double class_radius = 3.0;
    double class_std = 0.6;
    double source_rotation_deg = 30.0; // spread between consecutive sources
    double target_rotation_deg = 20.0;
    double target_shift = 3.5; // along the first axis
};

std::vector<DomainSpec> default_msda_specs(const MsdaTaskOptions& opt = {});

struct CsvTable {
    std::vector<std::string> feature_names;
    Matrix<double> features;
    std::optional<Labels> labels;
    std::vector<std::string> label_names; // id -> original value
    std::string label_column;

    int n_classes() const { return static_cast<int>(label_names.size()); }
    EmpiricalMeasure<double> measure() const { return EmpiricalMeasure<double>(features); }
    LabeledEmpiricalMeasure<double> labeled_measure() const;
};

/// Header row required. With label_column set, that column becomes the labels,
/// mapped to contiguous ids (numeric order if all values are integers, otherwise
/// lexicographic); the remaining columns are features in header order.
CsvTable load_csv(const std::string& path, const std::optional<std::string>& label_column = std::nullopt);
CsvTable parse_csv(std::istream& is, const std::optional<std::string>& label_column = std::nullopt,
                   const std::string& source = "<stream>");

void save_csv(const std::string& path, const CsvTable& table);
void write_csv(std::ostream& os, const CsvTable& table);

// Columns f0..f{d-1}, plus "label" with the hard labels when given.
CsvTable make_table(const Matrix<double>& points, const std::optional<Labels>& labels = std::nullopt, int n_classes = 0);

} // namespace baryflow
