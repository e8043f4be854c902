#pragma once

#include "baryflow/datasets.hpp"
#include "baryflow/flow_empirical.hpp"
#include "baryflow/flow_gmm.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace baryflow {

inline constexpr int kReportSchemaVersion = 1;

enum class BarycenterKind { empirical, gmm, discrete_baseline };

BarycenterKind parse_barycenter_kind(const std::string& s);
std::string to_string(BarycenterKind k);

struct MsdaConfig {
    BarycenterKind method = BarycenterKind::empirical;
    EmpiricalFlowConfig flow;     // empirical flow and discrete baseline
    GmmFlowConfig gmm_flow;       // mixture flow
    int em_components_per_class = 1;
    Index gmm_particles = 256;    // particles drawn from the mixture barycenter
    Index exact_alignment_limit = 2000;
};

/// 1-nearest-neighbor classifier; ties go to the lowest training index.
class NearestNeighbor {
public:
    NearestNeighbor(Matrix<double> points, Labels labels);
    Labels predict(const Matrix<double>& x) const;
    const Matrix<double>& points() const { return points_; }
    const Labels& labels() const { return labels_; }

private:
    Matrix<double> points_;
    Labels labels_;
};

double accuracy(const Labels& predicted, const Labels& truth);

struct AdaptedModel {
    NearestNeighbor source_only;
    NearestNeighbor adapted;
    LabeledEmpiricalMeasure<double> barycenter;
    std::vector<TraceRecord> trace;
    std::map<std::string, double> wall_ms;
};

// Never sees target labels: only source measures and target features.
AdaptedModel msda_fit(const MsdaData& data, const MsdaConfig& cfg);

struct MsdaReport {
    double accuracy_source_only = 0;
    double accuracy_adapted = 0;
    BarycenterKind barycenter_kind = BarycenterKind::empirical;
    std::map<std::string, double> wall_ms;
    nlohmann::json config;

    nlohmann::json to_json() const;
};

MsdaReport msda_adapt(const MsdaData& data, const TargetLabels& eval, const MsdaConfig& cfg);

struct ConvergenceReport {
    std::vector<double> trace;
    double decay_rate = 0;
    double intercept = 0;
    double plateau = 0;
    double r2 = 0;
    Index window_end = 0; // exclusive

    nlohmann::json to_json() const;
};

/// Plateau = mean of the last 20%; the decay rate is the least-squares slope of
/// log(B_t - plateau) (residuals clipped at 1e-12) from t = 0 up to, not
/// including, the first point whose residual drops below 10% of its initial
/// value (at least 3 points).
ConvergenceReport convergence_report(const std::vector<double>& trace);

// Uniform-weight supports subsampled without replacement to at most max_points each.
double w2_to_reference(const EmpiricalMeasure<double>& result, const EmpiricalMeasure<double>& reference,
                       std::uint64_t seed = 0, Index max_points = 2000);

EmpiricalMeasure<double> subsample(const EmpiricalMeasure<double>& m, Index max_points, std::uint64_t seed);

} // namespace baryflow
