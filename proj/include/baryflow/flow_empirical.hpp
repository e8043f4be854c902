#pragma once

#include "baryflow/functionals.hpp"
#include "baryflow/measures.hpp"
#include "baryflow/ot.hpp"
#include "baryflow/samplers.hpp"
#include "baryflow/trace.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace baryflow {

enum class InitMode { gaussian, subsample, explicit_points };
enum class LabelInit { uniform, random };

InitMode parse_init_mode(const std::string& s);
LabelInit parse_label_init(const std::string& s);
std::string to_string(InitMode m);
std::string to_string(LabelInit m);

struct EmpiricalFlowConfig {
    Index n_particles = 128;
    // interpolation coefficient: one step with no energies and full batches is
    // z <- (1 - step_size) z + step_size * sum_k lambda_k T_k(z)
    double step_size = 0.5;
    double label_weight = 0.0;
    Index batch_size = 128;
    int n_iter = 300;
    std::optional<Vector<double>> coordinates; // uniform when empty
    FunctionalSpec<double> functional;
    InitMode init = InitMode::gaussian;
    std::optional<Matrix<double>> init_points;
    LabelInit label_init = LabelInit::uniform;
    std::uint64_t seed = 0;
    SolverChoice solver = AutoSolver{};
    bool record_timing = false;

    void validate(Index n_inputs, bool allow_zero_step = false) const;
    BarycentricCoordinates<double> lambda(Index n_inputs) const;
};

/// Particles plus label logits. Unlabeled runs carry a single logit column.
struct FlowState {
    LabeledEmpiricalMeasure<double> measure;
    int iter = 0;
    std::vector<TraceRecord> trace;
};

struct StepEvaluation {
    TraceRecord record;
    Matrix<double> grad_points;
    Matrix<double> grad_logits;
    std::vector<TransportPlan<double>> plans;
    bool labeled = false;
};

// Objective and gradient at the current particles; plans solved against each batch.
StepEvaluation evaluate_step(const FlowState& state, const std::vector<MiniBatch<double>>& batches,
                             const EmpiricalFlowConfig& cfg);

// One block-coordinate step: plans at fixed particles, then a gradient step.
// The record of the pre-step objective is appended to the trace.
FlowState flow_step(const FlowState& state, const std::vector<MiniBatch<double>>& batches,
                    const EmpiricalFlowConfig& cfg);

struct FlowResult {
    LabeledEmpiricalMeasure<double> measure;
    std::vector<TraceRecord> trace;
    std::vector<double> step_ms;
    bool labeled = false;
};

LabeledEmpiricalMeasure<double> initial_particles(const std::vector<SamplerPtr>& inputs, const EmpiricalFlowConfig& cfg);

FlowResult run_flow(const std::vector<SamplerPtr>& inputs, const EmpiricalFlowConfig& cfg);

// Full-batch fixed-point iterations z <- (1 - a) z + a sum_k lambda_k T_k(z) with
// label propagation y <- (1 - a) y + a sum_k lambda_k T_k(y). Energies are ignored.
// Stops early once a step moves no coordinate by more than kFixedPointTol (relative).
inline constexpr double kFixedPointTol = 1e-12;
FlowResult fixed_point_baseline(const std::vector<DatasetSampler>& inputs, const EmpiricalFlowConfig& cfg);

} // namespace baryflow
