#pragma once

#include "baryflow/functionals.hpp"
#include "baryflow/gaussian.hpp"
#include "baryflow/trace.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace baryflow {

enum class GmmInit { em, random };

GmmInit parse_gmm_init(const std::string& s);
std::string to_string(GmmInit m);

struct GmmFlowConfig {
    Index n_components = 1;
    // per-component interpolation coefficient; with no energies a full step on
    // axis-aligned mixtures is mu <- (1 - a) mu + a sum_k lambda_k T_k(mu), same for the stds
    double step_size = 0.5;
    double label_weight = 0.0;
    Index mc_samples = 64;
    int n_iter = 200;
    std::optional<Vector<double>> coordinates;
    FunctionalSpec<double> functional;
    bool diag_only = false;
    bool flow_weights = false;
    std::uint64_t seed = 0;
    GmmInit init = GmmInit::em;
    Index init_samples = 512;
    Index target_samples = 256;
    bool record_timing = false;

    void validate(Index n_inputs) const;
    BarycentricCoordinates<double> lambda(Index n_inputs) const;
};

/// Mixture together with the unconstrained logits it is flowed through.
struct GmmFlowState {
    LabeledGMM<double> gmm;
    Vector<double> weight_logits;
    std::optional<Matrix<double>> label_logits;
    int iter = 0;
    std::vector<TraceRecord> trace;
    int clamp_warnings = 0;
};

GmmFlowState make_gmm_state(const LabeledGMM<double>& gmm);

struct GmmStepEvaluation {
    TraceRecord record;
    std::vector<Vector<double>> grad_mu;
    std::vector<Matrix<double>> grad_chol;
    Vector<double> grad_weight_logits;
    Matrix<double> grad_label_logits;
    std::vector<TransportPlan<double>> omegas;
};

// Objective and gradients at the current parameters with the component plans held fixed.
GmmStepEvaluation evaluate_gmm_step(const GmmFlowState& state, const std::vector<LabeledGMM<double>>& inputs,
                                    const GmmFlowConfig& cfg);

GmmFlowState gmm_flow_step(const GmmFlowState& state, const std::vector<LabeledGMM<double>>& inputs,
                           const GmmFlowConfig& cfg);

struct GmmFlowResult {
    LabeledGMM<double> gmm;
    std::vector<TraceRecord> trace;
    std::vector<double> step_ms;
    int clamp_warnings = 0;
};

LabeledGMM<double> initial_mixture(const std::vector<LabeledGMM<double>>& inputs, const GmmFlowConfig& cfg);

GmmFlowResult run_gmm_flow(const std::vector<LabeledGMM<double>>& inputs, const GmmFlowConfig& cfg,
                           const std::optional<LabeledGMM<double>>& init = std::nullopt);

} // namespace baryflow
