#include "baryflow/flow_empirical.hpp"
#include "baryflow/parallel.hpp"

#include <chrono>

namespace baryflow {

InitMode parse_init_mode(const std::string& s)
{
    if (s == "gaussian") return InitMode::gaussian;
    if (s == "subsample") return InitMode::subsample;
    if (s == "explicit") return InitMode::explicit_points;
    throw ValidationError("unknown init mode '" + s + "' (expected gaussian, subsample or explicit)");
}

LabelInit parse_label_init(const std::string& s)
{
    if (s == "uniform") return LabelInit::uniform;
    if (s == "random") return LabelInit::random;
    throw ValidationError("unknown label init '" + s + "' (expected uniform or random)");
}

std::string to_string(InitMode m)
{
    switch (m) {
    case InitMode::gaussian: return "gaussian";
    case InitMode::subsample: return "subsample";
    default: return "explicit";
    }
}

std::string to_string(LabelInit m) { return m == LabelInit::uniform ? "uniform" : "random"; }

void EmpiricalFlowConfig::validate(Index n_inputs, bool allow_zero_step) const
{
    require(n_inputs >= 1, "barycenter needs at least one input measure");
    require(n_particles >= 1, "n_particles must be >= 1");
    require(batch_size >= 1, "batch_size must be >= 1");
    require(n_iter >= 0, "n_iter must be >= 0");
    require(std::isfinite(step_size) && (allow_zero_step ? step_size >= 0 : step_size > 0) && step_size <= 1,
            allow_zero_step ? "step_size must lie in [0, 1]" : "step_size must lie in (0, 1]");
    require(std::isfinite(label_weight) && label_weight >= 0, "label_weight must be >= 0");
    functional.validate();
    require(functional.internal_weight == 0, "internal energy needs a density; use the gmm flow");
    if (coordinates) require(coordinates->size() == n_inputs, "coordinates length differs from the number of inputs");
    if (init == InitMode::explicit_points) {
        require(init_points.has_value(), "init 'explicit' needs init_points");
        require(init_points->rows() == n_particles, "init_points row count differs from n_particles");
    }
    (void)lambda(n_inputs);
}

BarycentricCoordinates<double> EmpiricalFlowConfig::lambda(Index n_inputs) const
{
    return coordinates ? BarycentricCoordinates<double>(*coordinates) : BarycentricCoordinates<double>::uniform(n_inputs);
}

namespace {

// (J g)_c = y_c (g_c - sum_c' y_c' g_c') row-wise for y = softmax(logits)
Matrix<double> softmax_pullback(const Matrix<double>& y, const Matrix<double>& g)
{
    const Vector<double> inner = (y.array() * g.array()).rowwise().sum();
    return (y.array() * (g.colwise() - inner).array()).matrix();
}

bool batches_labeled(const std::vector<MiniBatch<double>>& batches)
{
    const bool first = batches.front().labels.has_value();
    for (const auto& b : batches)
        require(b.labels.has_value() == first, "mini-batches must all carry labels or none");
    return first;
}

} // namespace

StepEvaluation evaluate_step(const FlowState& state, const std::vector<MiniBatch<double>>& batches,
                             const EmpiricalFlowConfig& cfg)
{
    const Index k_inputs = static_cast<Index>(batches.size());
    require(k_inputs >= 1, "flow step needs one batch per input measure");
    const auto lambda = cfg.lambda(k_inputs);
    const auto& m = state.measure;
    const Index n = m.size();
    for (const auto& b : batches) {
        b.validate();
        require(b.points.cols() == m.dim(), "mini-batch dimension differs from the barycenter");
    }
    const bool labeled = batches_labeled(batches);
    if (labeled)
        for (const auto& b : batches)
            require(b.labels->cols() == m.n_classes(), "mini-batch class count differs from the barycenter");

    const Matrix<double> soft = m.soft_labels();
    const bool label_cost = labeled && cfg.label_weight > 0;
    std::optional<Matrix<double>> soft_opt;
    if (label_cost) soft_opt = soft;

    StepEvaluation ev;
    ev.labeled = labeled;
    ev.plans.resize(static_cast<std::size_t>(k_inputs));
    std::vector<double> costs(static_cast<std::size_t>(k_inputs));
    parallel_for(static_cast<int>(k_inputs), [&](int k) {
        const auto& b = batches[static_cast<std::size_t>(k)];
        std::optional<Matrix<double>> bl;
        if (label_cost) bl = b.labels;
        const auto c = joint_cost<double>(m.points(), b.points, soft_opt, bl, cfg.label_weight);
        const Vector<double> bw = uniform_weights<double>(b.points.rows());
        auto sol = solve<double>(m.weights(), bw, c, cfg.solver);
        costs[static_cast<std::size_t>(k)] = sol.cost;
        ev.plans[static_cast<std::size_t>(k)] = std::move(sol.plan);
    });

    ev.grad_points = Matrix<double>::Zero(n, m.dim());
    ev.grad_logits = Matrix<double>::Zero(n, m.n_classes());
    Matrix<double> grad_soft = Matrix<double>::Zero(n, m.n_classes());
    // labels still follow the plans when they do not enter the cost
    const double beta_eff = cfg.label_weight > 0 ? cfg.label_weight : 1.0;
    double b_hat = 0;
    for (Index k = 0; k < k_inputs; ++k) {
        const auto& g = ev.plans[static_cast<std::size_t>(k)].coupling;
        const auto& b = batches[static_cast<std::size_t>(k)];
        const Vector<double> rows = g.rowwise().sum();
        b_hat += lambda[k] * costs[static_cast<std::size_t>(k)];
        ev.grad_points += 2 * lambda[k] * (rows.asDiagonal() * m.points() - g * b.points);
        if (labeled) grad_soft += 2 * beta_eff * lambda[k] * (rows.asDiagonal() * soft - g * *b.labels);
    }
    if (labeled) ev.grad_logits = softmax_pullback(soft, grad_soft);

    const auto& f = cfg.functional;
    double v = 0, u = 0;
    if (f.entropy_weight > 0) {
        const auto e = entropy_potential(m.label_logits());
        v += f.entropy_weight * e.value;
        ev.grad_logits += f.entropy_weight * e.grad;
    }
    if (f.target_weight > 0) {
        const auto t = target_potential(m.base(), *f.target_measure, cfg.solver);
        v += f.target_weight * t.value;
        ev.grad_points += f.target_weight * t.grad_points;
    }
    if (f.repulsion_weight > 0) {
        const auto h = hinge_repulsion(m.points(), m.hard_labels(), f.repulsion_margin, f.repulsion_metric);
        u += f.repulsion_weight * h.value;
        ev.grad_points += f.repulsion_weight * h.grad;
    }
    ev.record = TraceRecord{state.iter, b_hat, v, u, b_hat + v + u, 0.0};
    return ev;
}

FlowState flow_step(const FlowState& state, const std::vector<MiniBatch<double>>& batches, const EmpiricalFlowConfig& cfg)
{
    const auto t0 = std::chrono::steady_clock::now();
    auto ev = evaluate_step(state, batches, cfg);
    const auto& m = state.measure;
    // per-particle step step_size / (2 a_i): with a_i = 1/n this is the raw step step_size * n / 2
    const Vector<double> step = (cfg.step_size / 2) * m.weights().cwiseInverse();
    Matrix<double> points = m.points() - step.asDiagonal() * ev.grad_points;
    Matrix<double> logits = m.label_logits() - step.asDiagonal() * ev.grad_logits;
    if (!points.allFinite() || !logits.allFinite()) throw NumericalError("flow step produced non-finite particles");

    FlowState next{LabeledEmpiricalMeasure<double>(EmpiricalMeasure<double>(std::move(points), m.weights()),
                                                   std::move(logits)),
                   state.iter + 1, state.trace};
    if (cfg.record_timing)
        ev.record.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    next.trace.push_back(ev.record);
    return next;
}

LabeledEmpiricalMeasure<double> initial_particles(const std::vector<SamplerPtr>& inputs, const EmpiricalFlowConfig& cfg)
{
    const Index n = cfg.n_particles;
    const Index d = inputs.front()->dim();
    const int c = inputs.front()->n_classes();
    for (const auto& s : inputs) {
        require(s->dim() == d, "input measures have different dimensions");
        require(s->n_classes() == c, "input measures have different class counts");
    }
    Matrix<double> points;
    switch (cfg.init) {
    case InitMode::gaussian: {
        const auto batch = inputs.front()->sample(cfg.batch_size, derive_seed(cfg.seed, 0x1417, 0));
        const Vector<double> mean = batch.points.colwise().mean().transpose();
        Vector<double> sd =
            ((batch.points.rowwise() - mean.transpose()).array().square().colwise().mean()).sqrt().matrix().transpose();
        for (Index j = 0; j < d; ++j)
            if (!(sd(j) > 0)) sd(j) = 1;
        Rng rng = make_rng(cfg.seed, {0x1417, 1});
        points = standard_normal<double>(n, d, rng) * sd.asDiagonal();
        break;
    }
    case InitMode::subsample: points = inputs.front()->sample(n, derive_seed(cfg.seed, 0x1417, 2)).points; break;
    case InitMode::explicit_points:
        points = *cfg.init_points;
        require(points.cols() == d, "init_points dimension differs from the inputs");
        break;
    }
    Matrix<double> logits = Matrix<double>::Zero(n, std::max(c, 1));
    if (c > 0 && cfg.label_init == LabelInit::random) {
        Rng rng = make_rng(cfg.seed, {0x1417, 3});
        logits = standard_normal<double>(n, c, rng);
    }
    return LabeledEmpiricalMeasure<double>(EmpiricalMeasure<double>(std::move(points)), std::move(logits));
}

namespace {

std::vector<MiniBatch<double>> draw_batches(const std::vector<SamplerPtr>& inputs, const EmpiricalFlowConfig& cfg, int iter)
{
    std::vector<MiniBatch<double>> batches;
    batches.reserve(inputs.size());
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        auto b = inputs[k]->sample(cfg.batch_size, derive_seed(cfg.seed, 1, static_cast<std::uint64_t>(iter), k));
        b.source_index = static_cast<int>(k);
        batches.push_back(std::move(b));
    }
    return batches;
}

} // namespace

FlowResult run_flow(const std::vector<SamplerPtr>& inputs, const EmpiricalFlowConfig& cfg)
{
    cfg.validate(static_cast<Index>(inputs.size()));
    FlowState state{initial_particles(inputs, cfg), 0, {}};
    state.trace.reserve(static_cast<std::size_t>(cfg.n_iter) + 1);
    FlowResult out{state.measure, {}, {}, inputs.front()->n_classes() > 0};
    for (int t = 0; t < cfg.n_iter; ++t) {
        const auto t0 = std::chrono::steady_clock::now();
        state = flow_step(state, draw_batches(inputs, cfg, t), cfg);
        out.step_ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    auto final_eval = evaluate_step(state, draw_batches(inputs, cfg, cfg.n_iter), cfg);
    state.trace.push_back(final_eval.record);
    out.measure = state.measure;
    out.trace = std::move(state.trace);
    return out;
}

FlowResult fixed_point_baseline(const std::vector<DatasetSampler>& inputs, const EmpiricalFlowConfig& cfg)
{
    cfg.validate(static_cast<Index>(inputs.size()), true);
    std::vector<SamplerPtr> ptrs;
    for (const auto& s : inputs) ptrs.push_back(std::make_shared<DatasetSampler>(s));
    const auto init = initial_particles(ptrs, cfg);
    const auto lambda = cfg.lambda(static_cast<Index>(inputs.size()));
    const bool labeled = inputs.front().n_classes() > 0;
    const bool label_cost = labeled && cfg.label_weight > 0;

    std::vector<MiniBatch<double>> full;
    for (const auto& s : inputs) full.push_back(s.full());
    const auto& weights = init.weights();
    Matrix<double> z = init.points();
    Matrix<double> y = init.soft_labels();
    const double a = cfg.step_size;

    FlowResult out{init, {}, {}, labeled};
    auto evaluate = [&](int iter, Matrix<double>* mapped_z, Matrix<double>* mapped_y) {
        double b_hat = 0;
        std::optional<Matrix<double>> yl;
        if (label_cost) yl = y;
        for (std::size_t k = 0; k < full.size(); ++k) {
            std::optional<Matrix<double>> bl;
            if (label_cost) bl = full[k].labels;
            const auto c = joint_cost<double>(z, full[k].points, yl, bl, cfg.label_weight);
            const auto sol = solve<double>(weights, uniform_weights<double>(full[k].points.rows()), c, cfg.solver);
            b_hat += lambda[static_cast<Index>(k)] * sol.cost;
            if (mapped_z) *mapped_z += lambda[static_cast<Index>(k)] * barycentric_map(sol.plan, full[k].points);
            if (mapped_y && labeled) *mapped_y += lambda[static_cast<Index>(k)] * barycentric_map(sol.plan, *full[k].labels);
        }
        return TraceRecord{iter, b_hat, 0.0, 0.0, b_hat, 0.0};
    };
    for (int t = 0; t < cfg.n_iter; ++t) {
        const auto t0 = std::chrono::steady_clock::now();
        Matrix<double> tz = Matrix<double>::Zero(z.rows(), z.cols());
        Matrix<double> ty = Matrix<double>::Zero(y.rows(), y.cols());
        auto rec = evaluate(t, &tz, &ty);
        const double moved = a * std::max((tz - z).cwiseAbs().maxCoeff(), labeled ? (ty - y).cwiseAbs().maxCoeff() : 0.0);
        z = (1 - a) * z + a * tz;
        if (labeled) y = (1 - a) * y + a * ty;
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        if (cfg.record_timing) rec.wall_ms = ms;
        out.step_ms.push_back(ms);
        out.trace.push_back(rec);
        if (moved <= kFixedPointTol * std::max(1.0, z.cwiseAbs().maxCoeff())) break;
    }
    out.trace.push_back(evaluate(static_cast<int>(out.trace.size()), nullptr, nullptr));
    Matrix<double> logits = labeled ? logits_from_probabilities(y, 1e-12) : init.label_logits();
    out.measure = LabeledEmpiricalMeasure<double>(EmpiricalMeasure<double>(std::move(z), weights), std::move(logits));
    return out;
}

} // namespace baryflow
