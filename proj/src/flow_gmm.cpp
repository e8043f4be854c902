#include "baryflow/flow_gmm.hpp"
#include "baryflow/parallel.hpp"
#include "baryflow/samplers.hpp"

#include <chrono>

namespace baryflow {

GmmInit parse_gmm_init(const std::string& s)
{
    if (s == "em") return GmmInit::em;
    if (s == "random") return GmmInit::random;
    throw ValidationError("unknown gmm init '" + s + "' (expected em or random)");
}

std::string to_string(GmmInit m) { return m == GmmInit::em ? "em" : "random"; }

void GmmFlowConfig::validate(Index n_inputs) const
{
    require(n_inputs >= 1, "barycenter needs at least one input mixture");
    require(n_components >= 1, "n_components must be >= 1");
    require(std::isfinite(step_size) && step_size > 0, "step_size must be > 0");
    require(std::isfinite(label_weight) && label_weight >= 0, "label_weight must be >= 0");
    require(mc_samples >= 1, "mc_samples must be >= 1");
    require(n_iter >= 0, "n_iter must be >= 0");
    require(init_samples >= 1, "init_samples must be >= 1");
    require(target_samples >= 1, "target_samples must be >= 1");
    functional.validate();
    if (coordinates) require(coordinates->size() == n_inputs, "coordinates length differs from the number of inputs");
    (void)lambda(n_inputs);
}

BarycentricCoordinates<double> GmmFlowConfig::lambda(Index n_inputs) const
{
    return coordinates ? BarycentricCoordinates<double>(*coordinates) : BarycentricCoordinates<double>::uniform(n_inputs);
}

namespace {

constexpr double kCholFloor = 1e-6;

Matrix<double> softmax_pullback(const Matrix<double>& y, const Matrix<double>& g)
{
    const Vector<double> inner = (y.array() * g.array()).rowwise().sum();
    return (y.array() * (g.colwise() - inner).array()).matrix();
}

Vector<double> softmax_vector(const Vector<double>& logits)
{
    return softmax_rows(logits.transpose()).transpose();
}

LabeledGMM<double> rebuild(const Vector<double>& weights, std::vector<GaussianComponent<double>> comps,
                           const std::optional<Matrix<double>>& label_logits)
{
    std::optional<Matrix<double>> nu;
    if (label_logits) nu = softmax_rows(*label_logits);
    return LabeledGMM<double>(weights, std::move(comps), std::move(nu));
}

bool mixture_labeled(const GmmFlowState& state, const std::vector<LabeledGMM<double>>& inputs)
{
    if (!state.label_logits) return false;
    for (const auto& q : inputs)
        if (!q.labels()) return false;
    return true;
}

} // namespace

GmmFlowState make_gmm_state(const LabeledGMM<double>& gmm)
{
    Vector<double> wl = gmm.weights().array().max(1e-300).log().matrix();
    std::optional<Matrix<double>> ll;
    if (gmm.labels()) ll = logits_from_probabilities(*gmm.labels());
    return GmmFlowState{rebuild(softmax_vector(wl), gmm.components(), ll), std::move(wl), std::move(ll), 0, {}, 0};
}

GmmStepEvaluation evaluate_gmm_step(const GmmFlowState& state, const std::vector<LabeledGMM<double>>& inputs,
                                    const GmmFlowConfig& cfg)
{
    const Index k_inputs = static_cast<Index>(inputs.size());
    require(k_inputs >= 1, "gmm flow needs at least one input mixture");
    const auto lambda = cfg.lambda(k_inputs);
    const auto& p = state.gmm;
    const Index n = p.size();
    const Index d = p.dim();
    for (const auto& q : inputs) {
        require(q.dim() == d, "input mixture dimension differs from the barycenter");
        if (q.labels() && p.labels())
            require(q.n_classes() == p.n_classes(), "input mixture class count differs from the barycenter");
    }
    const bool labeled = mixture_labeled(state, inputs);
    const bool label_cost = labeled && cfg.label_weight > 0;
    Matrix<double> nu;
    if (labeled) nu = *p.labels();

    GmmStepEvaluation ev;
    ev.omegas.resize(static_cast<std::size_t>(k_inputs));
    std::vector<double> costs(static_cast<std::size_t>(k_inputs));
    std::vector<Vector<double>> duals(static_cast<std::size_t>(k_inputs));
    parallel_for(static_cast<int>(k_inputs), [&](int k) {
        const auto& q = inputs[static_cast<std::size_t>(k)];
        CostMatrix<double> c{Matrix<double>(n, q.size())};
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < q.size(); ++j) {
                c.values(i, j) = bures_w2_sq(p.component(i), q.component(j));
                if (label_cost) c.values(i, j) += cfg.label_weight * (nu.row(i) - q.labels()->row(j)).squaredNorm();
            }
        auto sol = solve_exact<double>(p.weights(), q.weights(), c);
        costs[static_cast<std::size_t>(k)] = sol.cost;
        duals[static_cast<std::size_t>(k)] = std::move(sol.dual_a);
        ev.omegas[static_cast<std::size_t>(k)] = std::move(sol.plan);
    });

    ev.grad_mu.assign(static_cast<std::size_t>(n), Vector<double>::Zero(d));
    ev.grad_chol.assign(static_cast<std::size_t>(n), Matrix<double>::Zero(d, d));
    ev.grad_weight_logits = Vector<double>::Zero(n);
    ev.grad_label_logits = Matrix<double>::Zero(n, labeled ? nu.cols() : 0);
    Matrix<double> grad_nu = Matrix<double>::Zero(n, labeled ? nu.cols() : 0);
    Vector<double> grad_pi = Vector<double>::Zero(n);
    const double beta_eff = cfg.label_weight > 0 ? cfg.label_weight : 1.0;
    double b_hat = 0;
    for (Index k = 0; k < k_inputs; ++k) {
        const auto& q = inputs[static_cast<std::size_t>(k)];
        const auto& w = ev.omegas[static_cast<std::size_t>(k)].coupling;
        b_hat += lambda[k] * costs[static_cast<std::size_t>(k)];
        grad_pi += lambda[k] * duals[static_cast<std::size_t>(k)];
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < q.size(); ++j) {
                const double wij = w(i, j);
                if (wij <= 0) continue;
                const auto g = bures_w2_grad(p.component(i), q.component(j));
                ev.grad_mu[static_cast<std::size_t>(i)] += lambda[k] * wij * g.dmu;
                ev.grad_chol[static_cast<std::size_t>(i)] += lambda[k] * wij * g.dchol;
                if (labeled) grad_nu.row(i) += 2 * beta_eff * lambda[k] * wij * (nu.row(i) - q.labels()->row(j));
            }
    }
    if (labeled) ev.grad_label_logits = softmax_pullback(nu, grad_nu);
    if (cfg.flow_weights)
        ev.grad_weight_logits = (p.weights().array() * (grad_pi.array() - p.weights().dot(grad_pi))).matrix();

    const auto& f = cfg.functional;
    double v = 0, u = 0;
    if (labeled && f.entropy_weight > 0) {
        const auto e = entropy_potential(*state.label_logits);
        v += f.entropy_weight * e.value;
        ev.grad_label_logits += f.entropy_weight * e.grad;
    }
    if (f.target_weight > 0) {
        const auto s = sample_reparam(p, cfg.target_samples, derive_seed(cfg.seed, 2, static_cast<std::uint64_t>(state.iter)));
        const auto t = target_potential(EmpiricalMeasure<double>(s.points), *f.target_measure);
        v += f.target_weight * t.value;
        for (Index r = 0; r < s.points.rows(); ++r) {
            const auto c = static_cast<std::size_t>(s.component_index(r));
            const Vector<double> g = f.target_weight * t.grad_points.row(r).transpose();
            ev.grad_mu[c] += g;
            ev.grad_chol[c] += Matrix<double>((g * s.eps.row(r)).triangularView<Eigen::Lower>());
        }
    }
    if (f.internal_weight > 0) {
        const auto g = internal_energy_mc(p, cfg.mc_samples, derive_seed(cfg.seed, 3, static_cast<std::uint64_t>(state.iter)));
        v += f.internal_weight * g.value;
        for (Index i = 0; i < n; ++i) {
            ev.grad_mu[static_cast<std::size_t>(i)] += f.internal_weight * g.grad_mu[static_cast<std::size_t>(i)];
            ev.grad_chol[static_cast<std::size_t>(i)] += f.internal_weight * g.grad_chol[static_cast<std::size_t>(i)];
        }
        if (cfg.flow_weights) ev.grad_weight_logits += f.internal_weight * g.grad_weight_logits;
    }
    if (labeled && f.repulsion_weight > 0) {
        Matrix<double> means(n, d);
        for (Index i = 0; i < n; ++i) means.row(i) = p.component(i).mean().transpose();
        const auto h = hinge_repulsion(means, argmax_rows(nu), f.repulsion_margin, f.repulsion_metric);
        u += f.repulsion_weight * h.value;
        for (Index i = 0; i < n; ++i)
            ev.grad_mu[static_cast<std::size_t>(i)] += f.repulsion_weight * h.grad.row(i).transpose();
    }

    double mean_sq = 0, chol_sq = 0;
    for (const auto& c : p.components()) {
        mean_sq += c.mean().squaredNorm();
        chol_sq += c.chol().squaredNorm();
    }
    ev.record = TraceRecord{state.iter, b_hat, v, u, b_hat + v + u, 0.0, std::sqrt(mean_sq), std::sqrt(chol_sq)};
    return ev;
}

GmmFlowState gmm_flow_step(const GmmFlowState& state, const std::vector<LabeledGMM<double>>& inputs,
                           const GmmFlowConfig& cfg)
{
    const auto t0 = std::chrono::steady_clock::now();
    auto ev = evaluate_gmm_step(state, inputs, cfg);
    const auto& p = state.gmm;
    const Index n = p.size();
    const Index d = p.dim();
    int clamps = 0;
    std::vector<GaussianComponent<double>> comps;
    comps.reserve(static_cast<std::size_t>(n));
    std::optional<Matrix<double>> label_logits = state.label_logits;
    for (Index i = 0; i < n; ++i) {
        const double step = cfg.step_size / (2 * std::max(p.weights()(i), 1e-12));
        const auto& c = p.component(i);
        Vector<double> mu = c.mean() - step * ev.grad_mu[static_cast<std::size_t>(i)];
        Matrix<double> dl = ev.grad_chol[static_cast<std::size_t>(i)].triangularView<Eigen::Lower>();
        if (cfg.diag_only) dl = Matrix<double>(dl.diagonal().asDiagonal());
        Matrix<double> l = c.chol() - step * dl;
        for (Index r = 0; r < d; ++r)
            if (!(l(r, r) >= kCholFloor)) {
                if (!std::isfinite(l(r, r)) && std::isfinite(c.chol()(r, r))) l(r, r) = c.chol()(r, r);
                l(r, r) = std::max(l(r, r), kCholFloor);
                ++clamps;
            }
        if (!mu.allFinite() || !l.allFinite()) throw NumericalError("gmm flow step produced non-finite parameters");
        comps.emplace_back(std::move(mu), std::move(l));
        if (label_logits && ev.grad_label_logits.cols() > 0)
            label_logits->row(i) -= step * ev.grad_label_logits.row(i);
    }
    Vector<double> wl = state.weight_logits;
    if (cfg.flow_weights) wl -= cfg.step_size * ev.grad_weight_logits;
    if (!wl.allFinite() || (label_logits && !label_logits->allFinite()))
        throw NumericalError("gmm flow step produced non-finite logits");

    GmmFlowState next{rebuild(softmax_vector(wl), std::move(comps), label_logits), std::move(wl), std::move(label_logits),
                      state.iter + 1, state.trace, state.clamp_warnings + clamps};
    if (cfg.record_timing)
        ev.record.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    next.trace.push_back(ev.record);
    return next;
}

LabeledGMM<double> initial_mixture(const std::vector<LabeledGMM<double>>& inputs, const GmmFlowConfig& cfg)
{
    require(!inputs.empty(), "gmm flow needs at least one input mixture");
    const Index d = inputs.front().dim();
    bool labeled = true;
    for (const auto& q : inputs) {
        require(q.dim() == d, "input mixtures have different dimensions");
        labeled = labeled && q.labels().has_value();
    }
    const int c = labeled ? inputs.front().n_classes() : 0;
    if (labeled)
        for (const auto& q : inputs) require(q.n_classes() == c, "input mixtures have different class counts");

    const Index per = cfg.init_samples;
    Matrix<double> pooled(per * static_cast<Index>(inputs.size()), d);
    Labels pooled_labels(pooled.rows());
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const auto batch = GmmSampler(inputs[k]).sample(per, derive_seed(cfg.seed, 0x6d6d, k));
        pooled.middleRows(static_cast<Index>(k) * per, per) = batch.points;
        if (labeled) pooled_labels.segment(static_cast<Index>(k) * per, per) = argmax_rows(*batch.labels);
    }

    if (cfg.init == GmmInit::em) {
        EmOptions opt;
        opt.seed = derive_seed(cfg.seed, 0x6d6d, 0xe1);
        opt.diagonal = cfg.diag_only;
        if (labeled) {
            require(cfg.n_components % c == 0, "n_components must be a multiple of the class count for labeled inputs");
            opt.components_per_class = static_cast<int>(cfg.n_components / c);
            return em_fit<double>(pooled, pooled_labels, c, opt).gmm;
        }
        opt.components_per_class = static_cast<int>(cfg.n_components);
        return em_fit<double>(pooled, std::nullopt, 0, opt).gmm;
    }

    const Vector<double> mean = pooled.colwise().mean().transpose();
    const Vector<double> sd =
        ((pooled.rowwise() - mean.transpose()).array().square().colwise().mean()).sqrt().max(kCholFloor).matrix().transpose();
    Rng rng = make_rng(cfg.seed, {0x6d6d, 0xa4});
    std::uniform_int_distribution<Index> pick(0, pooled.rows() - 1);
    std::vector<GaussianComponent<double>> comps;
    for (Index i = 0; i < cfg.n_components; ++i)
        comps.emplace_back(pooled.row(pick(rng)).transpose(), Matrix<double>(sd.asDiagonal()));
    std::optional<Matrix<double>> nu;
    if (labeled) nu = Matrix<double>::Constant(cfg.n_components, c, 1.0 / c);
    return LabeledGMM<double>(uniform_weights<double>(cfg.n_components), std::move(comps), std::move(nu));
}

GmmFlowResult run_gmm_flow(const std::vector<LabeledGMM<double>>& inputs, const GmmFlowConfig& cfg,
                           const std::optional<LabeledGMM<double>>& init)
{
    cfg.validate(static_cast<Index>(inputs.size()));
    GmmFlowState state = make_gmm_state(init ? *init : initial_mixture(inputs, cfg));
    require(state.gmm.dim() == inputs.front().dim(), "initial mixture dimension differs from the inputs");
    GmmFlowResult out{state.gmm, {}, {}, 0};
    for (int t = 0; t < cfg.n_iter; ++t) {
        const auto t0 = std::chrono::steady_clock::now();
        state = gmm_flow_step(state, inputs, cfg);
        out.step_ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    state.trace.push_back(evaluate_gmm_step(state, inputs, cfg).record);
    out.gmm = state.gmm;
    out.trace = std::move(state.trace);
    out.clamp_warnings = state.clamp_warnings;
    return out;
}

} // namespace baryflow
