#include "baryflow/pipeline.hpp"
#include "baryflow/samplers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace baryflow {

BarycenterKind parse_barycenter_kind(const std::string& s)
{
    if (s == "empirical") return BarycenterKind::empirical;
    if (s == "gmm") return BarycenterKind::gmm;
    if (s == "discrete_baseline") return BarycenterKind::discrete_baseline;
    throw ValidationError("unknown barycenter kind '" + s + "' (expected empirical, gmm or discrete_baseline)");
}

std::string to_string(BarycenterKind k)
{
    switch (k) {
    case BarycenterKind::empirical: return "empirical";
    case BarycenterKind::gmm: return "gmm";
    default: return "discrete_baseline";
    }
}

NearestNeighbor::NearestNeighbor(Matrix<double> points, Labels labels) : points_(std::move(points)), labels_(std::move(labels))
{
    require(points_.rows() >= 1, "classifier needs at least one training point");
    require(labels_.size() == points_.rows(), "classifier label count differs from point count");
}

Labels NearestNeighbor::predict(const Matrix<double>& x) const
{
    require(x.cols() == points_.cols(), "classifier input dimension differs from training data");
    Labels out(x.rows());
    for (Index i = 0; i < x.rows(); ++i) {
        Index best = 0;
        double best_d = (points_.row(0) - x.row(i)).squaredNorm();
        for (Index r = 1; r < points_.rows(); ++r) {
            const double d = (points_.row(r) - x.row(i)).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = r;
            }
        }
        out(i) = labels_(best);
    }
    return out;
}

double accuracy(const Labels& predicted, const Labels& truth)
{
    require(predicted.size() == truth.size() && truth.size() > 0, "accuracy: label vectors differ in length");
    return static_cast<double>((predicted.array() == truth.array()).count()) / static_cast<double>(truth.size());
}

namespace {

double ms_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

AdaptedModel msda_fit(const MsdaData& data, const MsdaConfig& cfg)
{
    require(!data.sources.empty(), "msda needs at least one source domain");
    const Index d = data.target_features.dim();
    const int c = data.sources.front().n_classes();
    for (const auto& s : data.sources) {
        require(s.dim() == d, "source and target dimensions differ");
        require(s.n_classes() == c, "source domains have different class counts");
    }
    std::map<std::string, double> wall;
    const auto t_total = std::chrono::steady_clock::now();

    Index pooled_n = 0;
    for (const auto& s : data.sources) pooled_n += s.size();
    Matrix<double> pooled(pooled_n, d);
    Labels pooled_labels(pooled_n);
    Index off = 0;
    for (const auto& s : data.sources) {
        pooled.middleRows(off, s.size()) = s.points();
        pooled_labels.segment(off, s.size()) = s.hard_labels();
        off += s.size();
    }
    NearestNeighbor source_only(pooled, pooled_labels);

    auto t0 = std::chrono::steady_clock::now();
    std::optional<LabeledEmpiricalMeasure<double>> bary;
    std::vector<TraceRecord> trace;
    switch (cfg.method) {
    case BarycenterKind::empirical: {
        EmpiricalFlowConfig fc = cfg.flow;
        if (fc.functional.target_weight > 0 && !fc.functional.target_measure) fc.functional.target_measure = data.target_features;
        std::vector<SamplerPtr> inputs;
        for (const auto& s : data.sources) inputs.push_back(std::make_shared<DatasetSampler>(DatasetSampler::from_measure(s)));
        auto r = run_flow(inputs, fc);
        bary = std::move(r.measure);
        trace = std::move(r.trace);
        break;
    }
    case BarycenterKind::discrete_baseline: {
        std::vector<DatasetSampler> inputs;
        for (const auto& s : data.sources) inputs.push_back(DatasetSampler::from_measure(s));
        auto r = fixed_point_baseline(inputs, cfg.flow);
        bary = std::move(r.measure);
        trace = std::move(r.trace);
        break;
    }
    case BarycenterKind::gmm: {
        GmmFlowConfig gc = cfg.gmm_flow;
        if (gc.functional.target_weight > 0 && !gc.functional.target_measure) gc.functional.target_measure = data.target_features;
        std::vector<LabeledGMM<double>> inputs;
        for (std::size_t k = 0; k < data.sources.size(); ++k) {
            EmOptions opt;
            opt.components_per_class = cfg.em_components_per_class;
            opt.seed = derive_seed(gc.seed, 0x656d, k);
            opt.diagonal = gc.diag_only;
            inputs.push_back(em_fit<double>(data.sources[k].points(), data.sources[k].hard_labels(), c, opt).gmm);
        }
        auto r = run_gmm_flow(inputs, gc);
        const auto batch = GmmSampler(r.gmm).sample(cfg.gmm_particles, derive_seed(gc.seed, 0x7061));
        const Labels lab = batch.labels ? argmax_rows(*batch.labels) : Labels(Labels::Zero(batch.points.rows()));
        bary = LabeledEmpiricalMeasure<double>::from_labels(EmpiricalMeasure<double>(batch.points), lab, std::max(c, 1));
        trace = std::move(r.trace);
        break;
    }
    }
    wall["barycenter"] = ms_since(t0);

    t0 = std::chrono::steady_clock::now();
    const auto& target = data.target_features;
    const auto cost = joint_cost<double>(bary->points(), target.points());
    const bool exact = std::max(bary->size(), target.size()) <= cfg.exact_alignment_limit;
    const auto sol = exact ? solve_exact<double>(bary->weights(), target.weights(), cost)
                           : solve<double>(bary->weights(), target.weights(), cost, EntropicSolver{});
    const Matrix<double> mapped = barycentric_map(sol.plan, target.points());
    wall["alignment"] = ms_since(t0);

    NearestNeighbor adapted(mapped, bary->hard_labels());
    wall["total"] = ms_since(t_total);
    return AdaptedModel{std::move(source_only), std::move(adapted), std::move(*bary), std::move(trace), std::move(wall)};
}

nlohmann::json MsdaReport::to_json() const
{
    nlohmann::json j;
    j["schema_version"] = kReportSchemaVersion;
    j["barycenter_kind"] = to_string(barycenter_kind);
    j["accuracy_source_only"] = accuracy_source_only;
    j["accuracy_adapted"] = accuracy_adapted;
    j["wall_ms"] = wall_ms;
    j["config"] = config;
    return j;
}

MsdaReport msda_adapt(const MsdaData& data, const TargetLabels& eval, const MsdaConfig& cfg)
{
    require(eval.labels.size() == data.target_features.size(), "target label count differs from target features");
    auto model = msda_fit(data, cfg);
    const auto t0 = std::chrono::steady_clock::now();
    MsdaReport r;
    r.barycenter_kind = cfg.method;
    r.accuracy_source_only = accuracy(model.source_only.predict(data.target_features.points()), eval.labels);
    r.accuracy_adapted = accuracy(model.adapted.predict(data.target_features.points()), eval.labels);
    r.wall_ms = model.wall_ms;
    r.wall_ms["evaluation"] = ms_since(t0);
    return r;
}

nlohmann::json ConvergenceReport::to_json() const
{
    nlohmann::json j;
    j["schema_version"] = kReportSchemaVersion;
    j["decay_rate"] = decay_rate;
    j["intercept"] = intercept;
    j["plateau"] = plateau;
    j["r2"] = r2;
    j["window_end"] = window_end;
    j["trace"] = trace;
    return j;
}

ConvergenceReport convergence_report(const std::vector<double>& trace)
{
    const Index n = static_cast<Index>(trace.size());
    require(n >= 50, "convergence_report needs a trace of length >= 50");
    for (double v : trace) require(std::isfinite(v), "convergence_report: non-finite trace value");
    ConvergenceReport r;
    r.trace = trace;
    const Index tail = std::max<Index>(1, n / 5);
    r.plateau = std::max(0.0, std::accumulate(trace.end() - tail, trace.end(), 0.0) / static_cast<double>(tail));

    std::vector<double> logr(static_cast<std::size_t>(n));
    for (Index t = 0; t < n; ++t) logr[static_cast<std::size_t>(t)] = std::log(std::max(trace[static_cast<std::size_t>(t)] - r.plateau, 1e-12));
    const double r0 = std::max(trace.front() - r.plateau, 1e-12);
    Index end = n - tail;
    for (Index t = 1; t < n - tail; ++t)
        if (trace[static_cast<std::size_t>(t)] - r.plateau < 0.1 * r0) {
            end = t;
            break;
        }
    r.window_end = std::min(n, std::max<Index>(end, 3));

    const Index m = r.window_end;
    double sx = 0, sy = 0;
    for (Index t = 0; t < m; ++t) {
        sx += static_cast<double>(t);
        sy += logr[static_cast<std::size_t>(t)];
    }
    const double mx = sx / static_cast<double>(m), my = sy / static_cast<double>(m);
    double sxx = 0, sxy = 0, syy = 0;
    for (Index t = 0; t < m; ++t) {
        const double dx = static_cast<double>(t) - mx, dy = logr[static_cast<std::size_t>(t)] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    const double slope = sxx > 0 ? sxy / sxx : 0.0;
    r.intercept = my - slope * mx;
    r.decay_rate = std::max(0.0, -slope);
    if (syy <= 0) {
        r.r2 = 1.0;
    } else {
        double ss_res = 0;
        for (Index t = 0; t < m; ++t) {
            const double e = logr[static_cast<std::size_t>(t)] - (r.intercept + slope * static_cast<double>(t));
            ss_res += e * e;
        }
        r.r2 = 1.0 - ss_res / syy;
    }
    return r;
}

EmpiricalMeasure<double> subsample(const EmpiricalMeasure<double>& m, Index max_points, std::uint64_t seed)
{
    require(max_points >= 1, "subsample: max_points must be >= 1");
    if (m.size() <= max_points) return m;
    std::vector<Index> idx(static_cast<std::size_t>(m.size()));
    std::iota(idx.begin(), idx.end(), Index{0});
    Rng rng = make_rng(seed, {0x5562});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(max_points));
    std::sort(idx.begin(), idx.end());
    Matrix<double> p(max_points, m.dim());
    Vector<double> w(max_points);
    for (Index i = 0; i < max_points; ++i) {
        p.row(i) = m.points().row(idx[static_cast<std::size_t>(i)]);
        w(i) = m.weights()(idx[static_cast<std::size_t>(i)]);
    }
    return EmpiricalMeasure<double>(std::move(p), w / w.sum());
}

double w2_to_reference(const EmpiricalMeasure<double>& result, const EmpiricalMeasure<double>& reference,
                       std::uint64_t seed, Index max_points)
{
    require(result.dim() == reference.dim(), "w2_to_reference: dimension mismatch");
    return w2_empirical(subsample(result, max_points, derive_seed(seed, 0x7731, 0)),
                        subsample(reference, max_points, derive_seed(seed, 0x7731, 1)));
}

} // namespace baryflow
