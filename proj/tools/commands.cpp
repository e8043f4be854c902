#include "baryflow/cli.hpp"
#include "baryflow/gmm_io.hpp"
#include "baryflow/parallel.hpp"
#include "baryflow/samplers.hpp"
#include "config.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#ifndef BARYFLOW_GIT_DESCRIBE
#define BARYFLOW_GIT_DESCRIBE "unknown"
#endif

namespace baryflow::cli {

namespace fs = std::filesystem;

std::string git_describe() { return BARYFLOW_GIT_DESCRIBE; }

namespace {

template <class F>
int guarded(std::ostream& err, F&& body)
{
    try {
        return body();
    } catch (const ValidationError& e) {
        err << "error[config]: " << e.what() << '\n';
        return kConfigError;
    } catch (const NumericalError& e) {
        err << "error[numerical]: " << e.what() << '\n';
        return kNumericalError;
    } catch (const json::exception& e) {
        err << "error[config]: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        err << "error[io]: " << e.what() << '\n';
        return kConfigError;
    }
}

double ms_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

void expect_command(ConfigReader& r, const std::string& name)
{
    const std::string c = r.string("command", name);
    if (c != name) r.fail("command", "config is for '" + c + "', not '" + name + "'");
}

fs::path prepare_output(const std::string& dir)
{
    fs::path p(dir);
    fs::create_directories(p);
    return p;
}

void write_json(const fs::path& path, const json& j)
{
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    os << j.dump(2) << '\n';
}

void write_text(const fs::path& path, const std::string& s)
{
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    os << s;
}

json base_report(const std::string& command, const json& config)
{
    json j;
    j["schema_version"] = kReportSchemaVersion;
    j["command"] = command;
    j["git_describe"] = git_describe();
    j["config"] = config;
    return j;
}

std::string solver_name(const SolverChoice& s)
{
    if (std::holds_alternative<ExactSolver>(s)) return "exact";
    if (std::holds_alternative<EntropicSolver>(s)) return "entropic";
    return "auto (exact up to " + std::to_string(kExactEntryLimit) + " cost entries, entropic above)";
}

std::optional<Vector<double>> read_coordinates(ConfigReader& r)
{
    if (!r.has("coordinates")) {
        r.skip("coordinates");
        return std::nullopt;
    }
    const auto v = r.numbers("coordinates");
    return Eigen::Map<const Vector<double>>(v.data(), static_cast<Index>(v.size()));
}

// ---- inputs ----

LabeledEmpiricalMeasure<double> load_measure(const InputSpec& s)
{
    if (s.type == "swiss_roll") return swiss_roll(s.n, s.noise_std, s.seed, s.n_classes);
    const auto t = load_csv(s.path, s.label_column);
    if (t.labels) return t.labeled_measure();
    return LabeledEmpiricalMeasure<double>(t.measure(), Matrix<double>::Zero(t.features.rows(), 1));
}

SamplerPtr make_sampler(const InputSpec& s)
{
    if (s.type == "gaussian") return std::make_shared<GaussianSampler>(GaussianComponent<double>::from_covariance(s.mean, s.cov));
    if (s.type == "gmm") return std::make_shared<GmmSampler>(load_gmm(s.path));
    if (s.type == "csv") {
        const auto t = load_csv(s.path, s.label_column);
        return std::make_shared<DatasetSampler>(t.features, t.labels, t.n_classes());
    }
    return std::make_shared<DatasetSampler>(DatasetSampler::from_measure(load_measure(s)));
}

LabeledGMM<double> make_mixture(const InputSpec& s, int components_per_class, std::uint64_t seed)
{
    if (s.type == "gaussian")
        return LabeledGMM<double>(Vector<double>::Ones(1), {GaussianComponent<double>::from_covariance(s.mean, s.cov)});
    if (s.type == "gmm") return load_gmm(s.path);
    EmOptions opt;
    opt.components_per_class = components_per_class;
    opt.seed = seed;
    if (s.type == "csv") {
        const auto t = load_csv(s.path, s.label_column);
        return em_fit<double>(t.features, t.labels, t.n_classes(), opt).gmm;
    }
    const auto m = load_measure(s);
    return em_fit<double>(m.points(), m.hard_labels(), m.n_classes(), opt).gmm;
}

EmpiricalMeasure<double> make_target(const InputSpec& s, std::uint64_t seed)
{
    if (s.type == "csv" || s.type == "swiss_roll") return load_measure(s).base();
    return EmpiricalMeasure<double>(make_sampler(s)->sample(512, derive_seed(seed, 0x7467)).points);
}

// ---- barycenter ----

struct BarycenterPlan {
    BarycenterKind kind = BarycenterKind::empirical;
    std::vector<InputSpec> inputs;
    std::optional<InputSpec> target;
    EmpiricalFlowConfig flow;
    GmmFlowConfig gmm;
    int em_components_per_class = 1;
    std::string output_dir;
};

BarycenterPlan parse_barycenter(const json& j)
{
    ConfigReader r(j, "");
    expect_command(r, "barycenter");
    BarycenterPlan p;
    p.kind = parse_barycenter_kind(r.string("kind", "empirical"));
    for (auto& c : r.children("inputs")) p.inputs.push_back(read_input(c));
    if (p.inputs.empty()) r.fail("inputs", "needs at least one input");
    const auto coords = read_coordinates(r);
    const auto seed = r.seed("seed", 0);
    p.output_dir = r.string("output_dir");
    p.em_components_per_class = static_cast<int>(r.integer("em_components_per_class", 1));
    if (p.em_components_per_class < 1) r.fail("em_components_per_class", "must be >= 1");
    if (r.has("flow")) read_flow(r.child("flow"), p.flow);
    else r.skip("flow");
    if (r.has("gmm_flow")) read_gmm_flow(r.child("gmm_flow"), p.gmm);
    else r.skip("gmm_flow");
    FunctionalSpec<double> f;
    if (r.has("functional")) read_functional(r.child("functional"), f, p.target);
    else r.skip("functional");
    r.finish();

    p.flow.seed = p.gmm.seed = seed;
    p.flow.coordinates = p.gmm.coordinates = coords;
    // the target measure is loaded later; a placeholder keeps validation honest
    if (f.target_weight > 0) {
        if (!p.target) throw ValidationError("config key 'functional.target': required when target_weight > 0");
        f.target_measure = EmpiricalMeasure<double>(Matrix<double>::Zero(1, 1));
    }
    p.flow.functional = p.gmm.functional = f;
    const Index k = static_cast<Index>(p.inputs.size());
    if (p.kind == BarycenterKind::gmm) p.gmm.validate(k);
    else p.flow.validate(k, p.kind == BarycenterKind::discrete_baseline);
    return p;
}

int run_barycenter(const json& j, std::ostream& out)
{
    auto p = parse_barycenter(j);
    const auto t_total = std::chrono::steady_clock::now();
    const fs::path dir = prepare_output(p.output_dir);
    json report = base_report("barycenter", j);
    report["barycenter_kind"] = to_string(p.kind);
    std::optional<EmpiricalMeasure<double>> target;
    if (p.target) target = make_target(*p.target, p.flow.seed);
    if (target) p.flow.functional.target_measure = p.gmm.functional.target_measure = target;

    out << "barycenter: kind=" << to_string(p.kind) << " inputs=" << p.inputs.size() << '\n';
    std::vector<TraceRecord> trace;
    std::vector<double> step_ms;
    bool with_norms = false;
    if (p.kind == BarycenterKind::gmm) {
        std::vector<LabeledGMM<double>> inputs;
        for (std::size_t k = 0; k < p.inputs.size(); ++k)
            inputs.push_back(make_mixture(p.inputs[k], p.em_components_per_class, derive_seed(p.gmm.seed, 0x656d, k)));
        auto r = run_gmm_flow(inputs, p.gmm);
        save_gmm((dir / "barycenter.json").string(), r.gmm);
        trace = std::move(r.trace);
        step_ms = std::move(r.step_ms);
        with_norms = true;
        report["cholesky_clamp_warnings"] = r.clamp_warnings;
        report["component_functionals"] = "entropy on component label logits, repulsion on component means";
        if (r.clamp_warnings > 0) out << "warning: " << r.clamp_warnings << " Cholesky diagonal entries clamped\n";
        out << "wrote " << (dir / "barycenter.json").string() << '\n';
    } else {
        FlowResult r = [&] {
            if (p.kind == BarycenterKind::empirical) {
                std::vector<SamplerPtr> inputs;
                for (const auto& s : p.inputs) inputs.push_back(make_sampler(s));
                return run_flow(inputs, p.flow);
            }
            std::vector<DatasetSampler> inputs;
            for (const auto& s : p.inputs) {
                if (s.type != "csv" && s.type != "swiss_roll")
                    throw ValidationError("discrete_baseline needs finite datasets (csv or swiss_roll inputs)");
                const auto m = load_measure(s);
                inputs.push_back(s.type == "csv" && !s.label_column ? DatasetSampler(m.points())
                                                                     : DatasetSampler::from_measure(m));
            }
            return fixed_point_baseline(inputs, p.flow);
        }();
        std::optional<Labels> labels;
        if (r.labeled) labels = r.measure.hard_labels();
        save_csv((dir / "barycenter.csv").string(),
                 make_table(r.measure.points(), labels, r.labeled ? r.measure.n_classes() : 0));
        trace = std::move(r.trace);
        step_ms = std::move(r.step_ms);
        report["solver"] = solver_name(p.flow.solver);
        out << "wrote " << (dir / "barycenter.csv").string() << '\n';
    }
    write_trace_csv((dir / "trace.csv").string(), trace, with_norms);
    out << "wrote " << (dir / "trace.csv").string() << '\n';
    if (trace.size() >= 50) report["convergence"] = convergence_report(b_hat_series(trace)).to_json();
    report["final_objective"] = trace.empty() ? 0.0 : trace.back().F;
    report["wall_ms"] = {{"steps", step_ms}, {"total", ms_since(t_total)}};
    write_json(dir / "report.json", report);
    out << "wrote " << (dir / "report.json").string() << '\n';
    return kOk;
}

// ---- toy ----

struct ToyPlan {
    std::string family = "gaussian";
    Index n_samples = 800;
    double noise_std = 0.5;
    int k = 4;
    std::vector<std::string> solvers{"wgf", "wgf-gmm", "fixed-point"};
    EmpiricalFlowConfig flow;
    GmmFlowConfig gmm;
    int gmm_components_per_measure = 4;
    Index gmm_particles = 256;
    std::uint64_t seed = 0;
    bool record_timing = false;
    std::string output_dir;
};

ToyPlan parse_toy(const json& j)
{
    ConfigReader r(j, "");
    expect_command(r, "toy");
    ToyPlan p;
    p.flow.n_particles = 256;
    p.flow.batch_size = 256;
    p.flow.n_iter = 200;
    p.gmm.n_components = 4;
    p.gmm.n_iter = 200;
    p.family = r.string("family", p.family);
    if (p.family != "gaussian" && p.family != "swiss_roll") r.fail("family", "must be gaussian or swiss_roll");
    p.n_samples = r.integer("n_samples", p.n_samples);
    if (p.n_samples < 2) r.fail("n_samples", "must be >= 2");
    p.noise_std = r.number("noise_std", p.noise_std);
    p.k = static_cast<int>(r.integer("k", p.k));
    if (p.k < 1 || p.k > 4) r.fail("k", "must lie in [1, 4]");
    if (r.has("solvers")) p.solvers = r.strings("solvers");
    else r.skip("solvers");
    for (const auto& s : p.solvers)
        if (s != "wgf" && s != "wgf-gmm" && s != "fixed-point")
            r.fail("solvers", "unknown solver '" + s + "' (expected wgf, wgf-gmm or fixed-point)");
    if (r.has("flow")) read_flow(r.child("flow"), p.flow);
    else r.skip("flow");
    if (r.has("gmm_flow")) read_gmm_flow(r.child("gmm_flow"), p.gmm);
    else r.skip("gmm_flow");
    p.gmm_components_per_measure = static_cast<int>(r.integer("gmm_components_per_measure", p.gmm_components_per_measure));
    if (p.gmm_components_per_measure < 1) r.fail("gmm_components_per_measure", "must be >= 1");
    p.gmm_particles = r.integer("gmm_particles", p.gmm_particles);
    if (p.gmm_particles < 1) r.fail("gmm_particles", "must be >= 1");
    p.seed = r.seed("seed", 0);
    p.output_dir = r.string("output_dir");
    r.finish();
    p.flow.seed = p.gmm.seed = p.seed;
    p.record_timing = p.flow.record_timing;
    p.flow.validate(p.k, false);
    p.gmm.validate(p.k);
    return p;
}

struct ToyFamily {
    std::vector<LabeledEmpiricalMeasure<double>> measures;
    Matrix<double> reference;
};

ToyFamily build_family(const ToyPlan& p)
{
    LabeledEmpiricalMeasure<double> q0 = [&] {
        if (p.family == "swiss_roll") return swiss_roll(p.n_samples, p.noise_std, derive_seed(p.seed, 0x7130));
        Rng rng = make_rng(p.seed, {0x7130});
        return LabeledEmpiricalMeasure<double>(EmpiricalMeasure<double>(standard_normal<double>(p.n_samples, 2, rng)),
                                               Matrix<double>::Zero(p.n_samples, 1));
    }();
    q0 = standardize(q0);
    const auto maps = default_family(p.k);
    ToyFamily f{location_scatter_family(q0, maps), {}};
    const auto lambda = uniform_weights<double>(p.k);
    std::vector<GaussianComponent<double>> gs;
    Vector<double> bbar = Vector<double>::Zero(2);
    for (int k = 0; k < p.k; ++k) {
        const auto& m = maps[static_cast<std::size_t>(k)];
        gs.push_back(GaussianComponent<double>::from_covariance(m.b, m.A * m.A.transpose()));
        bbar += lambda(k) * m.b;
    }
    const auto bary = fixed_point_gaussian_barycenter(gs, lambda);
    const Matrix<double> root = matrix_sqrt_psd(bary.barycenter.covariance());
    f.reference = (q0.points() * root).rowwise() + bbar.transpose();
    return f;
}

int run_toy(const json& j, std::ostream& out)
{
    const auto p = parse_toy(j);
    const fs::path dir = prepare_output(p.output_dir);
    json report = base_report("toy", j);
    const auto fam = build_family(p);
    const EmpiricalMeasure<double> reference(fam.reference);
    save_csv((dir / "reference.csv").string(), make_table(fam.reference));

    std::vector<SamplerPtr> samplers;
    std::vector<DatasetSampler> datasets;
    for (const auto& m : fam.measures) {
        datasets.emplace_back(m.points());
        samplers.push_back(std::make_shared<DatasetSampler>(m.points()));
    }

    std::ostringstream table;
    table << "solver,w2_to_ref,wall_ms\n";
    json timings = json::object();
    auto row = [&](const std::string& name, const Matrix<double>& pts, double ms) {
        const double w2 = w2_to_reference(EmpiricalMeasure<double>(pts), reference, p.seed);
        table << name << ',' << format_double(w2) << ',' << format_double(p.record_timing ? ms : 0.0) << '\n';
        timings[name] = ms;
        save_csv((dir / (name + ".csv")).string(), make_table(pts));
        out << "toy: " << name << " w2_to_ref=" << w2 << '\n';
    };

    {
        const auto t0 = std::chrono::steady_clock::now();
        const auto init = initial_particles(samplers, p.flow);
        row("init", init.points(), ms_since(t0));
    }
    for (const auto& s : p.solvers) {
        const auto t0 = std::chrono::steady_clock::now();
        if (s == "wgf") {
            const auto r = run_flow(samplers, p.flow);
            row(s, r.measure.points(), ms_since(t0));
        } else if (s == "fixed-point") {
            const auto r = fixed_point_baseline(datasets, p.flow);
            row(s, r.measure.points(), ms_since(t0));
        } else {
            std::vector<LabeledGMM<double>> inputs;
            for (std::size_t k = 0; k < fam.measures.size(); ++k) {
                EmOptions opt;
                opt.components_per_class = p.gmm_components_per_measure;
                opt.seed = derive_seed(p.seed, 0x656d, k);
                inputs.push_back(em_fit<double>(fam.measures[k].points(), std::nullopt, 0, opt).gmm);
            }
            const auto r = run_gmm_flow(inputs, p.gmm);
            const auto batch = GmmSampler(r.gmm).sample(p.gmm_particles, derive_seed(p.seed, 0x7061));
            row(s, batch.points, ms_since(t0));
        }
    }
    write_text(dir / "table.csv", table.str());
    report["wall_ms"] = timings;
    report["solver"] = solver_name(p.flow.solver);
    write_json(dir / "report.json", report);
    out << "wrote " << (dir / "table.csv").string() << '\n';
    return kOk;
}

// ---- msda ----

struct MsdaPlan {
    std::string task_type = "synthetic";
    MsdaTaskOptions task;
    std::vector<std::string> source_paths;
    std::string target_path;
    std::string label_column = "label";
    MsdaConfig base;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::vector<std::string> combos{"B", "B+V", "B+U", "B+V+U"};
    double target_weight = 0.05;
    double repulsion_weight = 0.5;
    double repulsion_margin = 1.0;
    RepulsionMetric repulsion_metric = RepulsionMetric::euclidean;
    double entropy_weight = 0.0;
    std::string output_dir;
};

MsdaPlan parse_msda(const json& j)
{
    ConfigReader r(j, "");
    expect_command(r, "msda");
    MsdaPlan p;
    p.base.flow.label_weight = 5.0;
    {
        auto t = r.child("task");
        p.task_type = t.string("type", "synthetic");
        if (p.task_type == "synthetic") {
            p.task = read_task_options(t);
        } else if (p.task_type == "csv") {
            p.source_paths = t.strings("sources");
            if (p.source_paths.empty()) t.fail("sources", "needs at least one source file");
            p.target_path = t.string("target");
            p.label_column = t.string("label_column", p.label_column);
        } else {
            t.fail("type", "must be synthetic or csv");
        }
        t.finish();
    }
    p.base.method = parse_barycenter_kind(r.string("method", "empirical"));
    if (r.has("flow")) read_flow(r.child("flow"), p.base.flow);
    else r.skip("flow");
    if (r.has("gmm_flow")) read_gmm_flow(r.child("gmm_flow"), p.base.gmm_flow);
    else r.skip("gmm_flow");
    p.base.em_components_per_class = static_cast<int>(r.integer("em_components_per_class", 1));
    p.base.gmm_particles = r.integer("gmm_particles", p.base.gmm_particles);
    if (r.has("seeds")) {
        p.seeds.clear();
        const json& s = r.raw("seeds");
        if (!s.is_array() || s.empty()) r.fail("seeds", "must be a non-empty array of non-negative integers");
        for (const auto& v : s) {
            if (!v.is_number_unsigned()) r.fail("seeds", "must be a non-empty array of non-negative integers");
            p.seeds.push_back(v.get<std::uint64_t>());
        }
    } else {
        r.skip("seeds");
    }
    if (r.has("combos")) p.combos = r.strings("combos");
    else r.skip("combos");
    for (const auto& c : p.combos)
        if (c != "B" && c != "B+V" && c != "B+U" && c != "B+V+U")
            r.fail("combos", "unknown combination '" + c + "' (expected B, B+V, B+U or B+V+U)");
    if (r.has("energies")) {
        auto e = r.child("energies");
        p.target_weight = e.number("target_weight", p.target_weight);
        p.repulsion_weight = e.number("repulsion_weight", p.repulsion_weight);
        p.repulsion_margin = e.number("repulsion_margin", p.repulsion_margin);
        p.repulsion_metric = parse_repulsion_metric(e.string("repulsion_metric", to_string(p.repulsion_metric)));
        p.entropy_weight = e.number("entropy_weight", p.entropy_weight);
        e.finish();
    } else {
        r.skip("energies");
    }
    p.output_dir = r.string("output_dir");
    r.finish();

    FunctionalSpec<double> f;
    f.target_weight = p.target_weight;
    f.repulsion_weight = p.repulsion_weight;
    f.repulsion_margin = p.repulsion_margin;
    f.entropy_weight = p.entropy_weight;
    f.target_measure = EmpiricalMeasure<double>(Matrix<double>::Zero(1, 1));
    f.validate();
    if (p.task_type == "synthetic") (void)default_msda_specs(p.task);
    const Index k = p.task_type == "synthetic" ? p.task.n_sources : static_cast<Index>(p.source_paths.size());
    if (p.base.method == BarycenterKind::gmm) p.base.gmm_flow.validate(k);
    else p.base.flow.validate(k, p.base.method == BarycenterKind::discrete_baseline);
    return p;
}

MsdaConfig combo_config(const MsdaPlan& p, const std::string& combo, std::uint64_t seed)
{
    MsdaConfig cfg = p.base;
    FunctionalSpec<double> f;
    f.entropy_weight = p.entropy_weight;
    if (combo == "B+V" || combo == "B+V+U") f.target_weight = p.target_weight;
    if (combo == "B+U" || combo == "B+V+U") {
        f.repulsion_weight = p.repulsion_weight;
        f.repulsion_margin = p.repulsion_margin;
        f.repulsion_metric = p.repulsion_metric;
    }
    cfg.flow.functional = f;
    cfg.gmm_flow.functional = f;
    cfg.flow.seed = seed;
    cfg.gmm_flow.seed = seed;
    return cfg;
}

MsdaTask load_csv_task(const MsdaPlan& p)
{
    MsdaTask t{MsdaData{{}, EmpiricalMeasure<double>(Matrix<double>::Zero(1, 1))}, {}};
    for (const auto& path : p.source_paths) t.data.sources.push_back(load_csv(path, p.label_column).labeled_measure());
    const auto target = load_csv(p.target_path, p.label_column);
    t.data.target_features = target.measure();
    t.target_labels = TargetLabels{*target.labels, target.n_classes()};
    return t;
}

int run_msda(const json& j, std::ostream& out)
{
    const auto p = parse_msda(j);
    std::optional<MsdaTask> fixed_task;
    if (p.task_type == "csv") fixed_task = load_csv_task(p);
    const fs::path dir = prepare_output(p.output_dir);
    json report = base_report("msda", j);
    json runs = json::array();
    std::map<std::string, std::pair<double, double>> sums;
    for (const auto seed : p.seeds) {
        const MsdaTask task = fixed_task ? *fixed_task : synthetic_msda(default_msda_specs(p.task), seed);
        for (const auto& combo : p.combos) {
            const auto r = msda_adapt(task.data, task.target_labels, combo_config(p, combo, seed));
            sums[combo].first += r.accuracy_source_only;
            sums[combo].second += r.accuracy_adapted;
            json rj = r.to_json();
            rj.erase("config");
            rj["combo"] = combo;
            rj["seed"] = seed;
            runs.push_back(rj);
            out << "msda: seed=" << seed << " combo=" << combo << " source_only=" << r.accuracy_source_only
                << " adapted=" << r.accuracy_adapted << '\n';
        }
    }
    std::ostringstream table;
    table << "combo,accuracy_source_only,accuracy_adapted,n_seeds\n";
    const double ns = static_cast<double>(p.seeds.size());
    for (const auto& combo : p.combos)
        table << combo << ',' << format_double(sums[combo].first / ns) << ',' << format_double(sums[combo].second / ns)
              << ',' << p.seeds.size() << '\n';
    write_text(dir / "ablation.csv", table.str());
    report["barycenter_kind"] = to_string(p.base.method);
    report["alignment"] = "feature-only exact OT from barycenter particles to target features";
    report["runs"] = runs;
    write_json(dir / "report.json", report);
    out << "wrote " << (dir / "ablation.csv").string() << '\n';
    return kOk;
}

// ---- gen ----

struct GenPlan {
    std::string dataset;
    Index n = 1000;
    double noise_std = 0.0;
    int n_classes = 4;
    int k = 4;
    MsdaTaskOptions task;
    std::uint64_t seed = 0;
    std::string output_dir;
};

GenPlan parse_gen(const json& j)
{
    ConfigReader r(j, "");
    expect_command(r, "gen");
    GenPlan p;
    p.dataset = r.string("dataset");
    if (p.dataset == "swiss_roll") {
        p.n = r.integer("n", p.n);
        p.noise_std = r.number("noise_std", p.noise_std);
        p.n_classes = static_cast<int>(r.integer("n_classes", p.n_classes));
        if (p.n < 1 || p.noise_std < 0 || p.n_classes < 1) r.fail("n", "swiss_roll needs n >= 1, noise_std >= 0, n_classes >= 1");
    } else if (p.dataset == "family") {
        p.n = r.integer("n", p.n);
        p.noise_std = r.number("noise_std", 0.5);
        p.k = static_cast<int>(r.integer("k", p.k));
        if (p.n < 2 || p.k < 1 || p.k > 4) r.fail("k", "family needs n >= 2 and k in [1, 4]");
    } else if (p.dataset == "msda") {
        p.task = read_task_options(r);
        (void)default_msda_specs(p.task);
    } else {
        r.fail("dataset", "unknown dataset '" + p.dataset + "' (expected swiss_roll, family or msda)");
    }
    p.seed = r.seed("seed", 0);
    p.output_dir = r.string("output_dir");
    r.finish();
    return p;
}

int run_gen(const json& j, std::ostream& out)
{
    const auto p = parse_gen(j);
    const fs::path dir = prepare_output(p.output_dir);
    std::vector<fs::path> written;
    if (p.dataset == "swiss_roll") {
        const auto m = swiss_roll(p.n, p.noise_std, p.seed, p.n_classes);
        save_csv((dir / "swiss_roll.csv").string(), make_table(m.points(), m.hard_labels(), m.n_classes()));
        written.push_back(dir / "swiss_roll.csv");
    } else if (p.dataset == "family") {
        ToyPlan tp;
        tp.family = "swiss_roll";
        tp.n_samples = p.n;
        tp.noise_std = p.noise_std;
        tp.k = p.k;
        tp.seed = p.seed;
        const auto fam = build_family(tp);
        for (std::size_t k = 0; k < fam.measures.size(); ++k) {
            const auto& m = fam.measures[k];
            const auto path = dir / ("family_" + std::to_string(k) + ".csv");
            save_csv(path.string(), make_table(m.points(), m.hard_labels(), m.n_classes()));
            written.push_back(path);
        }
        save_csv((dir / "reference.csv").string(), make_table(fam.reference));
        written.push_back(dir / "reference.csv");
    } else {
        const auto task = synthetic_msda(default_msda_specs(p.task), p.seed);
        for (std::size_t k = 0; k < task.data.sources.size(); ++k) {
            const auto& m = task.data.sources[k];
            const auto path = dir / ("source_" + std::to_string(k) + ".csv");
            save_csv(path.string(), make_table(m.points(), m.hard_labels(), m.n_classes()));
            written.push_back(path);
        }
        save_csv((dir / "target.csv").string(), make_table(task.data.target_features.points(), task.target_labels.labels,
                                                           task.target_labels.n_classes));
        written.push_back(dir / "target.csv");
    }
    for (const auto& w : written) out << "wrote " << w.string() << '\n';
    return kOk;
}

} // namespace

int cmd_barycenter(const std::string& config_path, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] { return run_barycenter(load_json(config_path), out); });
}

int cmd_toy(const std::string& config_path, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] { return run_toy(load_json(config_path), out); });
}

int cmd_msda(const std::string& config_path, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] { return run_msda(load_json(config_path), out); });
}

int cmd_gen(const std::string& config_path, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] { return run_gen(load_json(config_path), out); });
}

int cmd_validate(const std::string& config_path, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const json j = load_json(config_path);
        if (!j.is_object()) throw ValidationError("config: root must be an object");
        if (!j.contains("command") || !j["command"].is_string())
            throw ValidationError("config key 'command': missing required key");
        const std::string c = j["command"].get<std::string>();
        if (c == "barycenter") (void)parse_barycenter(j);
        else if (c == "toy") (void)parse_toy(j);
        else if (c == "msda") (void)parse_msda(j);
        else if (c == "gen") (void)parse_gen(j);
        else throw ValidationError("config key 'command': unknown command '" + c + "'");
        out << "config ok: " << c << '\n';
        return static_cast<int>(kOk);
    });
}

int run(int argc, char** argv)
{
    CLI::App app{"Wasserstein barycenters by gradient flows"};
    app.name("baryflow");
    int threads = 0;
    app.add_option("--threads", threads, "Cap on solver threads (0 = runtime default)")->envname("BARYFLOW_THREADS");
    app.require_subcommand(1);
    std::string config;
    struct Sub {
        const char* name;
        const char* help;
        int (*fn)(const std::string&, std::ostream&, std::ostream&);
    };
    const Sub subs[] = {
        {"barycenter", "Compute a barycenter (empirical flow, mixture flow or fixed-point baseline)", cmd_barycenter},
        {"toy", "Location-scatter toy comparison of barycenter solvers", cmd_toy},
        {"msda", "Multi-source domain adaptation ablation", cmd_msda},
        {"gen", "Generate datasets as CSV", cmd_gen},
        {"validate", "Check a config without running it", cmd_validate},
    };
    for (const auto& s : subs) app.add_subcommand(s.name, s.help)->add_option("config", config, "JSON config file")->required();
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }
    set_thread_limit(threads);
    for (const auto& s : subs)
        if (app.got_subcommand(s.name)) return s.fn(config, std::cout, std::cerr);
    return kConfigError;
}

} // namespace baryflow::cli
