#include "config.hpp"

#include <fstream>

namespace baryflow::cli {

ConfigReader::ConfigReader(const json& j, std::string path) : j_(&j), path_(std::move(path))
{
    if (!j.is_object()) throw ValidationError("config: '" + (path_.empty() ? std::string("<root>") : path_) + "' must be an object");
}

std::string ConfigReader::where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

void ConfigReader::fail(const std::string& key, const std::string& what) const
{
    throw ValidationError("config key '" + where(key) + "': " + what);
}

bool ConfigReader::has(const std::string& key) const { return j_->contains(key) && !(*j_)[key].is_null(); }

const json& ConfigReader::raw(const std::string& key)
{
    used_.insert(key);
    if (!j_->contains(key)) fail(key, "missing required key");
    return (*j_)[key];
}

ConfigReader ConfigReader::child(const std::string& key)
{
    const json& v = raw(key);
    if (!v.is_object()) fail(key, "must be an object");
    return ConfigReader(v, where(key));
}

std::vector<ConfigReader> ConfigReader::children(const std::string& key)
{
    const json& v = raw(key);
    if (!v.is_array()) fail(key, "must be an array of objects");
    std::vector<ConfigReader> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_object()) fail(key, "must be an array of objects");
        out.emplace_back(v[i], where(key) + "[" + std::to_string(i) + "]");
    }
    return out;
}

double ConfigReader::number(const std::string& key, std::optional<double> fallback)
{
    used_.insert(key);
    if (!has(key)) {
        if (fallback) return *fallback;
        fail(key, "missing required key");
    }
    const json& v = (*j_)[key];
    if (!v.is_number()) fail(key, "must be a number");
    return v.get<double>();
}

long long ConfigReader::integer(const std::string& key, std::optional<long long> fallback)
{
    used_.insert(key);
    if (!has(key)) {
        if (fallback) return *fallback;
        fail(key, "missing required key");
    }
    const json& v = (*j_)[key];
    if (!v.is_number_integer()) fail(key, "must be an integer");
    return v.get<long long>();
}

std::uint64_t ConfigReader::seed(const std::string& key, std::uint64_t fallback)
{
    used_.insert(key);
    if (!has(key)) return fallback;
    const json& v = (*j_)[key];
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
        fail(key, "must be a non-negative integer");
    return v.get<std::uint64_t>();
}

bool ConfigReader::boolean(const std::string& key, std::optional<bool> fallback)
{
    used_.insert(key);
    if (!has(key)) {
        if (fallback) return *fallback;
        fail(key, "missing required key");
    }
    const json& v = (*j_)[key];
    if (!v.is_boolean()) fail(key, "must be true or false");
    return v.get<bool>();
}

std::string ConfigReader::string(const std::string& key, std::optional<std::string> fallback)
{
    used_.insert(key);
    if (!has(key)) {
        if (fallback) return *fallback;
        fail(key, "missing required key");
    }
    const json& v = (*j_)[key];
    if (!v.is_string()) fail(key, "must be a string");
    return v.get<std::string>();
}

std::vector<double> ConfigReader::numbers(const std::string& key)
{
    const json& v = raw(key);
    if (!v.is_array()) fail(key, "must be an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) fail(key, "must be an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

std::vector<std::string> ConfigReader::strings(const std::string& key)
{
    const json& v = raw(key);
    if (!v.is_array()) fail(key, "must be an array of strings");
    std::vector<std::string> out;
    for (const auto& x : v) {
        if (!x.is_string()) fail(key, "must be an array of strings");
        out.push_back(x.get<std::string>());
    }
    return out;
}

Matrix<double> ConfigReader::matrix(const std::string& key)
{
    const json& v = raw(key);
    if (!v.is_array() || v.empty()) fail(key, "must be a non-empty array of rows");
    Matrix<double> m;
    for (std::size_t r = 0; r < v.size(); ++r) {
        if (!v[r].is_array()) fail(key, "must be an array of rows");
        if (r == 0) m.resize(static_cast<Index>(v.size()), static_cast<Index>(v[0].size()));
        if (static_cast<Index>(v[r].size()) != m.cols()) fail(key, "rows differ in length");
        for (std::size_t c = 0; c < v[r].size(); ++c) {
            if (!v[r][c].is_number()) fail(key, "entries must be numbers");
            m(static_cast<Index>(r), static_cast<Index>(c)) = v[r][c].get<double>();
        }
    }
    return m;
}

void ConfigReader::finish() const
{
    for (const auto& [key, _] : j_->items())
        if (!used_.count(key)) throw ValidationError("config: unknown key '" + where(key) + "'");
}

json load_json(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open config file '" + path + "'");
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw ValidationError("config file '" + path + "' is not valid JSON: " + e.what());
    }
}

InputSpec read_input(ConfigReader r)
{
    InputSpec s;
    s.type = r.string("type");
    if (s.type == "gaussian") {
        const auto mu = r.numbers("mean");
        s.mean = Eigen::Map<const Vector<double>>(mu.data(), static_cast<Index>(mu.size()));
        if (r.has("cov")) s.cov = r.matrix("cov");
        else {
            r.skip("cov");
            s.cov = Matrix<double>::Identity(s.mean.size(), s.mean.size());
        }
        if (s.cov.rows() != s.mean.size() || s.cov.cols() != s.mean.size()) r.fail("cov", "must be d x d");
        if ((s.cov - s.cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, s.cov.cwiseAbs().maxCoeff()) ||
            Eigen::LLT<Matrix<double>>(s.cov).info() != Eigen::Success)
            r.fail("cov", "must be symmetric positive definite");
    } else if (s.type == "gmm") {
        s.path = r.string("path");
    } else if (s.type == "csv") {
        s.path = r.string("path");
        if (r.has("label_column")) s.label_column = r.string("label_column");
        else r.skip("label_column");
    } else if (s.type == "swiss_roll") {
        s.n = r.integer("n", 1000);
        s.noise_std = r.number("noise_std", 0.0);
        s.n_classes = static_cast<int>(r.integer("n_classes", 4));
        s.seed = r.seed("seed", 0);
    } else {
        r.fail("type", "unknown input type '" + s.type + "' (expected gaussian, gmm, csv or swiss_roll)");
    }
    r.finish();
    return s;
}

SolverChoice read_solver(ConfigReader r)
{
    const std::string type = r.string("type", "auto");
    SolverChoice out;
    if (type == "auto") {
        out = AutoSolver{};
    } else if (type == "exact") {
        out = ExactSolver{};
    } else if (type == "entropic") {
        EntropicSolver e;
        e.epsilon = r.number("epsilon", 0.0);
        e.max_iter = static_cast<int>(r.integer("max_iter", e.max_iter));
        e.tol = r.number("tol", e.tol);
        out = e;
    } else {
        r.fail("type", "unknown solver '" + type + "' (expected auto, exact or entropic)");
    }
    r.finish();
    return out;
}

void read_flow(ConfigReader r, EmpiricalFlowConfig& cfg)
{
    cfg.n_particles = r.integer("n_particles", cfg.n_particles);
    cfg.step_size = r.number("step_size", cfg.step_size);
    cfg.label_weight = r.number("label_weight", cfg.label_weight);
    cfg.batch_size = r.integer("batch_size", cfg.batch_size);
    cfg.n_iter = static_cast<int>(r.integer("n_iter", cfg.n_iter));
    try {
        cfg.init = parse_init_mode(r.string("init", to_string(cfg.init)));
        cfg.label_init = parse_label_init(r.string("label_init", to_string(cfg.label_init)));
    } catch (const ValidationError& e) {
        throw ValidationError("config '" + r.where("init") + "': " + e.what());
    }
    if (r.has("init_points")) cfg.init_points = r.matrix("init_points");
    else r.skip("init_points");
    if (r.has("solver")) cfg.solver = read_solver(r.child("solver"));
    else r.skip("solver");
    cfg.record_timing = r.boolean("record_timing", cfg.record_timing);
    r.finish();
}

void read_gmm_flow(ConfigReader r, GmmFlowConfig& cfg)
{
    cfg.n_components = r.integer("n_components", cfg.n_components);
    cfg.step_size = r.number("step_size", cfg.step_size);
    cfg.label_weight = r.number("label_weight", cfg.label_weight);
    cfg.mc_samples = r.integer("mc_samples", cfg.mc_samples);
    cfg.n_iter = static_cast<int>(r.integer("n_iter", cfg.n_iter));
    cfg.diag_only = r.boolean("diag_only", cfg.diag_only);
    cfg.flow_weights = r.boolean("flow_weights", cfg.flow_weights);
    try {
        cfg.init = parse_gmm_init(r.string("init", to_string(cfg.init)));
    } catch (const ValidationError& e) {
        throw ValidationError("config '" + r.where("init") + "': " + e.what());
    }
    cfg.init_samples = r.integer("init_samples", cfg.init_samples);
    cfg.target_samples = r.integer("target_samples", cfg.target_samples);
    cfg.record_timing = r.boolean("record_timing", cfg.record_timing);
    r.finish();
}

void read_functional(ConfigReader r, FunctionalSpec<double>& f, std::optional<InputSpec>& target)
{
    f.entropy_weight = r.number("entropy_weight", f.entropy_weight);
    f.repulsion_weight = r.number("repulsion_weight", f.repulsion_weight);
    f.repulsion_margin = r.number("repulsion_margin", f.repulsion_margin);
    try {
        f.repulsion_metric = parse_repulsion_metric(r.string("repulsion_metric", to_string(f.repulsion_metric)));
    } catch (const ValidationError& e) {
        throw ValidationError("config '" + r.where("repulsion_metric") + "': " + e.what());
    }
    f.target_weight = r.number("target_weight", f.target_weight);
    f.internal_weight = r.number("internal_weight", f.internal_weight);
    if (r.has("target")) target = read_input(r.child("target"));
    else r.skip("target");
    r.finish();
}

MsdaTaskOptions read_task_options(ConfigReader& r)
{
    MsdaTaskOptions o;
    o.n_sources = static_cast<int>(r.integer("n_sources", o.n_sources));
    o.n_classes = static_cast<int>(r.integer("n_classes", o.n_classes));
    o.samples_per_domain = r.integer("samples_per_domain", o.samples_per_domain);
    o.class_radius = r.number("class_radius", o.class_radius);
    o.class_std = r.number("class_std", o.class_std);
    o.source_rotation_deg = r.number("source_rotation_deg", o.source_rotation_deg);
    o.target_rotation_deg = r.number("target_rotation_deg", o.target_rotation_deg);
    o.target_shift = r.number("target_shift", o.target_shift);
    return o;
}

} // namespace baryflow::cli
