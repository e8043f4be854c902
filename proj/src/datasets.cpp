#include "baryflow/datasets.hpp"
#include "baryflow/trace.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

namespace baryflow {

Matrix<double> AffineMap::apply(const Matrix<double>& points) const
{
    require(points.cols() == A.cols(), "affine map dimension differs from the points");
    return (points * A.transpose()).rowwise() + b.transpose();
}

void AffineMap::validate() const
{
    require(A.rows() == A.cols() && A.rows() == b.size(), "affine map needs a square A and matching b");
    require(A.allFinite() && b.allFinite(), "affine map has non-finite entries");
}

LabeledEmpiricalMeasure<double> swiss_roll(Index n, double noise_std, std::uint64_t seed, int n_classes)
{
    require(n >= 1, "swiss_roll: n must be >= 1");
    require(noise_std >= 0, "swiss_roll: noise_std must be >= 0");
    require(n_classes >= 1, "swiss_roll: n_classes must be >= 1");
    Rng rng = make_rng(seed, {0x5357});
    std::uniform_real_distribution<double> unif(1.5 * std::numbers::pi, 4.5 * std::numbers::pi);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector<double> t(n);
    Matrix<double> x(n, 2);
    for (Index i = 0; i < n; ++i) {
        t(i) = unif(rng);
        x(i, 0) = t(i) * std::cos(t(i));
        x(i, 1) = t(i) * std::sin(t(i));
    }
    if (noise_std > 0)
        for (Index i = 0; i < n; ++i)
            for (Index k = 0; k < 2; ++k) x(i, k) += noise_std * normal(rng);
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return t(a) < t(b); });
    Labels labels(n);
    for (Index r = 0; r < n; ++r) labels(order[static_cast<std::size_t>(r)]) = static_cast<int>((r * n_classes) / n);
    return LabeledEmpiricalMeasure<double>::from_labels(EmpiricalMeasure<double>(std::move(x)), labels, n_classes);
}

std::vector<LabeledEmpiricalMeasure<double>> location_scatter_family(const LabeledEmpiricalMeasure<double>& q0,
                                                                     const std::vector<AffineMap>& maps)
{
    std::vector<LabeledEmpiricalMeasure<double>> out;
    for (const auto& m : maps) {
        m.validate();
        require(m.A.cols() == q0.dim(), "location_scatter_family: map dimension differs from the measure");
        out.emplace_back(EmpiricalMeasure<double>(m.apply(q0.points()), q0.weights()), q0.label_logits());
    }
    return out;
}

LabeledEmpiricalMeasure<double> standardize(const LabeledEmpiricalMeasure<double>& q0)
{
    const auto& x = q0.points();
    const auto& w = q0.weights();
    const Vector<double> mean = x.transpose() * w;
    const Matrix<double> centered = x.rowwise() - mean.transpose();
    const Matrix<double> cov = centered.transpose() * w.asDiagonal() * centered;
    Eigen::SelfAdjointEigenSolver<Matrix<double>> eig(cov);
    if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0)
        throw NumericalError("standardize: covariance is singular");
    const Matrix<double> inv_root =
        eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
    return LabeledEmpiricalMeasure<double>(EmpiricalMeasure<double>(centered * inv_root, w), q0.label_logits());
}

std::vector<AffineMap> default_family(int k)
{
    require(k >= 1 && k <= 4, "default_family: k must lie in [1, 4]");
    const double deg = std::numbers::pi / 180.0;
    const double angles[4] = {0.0, 45.0, 90.0, 135.0};
    const double shift_angles[4] = {0.0, 30.0, 60.0, 90.0};
    std::vector<AffineMap> out;
    for (int i = 0; i < k; ++i) {
        const double a = angles[i] * deg;
        Matrix<double> r(2, 2);
        r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
        Matrix<double> s = Matrix<double>::Zero(2, 2);
        s(0, 0) = 1.3;
        s(1, 1) = 0.8;
        Matrix<double> am = r * s * r.transpose();
        am = 0.5 * (am + am.transpose());
        Vector<double> b(2);
        b << std::cos(shift_angles[i] * deg), std::sin(shift_angles[i] * deg);
        out.push_back({am, b});
    }
    return out;
}

void DomainSpec::validate() const
{
    const Index c = class_means.rows();
    const Index d = class_means.cols();
    require(c >= 1 && d >= 1, "domain spec needs at least one class mean");
    require(static_cast<Index>(class_chols.size()) == c, "domain spec needs one Cholesky factor per class");
    for (const auto& l : class_chols) {
        require(l.rows() == d && l.cols() == d, "domain spec Cholesky factors must be d x d");
        for (Index r = 0; r < d; ++r) {
            require(l(r, r) > 0, "domain spec Cholesky factors need a positive diagonal");
            for (Index k = r + 1; k < d; ++k) require(l(r, k) == 0, "domain spec Cholesky factors must be lower-triangular");
        }
    }
    shift.validate();
    require(shift.A.rows() == d, "domain spec shift dimension differs from the class means");
    require(n_samples >= c, "domain spec needs n_samples >= number of classes");
    if (class_priors) {
        require(class_priors->size() == c, "class_priors length differs from the class count");
        require(validate_simplex(*class_priors, 1e-9), "class_priors must lie on the simplex");
    }
}

MsdaTask synthetic_msda(const std::vector<DomainSpec>& specs, std::uint64_t seed)
{
    require(specs.size() >= 2, "synthetic_msda needs at least one source and a target");
    const Index c = specs.front().class_means.rows();
    const Index d = specs.front().class_means.cols();
    for (const auto& s : specs) {
        s.validate();
        require(s.class_means.rows() == c && s.class_means.cols() == d, "domain specs must share classes and dimension");
    }
    auto draw = [&](const DomainSpec& s, std::size_t k) {
        Rng rng = make_rng(seed, {0x4d53, k});
        const Vector<double> priors = s.class_priors ? *s.class_priors : uniform_weights<double>(c);
        std::discrete_distribution<int> cls(priors.data(), priors.data() + c);
        Matrix<double> x(s.n_samples, d);
        Labels y(s.n_samples);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Index i = 0; i < s.n_samples; ++i) {
            y(i) = cls(rng);
            Vector<double> e(d);
            for (Index j = 0; j < d; ++j) e(j) = normal(rng);
            x.row(i) = (s.class_chols[static_cast<std::size_t>(y(i))] * e + s.class_means.row(y(i)).transpose()).transpose();
        }
        return std::make_pair(s.shift.apply(x), y);
    };
    std::vector<LabeledEmpiricalMeasure<double>> sources;
    for (std::size_t k = 0; k + 1 < specs.size(); ++k) {
        auto [x, y] = draw(specs[k], k);
        sources.push_back(LabeledEmpiricalMeasure<double>::from_labels(EmpiricalMeasure<double>(std::move(x)), y,
                                                                        static_cast<int>(c)));
    }
    auto [xt, yt] = draw(specs.back(), specs.size() - 1);
    return MsdaTask{MsdaData{std::move(sources), EmpiricalMeasure<double>(std::move(xt))},
                    TargetLabels{std::move(yt), static_cast<int>(c)}};
}

std::vector<DomainSpec> default_msda_specs(const MsdaTaskOptions& opt)
{
    require(opt.n_sources >= 1, "n_sources must be >= 1");
    require(opt.n_classes >= 2, "n_classes must be >= 2");
    require(opt.samples_per_domain >= opt.n_classes, "samples_per_domain must be >= n_classes");
    require(opt.class_std > 0 && opt.class_radius > 0, "class_std and class_radius must be > 0");
    const double deg = std::numbers::pi / 180.0;
    Matrix<double> means(opt.n_classes, 2);
    std::vector<Matrix<double>> chols;
    for (int c = 0; c < opt.n_classes; ++c) {
        const double a = 2 * std::numbers::pi * c / opt.n_classes;
        means(c, 0) = opt.class_radius * std::cos(a);
        means(c, 1) = opt.class_radius * std::sin(a);
        // elongated along the tangent direction
        Matrix<double> r(2, 2);
        r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
        Matrix<double> s = Matrix<double>::Zero(2, 2);
        s(0, 0) = opt.class_std * opt.class_std * 0.5;
        s(1, 1) = opt.class_std * opt.class_std * 1.5;
        const Matrix<double> cov = r * s * r.transpose();
        Eigen::LLT<Matrix<double>> llt(0.5 * (cov + cov.transpose()));
        chols.push_back(llt.matrixL());
    }
    auto rotation = [&](double angle_deg, double shift_x, double shift_y) {
        const double a = angle_deg * deg;
        Matrix<double> r(2, 2);
        r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
        Vector<double> b(2);
        b << shift_x, shift_y;
        return AffineMap{r, b};
    };
    std::vector<DomainSpec> specs;
    for (int k = 0; k < opt.n_sources; ++k) {
        const double angle = opt.source_rotation_deg * (k - 0.5 * (opt.n_sources - 1));
        specs.push_back({means, chols, rotation(angle, 0.0, 0.0), opt.samples_per_domain, std::nullopt});
    }
    specs.push_back({means, chols, rotation(opt.target_rotation_deg, opt.target_shift, 0.0),
                     opt.samples_per_domain, std::nullopt});
    return specs;
}

LabeledEmpiricalMeasure<double> CsvTable::labeled_measure() const
{
    require(labels.has_value(), "csv table has no label column");
    return LabeledEmpiricalMeasure<double>::from_labels(EmpiricalMeasure<double>(features), *labels, n_classes());
}

namespace {

std::vector<std::string> split_fields(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    for (auto& f : out) {
        const auto b = f.find_first_not_of(" \t");
        const auto e = f.find_last_not_of(" \t");
        f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
    }
    return out;
}

bool parse_double(const std::string& s, double& v)
{
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    const auto res = std::from_chars(first, s.data() + s.size(), v);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

bool parse_integer(const std::string& s, long long& v)
{
    if (s.empty()) return false;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

} // namespace

CsvTable parse_csv(std::istream& is, const std::optional<std::string>& label_column, const std::string& source)
{
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line != "\r") {
            header = split_fields(line);
            break;
        }
    }
    if (header.empty()) throw ValidationError(source + ": missing header row");
    Index label_idx = -1;
    if (label_column) {
        const auto it = std::find(header.begin(), header.end(), *label_column);
        if (it == header.end()) throw ValidationError(source + ": label column '" + *label_column + "' not found in header");
        label_idx = static_cast<Index>(it - header.begin());
    }
    CsvTable t;
    for (Index c = 0; c < static_cast<Index>(header.size()); ++c)
        if (c != label_idx) t.feature_names.push_back(header[static_cast<std::size_t>(c)]);
    if (t.feature_names.empty()) throw ValidationError(source + ": no feature columns");

    std::vector<std::vector<double>> rows;
    std::vector<std::string> raw_labels;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = split_fields(line);
        if (f.size() != header.size())
            throw ValidationError(source + ": line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
        std::vector<double> row;
        for (Index c = 0; c < static_cast<Index>(f.size()); ++c) {
            const auto& s = f[static_cast<std::size_t>(c)];
            if (c == label_idx) {
                if (s.empty()) throw ValidationError(source + ": line " + std::to_string(line_no) + ": empty label");
                raw_labels.push_back(s);
                continue;
            }
            double v = 0;
            if (!parse_double(s, v) || !std::isfinite(v))
                throw ValidationError(source + ": line " + std::to_string(line_no) + ", column '" +
                                      header[static_cast<std::size_t>(c)] + "': non-numeric value '" + s + "'");
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ValidationError(source + ": empty measure");
    t.features.resize(static_cast<Index>(rows.size()), static_cast<Index>(t.feature_names.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) t.features(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];

    if (label_column) {
        t.label_column = *label_column;
        std::vector<std::string> names = raw_labels;
        std::sort(names.begin(), names.end());
        names.erase(std::unique(names.begin(), names.end()), names.end());
        const bool numeric = std::all_of(names.begin(), names.end(), [](const std::string& s) {
            long long v = 0;
            return parse_integer(s, v);
        });
        if (numeric)
            std::sort(names.begin(), names.end(), [](const std::string& a, const std::string& b) {
                long long x = 0, y = 0;
                parse_integer(a, x);
                parse_integer(b, y);
                return x < y;
            });
        std::map<std::string, int> ids;
        for (std::size_t i = 0; i < names.size(); ++i) ids[names[i]] = static_cast<int>(i);
        Labels lab(static_cast<Index>(raw_labels.size()));
        for (std::size_t i = 0; i < raw_labels.size(); ++i) lab(static_cast<Index>(i)) = ids[raw_labels[i]];
        t.labels = std::move(lab);
        t.label_names = std::move(names);
    }
    return t;
}

CsvTable load_csv(const std::string& path, const std::optional<std::string>& label_column)
{
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open csv file '" + path + "'");
    return parse_csv(is, label_column, path);
}

void write_csv(std::ostream& os, const CsvTable& t)
{
    require(static_cast<Index>(t.feature_names.size()) == t.features.cols(), "csv table feature names differ from columns");
    for (std::size_t c = 0; c < t.feature_names.size(); ++c) os << (c ? "," : "") << t.feature_names[c];
    if (t.labels) os << ',' << (t.label_column.empty() ? std::string("label") : t.label_column);
    os << '\n';
    for (Index r = 0; r < t.features.rows(); ++r) {
        for (Index c = 0; c < t.features.cols(); ++c) os << (c ? "," : "") << format_double(t.features(r, c));
        if (t.labels) {
            const int id = (*t.labels)(r);
            os << ',' << (id >= 0 && id < t.n_classes() ? t.label_names[static_cast<std::size_t>(id)] : std::to_string(id));
        }
        os << '\n';
    }
}

void save_csv(const std::string& path, const CsvTable& table)
{
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_csv(os, table);
}

CsvTable make_table(const Matrix<double>& points, const std::optional<Labels>& labels, int n_classes)
{
    CsvTable t;
    for (Index c = 0; c < points.cols(); ++c) t.feature_names.push_back("f" + std::to_string(c));
    t.features = points;
    if (labels) {
        t.labels = labels;
        t.label_column = "label";
        for (int c = 0; c < n_classes; ++c) t.label_names.push_back(std::to_string(c));
    }
    return t;
}

} // namespace baryflow
