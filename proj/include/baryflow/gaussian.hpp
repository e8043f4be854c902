#pragma once

#include "baryflow/measures.hpp"
#include "baryflow/ot.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

namespace baryflow {

/// N(mu, L L^T) with L lower-triangular and a strictly positive diagonal.
template <class Scalar>
class GaussianComponent {
public:
    GaussianComponent(Vector<Scalar> mu, Matrix<Scalar> chol) : mu_(std::move(mu)), chol_(std::move(chol))
    {
        const Index d = mu_.size();
        require(d >= 1, "gaussian component needs d >= 1");
        require(chol_.rows() == d && chol_.cols() == d, "cholesky factor must be d x d");
        require(mu_.allFinite() && chol_.allFinite(), "gaussian component has non-finite parameters");
        for (Index r = 0; r < d; ++r) {
            require(chol_(r, r) > 0, "cholesky factor needs a strictly positive diagonal");
            for (Index c = r + 1; c < d; ++c)
                require(chol_(r, c) == 0, "cholesky factor must be lower-triangular");
        }
    }

    static GaussianComponent from_covariance(Vector<Scalar> mu, const ConstMatrixRef<Scalar>& cov)
    {
        require(cov.rows() == mu.size() && cov.cols() == mu.size(), "covariance must be d x d");
        Eigen::LLT<Matrix<Scalar>> llt(cov);
        if (llt.info() != Eigen::Success) throw ValidationError("covariance is not positive definite");
        Matrix<Scalar> l = llt.matrixL();
        return GaussianComponent(std::move(mu), std::move(l));
    }

    static GaussianComponent standard(Index d)
    {
        return GaussianComponent(Vector<Scalar>::Zero(d), Matrix<Scalar>::Identity(d, d));
    }

    const Vector<Scalar>& mean() const { return mu_; }
    const Matrix<Scalar>& chol() const { return chol_; }
    Matrix<Scalar> covariance() const { return chol_ * chol_.transpose(); }
    Index dim() const { return mu_.size(); }

private:
    Vector<Scalar> mu_;
    Matrix<Scalar> chol_;
};

/// Gaussian mixture with optional per-component label vectors nu (rows on the simplex).
template <class Scalar>
class LabeledGMM {
public:
    LabeledGMM(Vector<Scalar> weights, std::vector<GaussianComponent<Scalar>> components,
               std::optional<Matrix<Scalar>> nu = std::nullopt)
        : weights_(std::move(weights)), components_(std::move(components)), nu_(std::move(nu))
    {
        require(!components_.empty(), "mixture needs at least one component");
        require(weights_.size() == static_cast<Index>(components_.size()), "mixture weight count differs from components");
        require(weights_.allFinite() && validate_simplex(weights_, Scalar(1e-9)), "mixture weights must lie on the simplex");
        for (const auto& c : components_)
            require(c.dim() == components_.front().dim(), "mixture components have different dimensions");
        if (nu_) {
            require(nu_->rows() == size(), "component labels need one row per component");
            for (Index i = 0; i < nu_->rows(); ++i)
                require(validate_simplex(nu_->row(i).transpose(), Scalar(1e-9)), "component label rows must lie on the simplex");
        }
    }

    const Vector<Scalar>& weights() const { return weights_; }
    const std::vector<GaussianComponent<Scalar>>& components() const { return components_; }
    const GaussianComponent<Scalar>& component(Index i) const { return components_[static_cast<std::size_t>(i)]; }
    const std::optional<Matrix<Scalar>>& labels() const { return nu_; }
    Index size() const { return static_cast<Index>(components_.size()); }
    Index dim() const { return components_.front().dim(); }
    int n_classes() const { return nu_ ? static_cast<int>(nu_->cols()) : 0; }

private:
    Vector<Scalar> weights_;
    std::vector<GaussianComponent<Scalar>> components_;
    std::optional<Matrix<Scalar>> nu_;
};

/// Symmetric PSD square root through the eigendecomposition; eigenvalues down
/// to -1e-10 (relative) are clamped to zero.
template <class Derived>
Matrix<typename Derived::Scalar> matrix_sqrt_psd(const Eigen::MatrixBase<Derived>& s)
{
    using Scalar = typename Derived::Scalar;
    require(s.rows() == s.cols(), "matrix_sqrt_psd: matrix must be square");
    require(s.allFinite(), "matrix_sqrt_psd: non-finite entries");
    const Scalar scale = std::max(Scalar(1), s.cwiseAbs().maxCoeff());
    const Matrix<Scalar> sym = s;
    if ((sym - sym.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-10) * scale)
        throw ValidationError("matrix_sqrt_psd: matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(Scalar(0.5) * (sym + sym.transpose()));
    if (eig.info() != Eigen::Success) throw NumericalError("matrix_sqrt_psd: eigendecomposition failed");
    const Vector<Scalar>& lambda = eig.eigenvalues();
    if (lambda.size() > 0 && lambda.minCoeff() < -Scalar(1e-10) * scale)
        throw ValidationError("matrix_sqrt_psd: matrix is indefinite");
    const Vector<Scalar> root = lambda.cwiseMax(Scalar(0)).cwiseSqrt();
    Matrix<Scalar> out = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
    return Scalar(0.5) * (out + out.transpose());
}

// Bures-Wasserstein W2^2 from means and (possibly singular) covariances.
template <class Scalar>
Scalar bures_w2_sq(const ConstVectorRef<Scalar>& mu1, const ConstMatrixRef<Scalar>& cov1,
                   const ConstVectorRef<Scalar>& mu2, const ConstMatrixRef<Scalar>& cov2)
{
    require(mu1.size() == mu2.size() && cov1.rows() == mu1.size() && cov2.rows() == mu2.size(),
            "bures_w2_sq: dimension mismatch");
    const Matrix<Scalar> root1 = matrix_sqrt_psd(cov1);
    const Matrix<Scalar> inner = root1 * cov2 * root1;
    const Matrix<Scalar> cross = matrix_sqrt_psd(Scalar(0.5) * (inner + inner.transpose()));
    const Scalar value = (mu1 - mu2).squaredNorm() + cov1.trace() + cov2.trace() - 2 * cross.trace();
    return std::max(Scalar(0), value);
}

// Uses tr((S1^1/2 S2 S1^1/2)^1/2) = nuclear norm of L2^T L1.
template <class Scalar>
Scalar bures_w2_sq(const GaussianComponent<Scalar>& g1, const GaussianComponent<Scalar>& g2)
{
    require(g1.dim() == g2.dim(), "bures_w2_sq: dimension mismatch");
    const Matrix<Scalar> cross = g2.chol().transpose() * g1.chol();
    Eigen::JacobiSVD<Matrix<Scalar>> svd(cross);
    const Scalar value = (g1.mean() - g2.mean()).squaredNorm() + g1.chol().squaredNorm() + g2.chol().squaredNorm() -
                         2 * svd.singularValues().sum();
    return std::max(Scalar(0), value);
}

template <class Scalar>
struct BuresGradient {
    Vector<Scalar> dmu;
    Matrix<Scalar> dchol; // lower-triangular
};

// OT map matrix T between the centred Gaussians (T S1 T = S2), T = L1^-T (L1^T S2 L1)^1/2 L1^-1.
template <class Scalar>
Matrix<Scalar> gaussian_transport_matrix(const GaussianComponent<Scalar>& g1, const GaussianComponent<Scalar>& g2)
{
    const auto l1 = g1.chol().template triangularView<Eigen::Lower>();
    const Matrix<Scalar> m = g1.chol().transpose() * g2.covariance() * g1.chol();
    const Matrix<Scalar> root = matrix_sqrt_psd(Scalar(0.5) * (m + m.transpose()));
    // L1^-T root L1^-1
    Matrix<Scalar> right = l1.transpose().solve(root);
    Matrix<Scalar> t = l1.transpose().solve(right.transpose()).transpose();
    return Scalar(0.5) * (t + t.transpose());
}

/// Gradient of bures_w2_sq with respect to the first component's mean and Cholesky factor.
template <class Scalar>
BuresGradient<Scalar> bures_w2_grad(const GaussianComponent<Scalar>& g1, const GaussianComponent<Scalar>& g2)
{
    require(g1.dim() == g2.dim(), "bures_w2_grad: dimension mismatch");
    const Index d = g1.dim();
    const auto diag = g1.chol().diagonal().cwiseAbs();
    if (diag.minCoeff() <= std::numeric_limits<Scalar>::epsilon() * diag.maxCoeff())
        throw NumericalError("bures_w2_grad: singular covariance");
    const Matrix<Scalar> dsigma = Matrix<Scalar>::Identity(d, d) - gaussian_transport_matrix(g1, g2);
    Matrix<Scalar> dchol = ((dsigma + dsigma.transpose()) * g1.chol()).template triangularView<Eigen::Lower>();
    return {2 * (g1.mean() - g2.mean()), std::move(dchol)};
}

template <class Scalar>
using LabelMetric = std::function<Scalar(const Vector<Scalar>&, const Vector<Scalar>&)>;

// C_ij = W2(P_i, Q_j)^2 + beta * rho(nu_i, nu_j)^2; label term dropped if either side lacks labels.
template <class Scalar>
CostMatrix<Scalar> mw2_cost_matrix(const LabeledGMM<Scalar>& p, const LabeledGMM<Scalar>& q, Scalar beta = 0,
                                   const LabelMetric<Scalar>& rho = nullptr)
{
    require(p.dim() == q.dim(), "mw2: mixtures have different dimensions");
    require(beta >= 0, "mw2: beta must be >= 0");
    const bool labeled = p.labels() && q.labels() && beta > 0;
    if (labeled) require(p.n_classes() == q.n_classes(), "mw2: class counts differ");
    CostMatrix<Scalar> c{Matrix<Scalar>(p.size(), q.size())};
    for (Index i = 0; i < p.size(); ++i)
        for (Index j = 0; j < q.size(); ++j) {
            Scalar v = bures_w2_sq(p.component(i), q.component(j));
            if (labeled) {
                const Vector<Scalar> ni = p.labels()->row(i).transpose();
                const Vector<Scalar> nj = q.labels()->row(j).transpose();
                const Scalar r = rho ? rho(ni, nj) : (ni - nj).norm();
                v += beta * r * r;
            }
            c.values(i, j) = v;
        }
    return c;
}

template <class Scalar>
struct Mw2Result {
    Scalar cost = 0;
    TransportPlan<Scalar> omega;
};

/// Mixture-Wasserstein distance squared and its component coupling.
template <class Scalar>
Mw2Result<Scalar> mw2_sq(const LabeledGMM<Scalar>& p, const LabeledGMM<Scalar>& q, Scalar beta = 0,
                         const LabelMetric<Scalar>& rho = nullptr)
{
    const auto c = mw2_cost_matrix(p, q, beta, rho);
    auto sol = solve_exact<Scalar>(p.weights(), q.weights(), c);
    return {std::max(Scalar(0), sol.cost), std::move(sol.plan)};
}

template <class Scalar>
struct MixtureDensity {
    Scalar log_density = 0;
    Vector<Scalar> responsibilities;
};

template <class Scalar>
Scalar gaussian_log_density(const GaussianComponent<Scalar>& g, const ConstVectorRef<Scalar>& z)
{
    const Vector<Scalar> u = g.chol().template triangularView<Eigen::Lower>().solve(z - g.mean());
    const Scalar d = static_cast<Scalar>(g.dim());
    return -Scalar(0.5) * d * std::log(2 * std::numbers::pi_v<Scalar>) - g.chol().diagonal().array().log().sum() -
           Scalar(0.5) * u.squaredNorm();
}

template <class Scalar>
MixtureDensity<Scalar> gmm_log_density(const LabeledGMM<Scalar>& p, const ConstVectorRef<Scalar>& z)
{
    require(z.size() == p.dim(), "gmm_log_density: point dimension differs from mixture");
    Vector<Scalar> logs(p.size());
    for (Index i = 0; i < p.size(); ++i) {
        const Scalar w = p.weights()(i);
        logs(i) = w > 0 ? std::log(w) + gaussian_log_density(p.component(i), z) : -std::numeric_limits<Scalar>::infinity();
    }
    const Scalar m = logs.maxCoeff();
    const Scalar lse = m + std::log((logs.array() - m).exp().sum());
    return {lse, (logs.array() - lse).exp().matrix()};
}

template <class Scalar>
struct ReparamSample {
    Matrix<Scalar> points;
    Eigen::VectorXi component_index;
    Matrix<Scalar> eps;
};

// Index drawn by inverse CDF of the weights from a uniform variate.
template <class Scalar>
int draw_component(const Vector<Scalar>& weights, Scalar u)
{
    Scalar acc = 0;
    for (Index i = 0; i < weights.size(); ++i) {
        acc += weights(i);
        if (u < acc && weights(i) > 0) return static_cast<int>(i);
    }
    for (Index i = weights.size() - 1; i >= 0; --i)
        if (weights(i) > 0) return static_cast<int>(i);
    return 0;
}

/// z = L_i eps + mu_i with i ~ pi and eps ~ N(0, I); the draws are returned so
/// gradients can be carried back to (mu, L).
template <class Scalar>
ReparamSample<Scalar> sample_reparam(const LabeledGMM<Scalar>& p, Index n, Rng& rng)
{
    const Index d = p.dim();
    ReparamSample<Scalar> out{Matrix<Scalar>(n, d), Eigen::VectorXi(n), Matrix<Scalar>(n, d)};
    std::uniform_real_distribution<Scalar> unif(Scalar(0), Scalar(1));
    std::normal_distribution<Scalar> normal(Scalar(0), Scalar(1));
    for (Index s = 0; s < n; ++s) {
        const int i = draw_component(p.weights(), unif(rng));
        out.component_index(s) = i;
        for (Index k = 0; k < d; ++k) out.eps(s, k) = normal(rng);
        const auto& g = p.component(i);
        out.points.row(s) = (g.chol() * out.eps.row(s).transpose() + g.mean()).transpose();
    }
    return out;
}

template <class Scalar>
ReparamSample<Scalar> sample_reparam(const LabeledGMM<Scalar>& p, Index n, std::uint64_t seed)
{
    Rng rng = make_rng(seed);
    return sample_reparam(p, n, rng);
}

template <class Scalar>
struct EmFit {
    LabeledGMM<Scalar> gmm;
    // one log-likelihood trace per fitted group (per class, or a single pooled fit)
    std::vector<std::vector<Scalar>> log_likelihood;
};

struct EmOptions {
    int components_per_class = 1;
    int max_iter = 200;
    double tol = 1e-8;
    std::uint64_t seed = 0;
    bool diagonal = false;
};

namespace detail {

template <class Scalar>
struct EmGroup {
    Vector<Scalar> weights;
    std::vector<Matrix<Scalar>> covs;
    Matrix<Scalar> means;
    std::vector<Scalar> trace;
};

template <class Scalar>
Matrix<Scalar> ridge_covariance(Matrix<Scalar> cov, bool diagonal)
{
    const Index d = cov.rows();
    if (diagonal) cov = Matrix<Scalar>(cov.diagonal().asDiagonal());
    const Scalar ridge = std::max(Scalar(1e-6) * cov.trace() / static_cast<Scalar>(d), Scalar(1e-12));
    cov.diagonal().array() += ridge;
    return Scalar(0.5) * (cov + cov.transpose());
}

template <class Scalar>
EmGroup<Scalar> em_group(const Matrix<Scalar>& x, int k, const EmOptions& opt, Rng& rng)
{
    const Index n = x.rows();
    const Index d = x.cols();
    // k-means++ seeding
    Matrix<Scalar> centers(k, d);
    std::uniform_int_distribution<Index> pick(0, n - 1);
    centers.row(0) = x.row(pick(rng));
    Vector<Scalar> dist = Vector<Scalar>::Constant(n, std::numeric_limits<Scalar>::infinity());
    for (int c = 1; c < k; ++c) {
        for (Index i = 0; i < n; ++i) dist(i) = std::min(dist(i), (x.row(i) - centers.row(c - 1)).squaredNorm());
        const Scalar total = dist.sum();
        Index chosen = pick(rng);
        if (total > 0) {
            std::uniform_real_distribution<Scalar> unif(Scalar(0), total);
            Scalar u = unif(rng), acc = 0;
            for (Index i = 0; i < n; ++i) {
                acc += dist(i);
                if (u < acc) {
                    chosen = i;
                    break;
                }
            }
        }
        centers.row(c) = x.row(chosen);
    }
    Matrix<Scalar> resp = Matrix<Scalar>::Zero(n, k);
    for (Index i = 0; i < n; ++i) {
        Index best = 0;
        (centers.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
        resp(i, best) = 1;
    }

    const Matrix<Scalar> pooled_cov = [&] {
        const Matrix<Scalar> centered = x.rowwise() - x.colwise().mean();
        Matrix<Scalar> c = centered.transpose() * centered / static_cast<Scalar>(n);
        return ridge_covariance<Scalar>(c, opt.diagonal);
    }();

    EmGroup<Scalar> g{Vector<Scalar>(k), std::vector<Matrix<Scalar>>(static_cast<std::size_t>(k), pooled_cov),
                      Matrix<Scalar>(k, d), {}};
    auto m_step = [&] {
        for (int c = 0; c < k; ++c) {
            const Scalar nk = resp.col(c).sum();
            if (nk <= Scalar(1e-12)) {
                g.weights(c) = 0;
                g.means.row(c) = centers.row(c);
                g.covs[static_cast<std::size_t>(c)] = pooled_cov;
                continue;
            }
            g.weights(c) = nk / static_cast<Scalar>(n);
            g.means.row(c) = (resp.col(c).transpose() * x) / nk;
            const Matrix<Scalar> centered = x.rowwise() - g.means.row(c);
            Matrix<Scalar> cov = centered.transpose() * resp.col(c).asDiagonal() * centered / nk;
            g.covs[static_cast<std::size_t>(c)] = ridge_covariance<Scalar>(cov, opt.diagonal);
        }
        g.weights /= g.weights.sum();
    };
    auto e_step = [&] {
        std::vector<Eigen::LLT<Matrix<Scalar>>> llts;
        std::vector<Scalar> log_norm;
        for (int c = 0; c < k; ++c) {
            llts.emplace_back(g.covs[static_cast<std::size_t>(c)]);
            const Matrix<Scalar> l = llts.back().matrixL();
            log_norm.push_back(-Scalar(0.5) * static_cast<Scalar>(d) * std::log(2 * std::numbers::pi_v<Scalar>) -
                               l.diagonal().array().log().sum());
        }
        Scalar ll = 0;
        Vector<Scalar> logs(k);
        for (Index i = 0; i < n; ++i) {
            for (int c = 0; c < k; ++c) {
                if (g.weights(c) <= 0) {
                    logs(c) = -std::numeric_limits<Scalar>::infinity();
                    continue;
                }
                const Vector<Scalar> u = llts[static_cast<std::size_t>(c)].matrixL().solve(
                    (x.row(i) - g.means.row(c)).transpose());
                logs(c) = std::log(g.weights(c)) + log_norm[static_cast<std::size_t>(c)] - Scalar(0.5) * u.squaredNorm();
            }
            const Scalar m = logs.maxCoeff();
            const Scalar lse = m + std::log((logs.array() - m).exp().sum());
            resp.row(i) = (logs.array() - lse).exp().matrix().transpose();
            ll += lse;
        }
        return ll;
    };

    m_step();
    for (int it = 0; it < opt.max_iter; ++it) {
        const Scalar ll = e_step();
        g.trace.push_back(ll);
        const auto t = g.trace.size();
        if (t >= 2 && std::abs(g.trace[t - 1] - g.trace[t - 2]) <= static_cast<Scalar>(opt.tol) * std::max(Scalar(1), std::abs(ll)))
            break;
        m_step();
    }
    return g;
}

} // namespace detail

/// EM fit of a full- (or diagonal-) covariance GMM. With labels, each class is
/// fitted separately, component labels are the class one-hots and global weights
/// are class frequency times within-class weight.
template <class Scalar>
EmFit<Scalar> em_fit(const ConstMatrixRef<Scalar>& data, const std::optional<Labels>& labels, int n_classes,
                     const EmOptions& opt)
{
    require(data.rows() >= 1 && data.cols() >= 1, "em_fit: empty data");
    require(data.allFinite(), "em_fit: non-finite data");
    require(opt.components_per_class >= 1, "em_fit: components_per_class must be >= 1");
    Rng rng = make_rng(opt.seed, {0x454d});
    const Index n = data.rows();
    const int k = opt.components_per_class;

    std::vector<int> classes;
    if (labels) {
        require(labels->size() == n, "em_fit: label count differs from rows");
        require(n_classes >= 1, "em_fit: need n_classes >= 1 with labels");
        for (int c = 0; c < n_classes; ++c) classes.push_back(c);
    } else {
        classes.push_back(-1);
    }

    std::vector<GaussianComponent<Scalar>> comps;
    std::vector<Scalar> weights;
    std::vector<int> comp_class;
    std::vector<std::vector<Scalar>> traces;
    for (int c : classes) {
        std::vector<Index> rows;
        for (Index i = 0; i < n; ++i)
            if (c < 0 || (*labels)(i) == c) rows.push_back(i);
        if (rows.empty()) throw ValidationError("em_fit: class " + std::to_string(c) + " has no samples");
        if (static_cast<Index>(rows.size()) < k)
            throw ValidationError("em_fit: class " + std::to_string(c) + " has fewer samples than components");
        Matrix<Scalar> x(static_cast<Index>(rows.size()), data.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) x.row(static_cast<Index>(r)) = data.row(rows[r]);
        auto group = detail::em_group<Scalar>(x, k, opt, rng);
        const Scalar class_freq = static_cast<Scalar>(rows.size()) / static_cast<Scalar>(n);
        for (int j = 0; j < k; ++j) {
            comps.push_back(GaussianComponent<Scalar>::from_covariance(group.means.row(j).transpose(),
                                                                      group.covs[static_cast<std::size_t>(j)]));
            weights.push_back(class_freq * group.weights(j));
            comp_class.push_back(c);
        }
        traces.push_back(std::move(group.trace));
    }
    Vector<Scalar> w = Eigen::Map<Vector<Scalar>>(weights.data(), static_cast<Index>(weights.size()));
    w /= w.sum();
    std::optional<Matrix<Scalar>> nu;
    if (labels) {
        Labels cls = Eigen::Map<Labels>(comp_class.data(), static_cast<Index>(comp_class.size()));
        nu = one_hot<Scalar>(cls, n_classes);
    }
    return {LabeledGMM<Scalar>(std::move(w), std::move(comps), std::move(nu)), std::move(traces)};
}

template <class Scalar>
struct GaussianBarycenter {
    GaussianComponent<Scalar> barycenter;
    int iterations = 0;
    bool converged = false;
};

/// Fixed-point iteration S <- S^-1/2 (sum_k lambda_k (S^1/2 S_k S^1/2)^1/2)^2 S^-1/2,
/// started at the first covariance; stops once the W2 change falls below tol or
/// the covariance update is at rounding level.
template <class Scalar>
GaussianBarycenter<Scalar> fixed_point_gaussian_barycenter(const std::vector<GaussianComponent<Scalar>>& gaussians,
                                                           const Vector<Scalar>& lambda, Scalar tol = Scalar(1e-12),
                                                           int max_iter = 1000)
{
    require(!gaussians.empty(), "gaussian barycenter needs at least one input");
    require(lambda.size() == static_cast<Index>(gaussians.size()), "lambda length differs from input count");
    require(validate_simplex(lambda, Scalar(1e-12)), "lambda must lie on the simplex");
    const Index d = gaussians.front().dim();
    Vector<Scalar> mean = Vector<Scalar>::Zero(d);
    for (std::size_t k = 0; k < gaussians.size(); ++k) {
        require(gaussians[k].dim() == d, "gaussian barycenter inputs have different dimensions");
        mean += lambda(static_cast<Index>(k)) * gaussians[k].mean();
    }
    GaussianComponent<Scalar> current(mean, gaussians.front().chol());
    for (int it = 1; it <= max_iter; ++it) {
        const Matrix<Scalar> s = current.covariance();
        Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(s);
        const Matrix<Scalar>& v = eig.eigenvectors();
        const Vector<Scalar> ev = eig.eigenvalues().cwiseMax(std::numeric_limits<Scalar>::min());
        const Matrix<Scalar> root = v * ev.cwiseSqrt().asDiagonal() * v.transpose();
        const Matrix<Scalar> inv_root = v * ev.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
        Matrix<Scalar> acc = Matrix<Scalar>::Zero(d, d);
        for (std::size_t k = 0; k < gaussians.size(); ++k) {
            const Matrix<Scalar> inner = root * gaussians[k].covariance() * root;
            acc += lambda(static_cast<Index>(k)) * matrix_sqrt_psd(Scalar(0.5) * (inner + inner.transpose()));
        }
        Matrix<Scalar> next = inv_root * acc * acc * inv_root;
        next = Scalar(0.5) * (next + next.transpose());
        const bool stalled = (next - s).norm() <= 64 * std::numeric_limits<Scalar>::epsilon() * s.norm();
        auto candidate = GaussianComponent<Scalar>::from_covariance(mean, next);
        const Scalar change = std::sqrt(bures_w2_sq(current, candidate));
        current = std::move(candidate);
        if (stalled || change < tol) return {std::move(current), it, true};
    }
    return {std::move(current), max_iter, false};
}

} // namespace baryflow
