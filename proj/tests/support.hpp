#pragma once

#include "baryflow/gaussian.hpp"
#include "baryflow/measures.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

namespace bft {

using namespace baryflow;

inline Matrix<double> random_matrix(Index r, Index c, Rng& rng) { return standard_normal<double>(r, c, rng); }

inline Matrix<double> random_spd(Index d, Rng& rng, double floor = 0.3)
{
    const Matrix<double> a = random_matrix(d, d, rng);
    return a * a.transpose() / static_cast<double>(d) + floor * Matrix<double>::Identity(d, d);
}

inline GaussianComponent<double> random_gaussian(Index d, Rng& rng)
{
    return GaussianComponent<double>::from_covariance(random_matrix(d, 1, rng), random_spd(d, rng));
}

inline Vector<double> random_simplex(Index n, Rng& rng)
{
    std::uniform_real_distribution<double> u(0.1, 1.0);
    Vector<double> v(n);
    for (Index i = 0; i < n; ++i) v(i) = u(rng);
    return v / v.sum();
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

template <class A, class B>
double rel_err(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b)
{
    return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-8});
}

// Central differences of f over every entry of x.
template <class F>
Matrix<double> fd_gradient(F f, Matrix<double> x, double h = 1e-5)
{
    Matrix<double> g(x.rows(), x.cols());
    for (Index i = 0; i < x.rows(); ++i)
        for (Index j = 0; j < x.cols(); ++j) {
            const double v = x(i, j);
            x(i, j) = v + h;
            const double fp = f(x);
            x(i, j) = v - h;
            const double fm = f(x);
            x(i, j) = v;
            g(i, j) = (fp - fm) / (2 * h);
        }
    return g;
}

// Brute-force OT for uniform n x n problems: minimum over permutation couplings.
inline double brute_force_uniform(const Matrix<double>& c)
{
    const Index n = c.rows();
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0;
        for (Index i = 0; i < n; ++i) s += c(i, perm[static_cast<std::size_t>(i)]);
        best = std::min(best, s / static_cast<double>(n));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

inline double sample_mean(const Matrix<double>& x, Index col = 0) { return x.col(col).mean(); }

inline double sample_std(const Matrix<double>& x, Index col = 0)
{
    const double m = x.col(col).mean();
    return std::sqrt((x.col(col).array() - m).square().mean());
}

inline std::string read_file(const std::filesystem::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& s)
{
    std::ofstream os(p, std::ios::binary);
    os << s;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("baryflow_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    const std::filesystem::path& path() const { return path_; }
    std::string operator/(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

} // namespace bft
