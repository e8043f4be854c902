#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace baryflow {

template <class Scalar, int Rows = Eigen::Dynamic, int Cols = Eigen::Dynamic>
using Matrix = Eigen::Matrix<Scalar, Rows, Cols>;

template <class Scalar, int Rows = Eigen::Dynamic>
using Vector = Eigen::Matrix<Scalar, Rows, 1>;

template <class Scalar>
using ConstMatrixRef = Eigen::Ref<const Matrix<Scalar>>;

template <class Scalar>
using ConstVectorRef = Eigen::Ref<const Vector<Scalar>>;

using Index = Eigen::Index;
using Labels = Eigen::VectorXi;
using Rng = std::mt19937_64;

// Input violates a documented precondition (shape, simplex, finiteness).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A solver or decomposition failed on otherwise valid input.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg)
{
    if (!cond) throw ValidationError(msg);
}

template <class Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m)
{
    return m.allFinite();
}

// Derives an independent generator from a base seed and a list of stream ids,
// so results do not depend on the order in which streams are consumed.
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream = {})
{
    std::vector<std::uint32_t> words;
    words.push_back(static_cast<std::uint32_t>(seed));
    words.push_back(static_cast<std::uint32_t>(seed >> 32));
    for (auto s : stream) {
        words.push_back(static_cast<std::uint32_t>(s));
        words.push_back(static_cast<std::uint32_t>(s >> 32));
    }
    std::seed_seq seeded(words.begin(), words.end());
    return Rng(seeded);
}

template <class Scalar>
Matrix<Scalar> standard_normal(Index rows, Index cols, Rng& rng)
{
    std::normal_distribution<Scalar> normal(Scalar(0), Scalar(1));
    Matrix<Scalar> out(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) out(i, j) = normal(rng);
    return out;
}

} // namespace baryflow
