#pragma once

#include "baryflow/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace baryflow::detail {

// Primal network simplex for the uncapacitated transportation problem on the
// complete bipartite graph (n supplies -> m demands). The spanning tree is
// rooted at an artificial node joined to every node by a big-M arc, and the
// leaving-arc rule keeps the tree strongly feasible. Flow is stored per node:
// the flow on the arc joining a node to its parent.
template <class Scalar>
class TransportSimplex {
public:
    TransportSimplex(const ConstVectorRef<Scalar>& supply, const ConstVectorRef<Scalar>& demand,
                     const ConstMatrixRef<Scalar>& cost)
        : n_(supply.size()), m_(demand.size()), root_(n_ + m_), real_arcs_(n_ * m_)
    {
        cost_.resize(static_cast<std::size_t>(real_arcs_));
        Scalar max_cost = 0;
        for (Index i = 0; i < n_; ++i)
            for (Index j = 0; j < m_; ++j) {
                const Scalar c = cost(i, j);
                cost_[static_cast<std::size_t>(i * m_ + j)] = c;
                max_cost = std::max(max_cost, std::abs(c));
            }
        art_cost_ = (max_cost + 1) * static_cast<Scalar>(n_ + m_ + 1);
        init(supply, demand);
    }

    // Returns the number of pivots performed.
    std::int64_t run(std::int64_t max_pivots)
    {
        const std::int64_t block = std::max<std::int64_t>(
            10, static_cast<std::int64_t>(std::sqrt(static_cast<double>(real_arcs_))));
        std::int64_t pivots = 0;
        while (true) {
            const std::int64_t entering = find_entering(block);
            if (entering < 0) break;
            if (++pivots > max_pivots) throw NumericalError("network simplex: pivot limit exceeded");
            pivot(entering);
        }
        return pivots;
    }

    Matrix<Scalar> plan() const
    {
        Matrix<Scalar> out = Matrix<Scalar>::Zero(n_, m_);
        for (Index u = 0; u < root_; ++u) {
            const std::int64_t a = pred_[u];
            if (a < real_arcs_) out(a / m_, a % m_) = flow_[u];
        }
        return out;
    }

    Vector<Scalar> potentials() const
    {
        return Eigen::Map<const Vector<Scalar>>(pi_.data(), static_cast<Index>(pi_.size()));
    }

    // Mass left on artificial arcs; zero (up to rounding) for balanced input.
    Scalar artificial_flow() const
    {
        Scalar total = 0;
        for (Index u = 0; u < root_; ++u)
            if (pred_[u] >= real_arcs_) total += flow_[u];
        return total;
    }

private:
    Index n_, m_, root_;
    std::int64_t real_arcs_;
    std::vector<Scalar> cost_;
    Scalar art_cost_ = 0;

    std::vector<Index> parent_;
    std::vector<std::int64_t> pred_;
    std::vector<char> pred_up_; // pred arc is directed node -> parent
    std::vector<Scalar> flow_;
    std::vector<Scalar> pi_;
    std::vector<Index> depth_;
    std::vector<std::vector<std::int64_t>> tree_arcs_;
    std::vector<char> art_up_;
    std::int64_t next_arc_ = 0;

    // scratch
    std::vector<Index> path_;
    std::vector<std::int64_t> old_pred_;
    std::vector<Scalar> old_flow_;
    std::vector<char> old_up_;
    std::vector<Index> stack_;

    Index source(std::int64_t a) const
    {
        if (a < real_arcs_) return static_cast<Index>(a / m_);
        const Index u = static_cast<Index>(a - real_arcs_);
        return art_up_[u] ? u : root_;
    }

    Index target(std::int64_t a) const
    {
        if (a < real_arcs_) return n_ + static_cast<Index>(a % m_);
        const Index u = static_cast<Index>(a - real_arcs_);
        return art_up_[u] ? root_ : u;
    }

    Scalar arc_cost(std::int64_t a) const
    {
        if (a < real_arcs_) return cost_[static_cast<std::size_t>(a)];
        const Index u = static_cast<Index>(a - real_arcs_);
        return art_up_[u] ? Scalar(0) : art_cost_;
    }

    void init(const ConstVectorRef<Scalar>& supply, const ConstVectorRef<Scalar>& demand)
    {
        const Index nodes = root_ + 1;
        parent_.assign(nodes, -1);
        pred_.assign(nodes, -1);
        pred_up_.assign(nodes, 0);
        flow_.assign(nodes, 0);
        pi_.assign(nodes, 0);
        depth_.assign(nodes, 0);
        tree_arcs_.assign(nodes, {});
        art_up_.assign(root_, 0);
        tree_arcs_[root_].reserve(root_);
        for (Index u = 0; u < root_; ++u) {
            const Scalar s = u < n_ ? supply(u) : -demand(u - n_);
            const std::int64_t a = real_arcs_ + u;
            parent_[u] = root_;
            pred_[u] = a;
            depth_[u] = 1;
            if (s >= 0) {
                art_up_[u] = 1;
                pred_up_[u] = 1;
                flow_[u] = s;
                pi_[u] = 0;
            } else {
                art_up_[u] = 0;
                pred_up_[u] = 0;
                flow_[u] = -s;
                pi_[u] = art_cost_;
            }
            tree_arcs_[u].push_back(a);
            tree_arcs_[root_].push_back(a);
        }
    }

    bool is_tree_arc(std::int64_t a) const
    {
        return pred_[source(a)] == a || pred_[target(a)] == a;
    }

    // Block search pricing over real arcs; returns -1 at optimality.
    std::int64_t find_entering(std::int64_t block)
    {
        Scalar best = 0;
        std::int64_t best_arc = -1;
        std::int64_t count = 0;
        std::int64_t a = next_arc_;
        Index i = static_cast<Index>(a / m_);
        Index j = static_cast<Index>(a % m_);
        const Scalar* c = cost_.data();
        for (std::int64_t scanned = 0; scanned < real_arcs_; ++scanned) {
            const Scalar rc = c[a] + pi_[i] - pi_[n_ + j];
            if (rc < best && !is_tree_arc(a)) {
                const Scalar scale = std::abs(c[a]) + std::abs(pi_[i]) + std::abs(pi_[n_ + j]);
                if (rc < -Scalar(1e-13) * (scale + 1)) {
                    best = rc;
                    best_arc = a;
                }
            }
            ++a;
            if (++j == m_) {
                j = 0;
                if (++i == n_) {
                    i = 0;
                    a = 0;
                }
            }
            if (++count == block) {
                if (best_arc >= 0) {
                    next_arc_ = a;
                    return best_arc;
                }
                count = 0;
            }
        }
        next_arc_ = a;
        return best_arc;
    }

    void remove_tree_arc(Index u, std::int64_t a)
    {
        auto& v = tree_arcs_[u];
        auto it = std::find(v.begin(), v.end(), a);
        *it = v.back();
        v.pop_back();
    }

    void pivot(std::int64_t entering)
    {
        const Index first = source(entering);
        const Index second = target(entering);

        Index u = first, v = second;
        while (u != v) {
            if (depth_[u] >= depth_[v]) u = parent_[u];
            else v = parent_[v];
        }
        const Index join = u;

        // Leaving arc: last blocking arc in cycle orientation.
        constexpr Scalar inf = std::numeric_limits<Scalar>::infinity();
        Scalar delta = inf;
        Index u_out = -1;
        int side = 0;
        for (Index w = first; w != join; w = parent_[w]) {
            const Scalar d = pred_up_[w] ? flow_[w] : inf;
            if (d < delta) {
                delta = d;
                u_out = w;
                side = 1;
            }
        }
        for (Index w = second; w != join; w = parent_[w]) {
            const Scalar d = pred_up_[w] ? inf : flow_[w];
            if (d <= delta) {
                delta = d;
                u_out = w;
                side = 2;
            }
        }
        if (side == 0 || !std::isfinite(delta)) throw NumericalError("network simplex: unbounded cycle");

        if (delta > 0) {
            for (Index w = first; w != join; w = parent_[w]) flow_[w] += pred_up_[w] ? -delta : delta;
            for (Index w = second; w != join; w = parent_[w]) flow_[w] += pred_up_[w] ? delta : -delta;
        }

        const Index u_in = side == 1 ? first : second;
        const Index v_in = side == 1 ? second : first;

        path_.clear();
        for (Index w = u_in;; w = parent_[w]) {
            path_.push_back(w);
            if (w == u_out) break;
        }
        const std::size_t k = path_.size();
        old_pred_.resize(k);
        old_flow_.resize(k);
        old_up_.resize(k);
        for (std::size_t t = 0; t < k; ++t) {
            old_pred_[t] = pred_[path_[t]];
            old_flow_[t] = flow_[path_[t]];
            old_up_[t] = pred_up_[path_[t]];
        }

        const std::int64_t leaving = pred_[u_out];
        remove_tree_arc(u_out, leaving);
        remove_tree_arc(parent_[u_out], leaving);

        parent_[u_in] = v_in;
        pred_[u_in] = entering;
        flow_[u_in] = delta;
        pred_up_[u_in] = (u_in == first) ? 1 : 0;
        for (std::size_t t = 1; t < k; ++t) {
            parent_[path_[t]] = path_[t - 1];
            pred_[path_[t]] = old_pred_[t - 1];
            flow_[path_[t]] = old_flow_[t - 1];
            pred_up_[path_[t]] = old_up_[t - 1] ? 0 : 1;
        }
        tree_arcs_[first].push_back(entering);
        tree_arcs_[second].push_back(entering);

        const Scalar c = arc_cost(entering);
        const Scalar new_pi = pred_up_[u_in] ? pi_[v_in] - c : pi_[v_in] + c;
        const Scalar sigma = new_pi - pi_[u_in];

        stack_.clear();
        stack_.push_back(u_in);
        while (!stack_.empty()) {
            const Index x = stack_.back();
            stack_.pop_back();
            pi_[x] += sigma;
            depth_[x] = depth_[parent_[x]] + 1;
            for (const std::int64_t a : tree_arcs_[x]) {
                const Index y = source(a) == x ? target(a) : source(a);
                if (y != parent_[x]) stack_.push_back(y);
            }
        }
    }
};

} // namespace baryflow::detail
