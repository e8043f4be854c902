#include "support.hpp"

#include "baryflow/flow_gmm.hpp"
#include "baryflow/ot.hpp"

using namespace baryflow;
using bft::rel_err;

namespace {

LabeledGMM<double> single(const GaussianComponent<double>& g) { return LabeledGMM<double>(Vector<double>::Ones(1), {g}); }

GaussianComponent<double> g1d(double mu, double sigma)
{
    return GaussianComponent<double>(Vector<double>::Constant(1, mu), Matrix<double>::Constant(1, 1, sigma));
}

GaussianComponent<double> axis_aligned(Index d, Rng& rng)
{
    std::uniform_real_distribution<double> s(0.3, 2.0);
    Vector<double> sd(d);
    for (Index i = 0; i < d; ++i) sd(i) = s(rng);
    return GaussianComponent<double>(bft::random_matrix(d, 1, rng), Matrix<double>(sd.asDiagonal()));
}

LabeledGMM<double> random_mixture(Index n, Index d, Rng& rng, bool diagonal = false)
{
    std::vector<GaussianComponent<double>> comps;
    for (Index i = 0; i < n; ++i) comps.push_back(diagonal ? axis_aligned(d, rng) : bft::random_gaussian(d, rng));
    return LabeledGMM<double>(bft::random_simplex(n, rng), comps);
}

LabeledGMM<double> with_means_scaled(const LabeledGMM<double>& p, double s)
{
    std::vector<GaussianComponent<double>> comps;
    for (const auto& c : p.components()) comps.emplace_back(s * c.mean(), c.chol());
    return LabeledGMM<double>(p.weights(), comps, p.labels());
}

} // namespace

TEST_CASE("gmm_flow_step leaves an input fixed")
{
    Rng rng = make_rng(60);
    const auto q = random_mixture(3, 2, rng);
    GmmFlowConfig cfg;
    const auto next = gmm_flow_step(make_gmm_state(q), {q}, cfg);
    for (Index i = 0; i < 3; ++i) {
        CHECK((next.gmm.component(i).mean() - q.component(i).mean()).norm() < 1e-10);
        CHECK((next.gmm.component(i).chol() - q.component(i).chol()).norm() < 1e-7);
    }
    CHECK(next.trace.front().B_hat < 1e-12);
}

TEST_CASE("gmm flow recovers the 1-D gaussian barycenter")
{
    GmmFlowConfig cfg;
    cfg.n_iter = 200;
    const auto r = run_gmm_flow({single(g1d(0, 1)), single(g1d(4, 1))}, cfg, single(g1d(-1, 3)));
    const auto& c = r.gmm.component(0);
    CHECK(c.mean()(0) >= 1.95);
    CHECK(c.mean()(0) <= 2.05);
    CHECK(c.chol()(0, 0) >= 0.95);
    CHECK(c.chol()(0, 0) <= 1.05);
    CHECK(r.trace.size() == 201);
}

TEST_CASE("gmm flow matches the fixed-point gaussian barycenter in 2-D")
{
    Rng rng = make_rng(61);
    for (int t = 0; t < 5; ++t) {
        const auto a = bft::random_gaussian(2, rng), b = bft::random_gaussian(2, rng);
        GmmFlowConfig cfg;
        cfg.n_iter = 300;
        cfg.seed = static_cast<std::uint64_t>(t);
        const auto r = run_gmm_flow({single(a), single(b)}, cfg);
        const auto oracle = fixed_point_gaussian_barycenter<double>({a, b}, uniform_weights<double>(2));
        REQUIRE(oracle.converged);
        CHECK(std::sqrt(bures_w2_sq(r.gmm.component(0), oracle.barycenter)) <= 1e-2);
    }
}

TEST_CASE("diag_only keeps off-diagonal factors at zero")
{
    Rng rng = make_rng(62);
    const auto p = random_mixture(2, 3, rng, true), q = random_mixture(3, 3, rng, true);
    GmmFlowConfig cfg;
    cfg.n_components = 2;
    cfg.diag_only = true;
    cfg.n_iter = 30;
    const auto r = run_gmm_flow({p, q}, cfg);
    for (const auto& c : r.gmm.components())
        for (Index i = 0; i < 3; ++i)
            for (Index j = 0; j < 3; ++j)
                if (i != j) CHECK(c.chol()(i, j) == 0.0);
}

TEST_CASE("diag_only step equals the axis-aligned interpolation update")
{
    Rng rng = make_rng(63);
    for (int t = 0; t < 20; ++t) {
        const Index d = 1 + t % 3;
        const auto start = random_mixture(3, d, rng, true);
        const std::vector<LabeledGMM<double>> inputs{random_mixture(2, d, rng, true), random_mixture(4, d, rng, true)};
        GmmFlowConfig cfg;
        cfg.diag_only = true;
        cfg.step_size = 0.3;
        cfg.coordinates = bft::random_simplex(2, rng);
        const auto state = make_gmm_state(start);
        const auto ev = evaluate_gmm_step(state, inputs, cfg);
        const auto next = gmm_flow_step(state, inputs, cfg);
        const double a = cfg.step_size;
        for (Index i = 0; i < 3; ++i) {
            const double pi = state.gmm.weights()(i);
            Vector<double> mu = Vector<double>::Zero(d), sd = Vector<double>::Zero(d);
            for (std::size_t k = 0; k < 2; ++k)
                for (Index j = 0; j < inputs[k].size(); ++j) {
                    const double w = (*cfg.coordinates)(static_cast<Index>(k)) * ev.omegas[k].coupling(i, j) / pi;
                    mu += w * inputs[k].component(j).mean();
                    sd += w * inputs[k].component(j).chol().diagonal();
                }
            const auto& c = state.gmm.component(i);
            CHECK((next.gmm.component(i).mean() - ((1 - a) * c.mean() + a * mu)).cwiseAbs().maxCoeff() <= 1e-6);
            CHECK((next.gmm.component(i).chol().diagonal() - ((1 - a) * c.chol().diagonal() + a * sd)).cwiseAbs().maxCoeff() <=
                  1e-6);
        }
    }
}

TEST_CASE("mixture gradients match finite differences of the plan-fixed objective")
{
    Rng rng = make_rng(64);
    for (int t = 0; t < 100; ++t) {
        const Index d = 1 + t % 3;
        const auto p = random_mixture(2 + t % 2, d, rng);
        const std::vector<LabeledGMM<double>> inputs{random_mixture(2, d, rng), random_mixture(3, d, rng)};
        GmmFlowConfig cfg;
        cfg.coordinates = bft::random_simplex(2, rng);
        const auto state = make_gmm_state(p);
        const auto ev = evaluate_gmm_step(state, inputs, cfg);

        const auto objective = [&](const LabeledGMM<double>& x) {
            double v = 0;
            for (std::size_t k = 0; k < 2; ++k)
                for (Index i = 0; i < x.size(); ++i)
                    for (Index j = 0; j < inputs[k].size(); ++j)
                        v += (*cfg.coordinates)(static_cast<Index>(k)) * ev.omegas[k].coupling(i, j) *
                             bures_w2_sq(x.component(i), inputs[k].component(j));
            return v;
        };
        CHECK(std::abs(objective(state.gmm) - ev.record.B_hat) <= 1e-10 * std::max(1.0, ev.record.B_hat));
        for (Index i = 0; i < p.size(); ++i) {
            const auto replace = [&](GaussianComponent<double> c) {
                auto comps = state.gmm.components();
                comps[static_cast<std::size_t>(i)] = std::move(c);
                return LabeledGMM<double>(state.gmm.weights(), comps);
            };
            const auto& ci = state.gmm.component(i);
            const auto fmu = [&](const Matrix<double>& mu) { return objective(replace(GaussianComponent<double>(mu, ci.chol()))); };
            const auto fl = [&](const Matrix<double>& l) {
                return objective(replace(GaussianComponent<double>(ci.mean(), l.triangularView<Eigen::Lower>())));
            };
            CHECK(rel_err(ev.grad_mu[static_cast<std::size_t>(i)], bft::fd_gradient(fmu, ci.mean())) < 1e-4);
            const Matrix<double> fdl = bft::fd_gradient(fl, ci.chol()).triangularView<Eigen::Lower>();
            CHECK(rel_err(ev.grad_chol[static_cast<std::size_t>(i)], fdl) < 1e-4);
        }
    }
}

TEST_CASE("label gradients match finite differences of the plan-fixed objective")
{
    Rng rng = make_rng(65);
    std::uniform_int_distribution<int> pick(0, 2);
    for (int t = 0; t < 30; ++t) {
        auto labeled = [&](Index n) {
            const auto m = random_mixture(n, 2, rng);
            Labels l(n);
            for (Index i = 0; i < n; ++i) l(i) = pick(rng);
            return LabeledGMM<double>(m.weights(), m.components(), one_hot<double>(l, 3));
        };
        const auto p = labeled(3);
        const std::vector<LabeledGMM<double>> inputs{labeled(2), labeled(3)};
        GmmFlowConfig cfg;
        cfg.label_weight = 2.0;
        auto state = make_gmm_state(p);
        state.label_logits = bft::random_matrix(3, 3, rng);
        state.gmm = LabeledGMM<double>(p.weights(), p.components(), softmax_rows(*state.label_logits));
        const auto ev = evaluate_gmm_step(state, inputs, cfg);
        const auto f = [&](const Matrix<double>& logits) {
            const Matrix<double> nu = softmax_rows(logits);
            double v = 0;
            for (std::size_t k = 0; k < 2; ++k)
                for (Index i = 0; i < 3; ++i)
                    for (Index j = 0; j < inputs[k].size(); ++j)
                        v += 0.5 * ev.omegas[k].coupling(i, j) * cfg.label_weight *
                             (nu.row(i) - inputs[k].labels()->row(j)).squaredNorm();
            return v;
        };
        CHECK(rel_err(ev.grad_label_logits, bft::fd_gradient(f, *state.label_logits)) < 1e-4);
    }
}

TEST_CASE("labels form a bijection onto the classes")
{
    Rng rng = make_rng(66);
    const Index c = 3;
    auto make = [&](double shift) {
        std::vector<GaussianComponent<double>> comps;
        for (Index k = 0; k < c; ++k) {
            Vector<double> m(2);
            m << 4 * std::cos(2.0 * k) + shift, 4 * std::sin(2.0 * k);
            comps.emplace_back(m, 0.5 * Matrix<double>::Identity(2, 2));
        }
        Labels l(c);
        l << 0, 1, 2;
        return LabeledGMM<double>(uniform_weights<double>(c), comps, one_hot<double>(l, static_cast<int>(c)));
    };
    GmmFlowConfig cfg;
    cfg.n_components = c;
    cfg.label_weight = 10.0;
    cfg.n_iter = 100;
    cfg.init = GmmInit::random;
    cfg.seed = 9;
    const auto r = run_gmm_flow({make(0.0), make(0.5)}, cfg);
    REQUIRE(r.gmm.labels());
    Labels hard = argmax_rows(*r.gmm.labels());
    std::sort(hard.data(), hard.data() + hard.size());
    CHECK(hard == (Labels(3) << 0, 1, 2).finished());
}

TEST_CASE("gmm trace is non-increasing for a small step")
{
    Rng rng = make_rng(67);
    const std::vector<LabeledGMM<double>> inputs{random_mixture(3, 2, rng), with_means_scaled(random_mixture(3, 2, rng), 3.0)};
    GmmFlowConfig cfg;
    cfg.n_components = 3;
    cfg.step_size = 0.05;
    cfg.n_iter = 60;
    const auto r = run_gmm_flow(inputs, cfg);
    for (std::size_t t = 1; t < r.trace.size(); ++t) CHECK(r.trace[t].B_hat <= r.trace[t - 1].B_hat + 1e-9);
    for (const auto& rec : r.trace) {
        CHECK(std::isfinite(rec.mean_norm));
        CHECK(std::isfinite(rec.chol_norm));
    }
}

TEST_CASE("gmm flow is invariant to input order")
{
    Rng rng = make_rng(68);
    const auto a = random_mixture(2, 2, rng), b = random_mixture(3, 2, rng), c = random_mixture(2, 2, rng);
    const auto init = random_mixture(2, 2, rng);
    GmmFlowConfig cfg;
    cfg.n_components = 2;
    cfg.n_iter = 40;
    cfg.coordinates = (Vector<double>(3) << 0.2, 0.3, 0.5).finished();
    const auto r1 = run_gmm_flow({a, b, c}, cfg, init);
    cfg.coordinates = (Vector<double>(3) << 0.5, 0.2, 0.3).finished();
    const auto r2 = run_gmm_flow({c, a, b}, cfg, init);
    for (Index i = 0; i < 2; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (Index j = 0; j < 2; ++j) best = std::min(best, bures_w2_sq(r1.gmm.component(i), r2.gmm.component(j)));
        CHECK(best < 1e-16);
    }
}

TEST_CASE("flow_weights keeps the weights on the simplex and moves them")
{
    Rng rng = make_rng(69);
    const auto q = random_mixture(2, 1, rng);
    const LabeledGMM<double> start(uniform_weights<double>(2), q.components());
    const LabeledGMM<double> target((Vector<double>(2) << 0.8, 0.2).finished(), q.components());
    GmmFlowConfig cfg;
    cfg.n_components = 2;
    cfg.flow_weights = true;
    cfg.n_iter = 50;
    const auto r = run_gmm_flow({target}, cfg, start);
    CHECK(std::abs(r.gmm.weights().sum() - 1) < 1e-12);
    CHECK(r.gmm.weights()(0) > 0.5);
    CHECK(r.trace.back().B_hat <= r.trace.front().B_hat);
}

TEST_CASE("cholesky clamp counts warnings instead of failing")
{
    const auto q = single(g1d(0, 1e-9));
    GmmFlowConfig cfg;
    cfg.step_size = 1.0;
    cfg.n_iter = 3;
    const auto r = run_gmm_flow({q}, cfg, single(g1d(0, 1.0)));
    CHECK(r.clamp_warnings > 0);
    CHECK(r.gmm.component(0).chol()(0, 0) >= 1e-6);
}

TEST_CASE("gmm flow with energies stays finite and deterministic")
{
    Rng rng = make_rng(70);
    const std::vector<LabeledGMM<double>> inputs{random_mixture(2, 2, rng), random_mixture(2, 2, rng)};
    GmmFlowConfig cfg;
    cfg.n_components = 2;
    cfg.n_iter = 10;
    cfg.functional.internal_weight = 0.1;
    cfg.functional.target_weight = 0.1;
    cfg.functional.target_measure = EmpiricalMeasure<double>(bft::random_matrix(50, 2, rng));
    cfg.step_size = 0.1;
    const auto a = run_gmm_flow(inputs, cfg);
    const auto b = run_gmm_flow(inputs, cfg);
    CHECK(a.trace.back().V != 0);
    for (Index i = 0; i < 2; ++i) CHECK(a.gmm.component(i).mean() == b.gmm.component(i).mean());
}

TEST_CASE("gmm config validation")
{
    GmmFlowConfig cfg;
    CHECK_NOTHROW(cfg.validate(2));
    cfg.n_components = 0;
    CHECK_THROWS_AS(cfg.validate(2), ValidationError);
    cfg.n_components = 1;
    cfg.step_size = -1;
    CHECK_THROWS_AS(cfg.validate(2), ValidationError);
    CHECK_THROWS_AS(parse_gmm_init("kmeans"), ValidationError);
}
