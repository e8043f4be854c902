#include "support.hpp"

#include "baryflow/flow_empirical.hpp"

using namespace baryflow;

namespace {

Matrix<double> col(std::initializer_list<double> v)
{
    Matrix<double> m(static_cast<Index>(v.size()), 1);
    Index i = 0;
    for (double x : v) m(i++, 0) = x;
    return m;
}

FlowState state_at(const Matrix<double>& points, Index n_classes = 1)
{
    return {LabeledEmpiricalMeasure<double>(EmpiricalMeasure<double>(points), Matrix<double>::Zero(points.rows(), n_classes)),
            0,
            {}};
}

MiniBatch<double> batch(const Matrix<double>& points) { return {points, std::nullopt, 0}; }

SamplerPtr gauss1d(double mu, double sigma)
{
    return std::make_shared<GaussianSampler>(
        GaussianComponent<double>(Vector<double>::Constant(1, mu), Matrix<double>::Constant(1, 1, sigma)));
}

EmpiricalFlowConfig two_gaussian_config(std::uint64_t seed)
{
    EmpiricalFlowConfig cfg;
    cfg.n_particles = 256;
    cfg.batch_size = 128;
    cfg.n_iter = 300;
    cfg.seed = seed;
    return cfg;
}

LabeledEmpiricalMeasure<double> two_blobs(Index per_blob, double offset, std::uint64_t seed)
{
    Rng rng = make_rng(seed);
    Matrix<double> x = 0.4 * standard_normal<double>(2 * per_blob, 2, rng);
    Labels l(2 * per_blob);
    for (Index i = 0; i < 2 * per_blob; ++i) {
        const bool right = i >= per_blob;
        x(i, 0) += right ? 3.0 : -3.0;
        x(i, 1) += offset;
        l(i) = right ? 1 : 0;
    }
    return {EmpiricalMeasure<double>(x), logits_from_probabilities(one_hot<double>(l, 2), 1e-6)};
}

} // namespace

TEST_CASE("flow_step examples")
{
    EmpiricalFlowConfig cfg;
    cfg.step_size = 1.0;

    Rng rng = make_rng(50);
    const Matrix<double> z = bft::random_matrix(5, 2, rng);
    const auto same = flow_step(state_at(z), {batch(z)}, cfg);
    CHECK((same.measure.points() - z).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(same.iter == 1);
    CHECK(same.trace.size() == 1);

    const auto jump = flow_step(state_at(col({0})), {batch(col({4}))}, cfg);
    CHECK(jump.measure.points()(0, 0) == doctest::Approx(4.0).epsilon(1e-14));

    const auto mid = flow_step(state_at(col({0})), {batch(col({0})), batch(col({4}))}, cfg);
    CHECK(mid.measure.points()(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("full-batch flow_step equals the fixed-point update")
{
    Rng rng = make_rng(51);
    for (int t = 0; t < 50; ++t) {
        const Index n = 3 + t % 7, d = 1 + t % 3;
        const Matrix<double> z = bft::random_matrix(n, d, rng);
        std::vector<MiniBatch<double>> batches;
        for (Index k = 0; k < 3; ++k) batches.push_back(batch(2 * bft::random_matrix(2 + (t + k) % 6, d, rng)));
        EmpiricalFlowConfig cfg;
        cfg.step_size = 0.1 + 0.9 * static_cast<double>(t % 10) / 9.0;
        cfg.coordinates = bft::random_simplex(3, rng);
        cfg.solver = ExactSolver{};

        Matrix<double> mapped = Matrix<double>::Zero(n, d);
        for (Index k = 0; k < 3; ++k) {
            const auto& b = batches[static_cast<std::size_t>(k)].points;
            const auto sol =
                solve_exact<double>(uniform_weights<double>(n), uniform_weights<double>(b.rows()), joint_cost<double>(z, b));
            mapped += (*cfg.coordinates)(k) * barycentric_map(sol.plan, b);
        }
        const Matrix<double> expect = (1 - cfg.step_size) * z + cfg.step_size * mapped;
        const auto next = flow_step(state_at(z), batches, cfg);
        CHECK((next.measure.points() - expect).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("flow_step rejects inconsistent batches")
{
    EmpiricalFlowConfig cfg;
    CHECK_THROWS_AS(flow_step(state_at(col({0})), {}, cfg), ValidationError);
    CHECK_THROWS_AS(flow_step(state_at(col({0})), {batch(Matrix<double>(0, 1))}, cfg), ValidationError);
    CHECK_THROWS_AS(flow_step(state_at(col({0})), {batch(Matrix<double>::Zero(2, 2))}, cfg), ValidationError);
}

TEST_CASE("labeled flow_step moves logits toward the matched labels")
{
    EmpiricalFlowConfig cfg;
    cfg.label_weight = 1.0;
    Matrix<double> y(1, 2);
    y << 0, 1;
    const MiniBatch<double> b{col({0}), y, 0};
    const auto next = flow_step(state_at(col({0}), 2), {b}, cfg);
    const auto soft = next.measure.soft_labels();
    CHECK(soft(0, 1) > 0.5);
    CHECK(next.trace.front().B_hat == doctest::Approx(0.5));
}

TEST_CASE("run_flow recovers the 1-D gaussian barycenter")
{
    const auto r = run_flow({gauss1d(0, 1), gauss1d(4, 1)}, two_gaussian_config(0));
    CHECK(r.trace.size() == 301);
    const double mean = bft::sample_mean(r.measure.points());
    const double sd = bft::sample_std(r.measure.points());
    CHECK(mean >= 1.8);
    CHECK(mean <= 2.2);
    CHECK(sd >= 0.85);
    CHECK(sd <= 1.15);
}

TEST_CASE("run_flow is deterministic given the seed")
{
    auto cfg = two_gaussian_config(7);
    cfg.n_iter = 20;
    const auto a = run_flow({gauss1d(0, 1), gauss1d(4, 1)}, cfg);
    const auto b = run_flow({gauss1d(0, 1), gauss1d(4, 1)}, cfg);
    CHECK(a.measure.points() == b.measure.points());
    cfg.seed = 8;
    const auto c = run_flow({gauss1d(0, 1), gauss1d(4, 1)}, cfg);
    CHECK(a.measure.points() != c.measure.points());
}

TEST_CASE("single input: flow moves toward it")
{
    Rng rng = make_rng(52);
    const auto g = GaussianComponent<double>::from_covariance((Vector<double>(2) << 3, -1).finished(), bft::random_spd(2, rng));
    const std::vector<SamplerPtr> inputs{std::make_shared<GaussianSampler>(g)};
    EmpiricalFlowConfig cfg;
    cfg.n_particles = 128;
    cfg.batch_size = 128;
    cfg.n_iter = 60;
    cfg.seed = 3;
    const auto held_out = EmpiricalMeasure<double>(inputs.front()->sample(1000, 999).points);
    const auto init = initial_particles(inputs, cfg);
    const auto r = run_flow(inputs, cfg);
    CHECK(w2_empirical(r.measure.base(), held_out) <= w2_empirical(init.base(), held_out));
}

TEST_CASE("labels follow the nearest input blob")
{
    const auto a = two_blobs(60, 0.0, 1), b = two_blobs(60, 0.3, 2);
    const std::vector<SamplerPtr> inputs{std::make_shared<DatasetSampler>(DatasetSampler::from_measure(a)),
                                         std::make_shared<DatasetSampler>(DatasetSampler::from_measure(b))};
    EmpiricalFlowConfig cfg;
    cfg.n_particles = 120;
    cfg.batch_size = 120;
    cfg.n_iter = 80;
    cfg.label_weight = 1.0;
    cfg.seed = 4;
    const auto r = run_flow(inputs, cfg);
    REQUIRE(r.labeled);
    const Labels hard = r.measure.hard_labels();
    Index agree = 0;
    for (Index i = 0; i < hard.size(); ++i) agree += hard(i) == (r.measure.points()(i, 0) > 0 ? 1 : 0);
    CHECK(static_cast<double>(agree) >= 0.95 * static_cast<double>(hard.size()));
}

TEST_CASE("particle permutation equivariance")
{
    Rng rng = make_rng(53);
    const Matrix<double> init = bft::random_matrix(40, 2, rng);
    std::vector<Index> perm(40);
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix<double> permuted(40, 2);
    for (Index i = 0; i < 40; ++i) permuted.row(i) = init.row(perm[static_cast<std::size_t>(i)]);

    const std::vector<SamplerPtr> inputs{
        std::make_shared<DatasetSampler>(bft::random_matrix(30, 2, rng)),
        std::make_shared<DatasetSampler>(3 * bft::random_matrix(30, 2, rng) + Matrix<double>::Constant(30, 2, 2.0))};
    EmpiricalFlowConfig cfg;
    cfg.n_particles = 40;
    cfg.batch_size = 25;
    cfg.n_iter = 15;
    cfg.init = InitMode::explicit_points;
    cfg.init_points = init;
    const auto a = run_flow(inputs, cfg);
    cfg.init_points = permuted;
    const auto b = run_flow(inputs, cfg);
    for (Index i = 0; i < 40; ++i)
        CHECK((b.measure.points().row(i) - a.measure.points().row(perm[static_cast<std::size_t>(i)])).norm() < 1e-9);
}

TEST_CASE("full-batch trace is non-increasing for a small step")
{
    Rng rng = make_rng(54);
    const std::vector<SamplerPtr> inputs{
        std::make_shared<DatasetSampler>(bft::random_matrix(50, 2, rng)),
        std::make_shared<DatasetSampler>(bft::random_matrix(50, 2, rng) + Matrix<double>::Constant(50, 2, 3.0))};
    EmpiricalFlowConfig cfg;
    cfg.n_particles = 50;
    cfg.batch_size = 50;
    cfg.n_iter = 40;
    cfg.step_size = 0.1;
    const auto r = run_flow(inputs, cfg);
    for (std::size_t t = 1; t < r.trace.size(); ++t) CHECK(r.trace[t].B_hat <= r.trace[t - 1].B_hat + 1e-10);
    for (std::size_t t = 0; t < r.trace.size(); ++t) CHECK(r.trace[t].iter == static_cast<int>(t));
}

TEST_CASE("mini-batch trace decreases in moving average")
{
    auto cfg = two_gaussian_config(5);
    cfg.batch_size = 32;
    cfg.n_particles = 64;
    cfg.n_iter = 150;
    cfg.step_size = 0.05;
    cfg.init = InitMode::explicit_points;
    Rng rng = make_rng(55);
    cfg.init_points = Matrix<double>::Constant(64, 1, -6.0) + 0.1 * bft::random_matrix(64, 1, rng);
    const auto r = run_flow({gauss1d(0, 1), gauss1d(4, 1)}, cfg);
    const auto b = b_hat_series(r.trace);
    const auto avg = [&](std::size_t from) {
        return std::accumulate(b.begin() + static_cast<std::ptrdiff_t>(from), b.begin() + static_cast<std::ptrdiff_t>(from + 50), 0.0) / 50;
    };
    CHECK(avg(50) < avg(0));
    CHECK(avg(100) < avg(50) * 1.02);
    CHECK(avg(100) < avg(0));
}

TEST_CASE("fixed_point_baseline")
{
    // centered so the dataset means are exactly 0 and 4
    Matrix<double> p = gauss1d(0, 1)->sample(256, 11).points, q = gauss1d(4, 1)->sample(256, 12).points;
    p.array() -= p.mean();
    q.array() += 4 - q.mean();
    const std::vector<DatasetSampler> inputs{DatasetSampler(p), DatasetSampler(q)};
    EmpiricalFlowConfig cfg;
    cfg.n_particles = 256;
    cfg.batch_size = 256;
    cfg.n_iter = 100;
    cfg.seed = 2;
    const auto base = fixed_point_baseline(inputs, cfg);
    CHECK(std::abs(bft::sample_mean(base.measure.points()) - 2.0) <= 0.05);

    const std::vector<SamplerPtr> ptrs{std::make_shared<DatasetSampler>(inputs[0]), std::make_shared<DatasetSampler>(inputs[1])};
    const auto flow = run_flow(ptrs, cfg);
    CHECK(w2_empirical(base.measure.base(), flow.measure.base()) <= 0.15);

    cfg.step_size = 0.0;
    const auto still = fixed_point_baseline(inputs, cfg);
    CHECK(still.measure.points() == initial_particles(ptrs, cfg).points());
}

TEST_CASE("fixed_point_baseline propagates labels")
{
    const auto a = two_blobs(40, 0.0, 5), b = two_blobs(40, 0.5, 6);
    const std::vector<DatasetSampler> inputs{DatasetSampler::from_measure(a), DatasetSampler::from_measure(b)};
    EmpiricalFlowConfig cfg;
    cfg.n_particles = 80;
    cfg.batch_size = 80;
    cfg.n_iter = 30;
    cfg.label_weight = 1.0;
    const auto r = fixed_point_baseline(inputs, cfg);
    const Labels hard = r.measure.hard_labels();
    Index agree = 0;
    for (Index i = 0; i < hard.size(); ++i) agree += hard(i) == (r.measure.points()(i, 0) > 0 ? 1 : 0);
    CHECK(static_cast<double>(agree) >= 0.95 * static_cast<double>(hard.size()));
}

TEST_CASE("flow config validation")
{
    EmpiricalFlowConfig cfg;
    CHECK_NOTHROW(cfg.validate(2));
    cfg.step_size = 0;
    CHECK_THROWS_AS(cfg.validate(2), ValidationError);
    CHECK_NOTHROW(cfg.validate(2, true));
    cfg.step_size = 0.5;
    cfg.coordinates = Vector<double>::Constant(3, 1.0 / 3);
    CHECK_THROWS_AS(cfg.validate(2), ValidationError);
    cfg.coordinates.reset();
    cfg.functional.internal_weight = 1;
    CHECK_THROWS_AS(cfg.validate(2), ValidationError);
    CHECK_THROWS_AS(parse_init_mode("zeros"), ValidationError);
}
