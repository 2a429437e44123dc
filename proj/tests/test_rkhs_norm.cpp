#include <catch2/catch.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "borda/kernels.hpp"
#include "borda/random.hpp"
#include "borda/rkhs_norm.hpp"

using namespace borda;

TEST_CASE("the zero function has zero norm") {
    KernelSpec kernel{KernelFamily::kSquaredExponential, 0.3, 1.0};
    Rng rng(1);
    const double norm =
        estimate_rkhs_norm([](const Eigen::VectorXd&) { return 0.0; }, 2, kernel, 200, rng);
    CHECK(norm == 0.0);
}

TEST_CASE("a kernel section has norm sqrt(kappa(z0, z0))") {
    KernelSpec kernel{KernelFamily::kSquaredExponential, 0.3, 1.0};
    Eigen::VectorXd center(2);
    center << 0.5, 0.5;
    Rng rng(2);
    const double norm = estimate_rkhs_norm(
        [&](const Eigen::VectorXd& z) { return eval_kernel(kernel, center, z); }, 2, kernel, 1000,
        rng);
    CHECK(norm == Approx(std::sqrt(kernel.signal_variance)).epsilon(0.02));
}

TEST_CASE("the norm estimate is homogeneous") {
    KernelSpec kernel{KernelFamily::kSquaredExponential, 0.3, 1.0};
    const RffBasis basis = sample_reward(1, 1, 64, 7);
    const auto f = [&](const Eigen::VectorXd& z) { return basis.evaluate(z); };
    const auto scaled = [&](const Eigen::VectorXd& z) { return 3.5 * basis.evaluate(z); };
    Rng rng_a(3), rng_b(3);
    const double base = estimate_rkhs_norm(f, 2, kernel, 400, rng_a);
    const double big = estimate_rkhs_norm(scaled, 2, kernel, 400, rng_b);
    CHECK(big == Approx(3.5 * base).epsilon(1e-6));
}

TEST_CASE("the norm estimate is invariant to point permutation") {
    KernelSpec kernel{KernelFamily::kSquaredExponential, 0.3, 1.0};
    Rng rng(5);
    const Eigen::MatrixXd points = uniform_points(300, 2, rng);
    const RffBasis basis = sample_reward(1, 1, 64, 11);
    Eigen::VectorXd values = eval_reward_rows(basis, points);

    Eigen::PermutationMatrix<Eigen::Dynamic> permutation(points.rows());
    permutation.setIdentity();
    std::reverse(permutation.indices().data(),
                 permutation.indices().data() + permutation.indices().size());
    const Eigen::MatrixXd shuffled_points = permutation * points;
    const Eigen::VectorXd shuffled_values = permutation * values;

    const RkhsNormEstimator a(kernel, points);
    const RkhsNormEstimator b(kernel, shuffled_points);
    CHECK(a.estimate(values) == Approx(b.estimate(shuffled_values)).epsilon(1e-7));
}

TEST_CASE("single-function studies have a degenerate win rate") {
    const auto result = run_norm_study(1, 1, 1, 42);
    CHECK((result.win_rate == 0.0 || result.win_rate == 1.0));
    CHECK(result.per_function.size() == 1);
}

TEST_CASE("win rate and loss rate partition the functions") {
    NormStudyConfig config;
    config.num_points = 400;
    config.quadrature_points = 256;
    const auto result = run_norm_study(1, 1, 40, 4, config);
    long wins = 0, losses = 0;
    for (const auto& record : result.per_function) {
        if (record.borda_norm < record.reward_norm)
            ++wins;
        else
            ++losses;
    }
    CHECK(wins + losses == result.num_functions);
    CHECK(result.win_rate == Approx(wins / 40.0).margin(1e-12));
}

TEST_CASE("summary statistics equal a recomputation from the raw records") {
    NormStudyConfig config;
    config.num_points = 300;
    config.quadrature_points = 256;
    const auto result = run_norm_study(1, 1, 25, 9, config);
    double margin = 0.0;
    long wins = 0;
    for (const auto& record : result.per_function) {
        margin += record.reward_norm - record.borda_norm;
        if (record.borda_norm < record.reward_norm) ++wins;
    }
    CHECK(result.win_margin == Approx(margin / 25.0).margin(1e-12));
    CHECK(result.win_rate == Approx(wins / 25.0).margin(1e-12));
}

TEST_CASE("higher input dimensions favor the borda function more strongly") {
    NormStudyConfig config;
    config.num_points = 400;
    config.quadrature_points = 256;
    for (std::uint64_t seed = 100; seed < 105; ++seed) {
        const auto low = run_norm_study(1, 1, 50, seed, config);
        const auto high = run_norm_study(3, 3, 50, seed, config);
        CHECK(low.win_rate < high.win_rate + 1e-12);
    }
}

TEST_CASE("study results are reproducible and worker-count independent") {
    NormStudyConfig serial;
    serial.num_points = 200;
    serial.quadrature_points = 128;
    NormStudyConfig parallel = serial;
    parallel.workers = 2;
    const auto a = run_norm_study(1, 1, 16, 77, serial);
    const auto b = run_norm_study(1, 1, 16, 77, parallel);
    CHECK(a.win_rate == b.win_rate);
    CHECK(a.win_margin == b.win_margin);
    for (std::size_t i = 0; i < a.per_function.size(); ++i) {
        CHECK(a.per_function[i].reward_norm == b.per_function[i].reward_norm);
        CHECK(a.per_function[i].borda_norm == b.per_function[i].borda_norm);
    }
}

TEST_CASE("estimator rejects bad inputs") {
    KernelSpec kernel{KernelFamily::kSquaredExponential, 0.3, 1.0};
    Rng rng(6);
    CHECK_THROWS_AS(
        estimate_rkhs_norm([](const Eigen::VectorXd&) { return 0.0; }, 2, kernel, 1, rng),
        ConfigError);
    CHECK_THROWS_AS(run_norm_study(1, 0, 10, 1), ConfigError);
    CHECK_THROWS_AS(run_norm_study(1, 1, 0, 1), ConfigError);
}
