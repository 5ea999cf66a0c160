#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "cerec/bpr_trainer.hpp"
#include "cerec/dataio.hpp"
#include "cerec/eval.hpp"
#include "oracles.hpp"

using namespace cerec;

namespace {

BprModel random_bpr(Index m, Index n, Index k, std::uint64_t seed, double scale = 0.3) {
    std::mt19937_64 rng(seed);
    BprModel model;
    model.hyper.k = k;
    model.W = oracle::gaussian(k, m, rng, scale);
    model.H = oracle::gaussian(k, n, rng, scale);
    model.biases = oracle::gaussian(n, 1, rng, scale);
    return model;
}

// ln sigmoid(x) minus the L2 penalties, written out independently.
double triplet_objective(const BprModel& m, Index u, Index i, Index j) {
    double x = m.biases(i) - m.biases(j);
    for (Index c = 0; c < m.W.rows(); ++c) x += m.W(c, u) * (m.H(c, i) - m.H(c, j));
    const auto& hp = m.hyper;
    return -std::log1p(std::exp(-x)) - 0.5 * hp.lambda_u * m.W.col(u).squaredNorm() -
           0.5 * hp.lambda_i * m.H.col(i).squaredNorm() - 0.5 * hp.lambda_j * m.H.col(j).squaredNorm() -
           0.5 * hp.lambda_b * (m.biases(i) * m.biases(i) + m.biases(j) * m.biases(j));
}

double margin(const BprModel& m, Index u, Index i, Index j) {
    return m.W.col(u).dot(m.H.col(i) - m.H.col(j)) + m.biases(i) - m.biases(j);
}

}  // namespace

TEST(BprHyper, Defaults) {
    const BprHyper h;
    EXPECT_EQ(h.lambda_u, 0.0025);
    EXPECT_EQ(h.lambda_i, 0.0025);
    EXPECT_EQ(h.lambda_j, 0.00025);
    EXPECT_EQ(h.lambda_b, 0.0);
    EXPECT_EQ(h.learning_rate, 1e-4);
    EXPECT_EQ(h.epochs, 200u);
    EXPECT_EQ(h.k, 50);
}

TEST(BprStep, SymmetricStartMovesOnlyBiases) {
    const RatingMatrix ratings(1, 2, {{0, 0}});
    BprModel model = init_bpr(1, 2, BprHyper{.k = 3}, 0);
    model.W.setZero();
    model.H.setZero();
    bpr_step(model, ratings, 0, 0, 1);
    EXPECT_EQ(model.W.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(model.H.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_DOUBLE_EQ(model.biases(0), 1e-4 * 0.5);
    EXPECT_DOUBLE_EQ(model.biases(1), -1e-4 * 0.5);
}

TEST(BprStep, ZeroLearningRateIsNoOp) {
    const RatingMatrix ratings(2, 3, {{0, 0}, {1, 2}});
    BprModel model = random_bpr(2, 3, 4, 1);
    model.hyper.learning_rate = 0.0;
    const BprModel before = model;
    bpr_step(model, ratings, 0, 0, 1);
    EXPECT_EQ(model.W, before.W);
    EXPECT_EQ(model.H, before.H);
    EXPECT_EQ(model.biases, before.biases);
}

TEST(BprStep, ContractViolations) {
    const RatingMatrix ratings(2, 3, {{0, 0}, {0, 2}});
    BprModel model = random_bpr(2, 3, 2, 1);
    EXPECT_THROW(bpr_step(model, ratings, 0, 1, 2), ParameterError);  // 1 is not a like
    EXPECT_THROW(bpr_step(model, ratings, 0, 0, 2), ParameterError);  // 2 is a like
    EXPECT_THROW(bpr_step(model, ratings, 0, 0, 3), ParameterError);
}

TEST(BprStep, StepIsGradientOfTripletObjective) {
    const RatingMatrix ratings(3, 4, {{1, 2}});
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        BprModel model = random_bpr(3, 4, 5, seed);
        model.hyper.lambda_u = 0.01 * static_cast<double>(seed);
        model.hyper.lambda_i = 0.02;
        model.hyper.lambda_j = 0.003;
        model.hyper.lambda_b = 0.05;
        model.hyper.learning_rate = 1e-3;
        const BprModel before = model;
        bpr_step(model, ratings, 1, 2, 0);
        const double lr = model.hyper.learning_rate;

        auto fd = [&](auto&& getter) {
            BprModel probe = before;
            double& x = getter(probe);
            const double saved = x;
            x = saved + 1e-5;
            const double up = triplet_objective(probe, 1, 2, 0);
            x = saved - 1e-5;
            const double down = triplet_objective(probe, 1, 2, 0);
            return (up - down) / 2e-5;
        };
        for (Index c = 0; c < 5; ++c) {
            EXPECT_NEAR((model.W(c, 1) - before.W(c, 1)) / lr, fd([&](BprModel& m) -> double& { return m.W(c, 1); }), 1e-6);
            EXPECT_NEAR((model.H(c, 2) - before.H(c, 2)) / lr, fd([&](BprModel& m) -> double& { return m.H(c, 2); }), 1e-6);
            EXPECT_NEAR((model.H(c, 0) - before.H(c, 0)) / lr, fd([&](BprModel& m) -> double& { return m.H(c, 0); }), 1e-6);
        }
        EXPECT_NEAR((model.biases(2) - before.biases(2)) / lr, fd([&](BprModel& m) -> double& { return m.biases(2); }), 1e-6);
        EXPECT_NEAR((model.biases(0) - before.biases(0)) / lr, fd([&](BprModel& m) -> double& { return m.biases(0); }), 1e-6);
    }
}

// Property: without regularization a step never lowers the triplet margin.
TEST(BprStep, AscentDirectionWithoutRegularization) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> rate(0.0, 1e-2);
    const RatingMatrix ratings(1, 2, {{0, 0}});
    for (int trial = 0; trial < 500; ++trial) {
        BprModel model = random_bpr(1, 2, 1 + static_cast<Index>(trial % 8), rng(), 1.0);
        model.hyper.lambda_u = model.hyper.lambda_i = model.hyper.lambda_j = model.hyper.lambda_b = 0.0;
        model.hyper.learning_rate = rate(rng);
        const double before = margin(model, 0, 0, 1);
        bpr_step(model, ratings, 0, 0, 1);
        EXPECT_GE(margin(model, 0, 0, 1), before) << "trial " << trial;
    }
}

TEST(TripletSampler, UniformPositivesAndNegatives) {
    // User 0 likes videos {1, 4, 7}; user 1 likes {0, 2, 3, 5, 9}. 8 likes total.
    const RatingMatrix ratings(2, 10, {{0, 1}, {0, 4}, {0, 7}, {1, 0}, {1, 2}, {1, 3}, {1, 5}, {1, 9}});
    TripletSampler sampler(ratings, 123);
    std::map<std::pair<Index, Index>, double> like_counts;
    std::map<Index, double> neg_counts;  // user 0 only
    const int draws = 80000;
    double user0 = 0;
    for (int t = 0; t < draws; ++t) {
        const auto tr = sampler.next();
        ASSERT_TRUE(tr.has_value());
        ASSERT_TRUE(ratings.contains(tr->user, tr->pos));
        ASSERT_FALSE(ratings.contains(tr->user, tr->neg));
        like_counts[{tr->user, tr->pos}] += 1;
        if (tr->user == 0) {
            neg_counts[tr->neg] += 1;
            user0 += 1;
        }
    }
    // Chi-square against uniform; critical values at p = 0.001.
    double chi_likes = 0;
    const double expected_like = draws / 8.0;
    ASSERT_EQ(like_counts.size(), 8u);
    for (const auto& [key, c] : like_counts) chi_likes += (c - expected_like) * (c - expected_like) / expected_like;
    EXPECT_LT(chi_likes, 24.322);  // df 7

    double chi_neg = 0;
    const double expected_neg = user0 / 7.0;
    ASSERT_EQ(neg_counts.size(), 7u);
    for (const auto& [video, c] : neg_counts) chi_neg += (c - expected_neg) * (c - expected_neg) / expected_neg;
    EXPECT_LT(chi_neg, 22.458);  // df 6
}

TEST(TripletSampler, SaturatedUserIsSkipped) {
    const RatingMatrix ratings(1, 2, {{0, 0}, {0, 1}});
    TripletSampler sampler(ratings, 1);
    EXPECT_FALSE(sampler.next().has_value());
    EXPECT_NO_THROW(fit_bpr(ratings, BprHyper{.k = 2, .epochs = 3}, 0));
}

TEST(FitBpr, ZeroEpochsReturnsInitialModel) {
    const RatingMatrix ratings(2, 3, {{0, 0}, {1, 1}});
    const BprHyper hp{.k = 4, .epochs = 0};
    const auto fitted = fit_bpr(ratings, hp, 9);
    const auto init = init_bpr(2, 3, hp, 9);
    EXPECT_EQ(fitted.W, init.W);
    EXPECT_EQ(fitted.H, init.H);
    EXPECT_EQ(fitted.biases, init.biases);
}

TEST(FitBpr, SingleUserPrefersLikedVideo) {
    const RatingMatrix ratings(1, 2, {{0, 0}});
    const auto model = fit_bpr(ratings, BprHyper{.k = 5, .learning_rate = 0.05, .epochs = 500}, 3);
    EXPECT_GT(model.score(0, 0), model.score(0, 1));
}

TEST(FitBpr, DeterministicGivenSeed) {
    std::mt19937_64 rng(5);
    const auto ratings = oracle::random_ratings(10, 12, 0.3, rng);
    const BprHyper hp{.k = 4, .learning_rate = 0.01, .epochs = 5};
    EXPECT_EQ(fit_bpr(ratings, hp, 1).W, fit_bpr(ratings, hp, 1).W);
}

TEST(FitBpr, PlantedInMatrixAuc) {
    SyntheticSpec spec;
    spec.m = 300;
    spec.n = 200;
    spec.d = 30;
    spec.seed = 5;
    const auto data = generate_synthetic(spec);
    const auto plan = make_fold_plan(data.ratings, 5, 1);
    const auto train = plan.training(data.ratings, 0);
    const auto held_out = plan.test_pairs(data.ratings, 0, Scenario::InMatrix);
    const auto model = fit_bpr(train, BprHyper{.k = 20, .learning_rate = 0.05, .epochs = 50}, 2);
    const double auc = oracle::mean_user_auc(
        data.ratings, held_out, [&](Index u, Index j) { return model.score(u, j); },
        [&](Index u) { return candidate_pool(train, plan, 0, Scenario::InMatrix, u); });
    EXPECT_GE(auc, 0.7);
}
