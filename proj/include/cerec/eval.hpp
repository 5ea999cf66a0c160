#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cerec/bpr_trainer.hpp"
#include "cerec/cer_trainer.hpp"
#include "cerec/core.hpp"

namespace cerec {

enum class Label : std::uint8_t { Train, InTest, OutTest };
enum class Scenario { InMatrix, OutOfMatrix };

const char* to_string(Scenario scenario);
Scenario parse_scenario(const std::string& text);  // "in" | "out"

/**
 * Cross-validation split. Videos are partitioned into `num_folds` folds; in
 * configuration c every like of a fold-c video is OUT_TEST and the remaining
 * likes are shuffled into four equal chunks, three TRAIN and one IN_TEST.
 * labels[c][e] refers to ratings.likes()[e].
 */
struct FoldPlan {
    std::size_t num_folds = 5;
    std::uint64_t seed = 0;
    Index num_users = 0;
    Index num_videos = 0;
    std::vector<std::size_t> video_fold;
    std::vector<std::vector<Label>> labels;

    std::size_t num_likes() const noexcept { return labels.empty() ? 0 : labels.front().size(); }

    /// Throws ShapeError unless the plan was built for `ratings`.
    void check_matches(const RatingMatrix& ratings) const;
    /// TRAIN likes of configuration `config`, full m x n shape.
    RatingMatrix training(const RatingMatrix& ratings, std::size_t config) const;
    /// IN_TEST or OUT_TEST likes of `config` as D_test.
    std::vector<Like> test_pairs(const RatingMatrix& ratings, std::size_t config, Scenario scenario) const;
    /// Videos of fold `config`, ascending.
    std::vector<Index> out_videos(std::size_t config) const;
    /// Throws DataError if any OUT_TEST video has a TRAIN or IN_TEST like.
    void check_no_leakage(const RatingMatrix& ratings, std::size_t config) const;
};

/// Throws ParameterError for num_folds < 2 and DataError when there are
/// fewer videos than folds.
FoldPlan make_fold_plan(const RatingMatrix& ratings, std::size_t num_folds, std::uint64_t seed);

/// Candidate videos for one user: OUT_TEST videos for the out-of-matrix
/// scenario, otherwise every non-OUT_TEST video the user did not like in TRAIN.
std::vector<Index> candidate_pool(const RatingMatrix& train, const FoldPlan& plan, std::size_t config,
                                  Scenario scenario, Index user);

/// Fills scores[t] with the predicted rating of (user, videos[t]).
using BatchScorer = std::function<void(Index user, std::span<const Index> videos, std::span<double> scores)>;

/// The min(k, |pool|) highest-scoring videos, ties by ascending video id.
std::vector<Index> top_k(std::span<const double> scores, std::span<const Index> pool, std::size_t k);

/// Per-user ranked lists, truncated at `depth`.
struct RankedRecommendations {
    std::vector<std::vector<Index>> lists;
    std::vector<std::uint8_t> present;

    explicit RankedRecommendations(Index num_users = 0)
        : lists(static_cast<std::size_t>(num_users)), present(static_cast<std::size_t>(num_users), 0) {}
    bool has(Index user) const {
        return user >= 0 && static_cast<std::size_t>(user) < present.size() &&
               present[static_cast<std::size_t>(user)];
    }
};

/// Ranks each listed user's candidate pool with `scorer`.
RankedRecommendations recommend(const BatchScorer& scorer, const RatingMatrix& train, const FoldPlan& plan,
                                std::size_t config, Scenario scenario, std::span<const Index> users,
                                std::size_t depth, unsigned threads = 1);

/// #Hit@k / |D_test|. Throws DataError on an empty test set or a test user
/// without a recommendation list.
double accuracy_at_k(std::span<const Like> test, const RankedRecommendations& recs, std::size_t k);

/// Accuracy@k for every k in `k_list`, sharing one ranking pass.
std::vector<double> evaluate_scenario(const BatchScorer& scorer, const RatingMatrix& ratings,
                                      const RatingMatrix& train, const FoldPlan& plan, std::size_t config,
                                      Scenario scenario, std::span<const std::size_t> k_list,
                                      unsigned threads = 1);

using TrainedModel = std::variant<CerModel, BprModel>;

/**
 * Scorer for a trained model. CER models score out-of-matrix videos with
 * w_i^T E^T f_j and need `features`; WMF models (no embedding) fall back to
 * w_i^T h_j. BPR models have no out-of-matrix predictor and are rejected
 * with ParameterError.
 */
BatchScorer model_scorer(const TrainedModel& model, Scenario scenario, const ContentFeatures* features);

/// Deterministic pseudo-random score per (user, video).
BatchScorer random_scorer(std::uint64_t seed);
/// TRAIN like count per video.
BatchScorer popularity_scorer(const RatingMatrix& train);
/// sum_l w_l s_l(user, video); optional per-user z-scoring of each content's scores.
BatchScorer fused_scorer(std::vector<BatchScorer> contents, std::vector<double> weights, bool zscore = false);

enum class Method { Cer, Wmf, Bpr, Random, Popularity };
const char* to_string(Method method);
Method parse_method(const std::string& text);

struct MethodConfig {
    Method method = Method::Cer;
    Hyperparams cer;
    BprHyper bpr;
    FitOptions fit;
};

struct AccuracyRow {
    std::string method;
    std::string content;
    std::string scenario;
    std::string fold;  // 1-based fold number, "mean" or "stddev"
    std::size_t k = 0;
    double accuracy = 0.0;
};

struct AccuracyTable {
    std::vector<AccuracyRow> rows;

    /// Value of the row matching all keys; throws DataError if absent.
    double at(const std::string& content, Scenario scenario, const std::string& fold, std::size_t k) const;
    /// Appends "mean" and "stddev" (sample) rows over the numbered folds.
    void add_summary();
};

/// header: method,content,scenario,fold,k,accuracy
void write_accuracy_csv(std::ostream& out, const AccuracyTable& table);

/**
 * Trains on each configuration's TRAIN partition and reports Accuracy@k in
 * both scenarios from the same model. CER runs once per content type; WMF,
 * BPR and the reference scorers run once with content "none". BPR reports
 * only the in-matrix scenario. `folds` selects configurations (0-based);
 * empty means all.
 */
AccuracyTable run_cross_validation(const RatingMatrix& ratings, std::span<const ContentFeatures> features,
                                   const MethodConfig& config, std::span<const std::size_t> k_list,
                                   std::size_t num_folds, std::uint64_t seed,
                                   std::span<const std::size_t> folds = {});

/// Same, over an existing plan.
AccuracyTable run_cross_validation(const RatingMatrix& ratings, const FoldPlan& plan,
                                   std::span<const ContentFeatures> features, const MethodConfig& config,
                                   std::span<const std::size_t> k_list, std::span<const std::size_t> folds = {});

/// 5, 10, ..., 30.
std::vector<std::size_t> default_k_list();

}  // namespace cerec
