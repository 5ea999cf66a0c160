#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "cerec/core.hpp"

namespace cerec {

struct BprHyper {
    Index k = 50;
    double lambda_u = 0.0025;
    double lambda_i = 0.0025;  // positive item factors
    double lambda_j = 0.00025; // negative item factors
    double lambda_b = 0.0;     // item biases
    double learning_rate = 1e-4;
    std::size_t epochs = 200;

    void validate() const;
};

/// BPR-MF: score(u, j) = w_u^T h_j + b_j.
struct BprModel {
    Matrix W;       // k x m
    Matrix H;       // k x n
    Vector biases;  // n
    BprHyper hyper;

    Index num_users() const noexcept { return W.cols(); }
    Index num_videos() const noexcept { return H.cols(); }

    double score(Index user, Index video) const;
};

/// Seeded start: factors ~ N(0, 0.1^2), biases zero.
BprModel init_bpr(Index num_users, Index num_videos, const BprHyper& hyper, std::uint64_t seed);

/**
 * One stochastic ascent step on ln sigmoid(x) - L2 penalties for the triplet
 * (user, pos, neg), x = w_u^T (h_pos - h_neg) + b_pos - b_neg. All gradients
 * are taken at the pre-step parameters. Throws ParameterError unless `pos`
 * is a like of `user` and `neg` is not.
 */
void bpr_step(BprModel& model, const RatingMatrix& ratings, Index user, Index pos, Index neg);

struct Triplet {
    Index user = 0;
    Index pos = 0;
    Index neg = 0;
};

/// Draws a stored like uniformly, then a video the user has not liked
/// uniformly. Returns nullopt when the drawn user likes every video.
class TripletSampler {
public:
    TripletSampler(const RatingMatrix& ratings, std::uint64_t seed);
    std::optional<Triplet> next();

private:
    const RatingMatrix* ratings_;
    std::mt19937_64 rng_;
    std::uniform_int_distribution<std::size_t> pick_like_;
    std::uniform_int_distribution<Index> pick_video_;
};

/// epochs x |likes| triplets: a like drawn uniformly, then a uniform non-liked video.
BprModel fit_bpr(const RatingMatrix& ratings, const BprHyper& hyper, std::uint64_t seed);

}  // namespace cerec
