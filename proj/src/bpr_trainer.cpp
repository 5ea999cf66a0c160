#include "cerec/bpr_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace cerec {
namespace {

void step_unchecked(BprModel& model, Index user, Index pos, Index neg) {
    const BprHyper& hp = model.hyper;
    auto w = model.W.col(user);
    auto hi = model.H.col(pos);
    auto hj = model.H.col(neg);
    const double x = w.dot(hi - hj) + model.biases(pos) - model.biases(neg);
    const double s = 1.0 / (1.0 + std::exp(x));  // sigmoid(-x)
    const double lr = hp.learning_rate;

    const Vector w_old = w;
    const Vector diff = hi - hj;
    model.biases(pos) += lr * (s - hp.lambda_b * model.biases(pos));
    model.biases(neg) += lr * (-s - hp.lambda_b * model.biases(neg));
    w += lr * (s * diff - hp.lambda_u * w_old);
    hi += lr * (s * w_old - hp.lambda_i * hi);
    hj += lr * (-s * w_old - hp.lambda_j * hj);
}

}  // namespace

void BprHyper::validate() const {
    if (k < 1) throw ParameterError("k must be >= 1");
    if (lambda_u < 0 || lambda_i < 0 || lambda_j < 0 || lambda_b < 0) {
        throw ParameterError("BPR regularizers must be >= 0");
    }
    if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) {
        throw ParameterError("learning rate must be finite and >= 0");
    }
}

double BprModel::score(Index user, Index video) const {
    if (user < 0 || user >= num_users()) throw IndexError("user id " + std::to_string(user) + " out of range");
    if (video < 0 || video >= num_videos()) throw IndexError("video id " + std::to_string(video) + " out of range");
    return W.col(user).dot(H.col(video)) + biases(video);
}

BprModel init_bpr(Index num_users, Index num_videos, const BprHyper& hyper, std::uint64_t seed) {
    hyper.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 0.1);
    BprModel model;
    model.hyper = hyper;
    model.W.resize(hyper.k, num_users);
    model.H.resize(hyper.k, num_videos);
    for (Index c = 0; c < model.W.cols(); ++c)
        for (Index r = 0; r < hyper.k; ++r) model.W(r, c) = normal(rng);
    for (Index c = 0; c < model.H.cols(); ++c)
        for (Index r = 0; r < hyper.k; ++r) model.H(r, c) = normal(rng);
    model.biases = Vector::Zero(num_videos);
    return model;
}

void bpr_step(BprModel& model, const RatingMatrix& ratings, Index user, Index pos, Index neg) {
    if (model.num_users() != ratings.num_users() || model.num_videos() != ratings.num_videos()) {
        throw ShapeError("BPR model and ratings disagree on shape");
    }
    if (!ratings.contains(user, pos)) {
        throw ParameterError("bpr_step: video " + std::to_string(pos) + " is not a like of user " +
                             std::to_string(user));
    }
    if (neg < 0 || neg >= ratings.num_videos() || ratings.contains(user, neg)) {
        throw ParameterError("bpr_step: video " + std::to_string(neg) +
                             " is not a valid negative for user " + std::to_string(user));
    }
    step_unchecked(model, user, pos, neg);
}

TripletSampler::TripletSampler(const RatingMatrix& ratings, std::uint64_t seed)
    : ratings_(&ratings),
      rng_(seed),
      pick_like_(0, ratings.num_likes() == 0 ? 0 : ratings.num_likes() - 1),
      pick_video_(0, std::max<Index>(ratings.num_videos() - 1, 0)) {
    if (ratings.num_likes() == 0) throw DataError("cannot sample triplets without likes");
}

std::optional<Triplet> TripletSampler::next() {
    const Like& like = ratings_->likes()[pick_like_(rng_)];
    const auto row = ratings_->videos_of(like.user);
    if (static_cast<Index>(row.size()) >= ratings_->num_videos()) return std::nullopt;
    Index neg = pick_video_(rng_);
    while (std::binary_search(row.begin(), row.end(), neg)) neg = pick_video_(rng_);
    return Triplet{like.user, like.video, neg};
}

BprModel fit_bpr(const RatingMatrix& ratings, const BprHyper& hyper, std::uint64_t seed) {
    BprModel model = init_bpr(ratings.num_users(), ratings.num_videos(), hyper, seed);
    if (ratings.num_likes() == 0 || hyper.epochs == 0) return model;

    TripletSampler sampler(ratings, seed ^ 0x9e3779b97f4a7c15ULL);
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        for (std::size_t t = 0; t < ratings.num_likes(); ++t) {
            if (const auto triplet = sampler.next()) step_unchecked(model, triplet->user, triplet->pos, triplet->neg);
        }
        if (!model.W.allFinite() || !model.H.allFinite() || !model.biases.allFinite()) {
            throw NumericalError("non-finite BPR parameters after epoch " + std::to_string(epoch + 1));
        }
    }
    return model;
}

}  // namespace cerec
