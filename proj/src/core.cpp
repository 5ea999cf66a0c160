#include "cerec/core.hpp"

#include <algorithm>
#include <cmath>

namespace cerec {

RatingMatrix::RatingMatrix(Index num_users, Index num_videos, std::vector<Like> likes)
    : num_users_(num_users), num_videos_(num_videos), likes_(std::move(likes)) {
    if (num_users < 0 || num_videos < 0) {
        throw ShapeError("RatingMatrix: negative dimensions");
    }
    for (const Like& l : likes_) {
        if (l.user < 0 || l.user >= num_users || l.video < 0 || l.video >= num_videos) {
            throw IndexError("RatingMatrix: like (" + std::to_string(l.user) + ", " +
                             std::to_string(l.video) + ") outside " + std::to_string(num_users) +
                             " x " + std::to_string(num_videos));
        }
    }
    std::sort(likes_.begin(), likes_.end());
    auto dup = std::adjacent_find(likes_.begin(), likes_.end());
    if (dup != likes_.end()) {
        throw DataError("RatingMatrix: duplicate like (" + std::to_string(dup->user) + ", " +
                        std::to_string(dup->video) + ")");
    }

    // CSR by user; likes_ is already in user-major order.
    user_offsets_.assign(static_cast<std::size_t>(num_users) + 1, 0);
    user_videos_.resize(likes_.size());
    video_offsets_.assign(static_cast<std::size_t>(num_videos) + 1, 0);
    video_users_.resize(likes_.size());
    for (std::size_t e = 0; e < likes_.size(); ++e) {
        user_videos_[e] = likes_[e].video;
        ++user_offsets_[static_cast<std::size_t>(likes_[e].user) + 1];
        ++video_offsets_[static_cast<std::size_t>(likes_[e].video) + 1];
    }
    for (std::size_t i = 1; i < user_offsets_.size(); ++i) user_offsets_[i] += user_offsets_[i - 1];
    for (std::size_t j = 1; j < video_offsets_.size(); ++j) video_offsets_[j] += video_offsets_[j - 1];

    // Iterating in user order keeps each video's user list ascending.
    std::vector<std::size_t> cursor(video_offsets_.begin(), video_offsets_.end() - 1);
    for (const Like& l : likes_) {
        video_users_[cursor[static_cast<std::size_t>(l.video)]++] = l.user;
    }
}

std::span<const Index> RatingMatrix::videos_of(Index user) const {
    if (user < 0 || user >= num_users_) {
        throw IndexError("user id " + std::to_string(user) + " out of range");
    }
    const auto u = static_cast<std::size_t>(user);
    return std::span<const Index>(user_videos_).subspan(user_offsets_[u],
                                                         user_offsets_[u + 1] - user_offsets_[u]);
}

std::span<const Index> RatingMatrix::users_of(Index video) const {
    if (video < 0 || video >= num_videos_) {
        throw IndexError("video id " + std::to_string(video) + " out of range");
    }
    const auto v = static_cast<std::size_t>(video);
    return std::span<const Index>(video_users_).subspan(video_offsets_[v],
                                                         video_offsets_[v + 1] - video_offsets_[v]);
}

bool RatingMatrix::contains(Index user, Index video) const {
    auto row = videos_of(user);
    return std::binary_search(row.begin(), row.end(), video);
}

RatingMatrix RatingMatrix::subset(std::span<const std::uint8_t> keep) const {
    if (keep.size() != likes_.size()) {
        throw ShapeError("RatingMatrix::subset: mask length " + std::to_string(keep.size()) +
                         " != " + std::to_string(likes_.size()));
    }
    std::vector<Like> kept;
    for (std::size_t e = 0; e < likes_.size(); ++e) {
        if (keep[e]) kept.push_back(likes_[e]);
    }
    return RatingMatrix(num_users_, num_videos_, std::move(kept));
}

ContentFeatures::ContentFeatures(std::string content_name, Matrix f, bool ssr)
    : name(std::move(content_name)), vectors(std::move(f)), ssr_applied(ssr) {
    if (!vectors.allFinite()) {
        throw DataError("content features '" + name + "' contain non-finite values");
    }
}

Hyperparams Hyperparams::wmf_defaults() {
    Hyperparams h;
    h.lambda_u = 0.01;
    h.lambda_v = 0.01;
    return h;
}

void Hyperparams::validate(bool with_content) const {
    if (k < 1) throw ParameterError("k must be >= 1");
    if (!(lambda_u > 0)) throw ParameterError("lambda_u must be > 0");
    if (!(lambda_v > 0)) throw ParameterError("lambda_v must be > 0");
    if (with_content && !(lambda_e > 0)) throw ParameterError("lambda_e must be > 0");
    if (!(conf_neg > 0) || !(conf_pos > conf_neg)) {
        throw ParameterError("confidences must satisfy conf_pos > conf_neg > 0");
    }
    if (!std::isfinite(lambda_u) || !std::isfinite(lambda_v) || !std::isfinite(lambda_e) ||
        !std::isfinite(conf_pos)) {
        throw ParameterError("hyperparameters must be finite");
    }
}

void CerModel::check_shape() const {
    if (H.rows() != W.rows() || (E.rows() > 0 && E.cols() != W.rows())) {
        throw ShapeError("CerModel: W is " + std::to_string(W.rows()) + " x " +
                         std::to_string(W.cols()) + ", H is " + std::to_string(H.rows()) + " x " +
                         std::to_string(H.cols()) + ", E is " + std::to_string(E.rows()) + " x " +
                         std::to_string(E.cols()));
    }
}

double confidence(bool liked, const Hyperparams& hyper) noexcept {
    return liked ? hyper.conf_pos : hyper.conf_neg;
}

double predict_in_matrix(const CerModel& model, Index user, Index video) {
    if (user < 0 || user >= model.num_users()) {
        throw IndexError("user id " + std::to_string(user) + " out of range");
    }
    if (video < 0 || video >= model.num_videos()) {
        throw IndexError("video id " + std::to_string(video) + " out of range");
    }
    return model.W.col(user).dot(model.H.col(video));
}

double predict_out_matrix(const CerModel& model, Index user, const Eigen::Ref<const Vector>& f) {
    if (user < 0 || user >= model.num_users()) {
        throw IndexError("user id " + std::to_string(user) + " out of range");
    }
    if (f.size() != model.dim()) {
        throw ShapeError("content vector has length " + std::to_string(f.size()) +
                         ", model expects " + std::to_string(model.dim()));
    }
    if (!model.has_embedding()) return 0.0;
    const Vector content_latent = model.E.transpose() * f;
    return model.W.col(user).dot(content_latent);
}

}  // namespace cerec
