#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cerec {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Error hierarchy. The CLI maps each family onto its own exit status.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParameterError : Error {
    using Error::Error;
};
struct ShapeError : Error {
    using Error::Error;
};
struct IndexError : Error {
    using Error::Error;
};
struct DataError : Error {
    using Error::Error;
};
struct ParseError : DataError {
    ParseError(const std::string& what, std::size_t line)
        : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};
struct FormatError : DataError {
    using DataError::DataError;
};
struct NumericalError : Error {
    using Error::Error;
};

/// A single observed like, r_ij = 1.
struct Like {
    Index user = 0;
    Index video = 0;

    friend bool operator==(const Like&, const Like&) = default;
    friend auto operator<=>(const Like&, const Like&) = default;
};

/**
 * Sparse binary implicit-feedback matrix over m users and n videos.
 *
 * Only likes are stored; an absent pair means r_ij = 0 ("dislike or never
 * rated"). Entries are kept sorted by (user, video) and indexed both ways so
 * the per-user slice R_i and per-video slice R_j are O(1) views.
 */
class RatingMatrix {
public:
    RatingMatrix() = default;
    /// Throws IndexError for out-of-range ids and DataError for duplicates.
    RatingMatrix(Index num_users, Index num_videos, std::vector<Like> likes);

    Index num_users() const noexcept { return num_users_; }
    Index num_videos() const noexcept { return num_videos_; }
    std::size_t num_likes() const noexcept { return likes_.size(); }

    /// All likes, sorted by (user, video).
    std::span<const Like> likes() const noexcept { return likes_; }
    /// Videos liked by `user`, ascending.
    std::span<const Index> videos_of(Index user) const;
    /// Users who liked `video`, ascending.
    std::span<const Index> users_of(Index video) const;
    bool contains(Index user, Index video) const;

    /// Same shape, keeping only the likes whose position in likes() is flagged.
    RatingMatrix subset(std::span<const std::uint8_t> keep) const;

private:
    Index num_users_ = 0;
    Index num_videos_ = 0;
    std::vector<Like> likes_;
    std::vector<std::size_t> user_offsets_{0};
    std::vector<Index> user_videos_;
    std::vector<std::size_t> video_offsets_{0};
    std::vector<Index> video_users_;
};

/// Dense d x n matrix F; column j is the content vector f_j of video j.
struct ContentFeatures {
    std::string name;
    Matrix vectors;
    bool ssr_applied = false;

    ContentFeatures() = default;
    /// Throws DataError when any component is not finite.
    ContentFeatures(std::string content_name, Matrix f, bool ssr = false);

    Index dim() const noexcept { return vectors.rows(); }
    Index num_videos() const noexcept { return vectors.cols(); }
};

struct Hyperparams {
    Index k = 50;
    double lambda_u = 0.1;
    double lambda_v = 10.0;
    double lambda_e = 1000.0;
    double conf_pos = 1.0;
    double conf_neg = 0.01;
    std::size_t max_sweeps = 200;

    /// Best WMF setting: lambda_u = lambda_v = 0.01, no embedding term.
    static Hyperparams wmf_defaults();

    /// Throws ParameterError. lambda_e is only checked when `with_content`.
    void validate(bool with_content) const;
};

/**
 * Trained CER state. W is k x m (column i is w_i), H is k x n (column j is
 * h_j), E is d x k. A model with d = 0 carries no embedding and is the WMF
 * degenerate case.
 */
struct CerModel {
    Matrix W;
    Matrix H;
    Matrix E;
    Hyperparams hyper;

    Index num_users() const noexcept { return W.cols(); }
    Index num_videos() const noexcept { return H.cols(); }
    Index dim() const noexcept { return E.rows(); }
    Index rank() const noexcept { return W.rows(); }
    bool has_embedding() const noexcept { return E.rows() > 0; }

    /// Throws ShapeError when W, H and E disagree on k.
    void check_shape() const;
};

/// c_ij: conf_pos for a like, conf_neg otherwise.
double confidence(bool liked, const Hyperparams& hyper) noexcept;

/// w_i^T h_j.
double predict_in_matrix(const CerModel& model, Index user, Index video);

/// w_i^T E^T f for a video with no observed offset.
double predict_out_matrix(const CerModel& model, Index user, const Eigen::Ref<const Vector>& f);

}  // namespace cerec
