#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "cerec/bpr_trainer.hpp"
#include "cerec/core.hpp"
#include "cerec/eval.hpp"

namespace cerec {

struct RawRatingRecord {
    std::string user_key;
    std::string video_key;
    double value = 0.0;
};

/// 1 iff value >= threshold; a 5.0 star rating is a like.
bool binarize(const RawRatingRecord& record, double threshold = 5.0) noexcept;

/// Component-wise sign(x) sqrt(|x|).
Vector ssr_normalize(const Vector& v);

/// SSR-normalises every content vector once. Throws DataError if the
/// features are already flagged as normalised.
void apply_ssr(ContentFeatures& features);

// ---------------------------------------------------------------------------
// Ratings: one `user::video::rating::timestamp` record per line.

enum class IdPolicy {
    Sorted,     // keys sorted (numerically when every key is an integer)
    FirstSeen,  // order of first appearance in the file
};

struct IdMap {
    std::vector<std::string> keys;
    std::unordered_map<std::string, Index> index;

    Index size() const noexcept { return static_cast<Index>(keys.size()); }
    /// Throws DataError for an unknown key.
    Index lookup(const std::string& key) const;
};

struct LoadedRatings {
    RatingMatrix ratings;
    IdMap users;
    IdMap videos;
    std::size_t records = 0;
};

/// Every user and video seen in the file gets a dense id, liked or not.
/// Throws ParseError naming the line for malformed records and DataError for
/// a repeated (user, video) pair.
LoadedRatings read_ratings(std::istream& in, IdPolicy policy = IdPolicy::Sorted, double threshold = 5.0);
LoadedRatings load_ratings(const std::filesystem::path& path, IdPolicy policy = IdPolicy::Sorted,
                           double threshold = 5.0);
void write_rating_records(std::ostream& out, const std::vector<RawRatingRecord>& records);

// ---------------------------------------------------------------------------
// Features: text header `name n d ssr_applied\n`, then n*d little-endian
// float64 values, row-major by video.

/// FormatError for a bad header, ShapeError when the block is not n*d values,
/// DataError for a non-finite value. Messages name the byte offset.
ContentFeatures read_features(std::istream& in);
/// Also throws DataError unless the file covers exactly `expected_videos`.
ContentFeatures load_features(const std::filesystem::path& path, Index expected_videos = -1);
void write_features(std::ostream& out, const ContentFeatures& features);
void save_features(const std::filesystem::path& path, const ContentFeatures& features);

// ---------------------------------------------------------------------------
// Models: 8-byte magic ("CERMODEL" or "BPRMODEL"), u32 version, u64 dims,
// hyperparameters, then column-major float64 blocks, all little-endian.

inline constexpr std::uint32_t kModelFormatVersion = 1;

void write_model(std::ostream& out, const CerModel& model);
void write_model(std::ostream& out, const BprModel& model);
/// Throws FormatError for a bad magic, version or truncation; nothing is
/// returned unless the whole file parsed.
TrainedModel read_model(std::istream& in);

void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Fold plans: text, dense ids of the ratings file they were built from.

void write_fold_plan(std::ostream& out, const FoldPlan& plan, const RatingMatrix& ratings);
FoldPlan read_fold_plan(std::istream& in, const RatingMatrix& ratings);

// ---------------------------------------------------------------------------
// Estimates CSV (`user,video,estimate`, dense ids) and validation
// accuracies CSV (`content,accuracy`).

struct EstimateTable {
    std::string content;
    std::unordered_map<std::uint64_t, double> values;

    static std::uint64_t key(Index user, Index video) noexcept {
        return (static_cast<std::uint64_t>(user) << 32) | static_cast<std::uint64_t>(video);
    }
};

void write_estimates_header(std::ostream& out);
void write_estimate(std::ostream& out, Index user, Index video, double estimate);
EstimateTable read_estimates(std::istream& in, std::string content);

/// Looks scores up in the table; a missing pair is a DataError.
BatchScorer estimate_scorer(EstimateTable table);

std::map<std::string, double> read_accuracies(std::istream& in);

// ---------------------------------------------------------------------------
// Planted synthetic data.

struct SyntheticSpec {
    Index m = 200;
    Index n = 100;
    Index d = 20;
    Index k_true = 5;
    double noise_std = 0.1;
    double like_quantile = 0.9;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SyntheticData {
    RatingMatrix ratings;
    ContentFeatures features;
    /// Generating parameters: W* (k_true x m), E* (d x k_true), H* = E*^T F.
    CerModel truth;
    /// Star-rated records over every (user, video) pair; likes are 5.0.
    std::vector<RawRatingRecord> records;
};

/**
 * Draws W* ~ N(0, 1), E* ~ N(0, 1/d), F ~ N(0, 1) and scores
 * s_ij = w*_i^T E*^T f_j + N(0, noise_std^2). Each user likes the videos
 * whose score lies above that user's like_quantile quantile, i.e. the top
 * n - round(like_quantile * n) videos.
 */
SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace cerec
