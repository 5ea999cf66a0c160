#pragma once

#include <chrono>
#include <cstdint>
#include <vector>

#include "cerec/core.hpp"

namespace cerec {

struct TrainReport {
    std::vector<double> objective_per_sweep;
    std::size_t sweeps_run = 0;
    std::chrono::duration<double> wall_time{0};
};

struct FitOptions {
    std::uint64_t seed = 0;
    /// Stop once the relative objective decrease falls below 1e-6.
    bool early_stop = false;
    double early_stop_tol = 1e-6;
    /// Worker threads for the user and item half-sweeps.
    unsigned threads = 1;
    double init_stddev = 0.1;
};

/**
 * CER objective
 *
 *   sum_ij c_ij/2 (w_i^T h_j - r_ij)^2 + lambda_u/2 sum_i |w_i|^2
 *     + lambda_v/2 sum_j |h_j - E^T f_j|^2 + lambda_e/2 |E|_F^2
 *
 * evaluated in O(|likes| k + (m + n) k^2) by splitting the rating term into
 * a conf_neg-weighted all-pairs part (via the two k x k Gram matrices) and a
 * correction over likes. Pass `features == nullptr` for the WMF objective,
 * where the offset term becomes lambda_v/2 sum_j |h_j|^2.
 */
double objective(const CerModel& model, const RatingMatrix& ratings, const ContentFeatures* features);

/// Exact minimiser of the objective in w_i with everything else fixed.
Vector update_user(const CerModel& model, const RatingMatrix& ratings, Index user);
/// As above, reusing a precomputed item Gram matrix H H^T.
Vector update_user(const CerModel& model, const RatingMatrix& ratings, Index user,
                   const Matrix& item_gram);

/// Exact minimiser in h_j. `features == nullptr` drops the lambda_v E^T f_j pull.
Vector update_item(const CerModel& model, const RatingMatrix& ratings, const ContentFeatures* features,
                   Index video);
Vector update_item(const CerModel& model, const RatingMatrix& ratings, const ContentFeatures* features,
                   Index video, const Matrix& user_gram);

/// E <- (lambda_v F F^T + lambda_e I_d)^{-1} lambda_v F H^T.
Matrix update_embedding(const CerModel& model, const ContentFeatures& features);

/// Seeded initialisation: W, H ~ N(0, init_stddev^2), E = 0 (d x k, d = 0 without features).
CerModel init_model(Index num_users, Index num_videos, Index dim, const Hyperparams& hyper,
                    const FitOptions& options);

struct FitResult {
    CerModel model;
    TrainReport report;
};

/**
 * Coordinate descent. Each sweep updates every user, then every item, then
 * E (skipped without features), and records the objective. Throws
 * NumericalError naming the sweep and block if an update goes non-finite.
 */
FitResult fit(const RatingMatrix& ratings, const ContentFeatures* features, const Hyperparams& hyper,
              const FitOptions& options = {});

/// Continue sweeping from an explicit starting model.
FitResult fit_from(CerModel start, const RatingMatrix& ratings, const ContentFeatures* features,
                   const FitOptions& options = {});

}  // namespace cerec
