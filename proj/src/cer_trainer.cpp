#include "cerec/cer_trainer.hpp"

#include <cmath>
#include <random>
#include <string>

#include "parallel.hpp"

namespace cerec {
namespace {

void check_inputs(const CerModel& model, const RatingMatrix& ratings, const ContentFeatures* features) {
    model.check_shape();
    if (model.num_users() != ratings.num_users() || model.num_videos() != ratings.num_videos()) {
        throw ShapeError("model is " + std::to_string(model.num_users()) + " users x " +
                         std::to_string(model.num_videos()) + " videos, ratings are " +
                         std::to_string(ratings.num_users()) + " x " +
                         std::to_string(ratings.num_videos()));
    }
    if (features != nullptr) {
        if (features->num_videos() != ratings.num_videos()) {
            throw ShapeError("features '" + features->name + "' cover " +
                             std::to_string(features->num_videos()) + " videos, ratings have " +
                             std::to_string(ratings.num_videos()));
        }
        if (features->dim() != model.dim()) {
            throw ShapeError("features '" + features->name + "' have dimension " +
                             std::to_string(features->dim()) + ", embedding has " +
                             std::to_string(model.dim()) + " rows");
        }
    } else if (model.has_embedding()) {
        throw ShapeError("model has an embedding but no features were given");
    }
}

Matrix gram(const Matrix& latent) {
    Matrix g = Matrix::Zero(latent.rows(), latent.rows());
    g.selfadjointView<Eigen::Lower>().rankUpdate(latent);
    return g.selfadjointView<Eigen::Lower>();
}

// Solves (conf_neg G + (conf_pos - conf_neg) sum_s x_s x_s^T + lambda I) y = rhs
// where s ranges over the liked counterparts.
Vector solve_block(const Matrix& global_gram, const Matrix& latent, std::span<const Index> liked,
                   const Hyperparams& hyper, double lambda, Vector rhs) {
    const Index k = global_gram.rows();
    Matrix system = hyper.conf_neg * global_gram;
    system.diagonal().array() += lambda;
    const double boost = hyper.conf_pos - hyper.conf_neg;
    for (Index s : liked) {
        system.noalias() += boost * latent.col(s) * latent.col(s).transpose();
        rhs.noalias() += hyper.conf_pos * latent.col(s);
    }
    Eigen::LLT<Matrix> llt(system);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("block system of size " + std::to_string(k) + " is not positive definite");
    }
    return llt.solve(rhs);
}

void require_finite(const Matrix& m, std::size_t sweep, const char* block) {
    if (!m.allFinite()) {
        throw NumericalError("non-finite value after sweep " + std::to_string(sweep) + ", block " + block);
    }
}

}  // namespace

double objective(const CerModel& model, const RatingMatrix& ratings, const ContentFeatures* features) {
    check_inputs(model, ratings, features);
    const Hyperparams& hp = model.hyper;

    // sum over all pairs of (w_i^T h_j)^2 = <W W^T, H H^T>_F
    const double all_pairs = gram(model.W).cwiseProduct(gram(model.H)).sum();
    double rating_term = 0.5 * hp.conf_neg * all_pairs;
    for (const Like& l : ratings.likes()) {
        const double pred = model.W.col(l.user).dot(model.H.col(l.video));
        rating_term += 0.5 * hp.conf_pos * (pred - 1.0) * (pred - 1.0) - 0.5 * hp.conf_neg * pred * pred;
    }

    const double user_term = 0.5 * hp.lambda_u * model.W.squaredNorm();
    double offset_term = 0.0;
    double embedding_term = 0.0;
    if (features != nullptr) {
        offset_term = 0.5 * hp.lambda_v * (model.H - model.E.transpose() * features->vectors).squaredNorm();
        embedding_term = 0.5 * hp.lambda_e * model.E.squaredNorm();
    } else {
        offset_term = 0.5 * hp.lambda_v * model.H.squaredNorm();
    }
    return rating_term + user_term + offset_term + embedding_term;
}

Vector update_user(const CerModel& model, const RatingMatrix& ratings, Index user) {
    return update_user(model, ratings, user, gram(model.H));
}

Vector update_user(const CerModel& model, const RatingMatrix& ratings, Index user,
                   const Matrix& item_gram) {
    return solve_block(item_gram, model.H, ratings.videos_of(user), model.hyper, model.hyper.lambda_u,
                       Vector::Zero(model.rank()));
}

Vector update_item(const CerModel& model, const RatingMatrix& ratings, const ContentFeatures* features,
                   Index video) {
    return update_item(model, ratings, features, video, gram(model.W));
}

Vector update_item(const CerModel& model, const RatingMatrix& ratings, const ContentFeatures* features,
                   Index video, const Matrix& user_gram) {
    Vector rhs = Vector::Zero(model.rank());
    if (features != nullptr) {
        if (features->dim() != model.dim()) {
            throw ShapeError("features dimension does not match embedding");
        }
        rhs.noalias() = model.hyper.lambda_v * (model.E.transpose() * features->vectors.col(video));
    }
    return solve_block(user_gram, model.W, ratings.users_of(video), model.hyper, model.hyper.lambda_v,
                       std::move(rhs));
}

Matrix update_embedding(const CerModel& model, const ContentFeatures& features) {
    const Index d = features.dim();
    if (features.num_videos() != model.num_videos()) {
        throw ShapeError("features cover " + std::to_string(features.num_videos()) +
                         " videos, model has " + std::to_string(model.num_videos()));
    }
    const double lambda_v = model.hyper.lambda_v;
    Matrix system = Matrix::Zero(d, d);
    system.selfadjointView<Eigen::Lower>().rankUpdate(features.vectors, lambda_v);
    system.diagonal().array() += model.hyper.lambda_e;
    Eigen::LLT<Matrix> llt(system.selfadjointView<Eigen::Lower>());
    if (llt.info() != Eigen::Success) {
        throw NumericalError("embedding system is not positive definite");
    }
    const Matrix rhs = lambda_v * (features.vectors * model.H.transpose());
    return llt.solve(rhs);
}

CerModel init_model(Index num_users, Index num_videos, Index dim, const Hyperparams& hyper,
                    const FitOptions& options) {
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal(0.0, options.init_stddev);
    CerModel model;
    model.hyper = hyper;
    model.W.resize(hyper.k, num_users);
    model.H.resize(hyper.k, num_videos);
    for (Index c = 0; c < model.W.cols(); ++c)
        for (Index r = 0; r < model.W.rows(); ++r) model.W(r, c) = normal(rng);
    for (Index c = 0; c < model.H.cols(); ++c)
        for (Index r = 0; r < model.H.rows(); ++r) model.H(r, c) = normal(rng);
    model.E = Matrix::Zero(dim, hyper.k);
    return model;
}

FitResult fit(const RatingMatrix& ratings, const ContentFeatures* features, const Hyperparams& hyper,
              const FitOptions& options) {
    hyper.validate(features != nullptr);
    const Index dim = features != nullptr ? features->dim() : 0;
    return fit_from(init_model(ratings.num_users(), ratings.num_videos(), dim, hyper, options), ratings,
                    features, options);
}

FitResult fit_from(CerModel model, const RatingMatrix& ratings, const ContentFeatures* features,
                   const FitOptions& options) {
    model.hyper.validate(features != nullptr);
    if (model.hyper.max_sweeps < 1) throw ParameterError("max_sweeps must be >= 1");
    check_inputs(model, ratings, features);

    const auto start = std::chrono::steady_clock::now();
    TrainReport report;
    // Runs one block update, attaching the sweep and block to any numerical failure.
    auto guarded = [](std::size_t sweep, const char* block, auto&& update) {
        try {
            update();
        } catch (const NumericalError& e) {
            throw NumericalError("sweep " + std::to_string(sweep) + ", block " + block + ": " + e.what());
        }
    };
    for (std::size_t sweep = 1; sweep <= model.hyper.max_sweeps; ++sweep) {
        guarded(sweep, "users", [&] {
            const Matrix item_gram = gram(model.H);
            Matrix next_w(model.W.rows(), model.W.cols());
            detail::parallel_for(model.num_users(), options.threads, [&](Index i) {
                next_w.col(i) = update_user(model, ratings, i, item_gram);
            });
            model.W = std::move(next_w);
        });
        require_finite(model.W, sweep, "users");

        guarded(sweep, "items", [&] {
            const Matrix user_gram = gram(model.W);
            Matrix next_h(model.H.rows(), model.H.cols());
            detail::parallel_for(model.num_videos(), options.threads, [&](Index j) {
                next_h.col(j) = update_item(model, ratings, features, j, user_gram);
            });
            model.H = std::move(next_h);
        });
        require_finite(model.H, sweep, "items");

        if (features != nullptr) {
            guarded(sweep, "embedding", [&] { model.E = update_embedding(model, *features); });
            require_finite(model.E, sweep, "embedding");
        }

        const double value = objective(model, ratings, features);
        if (!std::isfinite(value)) {
            throw NumericalError("non-finite objective after sweep " + std::to_string(sweep));
        }
        report.objective_per_sweep.push_back(value);
        report.sweeps_run = sweep;

        if (options.early_stop && sweep > 1) {
            const double prev = report.objective_per_sweep[sweep - 2];
            if ((prev - value) < options.early_stop_tol * std::abs(prev)) break;
        }
    }
    report.wall_time = std::chrono::steady_clock::now() - start;
    return {std::move(model), std::move(report)};
}

}  // namespace cerec
