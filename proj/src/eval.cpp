#include "cerec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <tuple>

#include "cerec/fusion.hpp"
#include "parallel.hpp"

namespace cerec {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

const char* to_string(Scenario scenario) {
    return scenario == Scenario::InMatrix ? "in" : "out";
}

Scenario parse_scenario(const std::string& text) {
    if (text == "in") return Scenario::InMatrix;
    if (text == "out") return Scenario::OutOfMatrix;
    throw ParameterError("scenario must be 'in' or 'out', got '" + text + "'");
}

const char* to_string(Method method) {
    switch (method) {
        case Method::Cer: return "cer";
        case Method::Wmf: return "wmf";
        case Method::Bpr: return "bpr";
        case Method::Random: return "random";
        case Method::Popularity: return "popularity";
    }
    return "?";
}

Method parse_method(const std::string& text) {
    for (Method m : {Method::Cer, Method::Wmf, Method::Bpr, Method::Random, Method::Popularity}) {
        if (text == to_string(m)) return m;
    }
    throw ParameterError("unknown method '" + text + "'");
}

std::vector<std::size_t> default_k_list() { return {5, 10, 15, 20, 25, 30}; }

// ---------------------------------------------------------------------------
// Fold plan

void FoldPlan::check_matches(const RatingMatrix& ratings) const {
    if (ratings.num_users() != num_users || ratings.num_videos() != num_videos ||
        ratings.num_likes() != num_likes() || labels.size() != num_folds ||
        video_fold.size() != static_cast<std::size_t>(num_videos)) {
        throw ShapeError("fold plan (" + std::to_string(num_users) + " users, " +
                         std::to_string(num_videos) + " videos, " + std::to_string(num_likes()) +
                         " likes) does not match ratings (" + std::to_string(ratings.num_users()) + ", " +
                         std::to_string(ratings.num_videos()) + ", " + std::to_string(ratings.num_likes()) +
                         ")");
    }
}

RatingMatrix FoldPlan::training(const RatingMatrix& ratings, std::size_t config) const {
    check_matches(ratings);
    if (config >= num_folds) throw IndexError("fold " + std::to_string(config) + " out of range");
    std::vector<std::uint8_t> keep(labels[config].size());
    for (std::size_t e = 0; e < keep.size(); ++e) keep[e] = labels[config][e] == Label::Train;
    return ratings.subset(keep);
}

std::vector<Like> FoldPlan::test_pairs(const RatingMatrix& ratings, std::size_t config, Scenario scenario) const {
    check_matches(ratings);
    if (config >= num_folds) throw IndexError("fold " + std::to_string(config) + " out of range");
    const Label wanted = scenario == Scenario::InMatrix ? Label::InTest : Label::OutTest;
    std::vector<Like> pairs;
    const auto likes = ratings.likes();
    for (std::size_t e = 0; e < likes.size(); ++e) {
        if (labels[config][e] == wanted) pairs.push_back(likes[e]);
    }
    return pairs;
}

std::vector<Index> FoldPlan::out_videos(std::size_t config) const {
    std::vector<Index> videos;
    for (std::size_t j = 0; j < video_fold.size(); ++j) {
        if (video_fold[j] == config) videos.push_back(static_cast<Index>(j));
    }
    return videos;
}

void FoldPlan::check_no_leakage(const RatingMatrix& ratings, std::size_t config) const {
    check_matches(ratings);
    const auto likes = ratings.likes();
    for (std::size_t e = 0; e < likes.size(); ++e) {
        const bool out_video = video_fold[static_cast<std::size_t>(likes[e].video)] == config;
        const bool out_label = labels[config][e] == Label::OutTest;
        if (out_video != out_label) {
            throw DataError("fold " + std::to_string(config + 1) + ": like (" + std::to_string(likes[e].user) +
                            ", " + std::to_string(likes[e].video) + ") leaks across the out-of-matrix split");
        }
    }
}

FoldPlan make_fold_plan(const RatingMatrix& ratings, std::size_t num_folds, std::uint64_t seed) {
    if (num_folds < 2) throw ParameterError("need at least 2 folds");
    const auto n = static_cast<std::size_t>(ratings.num_videos());
    if (n < num_folds) {
        throw DataError(std::to_string(n) + " videos cannot fill " + std::to_string(num_folds) + " folds");
    }

    FoldPlan plan;
    plan.num_folds = num_folds;
    plan.seed = seed;
    plan.num_users = ratings.num_users();
    plan.num_videos = ratings.num_videos();

    std::mt19937_64 rng(seed);
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);

    // Equal video counts per fold (the first n % folds take one extra), with
    // the shuffled videos placed most-liked first on the least-loaded open
    // fold so each fold also holds close to 1/folds of the likes.
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return ratings.users_of(a).size() > ratings.users_of(b).size();
    });
    std::vector<std::size_t> capacity(num_folds, n / num_folds);
    for (std::size_t f = 0; f < n % num_folds; ++f) ++capacity[f];
    std::vector<std::size_t> load(num_folds, 0), filled(num_folds, 0);
    plan.video_fold.assign(n, 0);
    for (Index video : order) {
        std::size_t best = num_folds;
        for (std::size_t f = 0; f < num_folds; ++f) {
            if (filled[f] == capacity[f]) continue;
            if (best == num_folds || load[f] < load[best]) best = f;
        }
        plan.video_fold[static_cast<std::size_t>(video)] = best;
        ++filled[best];
        load[best] += ratings.users_of(video).size();
    }

    const auto likes = ratings.likes();
    plan.labels.assign(num_folds, std::vector<Label>(likes.size(), Label::Train));
    for (std::size_t config = 0; config < num_folds; ++config) {
        auto& labels = plan.labels[config];
        std::vector<std::size_t> rest;
        for (std::size_t e = 0; e < likes.size(); ++e) {
            if (plan.video_fold[static_cast<std::size_t>(likes[e].video)] == config) {
                labels[e] = Label::OutTest;
            } else {
                rest.push_back(e);
            }
        }
        std::mt19937_64 sub_rng(splitmix64(seed ^ splitmix64(config + 1)));
        std::shuffle(rest.begin(), rest.end(), sub_rng);
        // Four equal chunks; the last one is the in-matrix test set.
        const std::size_t in_begin = rest.size() * 3 / 4;
        for (std::size_t t = in_begin; t < rest.size(); ++t) labels[rest[t]] = Label::InTest;
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Ranking and metrics

std::vector<Index> candidate_pool(const RatingMatrix& train, const FoldPlan& plan, std::size_t config,
                                  Scenario scenario, Index user) {
    if (scenario == Scenario::OutOfMatrix) return plan.out_videos(config);
    const auto liked = train.videos_of(user);
    std::vector<Index> pool;
    pool.reserve(static_cast<std::size_t>(train.num_videos()));
    auto it = liked.begin();
    for (Index j = 0; j < train.num_videos(); ++j) {
        while (it != liked.end() && *it < j) ++it;
        if (it != liked.end() && *it == j) continue;
        if (plan.video_fold[static_cast<std::size_t>(j)] == config) continue;
        pool.push_back(j);
    }
    return pool;
}

std::vector<Index> top_k(std::span<const double> scores, std::span<const Index> pool, std::size_t k) {
    if (scores.size() != pool.size()) throw ShapeError("top_k: scores and pool differ in length");
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const std::size_t take = std::min(k, pool.size());
    auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return pool[a] < pool[b];
    };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(), better);
    std::vector<Index> result(take);
    for (std::size_t t = 0; t < take; ++t) result[t] = pool[idx[t]];
    return result;
}

RankedRecommendations recommend(const BatchScorer& scorer, const RatingMatrix& train, const FoldPlan& plan,
                                std::size_t config, Scenario scenario, std::span<const Index> users,
                                std::size_t depth, unsigned threads) {
    RankedRecommendations recs(train.num_users());
    std::vector<Index> unique(users.begin(), users.end());
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    detail::parallel_for(static_cast<Index>(unique.size()), threads, [&](Index t) {
        const Index user = unique[static_cast<std::size_t>(t)];
        const auto pool = candidate_pool(train, plan, config, scenario, user);
        std::vector<double> scores(pool.size());
        scorer(user, pool, scores);
        recs.lists[static_cast<std::size_t>(user)] = top_k(scores, pool, depth);
        recs.present[static_cast<std::size_t>(user)] = 1;
    });
    return recs;
}

double accuracy_at_k(std::span<const Like> test, const RankedRecommendations& recs, std::size_t k) {
    if (test.empty()) throw DataError("Accuracy@k is undefined on an empty test set");
    std::size_t hits = 0;
    for (const Like& pair : test) {
        if (!recs.has(pair.user)) {
            throw DataError("no recommendation list for test user " + std::to_string(pair.user));
        }
        const auto& list = recs.lists[static_cast<std::size_t>(pair.user)];
        const auto end = list.begin() + static_cast<std::ptrdiff_t>(std::min(k, list.size()));
        if (std::find(list.begin(), end, pair.video) != end) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(test.size());
}

std::vector<double> evaluate_scenario(const BatchScorer& scorer, const RatingMatrix& ratings,
                                      const RatingMatrix& train, const FoldPlan& plan, std::size_t config,
                                      Scenario scenario, std::span<const std::size_t> k_list, unsigned threads) {
    const auto test = plan.test_pairs(ratings, config, scenario);
    std::vector<Index> users;
    users.reserve(test.size());
    for (const Like& l : test) users.push_back(l.user);
    const std::size_t depth = k_list.empty() ? 0 : *std::max_element(k_list.begin(), k_list.end());
    const auto recs = recommend(scorer, train, plan, config, scenario, users, depth, threads);
    std::vector<double> acc;
    acc.reserve(k_list.size());
    for (std::size_t k : k_list) acc.push_back(accuracy_at_k(test, recs, k));
    return acc;
}

// ---------------------------------------------------------------------------
// Scorers

BatchScorer model_scorer(const TrainedModel& model, Scenario scenario, const ContentFeatures* features) {
    if (const auto* bpr = std::get_if<BprModel>(&model)) {
        if (scenario == Scenario::OutOfMatrix) {
            throw ParameterError("BPR has no out-of-matrix predictor");
        }
        return [bpr = *bpr](Index user, std::span<const Index> videos, std::span<double> scores) {
            for (std::size_t t = 0; t < videos.size(); ++t) scores[t] = bpr.score(user, videos[t]);
        };
    }
    const auto& cer = std::get<CerModel>(model);
    if (scenario == Scenario::InMatrix || !cer.has_embedding()) {
        return [cer](Index user, std::span<const Index> videos, std::span<double> scores) {
            for (std::size_t t = 0; t < videos.size(); ++t) scores[t] = predict_in_matrix(cer, user, videos[t]);
        };
    }
    if (features == nullptr) {
        throw ParameterError("out-of-matrix scoring of a CER model needs content features");
    }
    if (features->dim() != cer.dim() || features->num_videos() != cer.num_videos()) {
        throw ShapeError("features '" + features->name + "' do not match the model's embedding");
    }
    // h'_j = E^T f_j for every video, computed once.
    Matrix content_latent = cer.E.transpose() * features->vectors;
    return [W = cer.W, latent = std::move(content_latent)](Index user, std::span<const Index> videos,
                                                           std::span<double> scores) {
        for (std::size_t t = 0; t < videos.size(); ++t) scores[t] = W.col(user).dot(latent.col(videos[t]));
    };
}

BatchScorer random_scorer(std::uint64_t seed) {
    return [seed](Index user, std::span<const Index> videos, std::span<double> scores) {
        const std::uint64_t base = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(user)));
        for (std::size_t t = 0; t < videos.size(); ++t) {
            const std::uint64_t h = splitmix64(base ^ static_cast<std::uint64_t>(videos[t]));
            scores[t] = static_cast<double>(h >> 11) * 0x1.0p-53;
        }
    };
}

BatchScorer popularity_scorer(const RatingMatrix& train) {
    std::vector<double> counts(static_cast<std::size_t>(train.num_videos()));
    for (Index j = 0; j < train.num_videos(); ++j) {
        counts[static_cast<std::size_t>(j)] = static_cast<double>(train.users_of(j).size());
    }
    return [counts = std::move(counts)](Index, std::span<const Index> videos, std::span<double> scores) {
        for (std::size_t t = 0; t < videos.size(); ++t) scores[t] = counts[static_cast<std::size_t>(videos[t])];
    };
}

BatchScorer fused_scorer(std::vector<BatchScorer> contents, std::vector<double> weights, bool zscore) {
    if (contents.size() != weights.size()) {
        throw ShapeError("fused_scorer: " + std::to_string(contents.size()) + " contents vs " +
                         std::to_string(weights.size()) + " weights");
    }
    return [contents = std::move(contents), weights = std::move(weights), zscore](
               Index user, std::span<const Index> videos, std::span<double> scores) {
        std::vector<std::vector<double>> per_content(contents.size(), std::vector<double>(videos.size()));
        for (std::size_t l = 0; l < contents.size(); ++l) {
            contents[l](user, videos, per_content[l]);
            if (zscore) zscore_normalize(per_content[l]);
        }
        std::vector<double> estimates(contents.size());
        for (std::size_t t = 0; t < videos.size(); ++t) {
            for (std::size_t l = 0; l < contents.size(); ++l) estimates[l] = per_content[l][t];
            scores[t] = fuse_ratings(estimates, weights);
        }
    };
}

// ---------------------------------------------------------------------------
// Tables and cross validation

double AccuracyTable::at(const std::string& content, Scenario scenario, const std::string& fold,
                         std::size_t k) const {
    for (const auto& row : rows) {
        if (row.content == content && row.scenario == to_string(scenario) && row.fold == fold && row.k == k) {
            return row.accuracy;
        }
    }
    throw DataError("no accuracy row for content " + content + ", fold " + fold + ", k " + std::to_string(k));
}

void AccuracyTable::add_summary() {
    using Key = std::tuple<std::string, std::string, std::string, std::size_t>;
    std::map<Key, std::vector<double>> groups;
    std::vector<Key> order;
    for (const auto& row : rows) {
        if (row.fold == "mean" || row.fold == "stddev") continue;
        Key key{row.method, row.content, row.scenario, row.k};
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) order.push_back(key);
        it->second.push_back(row.accuracy);
    }
    for (const auto& key : order) {
        const auto& values = groups[key];
        const double n = static_cast<double>(values.size());
        const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
        double ss = 0.0;
        for (double v : values) ss += (v - mean) * (v - mean);
        const double sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        const auto& [method, content, scenario, k] = key;
        rows.push_back({method, content, scenario, "mean", k, mean});
        rows.push_back({method, content, scenario, "stddev", k, sd});
    }
}

void write_accuracy_csv(std::ostream& out, const AccuracyTable& table) {
    out << "method,content,scenario,fold,k,accuracy\n";
    for (const auto& row : table.rows) {
        out << row.method << ',' << row.content << ',' << row.scenario << ',' << row.fold << ',' << row.k << ','
            << std::setprecision(12) << row.accuracy << '\n';
    }
}

AccuracyTable run_cross_validation(const RatingMatrix& ratings, std::span<const ContentFeatures> features,
                                   const MethodConfig& config, std::span<const std::size_t> k_list,
                                   std::size_t num_folds, std::uint64_t seed, std::span<const std::size_t> folds) {
    const FoldPlan plan = make_fold_plan(ratings, num_folds, seed);
    return run_cross_validation(ratings, plan, features, config, k_list, folds);
}

AccuracyTable run_cross_validation(const RatingMatrix& ratings, const FoldPlan& plan,
                                   std::span<const ContentFeatures> features, const MethodConfig& config,
                                   std::span<const std::size_t> k_list, std::span<const std::size_t> folds) {
    plan.check_matches(ratings);
    if (config.method == Method::Cer && features.empty()) {
        throw ParameterError("CER cross validation needs at least one content type");
    }
    std::vector<std::size_t> configs(folds.begin(), folds.end());
    if (configs.empty()) {
        configs.resize(plan.num_folds);
        std::iota(configs.begin(), configs.end(), std::size_t{0});
    }

    AccuracyTable table;
    const std::string method = to_string(config.method);
    const unsigned threads = config.fit.threads;
    for (std::size_t c : configs) {
        const RatingMatrix train = plan.training(ratings, c);
        plan.check_no_leakage(ratings, c);
        const std::string fold = std::to_string(c + 1);

        auto emit = [&](const std::string& content, Scenario scenario, const BatchScorer& scorer) {
            const auto acc = evaluate_scenario(scorer, ratings, train, plan, c, scenario, k_list, threads);
            for (std::size_t t = 0; t < k_list.size(); ++t) {
                table.rows.push_back({method, content, to_string(scenario), fold, k_list[t], acc[t]});
            }
        };
        auto emit_both = [&](const std::string& content, const TrainedModel& model, const ContentFeatures* f) {
            emit(content, Scenario::InMatrix, model_scorer(model, Scenario::InMatrix, f));
            emit(content, Scenario::OutOfMatrix, model_scorer(model, Scenario::OutOfMatrix, f));
        };

        switch (config.method) {
            case Method::Cer:
                for (const auto& f : features) {
                    emit_both(f.name, fit(train, &f, config.cer, config.fit).model, &f);
                }
                break;
            case Method::Wmf:
                emit_both("none", fit(train, nullptr, config.cer, config.fit).model, nullptr);
                break;
            case Method::Bpr: {
                const TrainedModel model = fit_bpr(train, config.bpr, config.fit.seed);
                emit("none", Scenario::InMatrix, model_scorer(model, Scenario::InMatrix, nullptr));
                break;
            }
            case Method::Random: {
                const auto scorer = random_scorer(splitmix64(config.fit.seed ^ (c + 1)));
                emit("none", Scenario::InMatrix, scorer);
                emit("none", Scenario::OutOfMatrix, scorer);
                break;
            }
            case Method::Popularity: {
                const auto scorer = popularity_scorer(train);
                emit("none", Scenario::InMatrix, scorer);
                emit("none", Scenario::OutOfMatrix, scorer);
                break;
            }
        }
    }
    table.add_summary();
    return table;
}

}  // namespace cerec
