// cerec: command-line driver for the split / train / predict / evaluate /
// fuse pipeline. Stages exchange files so any stage can be swapped out.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "cerec/bpr_trainer.hpp"
#include "cerec/cer_trainer.hpp"
#include "cerec/dataio.hpp"
#include "cerec/eval.hpp"
#include "cerec/fusion.hpp"

namespace fs = std::filesystem;
using namespace cerec;

namespace {

enum ExitCode : int { kOk = 0, kArgumentError = 2, kDataError = 3, kNumericalError = 4 };

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

std::vector<std::size_t> parse_k_list(const std::string& text) {
    std::vector<std::size_t> ks;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        std::size_t pos = 0;
        long long k = 0;
        try {
            k = std::stoll(part, &pos);
        } catch (const std::logic_error&) {
            pos = 0;
        }
        if (pos != part.size() || k < 1) throw ParameterError("bad --k-list entry '" + part + "'");
        ks.push_back(static_cast<std::size_t>(k));
    }
    if (ks.empty()) throw ParameterError("--k-list is empty");
    return ks;
}

std::size_t fold_index(int fold, const FoldPlan& plan) {
    if (fold < 1 || static_cast<std::size_t>(fold) > plan.num_folds) {
        throw ParameterError("--fold must lie in [1, " + std::to_string(plan.num_folds) + "]");
    }
    return static_cast<std::size_t>(fold - 1);
}

FoldPlan load_plan(const fs::path& path, const RatingMatrix& ratings) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open plan file " + path.string());
    return read_fold_plan(in, ratings);
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    SyntheticSpec spec;
    std::string out_dir = ".";
};

void run_synth(const SynthArgs& a) {
    const SyntheticData data = generate_synthetic(a.spec);
    const fs::path dir(a.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    auto ratings = open_out(dir / "ratings.dat");
    write_rating_records(ratings, data.records);
    save_features(dir / "features.bin", data.features);
    save_model(dir / "truth.model", data.truth);
    std::cout << "wrote " << data.records.size() << " ratings (" << data.ratings.num_likes() << " likes), "
              << data.features.dim() << "-dim features and ground truth to " << dir.string() << '\n';
}

struct SplitArgs {
    std::string ratings, out;
    int folds = 5;
    std::uint64_t seed = 0;
};

void run_split(const SplitArgs& a) {
    if (a.folds < 2) throw ParameterError("--folds must be >= 2");
    const auto loaded = load_ratings(a.ratings);
    const FoldPlan plan = make_fold_plan(loaded.ratings, static_cast<std::size_t>(a.folds), a.seed);
    auto out = open_out(a.out);
    write_fold_plan(out, plan, loaded.ratings);
    std::size_t counts[3] = {0, 0, 0};
    for (Label l : plan.labels.front()) ++counts[static_cast<int>(l)];
    std::cout << "fold 1: " << counts[0] << " train, " << counts[1] << " in-matrix test, " << counts[2]
              << " out-of-matrix test likes\n";
}

struct TrainArgs {
    std::string method = "cer";
    std::string ratings, plan, features, out, log;
    int fold = 1;
    Index k = 50;
    std::optional<double> lambda_u, lambda_v;
    double lambda_e = 1000.0;
    std::size_t sweeps = 200;
    std::size_t epochs = 200;
    double learning_rate = 1e-4;
    double lambda_i = 0.0025, lambda_j = 0.00025, lambda_b = 0.0;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    bool early_stop = false;
};

void run_train(const TrainArgs& a) {
    const Method method = parse_method(a.method);
    if (method != Method::Cer && method != Method::Wmf && method != Method::Bpr) {
        throw ParameterError("--method must be cer, wmf or bpr");
    }
    if (method == Method::Cer && a.features.empty()) throw ParameterError("--method cer needs --features");
    if (method == Method::Wmf && !a.features.empty()) {
        std::cerr << "warning: wmf ignores --features\n";
    }

    const auto loaded = load_ratings(a.ratings);
    const FoldPlan plan = load_plan(a.plan, loaded.ratings);
    const std::size_t config = fold_index(a.fold, plan);
    const RatingMatrix train = plan.training(loaded.ratings, config);

    if (method == Method::Bpr) {
        BprHyper hyper;
        hyper.k = a.k;
        hyper.lambda_u = a.lambda_u.value_or(0.0025);
        hyper.lambda_i = a.lambda_i;
        hyper.lambda_j = a.lambda_j;
        hyper.lambda_b = a.lambda_b;
        hyper.learning_rate = a.learning_rate;
        hyper.epochs = a.epochs;
        save_model(a.out, fit_bpr(train, hyper, a.seed));
        std::cout << "trained bpr for " << hyper.epochs << " epochs\n";
        return;
    }

    Hyperparams hyper = method == Method::Wmf ? Hyperparams::wmf_defaults() : Hyperparams{};
    hyper.k = a.k;
    if (a.lambda_u) hyper.lambda_u = *a.lambda_u;
    if (a.lambda_v) hyper.lambda_v = *a.lambda_v;
    hyper.lambda_e = a.lambda_e;
    hyper.max_sweeps = a.sweeps;

    std::optional<ContentFeatures> features;
    if (method == Method::Cer) features = load_features(a.features, loaded.ratings.num_videos());

    FitOptions options;
    options.seed = a.seed;
    options.threads = a.threads;
    options.early_stop = a.early_stop;
    const FitResult result = fit(train, features ? &*features : nullptr, hyper, options);
    save_model(a.out, result.model);

    auto log = open_out(a.log.empty() ? a.out + ".log" : a.log);
    for (std::size_t s = 0; s < result.report.objective_per_sweep.size(); ++s) {
        log << (s + 1) << ' ' << std::setprecision(17) << result.report.objective_per_sweep[s] << '\n';
    }
    std::cout << "trained " << a.method << " for " << result.report.sweeps_run << " sweeps, final objective "
              << std::setprecision(10) << result.report.objective_per_sweep.back() << '\n';
}

struct ScoreArgs {
    std::string model, ratings, plan, features, scenario = "in", out;
    int fold = 1;
    std::string k_list = "5,10,15,20,25,30";
    unsigned threads = 1;
};

struct ScoringContext {
    LoadedRatings loaded;
    FoldPlan plan;
    std::size_t config = 0;
    RatingMatrix train;
    Scenario scenario = Scenario::InMatrix;
    TrainedModel model;
    std::optional<ContentFeatures> features;
    BatchScorer scorer;
};

ScoringContext prepare_scoring(const ScoreArgs& a) {
    ScoringContext ctx;
    ctx.scenario = parse_scenario(a.scenario);
    ctx.model = load_model(a.model);
    const bool is_cer_with_embedding =
        std::holds_alternative<CerModel>(ctx.model) && std::get<CerModel>(ctx.model).has_embedding();
    if (std::holds_alternative<BprModel>(ctx.model) && ctx.scenario == Scenario::OutOfMatrix) {
        throw ParameterError("BPR has no out-of-matrix predictor");
    }
    if (is_cer_with_embedding && ctx.scenario == Scenario::OutOfMatrix && a.features.empty()) {
        throw ParameterError("out-of-matrix scoring of a CER model needs --features");
    }
    ctx.loaded = load_ratings(a.ratings);
    ctx.plan = load_plan(a.plan, ctx.loaded.ratings);
    ctx.config = fold_index(a.fold, ctx.plan);
    ctx.train = ctx.plan.training(ctx.loaded.ratings, ctx.config);
    if (!a.features.empty() && is_cer_with_embedding) {
        ctx.features = load_features(a.features, ctx.loaded.ratings.num_videos());
    }
    const auto dims = std::visit([](const auto& m) { return std::pair{m.num_users(), m.num_videos()}; }, ctx.model);
    if (dims.first != ctx.loaded.ratings.num_users() || dims.second != ctx.loaded.ratings.num_videos()) {
        throw DataError("model shape does not match the ratings file");
    }
    ctx.scorer = model_scorer(ctx.model, ctx.scenario, ctx.features ? &*ctx.features : nullptr);
    return ctx;
}

void run_evaluate(const ScoreArgs& a) {
    const auto ks = parse_k_list(a.k_list);
    const ScoringContext ctx = prepare_scoring(a);
    const auto acc = evaluate_scenario(ctx.scorer, ctx.loaded.ratings, ctx.train, ctx.plan, ctx.config,
                                       ctx.scenario, ks, a.threads);
    std::string method = "bpr";
    if (const auto* cer = std::get_if<CerModel>(&ctx.model)) method = cer->has_embedding() ? "cer" : "wmf";
    AccuracyTable table;
    for (std::size_t t = 0; t < ks.size(); ++t) {
        table.rows.push_back({method, ctx.features ? ctx.features->name : "none", to_string(ctx.scenario),
                              std::to_string(a.fold), ks[t], acc[t]});
    }
    auto out = open_out(a.out);
    write_accuracy_csv(out, table);
    write_accuracy_csv(std::cout, table);
}

void run_predict(const ScoreArgs& a) {
    const ScoringContext ctx = prepare_scoring(a);
    auto out = open_out(a.out);
    write_estimates_header(out);
    std::size_t rows = 0;
    for (Index user = 0; user < ctx.train.num_users(); ++user) {
        const auto pool = candidate_pool(ctx.train, ctx.plan, ctx.config, ctx.scenario, user);
        std::vector<double> scores(pool.size());
        ctx.scorer(user, pool, scores);
        for (std::size_t t = 0; t < pool.size(); ++t) write_estimate(out, user, pool[t], scores[t]);
        rows += pool.size();
    }
    std::cout << "wrote " << rows << " estimates to " << a.out << '\n';
}

struct FuseArgs {
    std::vector<std::string> estimates;
    std::string method = "geometric";
    double p = 0.5;
    std::string validation, ratings, plan, scenario = "out", out, spec_out;
    int fold = 1;
    std::string k_list = "5,10,15,20,25,30";
    bool zscore = false;
};

void run_fuse(const FuseArgs& a) {
    const FusionMethod method = parse_fusion_method(a.method);
    if (method == FusionMethod::Geometric && !(a.p >= 0.5 && a.p < 1.0)) {
        throw ParameterError("--p must lie in [0.5, 1)");
    }
    const auto ks = parse_k_list(a.k_list);
    const Scenario scenario = parse_scenario(a.scenario);

    std::vector<std::pair<std::string, std::string>> named;
    for (const auto& spec : a.estimates) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0) throw ParameterError("--estimates takes NAME=path, got '" + spec + "'");
        named.emplace_back(spec.substr(0, eq), spec.substr(eq + 1));
    }

    std::vector<std::string> order;
    if (!a.validation.empty()) {
        std::ifstream in(a.validation);
        if (!in) throw DataError("cannot open " + a.validation);
        const auto accuracies = read_accuracies(in);
        order = rank_contents(accuracies);
        if (order.size() != named.size()) {
            throw DataError("validation accuracies list " + std::to_string(order.size()) + " contents, " +
                            std::to_string(named.size()) + " estimate files given");
        }
    } else {
        for (const auto& [name, path] : named) order.push_back(name);
    }

    const FusionSpec spec = FusionSpec::make(order, method, a.p);
    std::vector<BatchScorer> scorers;
    for (const auto& name : spec.ordered_contents) {
        auto it = std::find_if(named.begin(), named.end(), [&](const auto& e) { return e.first == name; });
        if (it == named.end()) throw DataError("no estimates for content '" + name + "'");
        std::ifstream in(it->second);
        if (!in) throw DataError("cannot open " + it->second);
        scorers.push_back(estimate_scorer(read_estimates(in, name)));
    }

    std::cout << "weights:";
    for (std::size_t l = 0; l < spec.weights.size(); ++l) {
        std::cout << ' ' << spec.ordered_contents[l] << '=' << std::setprecision(17) << spec.weights[l];
    }
    std::cout << '\n';
    if (!a.spec_out.empty()) {
        auto out = open_out(a.spec_out);
        write_fusion_spec(out, spec);
    }

    const auto loaded = load_ratings(a.ratings);
    const FoldPlan plan = load_plan(a.plan, loaded.ratings);
    const std::size_t config = fold_index(a.fold, plan);
    const RatingMatrix train = plan.training(loaded.ratings, config);
    const auto scorer = fused_scorer(std::move(scorers), spec.weights, a.zscore);
    const auto acc = evaluate_scenario(scorer, loaded.ratings, train, plan, config, scenario, ks);

    std::string content;
    for (const auto& name : spec.ordered_contents) content += (content.empty() ? "" : "+") + name;
    AccuracyTable table;
    for (std::size_t t = 0; t < ks.size(); ++t) {
        table.rows.push_back({std::string("fused-") + to_string(method), content, to_string(scenario),
                              std::to_string(a.fold), ks[t], acc[t]});
    }
    auto out = open_out(a.out);
    write_accuracy_csv(out, table);
    write_accuracy_csv(std::cout, table);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Collaborative embedding regression recommender toolkit"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate planted synthetic ratings, features and ground truth");
    synth_cmd->add_option("--users", synth.spec.m, "Number of users")->capture_default_str();
    synth_cmd->add_option("--videos", synth.spec.n, "Number of videos")->capture_default_str();
    synth_cmd->add_option("--dim", synth.spec.d, "Content dimension")->capture_default_str();
    synth_cmd->add_option("--rank", synth.spec.k_true, "Planted latent rank")->capture_default_str();
    synth_cmd->add_option("--noise", synth.spec.noise_std, "Score noise stddev")->capture_default_str();
    synth_cmd->add_option("--quantile", synth.spec.like_quantile, "Per-user like quantile")->capture_default_str();
    synth_cmd->add_option("--seed", synth.spec.seed)->capture_default_str();
    synth_cmd->add_option("--out-dir", synth.out_dir)->capture_default_str();

    SplitArgs split;
    auto* split_cmd = app.add_subcommand("split", "Build a cross-validation fold plan");
    split_cmd->add_option("--ratings", split.ratings)->required();
    split_cmd->add_option("--folds", split.folds)->capture_default_str();
    split_cmd->add_option("--seed", split.seed)->capture_default_str();
    split_cmd->add_option("--out", split.out, "Plan file")->required();

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Train cer, wmf or bpr on one fold's training likes");
    train_cmd->add_option("--method", train.method)->check(CLI::IsMember({"cer", "wmf", "bpr"}))->capture_default_str();
    train_cmd->add_option("--ratings", train.ratings)->required();
    train_cmd->add_option("--plan", train.plan)->required();
    train_cmd->add_option("--fold", train.fold, "1-based fold")->capture_default_str();
    train_cmd->add_option("--features", train.features);
    train_cmd->add_option("--k", train.k)->capture_default_str();
    train_cmd->add_option("--lambda-u", train.lambda_u, "Default 0.1 (cer), 0.01 (wmf), 0.0025 (bpr)");
    train_cmd->add_option("--lambda-v", train.lambda_v, "Default 10 (cer), 0.01 (wmf)");
    train_cmd->add_option("--lambda-e", train.lambda_e)->capture_default_str();
    train_cmd->add_option("--sweeps", train.sweeps)->capture_default_str();
    train_cmd->add_flag("--early-stop", train.early_stop, "Stop on relative decrease < 1e-6");
    train_cmd->add_option("--epochs", train.epochs, "BPR epochs")->capture_default_str();
    train_cmd->add_option("--learning-rate", train.learning_rate, "BPR step size")->capture_default_str();
    train_cmd->add_option("--lambda-i", train.lambda_i)->capture_default_str();
    train_cmd->add_option("--lambda-j", train.lambda_j)->capture_default_str();
    train_cmd->add_option("--lambda-b", train.lambda_b)->capture_default_str();
    train_cmd->add_option("--seed", train.seed)->capture_default_str();
    train_cmd->add_option("--threads", train.threads)->capture_default_str();
    train_cmd->add_option("--out", train.out, "Model file")->required();
    train_cmd->add_option("--log", train.log, "Objective log (default <out>.log)");

    ScoreArgs eval;
    auto* eval_cmd = app.add_subcommand("evaluate", "Accuracy@k of a trained model on one fold");
    ScoreArgs predict;
    auto* predict_cmd = app.add_subcommand("predict", "Write per-user candidate estimates for one fold");
    for (auto [cmd, args] : {std::pair{eval_cmd, &eval}, std::pair{predict_cmd, &predict}}) {
        cmd->add_option("--model", args->model)->required();
        cmd->add_option("--ratings", args->ratings)->required();
        cmd->add_option("--plan", args->plan)->required();
        cmd->add_option("--fold", args->fold)->capture_default_str();
        cmd->add_option("--scenario", args->scenario)->check(CLI::IsMember({"in", "out"}))->capture_default_str();
        cmd->add_option("--features", args->features);
        cmd->add_option("--threads", args->threads)->capture_default_str();
        cmd->add_option("--out", args->out)->required();
    }
    eval_cmd->add_option("--k-list", eval.k_list)->capture_default_str();

    FuseArgs fuse;
    auto* fuse_cmd = app.add_subcommand("fuse", "Late-fuse per-content estimates and evaluate");
    fuse_cmd->add_option("--estimates", fuse.estimates, "NAME=path, one per content")->required();
    fuse_cmd->add_option("--method", fuse.method)->check(CLI::IsMember({"avg", "geometric"}))->capture_default_str();
    fuse_cmd->add_option("--p", fuse.p)->capture_default_str();
    fuse_cmd->add_option("--validation-accuracies", fuse.validation, "CSV content,accuracy");
    fuse_cmd->add_option("--ratings", fuse.ratings)->required();
    fuse_cmd->add_option("--plan", fuse.plan)->required();
    fuse_cmd->add_option("--fold", fuse.fold)->capture_default_str();
    fuse_cmd->add_option("--scenario", fuse.scenario)->check(CLI::IsMember({"in", "out"}))->capture_default_str();
    fuse_cmd->add_option("--k-list", fuse.k_list)->capture_default_str();
    fuse_cmd->add_flag("--zscore", fuse.zscore, "Z-score each content's estimates per user");
    fuse_cmd->add_option("--spec-out", fuse.spec_out, "Write the fusion spec here");
    fuse_cmd->add_option("--out", fuse.out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kArgumentError;
    }

    try {
        if (*synth_cmd) run_synth(synth);
        else if (*split_cmd) run_split(split);
        else if (*train_cmd) run_train(train);
        else if (*eval_cmd) run_evaluate(eval);
        else if (*predict_cmd) run_predict(predict);
        else if (*fuse_cmd) run_fuse(fuse);
    } catch (const ParameterError& e) {
        std::cerr << "argument error: " << e.what() << '\n';
        return kArgumentError;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumericalError;
    } catch (const Error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDataError;
    }
    return kOk;
}
