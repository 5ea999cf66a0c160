#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <sstream>

#include "cerec/dataio.hpp"
#include "oracles.hpp"

using namespace cerec;

namespace {

std::string features_blob(const std::string& header, const std::vector<double>& values) {
    std::string out = header + "\n";
    for (double v : values) {
        char bytes[8];
        std::memcpy(bytes, &v, 8);  // host is little-endian
        out.append(bytes, 8);
    }
    return out;
}

template <class E, class F>
std::string error_text(F&& fn) {
    try {
        fn();
    } catch (const E& e) {
        return e.what();
    }
    ADD_FAILURE() << "expected exception";
    return {};
}

}  // namespace

TEST(Binarize, Threshold) {
    EXPECT_TRUE(binarize({"1", "2", 5.0}));
    EXPECT_FALSE(binarize({"1", "2", 4.5}));
    EXPECT_FALSE(binarize({"1", "2", 0.5}));
    EXPECT_TRUE(binarize({"1", "2", 4.0}, 4.0));
}

TEST(Ssr, Examples) {
    Vector v(4);
    v << 4.0, -4.0, 0.0, 2.25;
    const Vector s = ssr_normalize(v);
    EXPECT_EQ(s(0), 2.0);
    EXPECT_EQ(s(1), -2.0);
    EXPECT_EQ(s(2), 0.0);
    EXPECT_EQ(s(3), 1.5);
}

TEST(Ssr, AppliedOnce) {
    Matrix f(2, 2);
    f << 9.0, -1.0, 0.25, 16.0;
    ContentFeatures feats("X", f);
    apply_ssr(feats);
    EXPECT_TRUE(feats.ssr_applied);
    EXPECT_EQ(feats.vectors(0, 0), 3.0);
    EXPECT_EQ(feats.vectors(1, 1), 4.0);
    EXPECT_THROW(apply_ssr(feats), DataError);
}

TEST(Ratings, SmallFile) {
    std::istringstream in("1::10::5.0::111\n1::20::3.5::112\n2::10::4.0::113\n");
    const auto loaded = read_ratings(in);
    EXPECT_EQ(loaded.ratings.num_likes(), 1u);
    EXPECT_EQ(loaded.ratings.num_users(), 2);
    EXPECT_EQ(loaded.ratings.num_videos(), 2);
    EXPECT_TRUE(loaded.ratings.contains(loaded.users.lookup("1"), loaded.videos.lookup("10")));
    EXPECT_EQ(loaded.records, 3u);
}

TEST(Ratings, NumericKeysSortNumerically) {
    std::istringstream in("10::3::5.0\n9::25::5.0\n");
    const auto loaded = read_ratings(in);
    EXPECT_EQ(loaded.users.keys, (std::vector<std::string>{"9", "10"}));
    EXPECT_EQ(loaded.videos.keys, (std::vector<std::string>{"3", "25"}));
}

TEST(Ratings, ParseErrorsNameTheLine) {
    std::istringstream bad("1::10::5.0::1\n1::11::five::2\n");
    const auto msg = error_text<ParseError>([&] { read_ratings(bad); });
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;

    std::istringstream fields("1::10\n");
    EXPECT_THROW(read_ratings(fields), ParseError);

    std::istringstream dup("1::10::5.0::1\n2::10::1.0::1\n1::10::4.0::3\n");
    const auto dup_msg = error_text<DataError>([&] { read_ratings(dup); });
    EXPECT_NE(dup_msg.find("line 3"), std::string::npos) << dup_msg;
}

// Count of likes equals a plain text filter over the rating field.
TEST(Ratings, MovieLensSampleMatchesLineFilter) {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> half_stars(1, 10), user(1, 70000), video(1, 65000);
    std::set<std::pair<int, int>> used;
    std::ostringstream file;
    std::vector<std::string> lines;
    while (lines.size() < 1000) {
        const int u = user(rng), v = video(rng);
        if (!used.insert({u, v}).second) continue;
        char rating[8];
        std::snprintf(rating, sizeof rating, "%.1f", half_stars(rng) / 2.0);
        lines.push_back(std::to_string(u) + "::" + std::to_string(v) + "::" + rating + "::" +
                        std::to_string(1100000000 + lines.size()));
        file << lines.back() << "\r\n";
    }
    std::size_t fives = 0;
    for (const auto& line : lines) {
        const auto a = line.find("::");
        const auto b = line.find("::", a + 2);
        const auto c = line.find("::", b + 2);
        if (line.substr(b + 2, c - b - 2) == "5.0") ++fives;
    }
    std::istringstream in(file.str());
    const auto loaded = read_ratings(in);
    EXPECT_EQ(loaded.ratings.num_likes(), fives);
    EXPECT_EQ(loaded.records, 1000u);
}

TEST(Features, ReadsHeaderAndRows) {
    std::istringstream in(features_blob("TEST 2 3 0", {1, 2, 3, 4, 5, 6}));
    const auto f = read_features(in);
    EXPECT_EQ(f.name, "TEST");
    EXPECT_EQ(f.dim(), 3);
    EXPECT_EQ(f.num_videos(), 2);
    EXPECT_EQ(f.vectors(2, 0), 3.0);
    EXPECT_EQ(f.vectors(0, 1), 4.0);
    EXPECT_FALSE(f.ssr_applied);
}

TEST(Features, ShortRowIsShapeError) {
    std::istringstream in(features_blob("TEST 2 3 0", {1, 2, 3, 4, 5}));
    EXPECT_THROW(read_features(in), ShapeError);
}

TEST(Features, BadHeaderAndNan) {
    std::istringstream header(features_blob("TEST 2 three 0", {}));
    EXPECT_THROW(read_features(header), FormatError);
    std::istringstream nan(features_blob("TEST 1 2 0", {1.0, std::numeric_limits<double>::quiet_NaN()}));
    const auto msg = error_text<DataError>([&] { read_features(nan); });
    EXPECT_NE(msg.find("byte 19"), std::string::npos) << msg;  // 11-byte header + 8
}

TEST(Features, RoundTripIsBitwise) {
    std::mt19937_64 rng(4);
    const ContentFeatures f("MFCC", oracle::gaussian(7, 13, rng), true);
    std::stringstream buf;
    write_features(buf, f);
    const auto back = read_features(buf);
    EXPECT_EQ(back.name, "MFCC");
    EXPECT_TRUE(back.ssr_applied);
    EXPECT_EQ(std::memcmp(back.vectors.data(), f.vectors.data(), sizeof(double) * 7 * 13), 0);
}

TEST(Features, VideoCountMustMatch) {
    const auto dir = std::filesystem::temp_directory_path() / "cerec_features_test.bin";
    std::mt19937_64 rng(4);
    save_features(dir, ContentFeatures("IDT", oracle::gaussian(3, 5, rng)));
    EXPECT_NO_THROW(load_features(dir, 5));
    EXPECT_THROW(load_features(dir, 6), DataError);
    std::filesystem::remove(dir);
}

TEST(Synthetic, LikesPerUser) {
    const auto data = generate_synthetic(SyntheticSpec{});
    EXPECT_EQ(data.ratings.num_users(), 200);
    EXPECT_EQ(data.ratings.num_videos(), 100);
    EXPECT_EQ(data.features.dim(), 20);
    int inside = 0;
    for (Index u = 0; u < 200; ++u) {
        const auto count = data.ratings.videos_of(u).size();
        EXPECT_EQ(count, 10u);
        if (count >= 5 && count <= 15) ++inside;
    }
    EXPECT_GE(inside, 190);
    EXPECT_EQ(data.records.size(), 200u * 100u);
}

TEST(Synthetic, LikesFollowTrueScores) {
    SyntheticSpec spec;
    spec.noise_std = 0.0;
    const auto data = generate_synthetic(spec);
    const Matrix scores = data.truth.W.transpose() * data.truth.E.transpose() * data.features.vectors;
    for (Index u = 0; u < spec.m; ++u) {
        double worst_like = 1e300, best_other = -1e300;
        for (Index v = 0; v < spec.n; ++v) {
            if (data.ratings.contains(u, v)) worst_like = std::min(worst_like, scores(u, v));
            else best_other = std::max(best_other, scores(u, v));
        }
        EXPECT_GT(worst_like, best_other);
    }
}

TEST(Synthetic, Deterministic) {
    SyntheticSpec spec;
    spec.noise_std = 0.0;
    spec.seed = 17;
    const auto a = generate_synthetic(spec);
    const auto b = generate_synthetic(spec);
    EXPECT_EQ(std::vector<Like>(a.ratings.likes().begin(), a.ratings.likes().end()),
              std::vector<Like>(b.ratings.likes().begin(), b.ratings.likes().end()));
    EXPECT_EQ(a.features.vectors, b.features.vectors);
    EXPECT_EQ(a.truth.W, b.truth.W);
}

TEST(Synthetic, RejectsBadSpec) {
    SyntheticSpec spec;
    spec.m = 0;
    EXPECT_THROW(generate_synthetic(spec), ParameterError);
    spec = {};
    spec.like_quantile = 1.0;
    EXPECT_THROW(generate_synthetic(spec), ParameterError);
}

TEST(Models, CerRoundTripIsBitwise) {
    std::mt19937_64 rng(9);
    CerModel m;
    m.hyper.k = 4;
    m.hyper.lambda_e = 12.5;
    m.hyper.max_sweeps = 33;
    m.W = oracle::gaussian(4, 6, rng);
    m.H = oracle::gaussian(4, 9, rng);
    m.E = oracle::gaussian(3, 4, rng);
    std::stringstream buf;
    write_model(buf, m);
    const auto back = std::get<CerModel>(read_model(buf));
    EXPECT_EQ(back.W, m.W);
    EXPECT_EQ(back.H, m.H);
    EXPECT_EQ(back.E, m.E);
    EXPECT_EQ(back.hyper.lambda_e, 12.5);
    EXPECT_EQ(back.hyper.max_sweeps, 33u);
    EXPECT_EQ(back.hyper.conf_neg, m.hyper.conf_neg);
}

TEST(Models, WmfAndBprRoundTrip) {
    std::mt19937_64 rng(10);
    CerModel wmf;
    wmf.hyper = Hyperparams::wmf_defaults();
    wmf.hyper.k = 3;
    wmf.W = oracle::gaussian(3, 5, rng);
    wmf.H = oracle::gaussian(3, 4, rng);
    wmf.E = Matrix(0, 3);
    std::stringstream a;
    write_model(a, wmf);
    const auto wmf_back = std::get<CerModel>(read_model(a));
    EXPECT_FALSE(wmf_back.has_embedding());
    EXPECT_EQ(wmf_back.H, wmf.H);

    BprModel bpr = init_bpr(5, 7, BprHyper{.k = 3, .learning_rate = 0.2}, 1);
    bpr.biases = oracle::gaussian(7, 1, rng);
    std::stringstream b;
    write_model(b, bpr);
    const auto bpr_back = std::get<BprModel>(read_model(b));
    EXPECT_EQ(bpr_back.W, bpr.W);
    EXPECT_EQ(bpr_back.H, bpr.H);
    EXPECT_EQ(bpr_back.biases, bpr.biases);
    EXPECT_EQ(bpr_back.hyper.learning_rate, 0.2);
}

TEST(Models, CorruptFiles) {
    std::mt19937_64 rng(11);
    CerModel m;
    m.hyper.k = 2;
    m.W = oracle::gaussian(2, 3, rng);
    m.H = oracle::gaussian(2, 3, rng);
    m.E = oracle::gaussian(2, 2, rng);
    std::stringstream buf;
    write_model(buf, m);
    const std::string good = buf.str();

    std::string magic = good;
    magic[0] = 'X';
    std::istringstream bad_magic(magic);
    EXPECT_THROW(read_model(bad_magic), FormatError);

    std::string version = good;
    version[8] = 7;
    std::istringstream bad_version(version);
    EXPECT_THROW(read_model(bad_version), FormatError);

    for (std::size_t cut : {std::size_t{4}, std::size_t{20}, good.size() - 1}) {
        std::istringstream truncated(good.substr(0, cut));
        EXPECT_THROW(read_model(truncated), FormatError) << "cut " << cut;
    }
    std::istringstream trailing(good + "x");
    EXPECT_THROW(read_model(trailing), FormatError);
}

TEST(FoldPlanFile, RoundTrip) {
    std::mt19937_64 rng(12);
    const auto ratings = oracle::random_ratings(20, 30, 0.2, rng);
    const auto plan = make_fold_plan(ratings, 5, 3);
    std::stringstream buf;
    write_fold_plan(buf, plan, ratings);
    const auto back = read_fold_plan(buf, ratings);
    EXPECT_EQ(back.video_fold, plan.video_fold);
    EXPECT_EQ(back.labels, plan.labels);
    EXPECT_EQ(back.seed, plan.seed);

    const auto other = oracle::random_ratings(20, 30, 0.3, rng);
    std::stringstream again;
    write_fold_plan(again, plan, ratings);
    EXPECT_THROW(read_fold_plan(again, other), DataError);
}

TEST(Estimates, RoundTripAndLookup) {
    std::stringstream buf;
    write_estimates_header(buf);
    write_estimate(buf, 0, 3, 0.1);
    write_estimate(buf, 2, 1, -1.0 / 3.0);
    const auto table = read_estimates(buf, "WORD");
    EXPECT_EQ(table.values.size(), 2u);
    EXPECT_EQ(table.values.at(EstimateTable::key(2, 1)), -1.0 / 3.0);

    const auto scorer = estimate_scorer(table);
    const std::vector<Index> videos{3};
    std::vector<double> out(1);
    scorer(0, videos, out);
    EXPECT_EQ(out[0], 0.1);
    EXPECT_THROW(scorer(1, videos, out), DataError);
}

TEST(Accuracies, ReadsCsv) {
    std::istringstream in("content,accuracy\nWORD,0.3\nMFCC,0.1\n");
    const auto acc = read_accuracies(in);
    EXPECT_EQ(acc.at("WORD"), 0.3);
    EXPECT_EQ(acc.size(), 2u);
}
