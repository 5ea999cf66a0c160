#include "cerec/dataio.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_set>

namespace cerec {

bool binarize(const RawRatingRecord& record, double threshold) noexcept {
    return record.value >= threshold;
}

Vector ssr_normalize(const Vector& v) {
    return v.unaryExpr([](double x) { return std::copysign(std::sqrt(std::abs(x)), x); });
}

void apply_ssr(ContentFeatures& features) {
    if (features.ssr_applied) {
        throw DataError("features '" + features.name + "' are already SSR-normalised");
    }
    features.vectors = features.vectors.unaryExpr([](double x) { return std::copysign(std::sqrt(std::abs(x)), x); });
    features.ssr_applied = true;
}

// ---------------------------------------------------------------------------
// Ratings

namespace {

bool parse_double(std::string_view text, double& out) {
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc() && ptr == end;
}

bool parse_integer(std::string_view text, long long& out) {
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc() && ptr == end;
}

std::vector<std::string_view> split(std::string_view line, std::string_view sep) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + sep.size();
    }
}

IdMap build_id_map(std::vector<std::string> first_seen, IdPolicy policy) {
    IdMap map;
    if (policy == IdPolicy::Sorted) {
        std::vector<long long> numeric(first_seen.size());
        bool all_numeric = true;
        for (std::size_t i = 0; i < first_seen.size() && all_numeric; ++i) {
            all_numeric = parse_integer(first_seen[i], numeric[i]);
        }
        std::vector<std::size_t> order(first_seen.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        if (all_numeric) {
            std::sort(order.begin(), order.end(), [&](auto a, auto b) { return numeric[a] < numeric[b]; });
        } else {
            std::sort(order.begin(), order.end(), [&](auto a, auto b) { return first_seen[a] < first_seen[b]; });
        }
        for (auto i : order) map.keys.push_back(std::move(first_seen[i]));
    } else {
        map.keys = std::move(first_seen);
    }
    for (std::size_t i = 0; i < map.keys.size(); ++i) map.index.emplace(map.keys[i], static_cast<Index>(i));
    return map;
}

std::string trim_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

}  // namespace

Index IdMap::lookup(const std::string& key) const {
    auto it = index.find(key);
    if (it == index.end()) throw DataError("unknown key '" + key + "'");
    return it->second;
}

LoadedRatings read_ratings(std::istream& in, IdPolicy policy, double threshold) {
    struct Parsed {
        std::size_t user, video, line;
        bool liked;
    };
    std::vector<Parsed> parsed;
    std::unordered_map<std::string, std::size_t> user_slot, video_slot;
    std::vector<std::string> user_keys, video_keys;

    auto slot = [](std::unordered_map<std::string, std::size_t>& slots, std::vector<std::string>& keys,
                   std::string_view key) {
        auto [it, inserted] = slots.try_emplace(std::string(key), keys.size());
        if (inserted) keys.emplace_back(key);
        return it->second;
    };

    std::string line;
    std::size_t line_no = 0;
    std::size_t records = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim_cr(std::move(line));
        if (line.empty()) continue;
        const auto fields = split(line, "::");
        if (fields.size() != 3 && fields.size() != 4) {
            throw ParseError("expected user::video::rating::timestamp, found " + std::to_string(fields.size()) +
                                 " fields",
                             line_no);
        }
        if (fields[0].empty() || fields[1].empty()) throw ParseError("empty user or video key", line_no);
        RawRatingRecord record{std::string(fields[0]), std::string(fields[1]), 0.0};
        if (!parse_double(fields[2], record.value) || !std::isfinite(record.value)) {
            throw ParseError("rating '" + std::string(fields[2]) + "' is not a number", line_no);
        }
        parsed.push_back({slot(user_slot, user_keys, fields[0]), slot(video_slot, video_keys, fields[1]), line_no,
                          binarize(record, threshold)});
        ++records;
    }

    LoadedRatings out;
    out.records = records;
    out.users = build_id_map(user_keys, policy);
    out.videos = build_id_map(video_keys, policy);
    std::vector<Index> user_of_slot(user_keys.size()), video_of_slot(video_keys.size());
    for (std::size_t s = 0; s < user_keys.size(); ++s) user_of_slot[s] = out.users.index.at(user_keys[s]);
    for (std::size_t s = 0; s < video_keys.size(); ++s) video_of_slot[s] = out.videos.index.at(video_keys[s]);

    std::unordered_set<std::uint64_t> seen;
    seen.reserve(parsed.size());
    std::vector<Like> likes;
    for (const auto& p : parsed) {
        const Index u = user_of_slot[p.user];
        const Index v = video_of_slot[p.video];
        if (!seen.insert(EstimateTable::key(u, v)).second) {
            throw DataError("duplicate rating for user '" + user_keys[p.user] + "' and video '" +
                            video_keys[p.video] + "' (line " + std::to_string(p.line) + ")");
        }
        if (p.liked) likes.push_back({u, v});
    }
    out.ratings = RatingMatrix(out.users.size(), out.videos.size(), std::move(likes));
    return out;
}

LoadedRatings load_ratings(const std::filesystem::path& path, IdPolicy policy, double threshold) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open ratings file " + path.string());
    return read_ratings(in, policy, threshold);
}

void write_rating_records(std::ostream& out, const std::vector<RawRatingRecord>& records) {
    for (const auto& r : records) {
        out << r.user_key << "::" << r.video_key << "::" << std::fixed << std::setprecision(1) << r.value << "::0\n";
    }
    out << std::defaultfloat;
}

// ---------------------------------------------------------------------------
// Little-endian binary helpers

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
    char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((v >> (8 * b)) & 0xff);
    out.write(bytes, 8);
}

void put_u32(std::ostream& out, std::uint32_t v) {
    char bytes[4];
    for (int b = 0; b < 4; ++b) bytes[b] = static_cast<char>((v >> (8 * b)) & 0xff);
    out.write(bytes, 4);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_block(std::ostream& out, const Matrix& m) {
    // Column-major, matching Eigen's storage.
    for (Index i = 0; i < m.size(); ++i) put_f64(out, m.data()[i]);
}

class ByteReader {
public:
    ByteReader(std::string bytes, std::size_t offset = 0) : bytes_(std::move(bytes)), pos_(offset) {}

    std::size_t position() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

    void need(std::size_t count, const char* what) const {
        if (remaining() < count) {
            throw FormatError(std::string("truncated file: ") + what + " needs " + std::to_string(count) +
                              " bytes at byte " + std::to_string(pos_) + ", " + std::to_string(remaining()) +
                              " left");
        }
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
        pos_ += 8;
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
        pos_ += 4;
        return v;
    }
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
    std::string raw(std::size_t count, const char* what) {
        need(count, what);
        std::string s = bytes_.substr(pos_, count);
        pos_ += count;
        return s;
    }
    Matrix block(Index rows, Index cols, const char* what) {
        const auto r = static_cast<std::size_t>(rows), c = static_cast<std::size_t>(cols);
        if (r != 0 && c > remaining() / 8 / r) {
            throw FormatError(std::string("truncated file: ") + what + " block at byte " + std::to_string(pos_) +
                              " exceeds the " + std::to_string(remaining()) + " bytes left");
        }
        const std::size_t count = r * c;
        Matrix m(rows, cols);
        for (std::size_t i = 0; i < count; ++i) m.data()[i] = f64(what);
        return m;
    }

private:
    std::string bytes_;
    std::size_t pos_;
};

std::string slurp(std::istream& in) {
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Index checked_dim(std::uint64_t v, const char* what) {
    if (v > (std::uint64_t{1} << 40)) throw FormatError(std::string("implausible ") + what + " " + std::to_string(v));
    return static_cast<Index>(v);
}

}  // namespace

// ---------------------------------------------------------------------------
// Features

ContentFeatures read_features(std::istream& in) {
    std::string data = slurp(in);
    const auto newline = data.find('\n');
    if (newline == std::string::npos) throw FormatError("feature file has no header line");
    std::istringstream header(data.substr(0, newline));
    std::string name, n_text, d_text, ssr_text, extra;
    if (!(header >> name >> n_text >> d_text >> ssr_text) || (header >> extra)) {
        throw FormatError("feature header must be 'name n d ssr_applied' (byte 0)");
    }
    long long n = 0, d = 0, ssr = 0;
    if (!parse_integer(n_text, n) || !parse_integer(d_text, d) || !parse_integer(ssr_text, ssr) || n < 0 || d < 0 ||
        (ssr != 0 && ssr != 1)) {
        throw FormatError("bad feature header '" + data.substr(0, newline) + "'");
    }
    ByteReader reader(std::move(data), newline + 1);
    const auto expected = static_cast<std::size_t>(n) * static_cast<std::size_t>(d) * 8;
    if (reader.remaining() != expected) {
        throw ShapeError("feature block at byte " + std::to_string(reader.position()) + " holds " +
                          std::to_string(reader.remaining()) + " bytes, header implies " + std::to_string(expected));
    }
    Matrix f(d, n);
    for (long long j = 0; j < n; ++j) {
        for (long long c = 0; c < d; ++c) {
            const std::size_t at = reader.position();
            const double v = reader.f64("feature value");
            if (!std::isfinite(v)) {
                throw DataError("non-finite feature value for video " + std::to_string(j) + ", component " +
                                std::to_string(c) + " (byte " + std::to_string(at) + ")");
            }
            f(c, j) = v;
        }
    }
    return ContentFeatures(name, std::move(f), ssr == 1);
}

ContentFeatures load_features(const std::filesystem::path& path, Index expected_videos) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open feature file " + path.string());
    ContentFeatures f = read_features(in);
    if (expected_videos >= 0 && f.num_videos() != expected_videos) {
        throw DataError("feature file " + path.string() + " covers " + std::to_string(f.num_videos()) +
                        " videos, ratings have " + std::to_string(expected_videos));
    }
    return f;
}

void write_features(std::ostream& out, const ContentFeatures& features) {
    if (features.name.empty() || features.name.find_first_of(" \t\n\r") != std::string::npos) {
        throw ParameterError("content name '" + features.name + "' must be non-empty without whitespace");
    }
    out << features.name << ' ' << features.num_videos() << ' ' << features.dim() << ' '
        << (features.ssr_applied ? 1 : 0) << '\n';
    for (Index j = 0; j < features.num_videos(); ++j)
        for (Index c = 0; c < features.dim(); ++c) put_f64(out, features.vectors(c, j));
}

void save_features(const std::filesystem::path& path, const ContentFeatures& features) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write feature file " + path.string());
    write_features(out, features);
}

// ---------------------------------------------------------------------------
// Models

namespace {
constexpr char kCerMagic[] = "CERMODEL";
constexpr char kBprMagic[] = "BPRMODEL";
}  // namespace

void write_model(std::ostream& out, const CerModel& model) {
    model.check_shape();
    out.write(kCerMagic, 8);
    put_u32(out, kModelFormatVersion);
    put_u64(out, static_cast<std::uint64_t>(model.num_users()));
    put_u64(out, static_cast<std::uint64_t>(model.num_videos()));
    put_u64(out, static_cast<std::uint64_t>(model.dim()));
    put_u64(out, static_cast<std::uint64_t>(model.rank()));
    const Hyperparams& h = model.hyper;
    put_u64(out, static_cast<std::uint64_t>(h.k));
    put_f64(out, h.lambda_u);
    put_f64(out, h.lambda_v);
    put_f64(out, h.lambda_e);
    put_f64(out, h.conf_pos);
    put_f64(out, h.conf_neg);
    put_u64(out, h.max_sweeps);
    put_block(out, model.W);
    put_block(out, model.H);
    put_block(out, model.E);
}

void write_model(std::ostream& out, const BprModel& model) {
    out.write(kBprMagic, 8);
    put_u32(out, kModelFormatVersion);
    put_u64(out, static_cast<std::uint64_t>(model.num_users()));
    put_u64(out, static_cast<std::uint64_t>(model.num_videos()));
    put_u64(out, static_cast<std::uint64_t>(model.W.rows()));
    const BprHyper& h = model.hyper;
    put_u64(out, static_cast<std::uint64_t>(h.k));
    put_f64(out, h.lambda_u);
    put_f64(out, h.lambda_i);
    put_f64(out, h.lambda_j);
    put_f64(out, h.lambda_b);
    put_f64(out, h.learning_rate);
    put_u64(out, h.epochs);
    put_block(out, model.W);
    put_block(out, model.H);
    put_block(out, model.biases);
}

TrainedModel read_model(std::istream& in) {
    ByteReader r(slurp(in));
    const std::string magic = r.raw(8, "magic");
    if (magic != kCerMagic && magic != kBprMagic) throw FormatError("not a model file: bad magic at byte 0");
    const std::uint32_t version = r.u32("version");
    if (version != kModelFormatVersion) {
        throw FormatError("model format version " + std::to_string(version) + " unsupported (expected " +
                          std::to_string(kModelFormatVersion) + ")");
    }
    const Index m = checked_dim(r.u64("user count"), "user count");
    const Index n = checked_dim(r.u64("video count"), "video count");

    TrainedModel result;
    if (magic == kCerMagic) {
        const Index d = checked_dim(r.u64("dimension"), "dimension");
        const Index k = checked_dim(r.u64("rank"), "rank");
        CerModel model;
        model.hyper.k = checked_dim(r.u64("k"), "k");
        model.hyper.lambda_u = r.f64("lambda_u");
        model.hyper.lambda_v = r.f64("lambda_v");
        model.hyper.lambda_e = r.f64("lambda_e");
        model.hyper.conf_pos = r.f64("conf_pos");
        model.hyper.conf_neg = r.f64("conf_neg");
        model.hyper.max_sweeps = r.u64("max_sweeps");
        model.W = r.block(k, m, "W");
        model.H = r.block(k, n, "H");
        model.E = r.block(d, k, "E");
        result = std::move(model);
    } else {
        const Index k = checked_dim(r.u64("rank"), "rank");
        BprModel model;
        model.hyper.k = checked_dim(r.u64("k"), "k");
        model.hyper.lambda_u = r.f64("lambda_u");
        model.hyper.lambda_i = r.f64("lambda_i");
        model.hyper.lambda_j = r.f64("lambda_j");
        model.hyper.lambda_b = r.f64("lambda_b");
        model.hyper.learning_rate = r.f64("learning_rate");
        model.hyper.epochs = r.u64("epochs");
        model.W = r.block(k, m, "W");
        model.H = r.block(k, n, "H");
        model.biases = r.block(n, 1, "biases");
        result = std::move(model);
    }
    if (r.remaining() != 0) {
        throw FormatError(std::to_string(r.remaining()) + " trailing bytes after model at byte " +
                          std::to_string(r.position()));
    }
    return result;
}

void save_model(const std::filesystem::path& path, const TrainedModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model file " + path.string());
    std::visit([&](const auto& m) { write_model(out, m); }, model);
}

TrainedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file " + path.string());
    return read_model(in);
}

// ---------------------------------------------------------------------------
// Fold plans

namespace {
constexpr const char* kPlanMagic = "cerec-foldplan";

char label_char(Label l) {
    switch (l) {
        case Label::Train: return 'T';
        case Label::InTest: return 'I';
        case Label::OutTest: return 'O';
    }
    return '?';
}
}  // namespace

void write_fold_plan(std::ostream& out, const FoldPlan& plan, const RatingMatrix& ratings) {
    plan.check_matches(ratings);
    out << kPlanMagic << " 1\n";
    out << "folds " << plan.num_folds << '\n';
    out << "seed " << plan.seed << '\n';
    out << "users " << plan.num_users << '\n';
    out << "videos " << plan.num_videos << '\n';
    out << "likes " << plan.num_likes() << '\n';
    for (std::size_t j = 0; j < plan.video_fold.size(); ++j) out << "v " << j << ' ' << plan.video_fold[j] << '\n';
    const auto likes = ratings.likes();
    for (std::size_t e = 0; e < likes.size(); ++e) {
        out << "l " << likes[e].user << ' ' << likes[e].video << ' ';
        for (std::size_t c = 0; c < plan.num_folds; ++c) out << label_char(plan.labels[c][e]);
        out << '\n';
    }
}

FoldPlan read_fold_plan(std::istream& in, const RatingMatrix& ratings) {
    std::string line;
    std::size_t line_no = 0;
    auto next = [&](const char* what) {
        while (std::getline(in, line)) {
            ++line_no;
            line = trim_cr(std::move(line));
            if (!line.empty()) return;
        }
        throw ParseError(std::string("unexpected end of plan, expected ") + what, line_no + 1);
    };
    auto header_value = [&](const std::string& key) -> long long {
        next(key.c_str());
        std::istringstream ss(line);
        std::string k;
        long long v = 0;
        if (!(ss >> k >> v) || k != key || v < 0) throw ParseError("expected '" + key + " <count>'", line_no);
        return v;
    };

    next("header");
    if (line != std::string(kPlanMagic) + " 1") throw ParseError("not a fold plan (bad header)", line_no);
    FoldPlan plan;
    plan.num_folds = static_cast<std::size_t>(header_value("folds"));
    plan.seed = static_cast<std::uint64_t>(header_value("seed"));
    plan.num_users = header_value("users");
    plan.num_videos = header_value("videos");
    const auto num_likes = static_cast<std::size_t>(header_value("likes"));
    if (plan.num_folds < 2) throw ParseError("a plan needs at least 2 folds", line_no);
    if (plan.num_users != ratings.num_users() || plan.num_videos != ratings.num_videos() ||
        num_likes != ratings.num_likes()) {
        throw DataError("fold plan was built for a different ratings file");
    }

    plan.video_fold.assign(static_cast<std::size_t>(plan.num_videos), 0);
    for (Index j = 0; j < plan.num_videos; ++j) {
        next("video fold line");
        std::istringstream ss(line);
        std::string tag;
        long long video = -1, fold = -1;
        if (!(ss >> tag >> video >> fold) || tag != "v" || video != j || fold < 0 ||
            static_cast<std::size_t>(fold) >= plan.num_folds) {
            throw ParseError("expected 'v " + std::to_string(j) + " <fold>'", line_no);
        }
        plan.video_fold[static_cast<std::size_t>(j)] = static_cast<std::size_t>(fold);
    }
    plan.labels.assign(plan.num_folds, std::vector<Label>(num_likes));
    const auto likes = ratings.likes();
    for (std::size_t e = 0; e < num_likes; ++e) {
        next("like line");
        std::istringstream ss(line);
        std::string tag, codes;
        long long user = -1, video = -1;
        if (!(ss >> tag >> user >> video >> codes) || tag != "l" || codes.size() != plan.num_folds) {
            throw ParseError("expected 'l <user> <video> <labels>'", line_no);
        }
        if (user != likes[e].user || video != likes[e].video) {
            throw DataError("plan like (" + std::to_string(user) + ", " + std::to_string(video) +
                            ") does not match the ratings (line " + std::to_string(line_no) + ")");
        }
        for (std::size_t c = 0; c < plan.num_folds; ++c) {
            switch (codes[c]) {
                case 'T': plan.labels[c][e] = Label::Train; break;
                case 'I': plan.labels[c][e] = Label::InTest; break;
                case 'O': plan.labels[c][e] = Label::OutTest; break;
                default: throw ParseError("unknown label '" + std::string(1, codes[c]) + "'", line_no);
            }
        }
    }
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim_cr(line).empty()) throw ParseError("trailing content after plan", line_no);
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Estimates and accuracies

void write_estimates_header(std::ostream& out) { out << "user,video,estimate\n"; }

void write_estimate(std::ostream& out, Index user, Index video, double estimate) {
    out << user << ',' << video << ',' << std::setprecision(17) << estimate << '\n';
}

EstimateTable read_estimates(std::istream& in, std::string content) {
    EstimateTable table;
    table.content = std::move(content);
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line) || trim_cr(line) != "user,video,estimate") {
        throw ParseError("estimates must start with 'user,video,estimate'", 1);
    }
    ++line_no;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim_cr(std::move(line));
        if (line.empty()) continue;
        const auto fields = split(line, ",");
        long long user = 0, video = 0;
        double value = 0;
        if (fields.size() != 3 || !parse_integer(fields[0], user) || !parse_integer(fields[1], video) ||
            !parse_double(fields[2], value) || user < 0 || video < 0 || !std::isfinite(value)) {
            throw ParseError("expected '<user>,<video>,<estimate>'", line_no);
        }
        if (!table.values.emplace(EstimateTable::key(user, video), value).second) {
            throw DataError("duplicate estimate for (" + std::to_string(user) + ", " + std::to_string(video) +
                            ") (line " + std::to_string(line_no) + ")");
        }
    }
    return table;
}

BatchScorer estimate_scorer(EstimateTable table) {
    return [table = std::move(table)](Index user, std::span<const Index> videos, std::span<double> scores) {
        for (std::size_t t = 0; t < videos.size(); ++t) {
            auto it = table.values.find(EstimateTable::key(user, videos[t]));
            if (it == table.values.end()) {
                throw DataError("estimates '" + table.content + "' lack (" + std::to_string(user) + ", " +
                                std::to_string(videos[t]) + ")");
            }
            scores[t] = it->second;
        }
    };
}

std::map<std::string, double> read_accuracies(std::istream& in) {
    std::map<std::string, double> acc;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim_cr(std::move(line));
        if (line.empty() || (line_no == 1 && line == "content,accuracy")) continue;
        const auto fields = split(line, ",");
        double value = 0;
        if (fields.size() != 2 || fields[0].empty() || !parse_double(fields[1], value)) {
            throw ParseError("expected '<content>,<accuracy>'", line_no);
        }
        if (!acc.emplace(std::string(fields[0]), value).second) {
            throw ParseError("content '" + std::string(fields[0]) + "' listed twice", line_no);
        }
    }
    if (acc.empty()) throw DataError("no validation accuracies given");
    return acc;
}

// ---------------------------------------------------------------------------
// Synthetic data

void SyntheticSpec::validate() const {
    if (m < 1 || n < 1 || d < 1 || k_true < 1) throw ParameterError("synthetic counts must be >= 1");
    if (!(noise_std >= 0) || !std::isfinite(noise_std)) throw ParameterError("noise_std must be finite and >= 0");
    if (!(like_quantile > 0 && like_quantile < 1)) throw ParameterError("like_quantile must lie in (0, 1)");
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto draw = [&](Index rows, Index cols, double scale) {
        Matrix out(rows, cols);
        for (Index c = 0; c < cols; ++c)
            for (Index r = 0; r < rows; ++r) out(r, c) = scale * normal(rng);
        return out;
    };

    SyntheticData data;
    data.truth.W = draw(spec.k_true, spec.m, 1.0);
    data.truth.E = draw(spec.d, spec.k_true, 1.0 / std::sqrt(static_cast<double>(spec.d)));
    Matrix f = draw(spec.d, spec.n, 1.0);
    data.truth.H = data.truth.E.transpose() * f;
    data.truth.hyper.k = spec.k_true;
    data.features = ContentFeatures("SYNTH", std::move(f));

    Matrix scores = data.truth.W.transpose() * data.truth.H;  // m x n
    if (spec.noise_std > 0) scores += draw(spec.m, spec.n, spec.noise_std);

    const auto likes_per_user = static_cast<std::size_t>(
        spec.n - std::min<Index>(spec.n, std::llround(spec.like_quantile * static_cast<double>(spec.n))));
    const auto n = static_cast<std::size_t>(spec.n);
    std::vector<Like> likes;
    data.records.reserve(static_cast<std::size_t>(spec.m) * n);
    std::vector<Index> order(n);
    std::vector<double> stars(n);
    for (Index i = 0; i < spec.m; ++i) {
        std::iota(order.begin(), order.end(), Index{0});
        std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(i, a) > scores(i, b); });
        const std::size_t rest = n - likes_per_user;
        for (std::size_t r = 0; r < n; ++r) {
            const auto j = static_cast<std::size_t>(order[r]);
            if (r < likes_per_user) {
                stars[j] = 5.0;
                likes.push_back({i, order[r]});
            } else {
                // Remaining videos get 4.5 down to 0.5 by rank.
                const std::size_t below = r - likes_per_user;
                stars[j] = 4.5 - 0.5 * static_cast<double>((9 * below) / std::max<std::size_t>(rest, 1));
            }
        }
        for (std::size_t j = 0; j < n; ++j) {
            data.records.push_back({std::to_string(i), std::to_string(j), stars[j]});
        }
    }
    data.ratings = RatingMatrix(spec.m, spec.n, std::move(likes));
    return data;
}

}  // namespace cerec
