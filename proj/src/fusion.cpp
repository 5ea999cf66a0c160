#include "cerec/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace cerec {

std::vector<double> geometric_weights(std::size_t count, double p) {
    if (count < 1) throw ParameterError("fusion needs at least one content");
    if (!(p >= 0.5 && p < 1.0)) {
        throw ParameterError("geometric fusion parameter p must lie in [0.5, 1), got " + std::to_string(p));
    }
    std::vector<double> weights(count);
    double w = p;
    for (std::size_t l = 0; l < count; ++l) {
        weights[l] = w;
        w *= 1.0 - p;
    }
    return weights;
}

std::vector<double> average_weights(std::size_t count) {
    if (count < 1) throw ParameterError("fusion needs at least one content");
    return std::vector<double>(count, 1.0 / static_cast<double>(count));
}

FusionSpec FusionSpec::make(std::vector<std::string> ordered_contents, FusionMethod method, double p) {
    FusionSpec spec;
    spec.weights = method == FusionMethod::Geometric ? geometric_weights(ordered_contents.size(), p)
                                                     : average_weights(ordered_contents.size());
    spec.ordered_contents = std::move(ordered_contents);
    spec.method = method;
    spec.p = p;
    return spec;
}

double fuse_ratings(std::span<const double> estimates, std::span<const double> weights) {
    if (estimates.size() != weights.size()) {
        throw ShapeError("fuse_ratings: " + std::to_string(estimates.size()) + " estimates vs " +
                         std::to_string(weights.size()) + " weights");
    }
    double fused = 0.0;
    for (std::size_t l = 0; l < estimates.size(); ++l) fused += weights[l] * estimates[l];
    return fused;
}

std::vector<std::string> rank_contents(const std::map<std::string, double>& accuracy) {
    std::vector<std::pair<std::string, double>> items(accuracy.begin(), accuracy.end());
    // std::map iterates in label order, so a stable sort keeps the tie-break.
    std::stable_sort(items.begin(), items.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> order;
    order.reserve(items.size());
    for (auto& item : items) order.push_back(std::move(item.first));
    return order;
}

void zscore_normalize(std::span<double> values) {
    if (values.empty()) return;
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / n);
    for (double& v : values) v = sd > 0 ? (v - mean) / sd : 0.0;
}

const char* to_string(FusionMethod method) {
    return method == FusionMethod::Geometric ? "geometric" : "avg";
}

FusionMethod parse_fusion_method(const std::string& text) {
    if (text == "geometric") return FusionMethod::Geometric;
    if (text == "avg" || text == "average") return FusionMethod::Average;
    throw ParameterError("unknown fusion method '" + text + "'");
}

namespace {

template <class T, class Fn>
void write_list(std::ostream& out, const std::vector<T>& items, Fn&& fn) {
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out << ',';
        fn(items[i]);
    }
}

std::vector<std::string> split_commas(const std::string& text) {
    std::vector<std::string> parts;
    if (text.empty()) return parts;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) parts.push_back(part);
    return parts;
}

}  // namespace

void write_fusion_spec(std::ostream& out, const FusionSpec& spec) {
    out << "method=" << to_string(spec.method) << '\n';
    out << "p=" << std::setprecision(17) << spec.p << '\n';
    out << "contents=";
    write_list(out, spec.ordered_contents, [&](const std::string& s) { out << s; });
    out << "\nweights=";
    write_list(out, spec.weights, [&](double w) { out << std::setprecision(17) << w; });
    out << '\n';
}

FusionSpec read_fusion_spec(std::istream& in) {
    FusionSpec spec;
    std::string line;
    std::size_t line_no = 0;
    bool have_contents = false, have_weights = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected key=value", line_no);
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        try {
            if (key == "method") {
                spec.method = parse_fusion_method(value);
            } else if (key == "p") {
                spec.p = std::stod(value);
            } else if (key == "contents") {
                spec.ordered_contents = split_commas(value);
                have_contents = true;
            } else if (key == "weights") {
                spec.weights.clear();
                for (const auto& w : split_commas(value)) spec.weights.push_back(std::stod(w));
                have_weights = true;
            } else {
                throw ParseError("unknown key '" + key + "'", line_no);
            }
        } catch (const std::logic_error&) {
            throw ParseError("bad value for '" + key + "'", line_no);
        } catch (const ParameterError& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    if (!have_contents || !have_weights) throw FormatError("fusion spec needs contents and weights");
    if (spec.ordered_contents.size() != spec.weights.size()) {
        throw FormatError("fusion spec lists " + std::to_string(spec.ordered_contents.size()) +
                          " contents but " + std::to_string(spec.weights.size()) + " weights");
    }
    return spec;
}

}  // namespace cerec
