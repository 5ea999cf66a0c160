#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cerec/core.hpp"

namespace cerec {

enum class FusionMethod { Average, Geometric };

/// Content types ordered best-first, with their late-fusion weights.
struct FusionSpec {
    std::vector<std::string> ordered_contents;
    FusionMethod method = FusionMethod::Geometric;
    double p = 0.5;
    std::vector<double> weights;

    /// Derives weights from method, p and the number of contents.
    static FusionSpec make(std::vector<std::string> ordered_contents, FusionMethod method, double p = 0.5);
};

/// w_l = p (1 - p)^(l - 1) for l = 1..L. Throws ParameterError unless
/// L >= 1 and 0.5 <= p < 1, the range for which each weight dominates the
/// sum of all weights after it.
std::vector<double> geometric_weights(std::size_t count, double p);

/// L copies of 1/L.
std::vector<double> average_weights(std::size_t count);

/// sum_l w_l r_l. Throws ShapeError on a length mismatch.
double fuse_ratings(std::span<const double> estimates, std::span<const double> weights);

/// Labels by validation accuracy, descending; equal accuracies fall back to
/// lexicographic order of the label.
std::vector<std::string> rank_contents(const std::map<std::string, double>& accuracy);

/// In-place z-score over all entries; a constant input maps to zeros.
void zscore_normalize(std::span<double> values);

/// Plain-text key=value form; doubles are written with 17 significant digits.
void write_fusion_spec(std::ostream& out, const FusionSpec& spec);
FusionSpec read_fusion_spec(std::istream& in);

const char* to_string(FusionMethod method);
FusionMethod parse_fusion_method(const std::string& text);

}  // namespace cerec
