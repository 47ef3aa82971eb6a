#pragma once

#include <optional>
#include <string>
#include <vector>

#include "svcap/numkit.hpp"

namespace svcap {

// Token sequences here never include the end-of-sentence marker.
using TokenSeq = std::vector<int>;
using RefSet = std::vector<TokenSeq>;

struct MetricReport {
    double bleu4 = 0.0;
    double rouge_l = 0.0;
    double cider = 0.0;
    std::optional<double> meteor;
    std::optional<double> overall;
};

struct MetricTops {
    double bleu4 = 0.0;
    double cider = 0.0;
    std::optional<double> meteor;
    double rouge_l = 0.0;
};

// Corpus-level BLEU with uniform weights over n=1..4, clipped n-gram counts
// and closest-length brevity penalty. Smoothing (add-one on n>=2 counts)
// is off by default.
double bleu4(const std::vector<TokenSeq>& candidates,
             const std::vector<RefSet>& references,
             bool smooth = false);

// Per-video max over references of the LCS F-measure (recall weight 1.2),
// averaged over videos.
double rouge_l(const std::vector<TokenSeq>& candidates,
               const std::vector<RefSet>& references,
               double beta_r = 1.2);

// TF-IDF n-gram consensus for n=1..4: cosine against each reference,
// averaged, mean over n, times 10; corpus value is the mean over videos.
// IDF comes from the reference corpus; needs at least two videos.
double cider(const std::vector<TokenSeq>& candidates,
             const std::vector<RefSet>& references);

// Mean over tags (with at least one positive) of average precision of the
// score-ranked samples. Ties keep the original sample order.
double mean_average_precision(const std::vector<Vector>& scores,
                              const std::vector<std::vector<int>>& truths);

// Mean of the per-metric ratios model/top over the metrics present in both
// the report and the tops. Tops must be strictly positive.
double overall_score(const MetricReport& model, const MetricTops& tops);

// Arithmetic mean caption length in tokens (EOS already excluded upstream).
double caption_length_stats(const std::vector<TokenSeq>& captions);

}  // namespace svcap
