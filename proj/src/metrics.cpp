#include "svcap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace svcap {

namespace {

using Ngram = std::vector<int>;

std::map<Ngram, int> ngram_counts(const TokenSeq& s, int n) {
    std::map<Ngram, int> counts;
    if (static_cast<int>(s.size()) < n) return counts;
    for (size_t i = 0; i + n <= s.size(); ++i) {
        Ngram g(s.begin() + i, s.begin() + i + n);
        ++counts[g];
    }
    return counts;
}

void check_corpus(const std::vector<TokenSeq>& candidates,
                  const std::vector<RefSet>& references, const char* who) {
    if (candidates.empty()) throw std::invalid_argument(std::string(who) + ": empty candidate set");
    if (candidates.size() != references.size())
        throw std::invalid_argument(std::string(who) + ": candidate/reference count mismatch");
    for (const auto& refs : references)
        if (refs.empty()) throw std::invalid_argument(std::string(who) + ": candidate without references");
}

size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
    const size_t n = a.size(), m = b.size();
    if (n == 0 || m == 0) return 0;
    std::vector<size_t> prev(m + 1, 0), cur(m + 1, 0);
    for (size_t i = 1; i <= n; ++i) {
        for (size_t j = 1; j <= m; ++j) {
            if (a[i - 1] == b[j - 1])
                cur[j] = prev[j - 1] + 1;
            else
                cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

}  // namespace

double bleu4(const std::vector<TokenSeq>& candidates,
             const std::vector<RefSet>& references, bool smooth) {
    check_corpus(candidates, references, "bleu4");
    constexpr int kMaxN = 4;
    double match[kMaxN] = {0, 0, 0, 0};
    double total[kMaxN] = {0, 0, 0, 0};
    double cand_len = 0.0, ref_len = 0.0;

    for (size_t i = 0; i < candidates.size(); ++i) {
        const TokenSeq& cand = candidates[i];
        const RefSet& refs = references[i];
        cand_len += static_cast<double>(cand.size());

        // closest reference length; ties prefer the shorter one
        size_t best_ref = refs[0].size();
        for (const auto& r : refs) {
            const auto d = [&](size_t L) {
                return L > cand.size() ? L - cand.size() : cand.size() - L;
            };
            if (d(r.size()) < d(best_ref) || (d(r.size()) == d(best_ref) && r.size() < best_ref))
                best_ref = r.size();
        }
        ref_len += static_cast<double>(best_ref);

        for (int n = 1; n <= kMaxN; ++n) {
            auto cand_counts = ngram_counts(cand, n);
            std::map<Ngram, int> max_ref;
            for (const auto& r : refs)
                for (const auto& [g, c] : ngram_counts(r, n))
                    max_ref[g] = std::max(max_ref[g], c);
            for (const auto& [g, c] : cand_counts) {
                auto it = max_ref.find(g);
                match[n - 1] += std::min(c, it == max_ref.end() ? 0 : it->second);
            }
            if (cand.size() + 1 > static_cast<size_t>(n))
                total[n - 1] += static_cast<double>(cand.size() - n + 1);
        }
    }

    if (cand_len == 0.0) return 0.0;
    double log_prec = 0.0;
    for (int n = 0; n < kMaxN; ++n) {
        double num = match[n], den = total[n];
        if (smooth && n >= 1) {
            num += 1.0;
            den += 1.0;
        }
        if (num == 0.0 || den == 0.0) return 0.0;
        log_prec += 0.25 * std::log(num / den);
    }
    const double bp = cand_len >= ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
    return bp * std::exp(log_prec);
}

double rouge_l(const std::vector<TokenSeq>& candidates,
               const std::vector<RefSet>& references, double beta_r) {
    check_corpus(candidates, references, "rouge_l");
    const double b2 = beta_r * beta_r;
    double sum = 0.0;
    for (size_t i = 0; i < candidates.size(); ++i) {
        const TokenSeq& cand = candidates[i];
        double best = 0.0;
        for (const auto& ref : references[i]) {
            const size_t lcs = lcs_length(cand, ref);
            if (lcs == 0 || cand.empty() || ref.empty()) continue;
            const double p = static_cast<double>(lcs) / cand.size();
            const double r = static_cast<double>(lcs) / ref.size();
            const double f = (1.0 + b2) * r * p / (r + b2 * p);
            best = std::max(best, f);
        }
        sum += best;
    }
    return sum / static_cast<double>(candidates.size());
}

double cider(const std::vector<TokenSeq>& candidates,
             const std::vector<RefSet>& references) {
    check_corpus(candidates, references, "cider");
    const size_t num_videos = candidates.size();
    if (num_videos < 2) throw std::invalid_argument("cider: needs at least 2 videos for IDF");
    constexpr int kMaxN = 4;

    // document frequency over reference sets, per n-gram order
    std::map<Ngram, double> doc_freq[kMaxN];
    for (const auto& refs : references) {
        std::map<Ngram, int> seen[kMaxN];
        for (const auto& r : refs)
            for (int n = 1; n <= kMaxN; ++n)
                for (const auto& [g, c] : ngram_counts(r, n)) seen[n - 1][g] = 1;
        for (int n = 0; n < kMaxN; ++n)
            for (const auto& [g, one] : seen[n]) doc_freq[n][g] += 1.0;
    }
    const double log_corpus = std::log(static_cast<double>(num_videos));

    auto tfidf = [&](const TokenSeq& s, int n) {
        std::map<Ngram, double> vec;
        for (const auto& [g, c] : ngram_counts(s, n + 1)) {
            auto it = doc_freq[n].find(g);
            const double df = it == doc_freq[n].end() ? 1.0 : it->second;
            vec[g] = static_cast<double>(c) * (log_corpus - std::log(df));
        }
        return vec;
    };
    auto cosine = [](const std::map<Ngram, double>& u, const std::map<Ngram, double>& v) {
        double uu = 0.0, vv = 0.0, uv = 0.0;
        for (const auto& [g, x] : u) {
            uu += x * x;
            auto it = v.find(g);
            if (it != v.end()) uv += x * it->second;
        }
        for (const auto& [g, x] : v) vv += x * x;
        if (uu == 0.0 || vv == 0.0) return 0.0;
        return uv / (std::sqrt(uu) * std::sqrt(vv));
    };

    double corpus_sum = 0.0;
    for (size_t i = 0; i < num_videos; ++i) {
        double video_score = 0.0;
        for (int n = 0; n < kMaxN; ++n) {
            const auto cand_vec = tfidf(candidates[i], n);
            double ref_avg = 0.0;
            for (const auto& r : references[i]) ref_avg += cosine(cand_vec, tfidf(r, n));
            ref_avg /= static_cast<double>(references[i].size());
            video_score += ref_avg;
        }
        corpus_sum += video_score / kMaxN;
    }
    return 10.0 * corpus_sum / static_cast<double>(num_videos);
}

double mean_average_precision(const std::vector<Vector>& scores,
                              const std::vector<std::vector<int>>& truths) {
    if (scores.empty() || scores.size() != truths.size())
        throw std::invalid_argument("mean_average_precision: empty or mismatched inputs");
    const size_t num_tags = scores[0].size();
    for (size_t i = 0; i < scores.size(); ++i)
        if (scores[i].size() != num_tags || truths[i].size() != num_tags)
            throw std::invalid_argument("mean_average_precision: inconsistent tag dimension");

    double ap_sum = 0.0;
    size_t tags_with_pos = 0;
    std::vector<size_t> order(scores.size());
    for (size_t j = 0; j < num_tags; ++j) {
        std::iota(order.begin(), order.end(), size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            return scores[a][j] > scores[b][j];
        });
        size_t positives = 0;
        double ap = 0.0;
        for (size_t rank = 0; rank < order.size(); ++rank) {
            if (truths[order[rank]][j]) {
                ++positives;
                ap += static_cast<double>(positives) / static_cast<double>(rank + 1);
            }
        }
        if (positives > 0) {
            ap_sum += ap / static_cast<double>(positives);
            ++tags_with_pos;
        }
    }
    if (tags_with_pos == 0)
        throw std::invalid_argument("mean_average_precision: no tag has a positive sample");
    return ap_sum / static_cast<double>(tags_with_pos);
}

double overall_score(const MetricReport& model, const MetricTops& tops) {
    double sum = 0.0;
    int count = 0;
    auto ratio = [&](double value, double top, const char* name) {
        if (top <= 0.0)
            throw std::invalid_argument(std::string("overall_score: non-positive top for ") + name);
        if (value < 0.0)
            throw std::invalid_argument(std::string("overall_score: negative value for ") + name);
        sum += value / top;
        ++count;
    };
    ratio(model.bleu4, tops.bleu4, "bleu4");
    ratio(model.cider, tops.cider, "cider");
    if (model.meteor && tops.meteor) ratio(*model.meteor, *tops.meteor, "meteor");
    ratio(model.rouge_l, tops.rouge_l, "rouge_l");
    return sum / count;
}

double caption_length_stats(const std::vector<TokenSeq>& captions) {
    if (captions.empty()) throw std::invalid_argument("caption_length_stats: empty caption set");
    double total = 0.0;
    for (const auto& c : captions) total += static_cast<double>(c.size());
    return total / static_cast<double>(captions.size());
}

}  // namespace svcap
