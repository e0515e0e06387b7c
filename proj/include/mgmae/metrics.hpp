#pragma once

// Evaluation metrics: negative-likelihood loss over log-distributions,
// corpus BLEU with brevity penalty, token-level accuracy and the
// exact-match stand-in for denotation accuracy. All functions are pure.

#include <array>
#include <cmath>
#include <map>
#include <span>
#include <vector>

#include "mgmae/tensor.hpp"

namespace mgmae {

// Per-class weights w[y]; empty means all ones.
struct LossWeights {
    std::vector<double> w;

    double weight_for(int cls) const {
        if (w.empty()) return 1.0;
        if (cls < 0 || static_cast<size_t>(cls) >= w.size())
            throw ContractError("loss weight index out of range");
        if (w[static_cast<size_t>(cls)] < 0.0) throw ContractError("loss weights must be nonnegative");
        return w[static_cast<size_t>(cls)];
    }
};

constexpr int kPadToken = 0;

// l_n = -w_{y_n} * log_probs[n, y_n]; returns sum(l_n) / sum(w_{y_n}).
// Rows whose target is PAD are excluded. Differentiable through log_probs.
inline Tensor nll_loss(const Tensor& log_probs, std::span<const int> targets,
                       const LossWeights& weights = {}) {
    detail::require_matrix(log_probs, "nll_loss");
    const int N = log_probs.dim(0), V = log_probs.dim(1);
    if (static_cast<size_t>(N) != targets.size())
        throw ContractError("nll_loss: " + std::to_string(targets.size()) + " targets for " +
                            std::to_string(N) + " rows");
    double num = 0.0, den = 0.0;
    for (int n = 0; n < N; ++n) {
        const int y = targets[static_cast<size_t>(n)];
        if (y == kPadToken) continue;
        if (y < 0 || y >= V)
            throw ContractError("nll_loss: target " + std::to_string(y) + " outside vocab " +
                                std::to_string(V));
        const double wy = weights.weight_for(y);
        num += -wy * log_probs.at(n, y);
        den += wy;
    }
    const double value = den > 0.0 ? num / den : 0.0;
    if (!log_probs.tracked() || den <= 0.0) return Tensor::scalar(value);
    Tape* tape = log_probs.tape();
    const int plp = log_probs.node();
    std::vector<int> tv(targets.begin(), targets.end());
    LossWeights wcopy = weights;
    return tape->record({1}, {value}, {plp},
                        [plp, tv, wcopy, V, den](Tape& t, const std::vector<double>& g) {
                            auto& glp = t.grad_buf(plp);
                            for (size_t n = 0; n < tv.size(); ++n) {
                                const int y = tv[n];
                                if (y == kPadToken) continue;
                                glp[n * static_cast<size_t>(V) + static_cast<size_t>(y)] +=
                                    g[0] * (-wcopy.weight_for(y) / den);
                            }
                        });
}

enum class BpMode {
    standard,   // min(1, exp(1 - r/c)) — never rewards over-long candidates
    paper_exact // exp(1 - r/c) with no clamp
};

inline double brevity_penalty(long r, long c, BpMode mode = BpMode::standard) {
    if (c <= 0) throw ContractError("brevity_penalty: candidate length must be positive");
    const double bp = std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
    return mode == BpMode::standard ? std::min(1.0, bp) : bp;
}

// Corpus-level counts for BLEU with N = 4 and uniform weights.
struct BleuStats {
    long r = 0; // reference corpus length
    long c = 0; // candidate corpus length
    std::array<long, 4> matches{};
    std::array<long, 4> totals{};
};

using TokenSeqView = std::span<const std::vector<int>>;

namespace detail {

inline std::map<std::vector<int>, long> ngram_counts(const std::vector<int>& seq, int n) {
    std::map<std::vector<int>, long> counts;
    if (static_cast<int>(seq.size()) < n) return counts;
    for (size_t i = 0; i + static_cast<size_t>(n) <= seq.size(); ++i)
        ++counts[std::vector<int>(seq.begin() + static_cast<long>(i),
                                  seq.begin() + static_cast<long>(i) + n)];
    return counts;
}

} // namespace detail

inline BleuStats bleu_stats(TokenSeqView candidates, TokenSeqView references) {
    if (candidates.size() != references.size())
        throw ContractError("bleu: candidate/reference counts differ");
    if (candidates.empty()) throw ContractError("bleu: empty corpus");
    BleuStats s;
    for (size_t i = 0; i < candidates.size(); ++i) {
        const auto& cand = candidates[i];
        const auto& ref = references[i];
        s.c += static_cast<long>(cand.size());
        s.r += static_cast<long>(ref.size());
        for (int n = 1; n <= 4; ++n) {
            auto cc = detail::ngram_counts(cand, n);
            auto rc = detail::ngram_counts(ref, n);
            for (const auto& [gram, count] : cc) {
                s.totals[static_cast<size_t>(n - 1)] += count;
                auto it = rc.find(gram);
                if (it != rc.end())
                    s.matches[static_cast<size_t>(n - 1)] += std::min(count, it->second);
            }
        }
    }
    return s;
}

// BLEU = BP * exp(sum_n (1/4) log p_n) * 100. A zero match count is smoothed
// add-one: p_n = (m_n + 1) / totals_n (totals floored at 1 so an order with
// no n-grams contributes log 1).
inline double bleu_from_stats(const BleuStats& s, BpMode mode = BpMode::standard) {
    if (s.c == 0) return 0.0; // model produced no tokens at all
    double log_precisions = 0.0;
    for (int n = 0; n < 4; ++n) {
        const long m = s.matches[static_cast<size_t>(n)];
        const long tot = s.totals[static_cast<size_t>(n)];
        double p;
        if (m > 0)
            p = static_cast<double>(m) / static_cast<double>(tot);
        else
            p = (static_cast<double>(m) + 1.0) / static_cast<double>(std::max(tot, 1L));
        log_precisions += 0.25 * std::log(p);
    }
    return brevity_penalty(s.r, s.c, mode) * std::exp(log_precisions) * 100.0;
}

inline double bleu(TokenSeqView candidates, TokenSeqView references,
                   BpMode mode = BpMode::standard) {
    return bleu_from_stats(bleu_stats(candidates, references), mode);
}

// Positionwise match rate; denominator max(len(cand), len(ref)) penalizes
// both over- and under-generation. Mean over the corpus, scaled to percent.
inline double token_accuracy(TokenSeqView candidates, TokenSeqView references) {
    if (candidates.size() != references.size())
        throw ContractError("token_accuracy: candidate/reference counts differ");
    if (candidates.empty()) return 0.0;
    double acc = 0.0;
    for (size_t i = 0; i < candidates.size(); ++i) {
        const auto& cand = candidates[i];
        const auto& ref = references[i];
        const size_t denom = std::max(cand.size(), ref.size());
        if (denom == 0) {
            acc += 1.0;
            continue;
        }
        size_t hits = 0;
        for (size_t j = 0; j < std::min(cand.size(), ref.size()); ++j)
            if (cand[j] == ref[j]) ++hits;
        acc += static_cast<double>(hits) / static_cast<double>(denom);
    }
    return acc / static_cast<double>(candidates.size()) * 100.0;
}

// Whole-sequence exact-match rate. This is a PROXY for denotation accuracy;
// reports must label it as such (no knowledge-base execution here).
inline double denotation_match_proxy(TokenSeqView candidates, TokenSeqView references) {
    if (candidates.size() != references.size())
        throw ContractError("denotation_match_proxy: candidate/reference counts differ");
    if (candidates.empty()) return 0.0;
    size_t hits = 0;
    for (size_t i = 0; i < candidates.size(); ++i)
        if (candidates[i] == references[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(candidates.size()) * 100.0;
}

} // namespace mgmae
