#pragma once

// The multi-filter mechanism: one decoder ("filter") per Gaussian component.
// Training data is partitioned by hard assignment of the latent
// representation; each filter trains only on its own partition with the
// encoder frozen. Inference routes by hard assignment or mixes all filter
// outputs by the posterior, step by step.

#include <vector>

#include "mgmae/gmm.hpp"
#include "mgmae/seq2seq.hpp"

namespace mgmae {

struct FilterBank {
    GmmModel gmm;
    std::vector<DecoderParams> filters; // one per component, independent parameters

    int k() const { return static_cast<int>(filters.size()); }
};

// Filters are initialized from seeds forked off the master seed, not copied
// from the autoencoder decoder: constructing target outputs is a different
// task than reconstruction.
inline FilterBank make_filter_bank(GmmModel gmm, int tgt_vocab, int embed_dim, int hidden_dim,
                                   uint64_t seed) {
    FilterBank bank;
    bank.gmm = std::move(gmm);
    const int k = bank.gmm.M();
    bank.filters.reserve(static_cast<size_t>(k));
    Rng master(seed);
    for (int j = 0; j < k; ++j) {
        Rng frng = master.fork(static_cast<uint64_t>(j));
        bank.filters.push_back(DecoderParams::init(tgt_vocab, embed_dim, hidden_dim, frng));
    }
    return bank;
}

// Index i goes to list assign(gmm, reps[i]); the lists are disjoint and
// cover 0..N-1. Empty lists are legal (the caller reports them).
inline std::vector<std::vector<int>> partition(const GmmModel& gmm, const Rows& reps) {
    std::vector<std::vector<int>> parts(static_cast<size_t>(gmm.M()));
    for (size_t i = 0; i < reps.size(); ++i)
        parts[static_cast<size_t>(assign(gmm, reps[i]))].push_back(static_cast<int>(i));
    return parts;
}

// Train filter j on exactly partition[j]. The encoder is frozen: forward in
// evaluation mode, parameters untouched. A filter with an empty partition is
// left at initialization (its log stays empty).
inline std::vector<TrainLog> train_filters(FilterBank& bank, const EncoderParams& enc,
                                           const std::vector<SeqPair>& corpus,
                                           const std::vector<std::vector<int>>& parts,
                                           const TrainOptions& opts) {
    if (static_cast<int>(parts.size()) != bank.k())
        throw ContractError("train_filters: partition count != filter count");
    std::vector<TrainLog> logs(parts.size());
    Rng master(opts.seed);
    for (size_t j = 0; j < parts.size(); ++j) {
        if (parts[j].empty()) continue;
        TrainOptions per_filter = opts;
        per_filter.seed = master.fork(j).seed();
        logs[j] = train_decoder_frozen(enc, bank.filters[j], corpus, parts[j], per_filter);
    }
    return logs;
}

// Hard routing: encode, assign, decode with the chosen filter only.
inline TokenSeq decode_hard(const FilterBank& bank, const EncoderParams& enc,
                            const TokenSeq& tokens, int max_len) {
    EncoderOutput enc_out = encode(enc, tokens, nullptr);
    const int j = assign(bank.gmm, enc_out.representation.data());
    return greedy_decode(bank.filters[static_cast<size_t>(j)], enc_out, max_len);
}

// Soft routing: every filter advances its own state on the shared previous
// token; the emitted distribution is the posterior-weighted convex
// combination of the filter distributions (mixed in probability space,
// renormalized). The argmax token is fed back to all filters.
// step_distributions, when given, receives the mixed distribution of every
// step (including the final EOS step).
inline TokenSeq decode_soft(const FilterBank& bank, const EncoderParams& enc,
                            const TokenSeq& tokens, int max_len,
                            Rows* step_distributions = nullptr) {
    if (max_len < 1) throw ContractError("decode_soft: max_len must be >= 1");
    EncoderOutput enc_out = encode(enc, tokens, nullptr);
    const std::vector<double> post = posterior(bank.gmm, enc_out.representation.data());
    const int k = bank.k();
    const int V = bank.filters[0].vocab_size();
    std::vector<DecoderState> states(static_cast<size_t>(k));
    for (int j = 0; j < k; ++j) states[static_cast<size_t>(j)] = decoder_init_state(enc_out);
    TokenSeq out;
    for (int step = 0; step < max_len; ++step) {
        std::vector<double> mixed(static_cast<size_t>(V), 0.0);
        std::vector<DecoderState> next_states(static_cast<size_t>(k));
        for (int j = 0; j < k; ++j) {
            StepResult r = decode_step(bank.filters[static_cast<size_t>(j)],
                                       states[static_cast<size_t>(j)], enc_out, nullptr);
            const auto& lp = r.log_probs.data();
            const double w = post[static_cast<size_t>(j)];
            for (int v = 0; v < V; ++v)
                mixed[static_cast<size_t>(v)] += w * std::exp(lp[static_cast<size_t>(v)]);
            next_states[static_cast<size_t>(j)] = r.next;
        }
        double total = 0.0;
        for (double p : mixed) total += p;
        for (double& p : mixed) p /= total;
        if (step_distributions) step_distributions->push_back(mixed);
        int best = -1;
        for (int v = 0; v < V; ++v) {
            if (v == PAD || v == SOS) continue;
            if (best < 0 || mixed[static_cast<size_t>(v)] > mixed[static_cast<size_t>(best)])
                best = v;
        }
        if (best == EOS) break;
        out.push_back(best);
        states = std::move(next_states);
        for (auto& s : states) s.prev_token = best;
    }
    return out;
}

} // namespace mgmae
