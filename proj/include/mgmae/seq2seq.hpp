#pragma once

// Encoder, attention decoder and the training loops: self-supervised
// autoencoder training, the ordinary encoder-decoder baseline, greedy
// decoding and representation extraction.
//
// The encoder is a bidirectional LSTM whose per-step outputs and final
// state are projected 2H -> H once; the projected final state is the
// latent representation. The decoder starts from that representation,
// attends over the projected encoder outputs and emits log-probabilities
// per step.

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "mgmae/data.hpp"
#include "mgmae/layers.hpp"
#include "mgmae/metrics.hpp"
#include "mgmae/optim.hpp"

namespace mgmae {

// ---------------------------------------------------------------------------
// parameter bundles
// ---------------------------------------------------------------------------

struct EncoderParams {
    EmbeddingTable embedding;
    LstmParams fwd;
    LstmParams bwd;
    LinearParams proj; // 2H -> H, applied to every output and to final_concat

    static EncoderParams init(int vocab, int embed_dim, int hidden_dim, Rng& rng) {
        EncoderParams e;
        e.embedding = EmbeddingTable::init(vocab, embed_dim, rng);
        e.fwd = LstmParams::init(embed_dim, hidden_dim, rng);
        e.bwd = LstmParams::init(embed_dim, hidden_dim, rng);
        e.proj = LinearParams::init(2 * hidden_dim, hidden_dim, rng);
        return e;
    }

    int hidden_dim() const { return fwd.hidden_dim; }
    int embed_dim() const { return embedding.embed_dim; }

    std::vector<Parameter*> params() {
        return {&embedding.weights, &fwd.W, &fwd.U, &fwd.b,
                &bwd.W,             &bwd.U, &bwd.b, &proj.W, &proj.b};
    }
    std::vector<const Parameter*> params() const {
        return {&embedding.weights, &fwd.W, &fwd.U, &fwd.b,
                &bwd.W,             &bwd.U, &bwd.b, &proj.W, &proj.b};
    }
};

// Decoder / filter parameters. Every filter is structurally identical to
// this; parameter values are independent.
struct DecoderParams {
    EmbeddingTable embedding;
    LstmParams lstm;       // input = embed_dim
    LinearParams combine;  // attention projection: concat(h, context) 2H -> H
    LinearParams out;      // H -> vocab

    static DecoderParams init(int vocab, int embed_dim, int hidden_dim, Rng& rng) {
        DecoderParams d;
        d.embedding = EmbeddingTable::init(vocab, embed_dim, rng);
        d.lstm = LstmParams::init(embed_dim, hidden_dim, rng);
        d.combine = LinearParams::init(2 * hidden_dim, hidden_dim, rng);
        d.out = LinearParams::init(hidden_dim, vocab, rng);
        return d;
    }

    int vocab_size() const { return embedding.vocab_size; }
    int hidden_dim() const { return lstm.hidden_dim; }

    std::vector<Parameter*> params() {
        return {&embedding.weights, &lstm.W,    &lstm.U,    &lstm.b,
                &combine.W,         &combine.b, &out.W,     &out.b};
    }
    std::vector<const Parameter*> params() const {
        return {&embedding.weights, &lstm.W,    &lstm.U,    &lstm.b,
                &combine.W,         &combine.b, &out.W,     &out.b};
    }
};

struct EncoderOutput {
    Tensor outputs;        // [T x H] projected encoder outputs
    Tensor representation; // [H] projected final state = latent vector
};

// ---------------------------------------------------------------------------
// forward passes
// ---------------------------------------------------------------------------

// tape == nullptr selects evaluation mode: nothing is recorded and dropout
// is identity regardless of the rate.
inline EncoderOutput encode(const EncoderParams& enc, std::span<const int> tokens, Tape* tape,
                            double dropout = 0.0, Rng* rng = nullptr) {
    if (tokens.empty()) throw ContractError("encode: empty token sequence");
    Tensor embedded = embed(enc.embedding, tokens, tape);
    if (tape && dropout > 0.0 && rng) embedded = dropout_mask(embedded, dropout, *rng, true);
    BiLstmOutput bi = bilstm_encode(enc.fwd, enc.bwd, embedded, tape);
    Tensor W = enc.proj.W.use(tape);
    Tensor b = enc.proj.b.use(tape);
    EncoderOutput out;
    out.outputs = add_rowvec(matmul(bi.outputs, transpose(W)), b);
    out.representation = linear(W, b, bi.final_concat);
    return out;
}

struct DecoderState {
    Tensor h;
    Tensor c;
    int prev_token = SOS;
};

// First decoder state: h = representation, c = 0, prev = SOS.
inline DecoderState decoder_init_state(const EncoderOutput& enc_out) {
    DecoderState s;
    s.h = enc_out.representation;
    s.c = Tensor::zeros({enc_out.representation.dim(0)});
    s.prev_token = SOS;
    return s;
}

struct StepResult {
    Tensor log_probs;  // [vocab], exp sums to 1
    DecoderState next; // prev_token must be set by the caller
};

// One decoding step: embed prev token -> LSTM -> dot attention over the
// encoder outputs -> combine(h, context) -> output projection -> log softmax.
inline StepResult decode_step(const DecoderParams& dec, const DecoderState& state,
                              const EncoderOutput& enc_out, Tape* tape, double dropout = 0.0,
                              Rng* rng = nullptr) {
    const int ids[1] = {state.prev_token};
    Tensor emb = row(embed(dec.embedding, ids, tape), 0);
    if (tape && dropout > 0.0 && rng) emb = dropout_mask(emb, dropout, *rng, true);
    LstmState next = lstm_step(dec.lstm, emb, {state.h, state.c}, tape);
    Tensor h = next.h;
    if (tape && dropout > 0.0 && rng) h = dropout_mask(h, dropout, *rng, true);
    AttentionResult att = dot_attention(enc_out.outputs, h);
    Tensor combined = tanh(linear(dec.combine, concat(h, att.context), tape));
    Tensor log_probs = log_softmax(linear(dec.out, combined, tape));
    StepResult r;
    r.log_probs = log_probs;
    r.next = DecoderState{next.h, next.c, -1};
    return r;
}

// Argmax over emittable tokens (PAD and SOS are never produced);
// ties break toward the lowest token id.
inline int argmax_token(const std::vector<double>& log_probs) {
    int best = -1;
    double best_v = 0.0;
    for (size_t i = 0; i < log_probs.size(); ++i) {
        if (static_cast<int>(i) == PAD || static_cast<int>(i) == SOS) continue;
        if (best < 0 || log_probs[i] > best_v) {
            best = static_cast<int>(i);
            best_v = log_probs[i];
        }
    }
    return best;
}

// Greedy decoding; stops at EOS (excluded from the output) or max_len.
inline TokenSeq greedy_decode(const DecoderParams& dec, const EncoderOutput& enc_out,
                              int max_len) {
    if (max_len < 1) throw ContractError("greedy_decode: max_len must be >= 1");
    TokenSeq out;
    DecoderState state = decoder_init_state(enc_out);
    for (int step = 0; step < max_len; ++step) {
        StepResult r = decode_step(dec, state, enc_out, nullptr);
        const int tok = argmax_token(r.log_probs.data());
        if (tok == EOS) break;
        out.push_back(tok);
        state = r.next;
        state.prev_token = tok;
    }
    return out;
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

struct TrainOptions {
    int epochs = 10;
    double lr = 1e-3;
    double dropout = 0.2;
    double clip_norm = 5.0;
    uint64_t seed = 1;
};

struct TrainLog {
    std::vector<double> epoch_mean_loss; // one entry per epoch
};

// Teacher-forced loss for one (source, target) pair. Targets end with EOS;
// the gold previous token is fed at every step.
inline Tensor sentence_loss(const EncoderParams& enc, const DecoderParams& dec,
                            const TokenSeq& src, const TokenSeq& tgt, Tape& tape,
                            bool track_encoder, double dropout, Rng& rng) {
    EncoderOutput enc_out = track_encoder ? encode(enc, src, &tape, dropout, &rng)
                                          : encode(enc, src, nullptr);
    DecoderState state = decoder_init_state(enc_out);
    std::vector<Tensor> step_log_probs;
    step_log_probs.reserve(tgt.size());
    for (size_t n = 0; n < tgt.size(); ++n) {
        StepResult r = decode_step(dec, state, enc_out, &tape, dropout, &rng);
        step_log_probs.push_back(r.log_probs);
        state = r.next;
        state.prev_token = tgt[n];
    }
    return nll_loss(stack_rows(step_log_probs), tgt);
}

namespace detail {

struct PairView {
    const TokenSeq* src;
    const TokenSeq* tgt;
};

inline TrainLog train_loop(EncoderParams& enc, DecoderParams& dec,
                           const std::vector<PairView>& pairs, const TrainOptions& opts,
                           bool update_encoder) {
    TrainLog log;
    if (opts.epochs <= 0 || pairs.empty()) return log;
    std::vector<Parameter*> params = dec.params();
    if (update_encoder) {
        auto ep = enc.params();
        params.insert(params.end(), ep.begin(), ep.end());
    }
    Adam adam(params, AdamOptions{opts.lr, 0.9, 0.999, 1e-8, opts.clip_norm});
    Rng base(opts.seed);
    Rng order_rng = base.fork(0x06de6);
    Rng dropout_rng = base.fork(0xd609);
    Tape tape;
    std::vector<size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), size_t{0});
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        order_rng.shuffle(order);
        double total = 0.0;
        for (size_t pos = 0; pos < order.size(); ++pos) {
            const auto& pv = pairs[order[pos]];
            tape.reset();
            Tensor loss = sentence_loss(enc, dec, *pv.src, *pv.tgt, tape, update_encoder,
                                        opts.dropout, dropout_rng);
            const double value = loss.item();
            if (!std::isfinite(value))
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                                   ", sample " + std::to_string(order[pos]));
            tape.backward(loss);
            adam.step(tape);
            total += value;
        }
        log.epoch_mean_loss.push_back(total / static_cast<double>(pairs.size()));
    }
    return log;
}

} // namespace detail

// Self-supervised: inputs and outputs are the same sequence.
inline TrainLog train_autoencoder(EncoderParams& enc, DecoderParams& dec,
                                  const std::vector<TokenSeq>& sentences,
                                  const TrainOptions& opts) {
    if (sentences.empty()) throw ContractError("train_autoencoder: empty corpus");
    std::vector<detail::PairView> pairs;
    pairs.reserve(sentences.size());
    for (const auto& s : sentences) pairs.push_back({&s, &s});
    return detail::train_loop(enc, dec, pairs, opts, /*update_encoder=*/true);
}

// Ordinary encoder-decoder baseline: encoder and decoder trained end-to-end
// on source -> target.
inline TrainLog train_encdec_baseline(EncoderParams& enc, DecoderParams& dec,
                                      const std::vector<SeqPair>& corpus,
                                      const TrainOptions& opts) {
    if (corpus.empty()) throw ContractError("train_encdec_baseline: empty corpus");
    std::vector<detail::PairView> pairs;
    pairs.reserve(corpus.size());
    for (const auto& p : corpus) pairs.push_back({&p.src, &p.tgt});
    return detail::train_loop(enc, dec, pairs, opts, /*update_encoder=*/true);
}

// Train one decoder on a subset of the corpus with the encoder frozen
// (evaluation-mode forward, no encoder updates). Used per filter.
inline TrainLog train_decoder_frozen(const EncoderParams& enc, DecoderParams& dec,
                                     const std::vector<SeqPair>& corpus,
                                     const std::vector<int>& indices,
                                     const TrainOptions& opts) {
    std::vector<detail::PairView> pairs;
    pairs.reserve(indices.size());
    for (int i : indices) {
        if (i < 0 || static_cast<size_t>(i) >= corpus.size())
            throw ContractError("train_decoder_frozen: index out of range");
        pairs.push_back({&corpus[static_cast<size_t>(i)].src, &corpus[static_cast<size_t>(i)].tgt});
    }
    // const_cast is confined here: update_encoder=false guarantees the
    // encoder is only read.
    return detail::train_loop(const_cast<EncoderParams&>(enc), dec, pairs, opts,
                              /*update_encoder=*/false);
}

// Row i = encode(corpus[i]).representation, evaluation mode.
inline std::vector<std::vector<double>> extract_representations(
    const EncoderParams& enc, const std::vector<TokenSeq>& sentences) {
    std::vector<std::vector<double>> reps;
    reps.reserve(sentences.size());
    for (const auto& s : sentences) reps.push_back(encode(enc, s, nullptr).representation.data());
    return reps;
}

// Default decode cap: 1.5x the longest training target, at least 20.
inline int default_max_len(const std::vector<SeqPair>& corpus) {
    size_t longest = 0;
    for (const auto& p : corpus) longest = std::max(longest, p.tgt.size());
    return std::max(20, static_cast<int>(static_cast<double>(longest) * 1.5));
}

} // namespace mgmae
