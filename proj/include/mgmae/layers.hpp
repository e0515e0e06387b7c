#pragma once

// Parameterized layers: embedding, LSTM cell, bidirectional encoder wrapper,
// dot-product attention, affine map. Layers are immutable during a forward
// or backward pass; only the optimizer writes to parameters.

#include <span>
#include <vector>

#include "mgmae/tensor.hpp"

namespace mgmae {

namespace init {

inline Tensor uniform_matrix(int rows, int cols, double bound, Rng& rng) {
    Tensor t = Tensor::zeros({rows, cols});
    for (double& v : t.mut_data()) v = rng.uniform(-bound, bound);
    return t;
}

} // namespace init

// ---------------------------------------------------------------------------
// embedding
// ---------------------------------------------------------------------------

struct EmbeddingTable {
    int vocab_size = 0;
    int embed_dim = 0;
    Parameter weights; // [vocab_size x embed_dim]

    static EmbeddingTable init(int vocab, int dim, Rng& rng) {
        EmbeddingTable e;
        e.vocab_size = vocab;
        e.embed_dim = dim;
        e.weights = Parameter(
            init::uniform_matrix(vocab, dim, 1.0 / std::sqrt(static_cast<double>(dim)), rng));
        return e;
    }
};

// Row gather; the gradient scatters back into the gathered rows only.
inline Tensor embed(const EmbeddingTable& table, std::span<const int> ids, Tape* tape) {
    for (int id : ids)
        if (id < 0 || id >= table.vocab_size)
            throw VocabError("embed: token id " + std::to_string(id) +
                             " outside vocabulary of size " + std::to_string(table.vocab_size));
    Tensor w = table.weights.use(tape);
    const int T = static_cast<int>(ids.size());
    const int E = table.embed_dim;
    std::vector<double> out(static_cast<size_t>(T) * E);
    for (int t = 0; t < T; ++t) {
        const double* src = w.data().data() + static_cast<size_t>(ids[static_cast<size_t>(t)]) * E;
        std::copy(src, src + E, out.begin() + static_cast<size_t>(t) * E);
    }
    if (!w.tracked()) return Tensor::from({T, E}, std::move(out));
    const int pw = w.node();
    std::vector<int> idv(ids.begin(), ids.end());
    return tape->record({T, E}, std::move(out), {pw},
                        [pw, idv, E](Tape& t, const std::vector<double>& g) {
                            auto& gw = t.grad_buf(pw);
                            for (size_t r = 0; r < idv.size(); ++r) {
                                double* dst = gw.data() + static_cast<size_t>(idv[r]) * E;
                                const double* src = g.data() + r * static_cast<size_t>(E);
                                for (int j = 0; j < E; ++j) dst[j] += src[j];
                            }
                        });
}

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

// Gate weights packed along the first axis in fixed order:
//   [0,H)   input gate
//   [H,2H)  forget gate (bias initialized to 1.0)
//   [2H,3H) cell candidate
//   [3H,4H) output gate
struct LstmParams {
    int input_dim = 0;
    int hidden_dim = 0;
    Parameter W; // [4H x input_dim]
    Parameter U; // [4H x H]
    Parameter b; // [4H]

    static LstmParams init(int input_dim, int hidden_dim, Rng& rng) {
        LstmParams p;
        p.input_dim = input_dim;
        p.hidden_dim = hidden_dim;
        const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
        p.W = Parameter(init::uniform_matrix(4 * hidden_dim, input_dim, bound, rng));
        p.U = Parameter(init::uniform_matrix(4 * hidden_dim, hidden_dim, bound, rng));
        Tensor bias = Tensor::zeros({4 * hidden_dim});
        for (int i = hidden_dim; i < 2 * hidden_dim; ++i) bias.mut_data()[static_cast<size_t>(i)] = 1.0;
        p.b = Parameter(std::move(bias));
        return p;
    }
};

struct LstmState {
    Tensor h;
    Tensor c;
};

inline LstmState lstm_step(const LstmParams& p, const Tensor& x, const LstmState& prev,
                           Tape* tape) {
    if (x.ndim() != 1 || x.dim(0) != p.input_dim)
        throw DimensionError("lstm_step: input is " + shape_str(x.shape()) + ", expected [" +
                             std::to_string(p.input_dim) + "]");
    const int H = p.hidden_dim;
    Tensor z = add(add(matvec(p.W.use(tape), x), matvec(p.U.use(tape), prev.h)),
                   p.b.use(tape));
    Tensor i = sigmoid(slice(z, 0, H));
    Tensor f = sigmoid(slice(z, H, H));
    Tensor g = tanh(slice(z, 2 * H, H));
    Tensor o = sigmoid(slice(z, 3 * H, H));
    Tensor c = add(mul(f, prev.c), mul(i, g));
    Tensor h = mul(o, tanh(c));
    return {h, c};
}

inline LstmState lstm_zero_state(int hidden_dim) {
    return {Tensor::zeros({hidden_dim}), Tensor::zeros({hidden_dim})};
}

struct BiLstmOutput {
    Tensor outputs;      // [T x 2H]; row t = concat(h_fwd[t], h_bwd[t])
    Tensor final_concat; // concat(h_fwd[T-1], h_bwd final state)
};

inline BiLstmOutput bilstm_encode(const LstmParams& fwd, const LstmParams& bwd, const Tensor& xs,
                                  Tape* tape) {
    detail::require_matrix(xs, "bilstm_encode");
    const int T = xs.dim(0);
    if (T < 1) throw ContractError("bilstm_encode: empty sequence");
    std::vector<Tensor> hf(static_cast<size_t>(T)), hb(static_cast<size_t>(T));
    LstmState sf = lstm_zero_state(fwd.hidden_dim);
    for (int t = 0; t < T; ++t) {
        sf = lstm_step(fwd, row(xs, t), sf, tape);
        hf[static_cast<size_t>(t)] = sf.h;
    }
    LstmState sb = lstm_zero_state(bwd.hidden_dim);
    for (int t = T - 1; t >= 0; --t) {
        sb = lstm_step(bwd, row(xs, t), sb, tape);
        hb[static_cast<size_t>(t)] = sb.h;
    }
    std::vector<Tensor> rows;
    rows.reserve(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t)
        rows.push_back(concat(hf[static_cast<size_t>(t)], hb[static_cast<size_t>(t)]));
    BiLstmOutput out;
    out.outputs = stack_rows(rows);
    // sb.h is the backward pass's final state, i.e. its state at input position 0.
    out.final_concat = concat(hf[static_cast<size_t>(T - 1)], sb.h);
    return out;
}

// ---------------------------------------------------------------------------
// attention
// ---------------------------------------------------------------------------

struct AttentionResult {
    Tensor context; // [H]
    Tensor weights; // [T], nonnegative, sums to 1
};

// Dot-product attention: scores[t] = hbar . enc_outputs[t].
inline AttentionResult dot_attention(const Tensor& enc_outputs, const Tensor& decoder_hidden) {
    detail::require_matrix(enc_outputs, "dot_attention");
    detail::require_vector(decoder_hidden, "dot_attention");
    if (enc_outputs.dim(0) < 1) throw ContractError("dot_attention: empty encoder outputs");
    if (enc_outputs.dim(1) != decoder_hidden.dim(0))
        throw DimensionError("dot_attention: encoder dim " + shape_str(enc_outputs.shape()) +
                             " vs hidden " + shape_str(decoder_hidden.shape()));
    Tensor scores = matvec(enc_outputs, decoder_hidden);
    Tensor weights = softmax(scores);
    Tensor context = matvec_t(enc_outputs, weights);
    return {context, weights};
}

// ---------------------------------------------------------------------------
// affine map
// ---------------------------------------------------------------------------

struct LinearParams {
    int in_dim = 0;
    int out_dim = 0;
    Parameter W; // [out x in]
    Parameter b; // [out]

    static LinearParams init(int in_dim, int out_dim, Rng& rng) {
        LinearParams p;
        p.in_dim = in_dim;
        p.out_dim = out_dim;
        p.W = Parameter(init::uniform_matrix(out_dim, in_dim,
                                             1.0 / std::sqrt(static_cast<double>(in_dim)), rng));
        p.b = Parameter(Tensor::zeros({out_dim}));
        return p;
    }
};

inline Tensor linear(const Tensor& W, const Tensor& b, const Tensor& x) {
    return add(matvec(W, x), b);
}

inline Tensor linear(const LinearParams& p, const Tensor& x, Tape* tape) {
    return linear(p.W.use(tape), p.b.use(tape), x);
}

} // namespace mgmae
