#pragma once

// Versioned binary checkpoint: magic "MGMAE1", explicit little-endian
// integers and 64-bit floats, one self-describing file. load(save(x))
// reproduces every parameter bit-exactly. Writes go to a temp file that is
// atomically renamed; a truncated or corrupted file yields a FormatError and
// no partial state.

#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "mgmae/config.hpp"
#include "mgmae/data.hpp"
#include "mgmae/filterbank.hpp"
#include "mgmae/gmm.hpp"
#include "mgmae/seq2seq.hpp"

namespace mgmae {

struct Checkpoint {
    ExperimentConfig config;
    uint64_t run_seed = 0; // the seed this particular run used
    Vocab src_vocab;
    Vocab tgt_vocab;
    std::optional<EncoderParams> encoder;
    std::optional<DecoderParams> decoder; // autoencoder/baseline decoder
    std::optional<GmmModel> gmm;
    std::vector<DecoderParams> filters;
    Rows representations; // training-set latent vectors
    TrainLog autoencoder_log;
    std::vector<TrainLog> filter_logs;
};

namespace ckpt_detail {

constexpr char kMagic[6] = {'M', 'G', 'M', 'A', 'E', '1'};
constexpr uint32_t kVersion = 1;

class Writer {
public:
    void u8(uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f64(double v) {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void str(const std::string& s) {
        u64(s.size());
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    void f64s(const std::vector<double>& v) {
        u64(v.size());
        for (double x : v) f64(x);
    }
    const std::vector<char>& bytes() const { return buf_; }

private:
    std::vector<char> buf_;
};

class Reader {
public:
    explicit Reader(std::vector<char> bytes) : buf_(std::move(bytes)) {}

    uint8_t u8() {
        need(1);
        return static_cast<uint8_t>(buf_[pos_++]);
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<uint32_t>(static_cast<uint8_t>(buf_[pos_++])) << (8 * i);
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<uint64_t>(static_cast<uint8_t>(buf_[pos_++])) << (8 * i);
        return v;
    }
    double f64() {
        const uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        const uint64_t n = u64();
        need(n);
        std::string s(buf_.begin() + static_cast<long>(pos_), buf_.begin() + static_cast<long>(pos_ + n));
        pos_ += n;
        return s;
    }
    std::vector<double> f64s() {
        const uint64_t n = u64();
        need(n * 8);
        std::vector<double> v(n);
        for (uint64_t i = 0; i < n; ++i) v[i] = f64();
        return v;
    }
    bool exhausted() const { return pos_ == buf_.size(); }

private:
    void need(uint64_t n) {
        if (pos_ + n > buf_.size()) throw FormatError("checkpoint truncated");
    }
    std::vector<char> buf_;
    size_t pos_ = 0;
};

inline void write_tensor(Writer& w, const Tensor& t) {
    w.u32(static_cast<uint32_t>(t.ndim()));
    for (int d : t.shape()) w.u32(static_cast<uint32_t>(d));
    w.f64s(t.data());
}

inline Tensor read_tensor(Reader& r) {
    const uint32_t nd = r.u32();
    if (nd > 4) throw FormatError("checkpoint: implausible tensor rank");
    Shape shape(nd);
    for (auto& d : shape) d = static_cast<int>(r.u32());
    auto data = r.f64s();
    if (data.size() != shape_numel(shape)) throw FormatError("checkpoint: tensor size mismatch");
    return Tensor::from(std::move(shape), std::move(data));
}

inline void write_param(Writer& w, const Parameter& p) { write_tensor(w, p.value()); }
inline Parameter read_param(Reader& r) { return Parameter(read_tensor(r)); }

inline void write_vocab(Writer& w, const Vocab& v) {
    w.u64(static_cast<uint64_t>(v.size()));
    for (const auto& tok : v.tokens()) w.str(tok);
}

inline Vocab read_vocab(Reader& r) {
    const uint64_t n = r.u64();
    Vocab v;
    for (uint64_t i = 0; i < n; ++i) {
        const std::string tok = r.str();
        if (i < 4) {
            if (tok != v.token(static_cast<int>(i)))
                throw FormatError("checkpoint: special token mismatch");
            continue;
        }
        v.add(tok);
    }
    return v;
}

inline void write_lstm(Writer& w, const LstmParams& p) {
    w.u32(static_cast<uint32_t>(p.input_dim));
    w.u32(static_cast<uint32_t>(p.hidden_dim));
    write_param(w, p.W);
    write_param(w, p.U);
    write_param(w, p.b);
}

inline LstmParams read_lstm(Reader& r) {
    LstmParams p;
    p.input_dim = static_cast<int>(r.u32());
    p.hidden_dim = static_cast<int>(r.u32());
    p.W = read_param(r);
    p.U = read_param(r);
    p.b = read_param(r);
    return p;
}

inline void write_linear(Writer& w, const LinearParams& p) {
    w.u32(static_cast<uint32_t>(p.in_dim));
    w.u32(static_cast<uint32_t>(p.out_dim));
    write_param(w, p.W);
    write_param(w, p.b);
}

inline LinearParams read_linear(Reader& r) {
    LinearParams p;
    p.in_dim = static_cast<int>(r.u32());
    p.out_dim = static_cast<int>(r.u32());
    p.W = read_param(r);
    p.b = read_param(r);
    return p;
}

inline void write_embedding(Writer& w, const EmbeddingTable& e) {
    w.u32(static_cast<uint32_t>(e.vocab_size));
    w.u32(static_cast<uint32_t>(e.embed_dim));
    write_param(w, e.weights);
}

inline EmbeddingTable read_embedding(Reader& r) {
    EmbeddingTable e;
    e.vocab_size = static_cast<int>(r.u32());
    e.embed_dim = static_cast<int>(r.u32());
    e.weights = read_param(r);
    return e;
}

inline void write_encoder(Writer& w, const EncoderParams& e) {
    write_embedding(w, e.embedding);
    write_lstm(w, e.fwd);
    write_lstm(w, e.bwd);
    write_linear(w, e.proj);
}

inline EncoderParams read_encoder(Reader& r) {
    EncoderParams e;
    e.embedding = read_embedding(r);
    e.fwd = read_lstm(r);
    e.bwd = read_lstm(r);
    e.proj = read_linear(r);
    return e;
}

inline void write_decoder(Writer& w, const DecoderParams& d) {
    write_embedding(w, d.embedding);
    write_lstm(w, d.lstm);
    write_linear(w, d.combine);
    write_linear(w, d.out);
}

inline DecoderParams read_decoder(Reader& r) {
    DecoderParams d;
    d.embedding = read_embedding(r);
    d.lstm = read_lstm(r);
    d.combine = read_linear(r);
    d.out = read_linear(r);
    return d;
}

inline void write_gmm(Writer& w, const GmmModel& g) {
    w.u32(static_cast<uint32_t>(g.dim));
    w.u64(g.components.size());
    for (const auto& c : g.components) {
        w.f64s(c.mu);
        w.f64s(c.var);
        w.f64(c.weight);
    }
}

inline GmmModel read_gmm(Reader& r) {
    GmmModel g;
    g.dim = static_cast<int>(r.u32());
    const uint64_t m = r.u64();
    for (uint64_t i = 0; i < m; ++i) {
        GaussianComponent c;
        c.mu = r.f64s();
        c.var = r.f64s();
        c.weight = r.f64();
        g.components.push_back(std::move(c));
    }
    return g;
}

inline void write_log(Writer& w, const TrainLog& log) { w.f64s(log.epoch_mean_loss); }
inline TrainLog read_log(Reader& r) { return TrainLog{r.f64s()}; }

} // namespace ckpt_detail

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
    using namespace ckpt_detail;
    Writer w;
    w.str(config_to_string(c.config));
    w.u64(c.run_seed);
    write_vocab(w, c.src_vocab);
    write_vocab(w, c.tgt_vocab);
    w.u8(c.encoder ? 1 : 0);
    if (c.encoder) write_encoder(w, *c.encoder);
    w.u8(c.decoder ? 1 : 0);
    if (c.decoder) write_decoder(w, *c.decoder);
    w.u8(c.gmm ? 1 : 0);
    if (c.gmm) write_gmm(w, *c.gmm);
    w.u64(c.filters.size());
    for (const auto& f : c.filters) write_decoder(w, f);
    w.u64(c.representations.size());
    for (const auto& rowv : c.representations) w.f64s(rowv);
    write_log(w, c.autoencoder_log);
    w.u64(c.filter_logs.size());
    for (const auto& log : c.filter_logs) write_log(w, log);

    const std::filesystem::path target(path);
    if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
    const std::filesystem::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write checkpoint " + path);
        out.write(kMagic, sizeof(kMagic));
        const uint32_t version = kVersion;
        char vbuf[4];
        for (int i = 0; i < 4; ++i) vbuf[i] = static_cast<char>((version >> (8 * i)) & 0xff);
        out.write(vbuf, 4);
        out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
        if (!out) throw IoError("short write on checkpoint " + path);
    }
    std::filesystem::rename(tmp, target);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    using namespace ckpt_detail;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < sizeof(kMagic) + 4) throw FormatError("checkpoint truncated");
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw FormatError("bad checkpoint magic (expected MGMAE1)");
    uint32_t version = 0;
    for (int i = 0; i < 4; ++i)
        version |= static_cast<uint32_t>(static_cast<uint8_t>(bytes[sizeof(kMagic) + static_cast<size_t>(i)]))
                   << (8 * i);
    if (version != kVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version));

    Reader r(std::vector<char>(bytes.begin() + sizeof(kMagic) + 4, bytes.end()));
    Checkpoint c;
    c.config = config_from_string(r.str());
    c.run_seed = r.u64();
    c.src_vocab = read_vocab(r);
    c.tgt_vocab = read_vocab(r);
    if (r.u8()) c.encoder = read_encoder(r);
    if (r.u8()) c.decoder = read_decoder(r);
    if (r.u8()) c.gmm = read_gmm(r);
    const uint64_t nf = r.u64();
    for (uint64_t i = 0; i < nf; ++i) c.filters.push_back(read_decoder(r));
    const uint64_t nr = r.u64();
    for (uint64_t i = 0; i < nr; ++i) c.representations.push_back(r.f64s());
    c.autoencoder_log = read_log(r);
    const uint64_t nl = r.u64();
    for (uint64_t i = 0; i < nl; ++i) c.filter_logs.push_back(read_log(r));
    if (!r.exhausted()) throw FormatError("checkpoint has trailing bytes");
    return c;
}

} // namespace mgmae
