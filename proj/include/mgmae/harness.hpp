#pragma once

// Experiment orchestration: the full pipeline (train autoencoder -> fit GMM
// -> train filters -> evaluate), the encoder-decoder baseline, the
// filter-count sweep and the latent-space scatter export.
//
// Reports are split into deterministic files (report.csv / report.txt,
// bit-identical across runs with the same config and seed) and timings.txt
// (wall clock, excluded from the determinism guarantee).

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "mgmae/checkpoint.hpp"
#include "mgmae/config.hpp"
#include "mgmae/data.hpp"
#include "mgmae/filterbank.hpp"
#include "mgmae/gmm.hpp"
#include "mgmae/metrics.hpp"
#include "mgmae/pca.hpp"
#include "mgmae/seq2seq.hpp"

namespace mgmae {

namespace harness_detail {

template <typename F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const std::exception& e) {
        throw Error("stage '" + name + "' failed: " + e.what());
    }
}

// Full-fidelity, locale-independent float formatting; shortest-precise is
// not needed, 17 significant digits round-trip doubles exactly.
inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline uint64_t fnv1a(const Rows& rows) {
    uint64_t h = 1469598103934665603ull;
    for (const auto& rowv : rows)
        for (double v : rowv) {
            uint64_t bits;
            std::memcpy(&bits, &v, 8);
            for (int i = 0; i < 8; ++i) {
                h ^= (bits >> (8 * i)) & 0xff;
                h *= 1099511628211ull;
            }
        }
    return h;
}

} // namespace harness_detail

// ---------------------------------------------------------------------------
// data loading
// ---------------------------------------------------------------------------

struct LoadedData {
    std::vector<SeqPair> train;
    std::vector<SeqPair> dev;
    Vocab src_vocab; // built on the training split; dev encodes unseen as UNK
    Vocab tgt_vocab;
    size_t skipped_lines = 0;
};

inline std::string resolve_data_path(const ExperimentConfig& cfg, const std::string& path) {
    if (path.empty() || std::filesystem::path(path).is_absolute()) return path;
    std::string dir = cfg.data_dir;
    if (dir.empty()) {
        const char* env = std::getenv("MGMAE_DATA_DIR");
        if (env) dir = env;
    }
    if (dir.empty()) return path;
    return (std::filesystem::path(dir) / path).string();
}

// Geo-query: two TSV files (train/dev), logical-form targets.
// Translation: either two plain TSV files, or a single file split
// first-10000/next-2000 after a seeded shuffle when dev_path is empty.
inline LoadedData load_task_data(const ExperimentConfig& cfg) {
    const bool logical = cfg.task == Task::geoquery;
    const std::string train_path = resolve_data_path(cfg, cfg.train_path);
    if (train_path.empty()) throw ConfigError("train_path is required");
    LoadedData data;
    if (!cfg.dev_path.empty()) {
        RawCorpus train_raw = read_tsv(train_path, cfg.task == Task::translation ? cfg.train_limit
                                                                                 : SIZE_MAX,
                                       logical);
        RawCorpus dev_raw = read_tsv(resolve_data_path(cfg, cfg.dev_path),
                                     cfg.task == Task::translation ? cfg.dev_limit : SIZE_MAX,
                                     logical);
        std::vector<std::vector<std::string>> src_side, tgt_side;
        for (const auto& [s, t] : train_raw.pairs) {
            src_side.push_back(s);
            tgt_side.push_back(t);
        }
        data.src_vocab = build_vocab(src_side);
        data.tgt_vocab = build_vocab(tgt_side);
        data.train = encode_raw(train_raw, data.src_vocab, data.tgt_vocab);
        data.dev = encode_raw(dev_raw, data.src_vocab, data.tgt_vocab);
        data.skipped_lines = train_raw.skipped_lines + dev_raw.skipped_lines;
    } else {
        // single-file mode: seeded shuffle, then train_limit / dev_limit split
        RawCorpus raw = read_tsv(train_path, SIZE_MAX, logical);
        Rng shuffle_rng = Rng(cfg.seed).fork(0x5411FF1Eull);
        std::vector<size_t> order(raw.pairs.size());
        std::iota(order.begin(), order.end(), size_t{0});
        shuffle_rng.shuffle(order);
        if (raw.pairs.size() < cfg.train_limit + cfg.dev_limit)
            throw ConfigError("file has " + std::to_string(raw.pairs.size()) +
                              " usable pairs, need " +
                              std::to_string(cfg.train_limit + cfg.dev_limit));
        RawCorpus train_raw, dev_raw;
        for (size_t i = 0; i < cfg.train_limit; ++i)
            train_raw.pairs.push_back(raw.pairs[order[i]]);
        for (size_t i = 0; i < cfg.dev_limit; ++i)
            dev_raw.pairs.push_back(raw.pairs[order[cfg.train_limit + i]]);
        std::vector<std::vector<std::string>> src_side, tgt_side;
        for (const auto& [s, t] : train_raw.pairs) {
            src_side.push_back(s);
            tgt_side.push_back(t);
        }
        data.src_vocab = build_vocab(src_side);
        data.tgt_vocab = build_vocab(tgt_side);
        data.train = encode_raw(train_raw, data.src_vocab, data.tgt_vocab);
        data.dev = encode_raw(dev_raw, data.src_vocab, data.tgt_vocab);
        data.skipped_lines = raw.skipped_lines;
    }
    if (data.train.empty()) throw ConfigError("empty training set after loading");
    if (data.dev.empty()) throw ConfigError("empty dev set after loading");
    return data;
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

struct EvalMetrics {
    double token_acc = 0.0;
    double denotation_proxy = 0.0; // exact-match PROXY, not true denotation
    double bleu_score = 0.0;
};

inline TokenSeq strip_eos(const TokenSeq& seq) {
    TokenSeq out;
    for (int t : seq) {
        if (t == EOS) break;
        out.push_back(t);
    }
    return out;
}

inline EvalMetrics evaluate_outputs(const std::vector<TokenSeq>& cands,
                                    const std::vector<TokenSeq>& refs, BpMode bp) {
    EvalMetrics m;
    m.token_acc = token_accuracy(cands, refs);
    m.denotation_proxy = denotation_match_proxy(cands, refs);
    m.bleu_score = bleu(cands, refs, bp);
    return m;
}

inline EvalMetrics evaluate_bank(const FilterBank& bank, const EncoderParams& enc,
                                 const std::vector<SeqPair>& dev, DecodeMode mode, int max_len,
                                 BpMode bp) {
    std::vector<TokenSeq> cands, refs;
    cands.reserve(dev.size());
    refs.reserve(dev.size());
    for (const auto& p : dev) {
        cands.push_back(mode == DecodeMode::hard ? decode_hard(bank, enc, p.src, max_len)
                                                 : decode_soft(bank, enc, p.src, max_len));
        refs.push_back(strip_eos(p.tgt));
    }
    return evaluate_outputs(cands, refs, bp);
}

inline EvalMetrics evaluate_decoder(const DecoderParams& dec, const EncoderParams& enc,
                                    const std::vector<SeqPair>& dev, int max_len, BpMode bp) {
    std::vector<TokenSeq> cands, refs;
    cands.reserve(dev.size());
    refs.reserve(dev.size());
    for (const auto& p : dev) {
        cands.push_back(greedy_decode(dec, encode(enc, p.src, nullptr), max_len));
        refs.push_back(strip_eos(p.tgt));
    }
    return evaluate_outputs(cands, refs, bp);
}

// ---------------------------------------------------------------------------
// per-seed pipeline
// ---------------------------------------------------------------------------

struct SeedResult {
    uint64_t seed = 0;
    EvalMetrics metrics;
    double silhouette_coeff = std::numeric_limits<double>::quiet_NaN(); // NaN when k == 1
    std::vector<size_t> cluster_sizes;
    std::string checkpoint_path;
    double train_autoencoder_s = 0.0;
    double train_filters_s = 0.0;
    double total_s = 0.0;
};

struct RunReport {
    std::vector<SeedResult> seeds;

    static double mean_of(const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    }
    // sample standard deviation; only defined for >= 2 seeds
    static double std_of(const std::vector<double>& v) {
        if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
        const double m = mean_of(v);
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return std::sqrt(s / static_cast<double>(v.size() - 1));
    }
    std::vector<double> tokens() const {
        std::vector<double> v;
        for (const auto& s : seeds) v.push_back(s.metrics.token_acc);
        return v;
    }
    std::vector<double> proxies() const {
        std::vector<double> v;
        for (const auto& s : seeds) v.push_back(s.metrics.denotation_proxy);
        return v;
    }
    std::vector<double> bleus() const {
        std::vector<double> v;
        for (const auto& s : seeds) v.push_back(s.metrics.bleu_score);
        return v;
    }
};

// MGMAE pipeline for one seed. RNG streams are forked off the per-run seed so
// every stage is independently reproducible.
inline SeedResult run_mgmae_seed(const ExperimentConfig& cfg, const LoadedData& data,
                                 uint64_t run_seed, const std::string& ckpt_path) {
    using harness_detail::stage;
    const auto t_start = std::chrono::steady_clock::now();
    SeedResult result;
    result.seed = run_seed;
    Rng master(run_seed);

    std::vector<TokenSeq> sources;
    sources.reserve(data.train.size());
    for (const auto& p : data.train) sources.push_back(p.src);

    const int E = cfg.embed_dim, H = cfg.hidden_dim;
    Rng enc_rng = master.fork(1);
    Rng dec_rng = master.fork(2);
    EncoderParams enc = EncoderParams::init(data.src_vocab.size(), E, H, enc_rng);
    DecoderParams ae_dec = DecoderParams::init(data.src_vocab.size(), E, H, dec_rng);

    TrainOptions ae_opts;
    ae_opts.epochs = cfg.epochs_resolved();
    ae_opts.lr = cfg.lr;
    ae_opts.dropout = cfg.dropout;
    ae_opts.seed = master.fork(3).seed();
    const auto t_ae = std::chrono::steady_clock::now();
    TrainLog ae_log = stage("train_autoencoder",
                            [&] { return train_autoencoder(enc, ae_dec, sources, ae_opts); });
    result.train_autoencoder_s = harness_detail::elapsed_s(t_ae);

    Rows reps = stage("extract_representations",
                      [&] { return extract_representations(enc, sources); });
    GmmModel gmm = stage("fit_gmm", [&] {
        return fit_em(reps, cfg.num_filters, master.fork(4).seed());
    });
    const auto parts = stage("partition", [&] { return partition(gmm, reps); });
    for (const auto& part : parts) result.cluster_sizes.push_back(part.size());
    for (size_t j = 0; j < parts.size(); ++j)
        if (parts[j].empty())
            std::fprintf(stderr, "warning: filter %zu has an empty partition\n", j);

    if (cfg.num_filters >= 2) {
        std::vector<int> labels(reps.size());
        for (size_t j = 0; j < parts.size(); ++j)
            for (int idx : parts[j]) labels[static_cast<size_t>(idx)] = static_cast<int>(j);
        bool degenerate = false;
        {
            std::vector<int> d(labels);
            std::sort(d.begin(), d.end());
            d.erase(std::unique(d.begin(), d.end()), d.end());
            degenerate = d.size() < 2;
        }
        if (!degenerate)
            result.silhouette_coeff =
                stage("silhouette", [&] { return silhouette(reps, labels); });
    }

    FilterBank bank = make_filter_bank(gmm, data.tgt_vocab.size(), E, H, master.fork(5).seed());
    TrainOptions f_opts = ae_opts;
    f_opts.seed = master.fork(6).seed();
    const auto t_f = std::chrono::steady_clock::now();
    auto filter_logs = stage("train_filters",
                             [&] { return train_filters(bank, enc, data.train, parts, f_opts); });
    result.train_filters_s = harness_detail::elapsed_s(t_f);

    const int max_len = cfg.max_len > 0 ? cfg.max_len : default_max_len(data.train);
    result.metrics = stage("evaluate", [&] {
        return evaluate_bank(bank, enc, data.dev, cfg.decode_mode, max_len, cfg.bp_mode);
    });

    if (!ckpt_path.empty()) {
        stage("checkpoint", [&] {
            Checkpoint c;
            c.config = cfg;
            c.run_seed = run_seed;
            c.src_vocab = data.src_vocab;
            c.tgt_vocab = data.tgt_vocab;
            c.encoder = enc;
            c.gmm = bank.gmm;
            c.filters = bank.filters;
            c.representations = reps;
            c.autoencoder_log = ae_log;
            c.filter_logs = filter_logs;
            save_checkpoint(c, ckpt_path);
            return 0;
        });
        result.checkpoint_path = ckpt_path;
    }
    result.total_s = harness_detail::elapsed_s(t_start);
    return result;
}

// Ordinary encoder-decoder baseline for one seed.
inline SeedResult run_baseline_seed(const ExperimentConfig& cfg, const LoadedData& data,
                                    uint64_t run_seed, const std::string& ckpt_path) {
    using harness_detail::stage;
    const auto t_start = std::chrono::steady_clock::now();
    SeedResult result;
    result.seed = run_seed;
    Rng master(run_seed);

    const int E = cfg.embed_dim, H = cfg.hidden_dim;
    Rng enc_rng = master.fork(1);
    Rng dec_rng = master.fork(2);
    EncoderParams enc = EncoderParams::init(data.src_vocab.size(), E, H, enc_rng);
    DecoderParams dec = DecoderParams::init(data.tgt_vocab.size(), E, H, dec_rng);

    TrainOptions opts;
    opts.epochs = cfg.epochs_resolved();
    opts.lr = cfg.lr;
    opts.dropout = cfg.dropout;
    opts.seed = master.fork(3).seed();
    const auto t_tr = std::chrono::steady_clock::now();
    TrainLog log = stage("train_encdec_baseline",
                         [&] { return train_encdec_baseline(enc, dec, data.train, opts); });
    result.train_autoencoder_s = harness_detail::elapsed_s(t_tr);

    const int max_len = cfg.max_len > 0 ? cfg.max_len : default_max_len(data.train);
    result.metrics = stage("evaluate", [&] {
        return evaluate_decoder(dec, enc, data.dev, max_len, cfg.bp_mode);
    });

    if (!ckpt_path.empty()) {
        stage("checkpoint", [&] {
            Checkpoint c;
            c.config = cfg;
            c.run_seed = run_seed;
            c.src_vocab = data.src_vocab;
            c.tgt_vocab = data.tgt_vocab;
            c.encoder = enc;
            c.decoder = dec;
            c.autoencoder_log = log;
            save_checkpoint(c, ckpt_path);
            return 0;
        });
        result.checkpoint_path = ckpt_path;
    }
    result.total_s = harness_detail::elapsed_s(t_start);
    return result;
}

// ---------------------------------------------------------------------------
// reports
// ---------------------------------------------------------------------------

inline void write_run_report(const RunReport& report, const ExperimentConfig& cfg,
                             const std::string& name) {
    using harness_detail::fmt;
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    const fs::path csv_path = fs::path(cfg.out_dir) / (name + "_report.csv");
    const fs::path txt_path = fs::path(cfg.out_dir) / (name + "_report.txt");
    const fs::path time_path = fs::path(cfg.out_dir) / (name + "_timings.txt");

    std::ofstream csv(csv_path, std::ios::trunc);
    if (!csv) throw IoError("cannot write " + csv_path.string());
    csv << "seed,k,decode_mode,token_accuracy,denotation_proxy,bleu,silhouette,cluster_sizes\n";
    auto cluster_str = [](const std::vector<size_t>& sizes) {
        std::string s;
        for (size_t i = 0; i < sizes.size(); ++i) {
            if (i) s += '|';
            s += std::to_string(sizes[i]);
        }
        return s;
    };
    for (const auto& s : report.seeds) {
        csv << s.seed << ',' << cfg.num_filters << ',' << to_string(cfg.decode_mode) << ','
            << fmt(s.metrics.token_acc) << ',' << fmt(s.metrics.denotation_proxy) << ','
            << fmt(s.metrics.bleu_score) << ','
            << (std::isnan(s.silhouette_coeff) ? "" : fmt(s.silhouette_coeff)) << ','
            << cluster_str(s.cluster_sizes) << '\n';
    }
    const auto tok = report.tokens(), prox = report.proxies(), bl = report.bleus();
    csv << "mean,,," << fmt(RunReport::mean_of(tok)) << ',' << fmt(RunReport::mean_of(prox))
        << ',' << fmt(RunReport::mean_of(bl)) << ",,\n";
    if (report.seeds.size() >= 2)
        csv << "std,,," << fmt(RunReport::std_of(tok)) << ',' << fmt(RunReport::std_of(prox))
            << ',' << fmt(RunReport::std_of(bl)) << ",,\n";

    std::ofstream txt(txt_path, std::ios::trunc);
    txt << "task: " << to_string(cfg.task) << "  filters: " << cfg.num_filters
        << "  decode: " << to_string(cfg.decode_mode) << "  seeds: " << report.seeds.size()
        << "\n";
    txt << "note: denotation is an exact-match proxy, not knowledge-base execution\n\n";
    for (const auto& s : report.seeds) {
        txt << "seed " << s.seed << ": token=" << fmt(s.metrics.token_acc)
            << " denotation(proxy)=" << fmt(s.metrics.denotation_proxy)
            << " bleu=" << fmt(s.metrics.bleu_score);
        if (!std::isnan(s.silhouette_coeff)) txt << " silhouette=" << fmt(s.silhouette_coeff);
        if (!s.cluster_sizes.empty()) txt << " clusters=" << cluster_str(s.cluster_sizes);
        txt << "\n";
    }
    txt << "\nmean: token=" << fmt(RunReport::mean_of(tok))
        << " denotation(proxy)=" << fmt(RunReport::mean_of(prox))
        << " bleu=" << fmt(RunReport::mean_of(bl)) << "\n";
    if (report.seeds.size() >= 2)
        txt << "std:  token=" << fmt(RunReport::std_of(tok))
            << " denotation(proxy)=" << fmt(RunReport::std_of(prox))
            << " bleu=" << fmt(RunReport::std_of(bl)) << "\n";

    std::ofstream times(time_path, std::ios::trunc);
    for (const auto& s : report.seeds)
        times << "seed " << s.seed << ": autoencoder_or_train=" << fmt(s.train_autoencoder_s)
              << "s filters=" << fmt(s.train_filters_s) << "s total=" << fmt(s.total_s)
              << "s\n";
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

inline RunReport cmd_run(const ExperimentConfig& cfg) {
    using harness_detail::stage;
    if (cfg.num_filters < 1) throw ConfigError("num_filters must be >= 1");
    const LoadedData data = stage("load_data", [&] { return load_task_data(cfg); });
    std::fprintf(stderr, "loaded %zu train / %zu dev pairs (skipped %zu lines)\n",
                 data.train.size(), data.dev.size(), data.skipped_lines);
    RunReport report;
    Rng master(cfg.seed);
    for (int i = 0; i < cfg.num_seeds; ++i) {
        const uint64_t run_seed = master.fork(static_cast<uint64_t>(i)).seed();
        const std::string ckpt = (std::filesystem::path(cfg.out_dir) /
                                  ("run_" + to_string(cfg.task) + "_k" +
                                   std::to_string(cfg.num_filters) + "_seed" + std::to_string(i) +
                                   ".ckpt"))
                                     .string();
        std::filesystem::create_directories(cfg.out_dir);
        report.seeds.push_back(run_mgmae_seed(cfg, data, run_seed, ckpt));
    }
    write_run_report(report, cfg, "run_" + to_string(cfg.task) + "_k" +
                                      std::to_string(cfg.num_filters));
    return report;
}

inline RunReport cmd_baseline(const ExperimentConfig& cfg) {
    using harness_detail::stage;
    const LoadedData data = stage("load_data", [&] { return load_task_data(cfg); });
    std::fprintf(stderr, "loaded %zu train / %zu dev pairs (skipped %zu lines)\n",
                 data.train.size(), data.dev.size(), data.skipped_lines);
    RunReport report;
    Rng master(cfg.seed);
    for (int i = 0; i < cfg.num_seeds; ++i) {
        const uint64_t run_seed = master.fork(static_cast<uint64_t>(i)).seed();
        const std::string ckpt = (std::filesystem::path(cfg.out_dir) /
                                  ("baseline_" + to_string(cfg.task) + "_seed" +
                                   std::to_string(i) + ".ckpt"))
                                     .string();
        std::filesystem::create_directories(cfg.out_dir);
        report.seeds.push_back(run_baseline_seed(cfg, data, run_seed, ckpt));
    }
    write_run_report(report, cfg, "baseline_" + to_string(cfg.task));
    return report;
}

struct SweepRow {
    int k = 0;
    double silhouette_mean = 0.0;
    double token_mean = 0.0;
    double denotation_proxy_mean = 0.0;
    double bleu_mean = 0.0;
};

// One autoencoder per seed, reused across every k (representations identical
// across rows by construction; the hash is recorded for verification).
inline std::vector<SweepRow> cmd_sweep_filters(const ExperimentConfig& cfg,
                                               const std::vector<int>& k_range) {
    using harness_detail::stage;
    if (k_range.empty()) throw ConfigError("sweep: empty k range");
    const LoadedData data = stage("load_data", [&] { return load_task_data(cfg); });
    std::fprintf(stderr, "loaded %zu train / %zu dev pairs\n", data.train.size(),
                 data.dev.size());

    std::vector<TokenSeq> sources;
    for (const auto& p : data.train) sources.push_back(p.src);
    const int E = cfg.embed_dim, H = cfg.hidden_dim;
    const int max_len = cfg.max_len > 0 ? cfg.max_len : default_max_len(data.train);

    struct Cell {
        double silhouette = 0.0, token = 0.0, proxy = 0.0, bleu_v = 0.0;
    };
    std::vector<std::vector<Cell>> cells(k_range.size());
    Rng master(cfg.seed);
    for (int i = 0; i < cfg.num_seeds; ++i) {
        const uint64_t run_seed = master.fork(static_cast<uint64_t>(i)).seed();
        Rng seed_rng(run_seed);
        Rng enc_rng = seed_rng.fork(1);
        Rng dec_rng = seed_rng.fork(2);
        EncoderParams enc = EncoderParams::init(data.src_vocab.size(), E, H, enc_rng);
        DecoderParams ae_dec = DecoderParams::init(data.src_vocab.size(), E, H, dec_rng);
        TrainOptions ae_opts;
        ae_opts.epochs = cfg.epochs_resolved();
        ae_opts.lr = cfg.lr;
        ae_opts.dropout = cfg.dropout;
        ae_opts.seed = seed_rng.fork(3).seed();
        TrainLog ae_log = stage("train_autoencoder",
                                [&] { return train_autoencoder(enc, ae_dec, sources, ae_opts); });
        const Rows reps = extract_representations(enc, sources);
        const uint64_t rep_hash = harness_detail::fnv1a(reps);
        std::fprintf(stderr, "seed %d: representation hash %016llx (shared across k)\n", i,
                     static_cast<unsigned long long>(rep_hash));

        for (size_t ki = 0; ki < k_range.size(); ++ki) {
            const int k = k_range[ki];
            if (k < 2) throw ConfigError("sweep: k must be >= 2 (silhouette undefined at 1)");
            GmmModel gmm = stage("fit_gmm", [&] {
                return fit_em(reps, k, seed_rng.fork(400 + static_cast<uint64_t>(k)).seed());
            });
            const auto parts = partition(gmm, reps);
            std::vector<int> labels(reps.size());
            for (size_t j = 0; j < parts.size(); ++j)
                for (int idx : parts[j]) labels[static_cast<size_t>(idx)] = static_cast<int>(j);
            Cell cell;
            {
                std::vector<int> d(labels);
                std::sort(d.begin(), d.end());
                d.erase(std::unique(d.begin(), d.end()), d.end());
                cell.silhouette = d.size() >= 2 ? silhouette(reps, labels) : 0.0;
            }
            FilterBank bank = make_filter_bank(gmm, data.tgt_vocab.size(), E, H,
                                               seed_rng.fork(500 + static_cast<uint64_t>(k)).seed());
            TrainOptions f_opts = ae_opts;
            f_opts.seed = seed_rng.fork(600 + static_cast<uint64_t>(k)).seed();
            auto filter_logs = stage("train_filters", [&] {
                return train_filters(bank, enc, data.train, parts, f_opts);
            });
            const EvalMetrics m = stage("evaluate", [&] {
                return evaluate_bank(bank, enc, data.dev, cfg.decode_mode, max_len, cfg.bp_mode);
            });
            cell.token = m.token_acc;
            cell.proxy = m.denotation_proxy;
            cell.bleu_v = m.bleu_score;
            cells[ki].push_back(cell);

            const std::string ckpt =
                (std::filesystem::path(cfg.out_dir) /
                 ("sweep_" + to_string(cfg.task) + "_k" + std::to_string(k) + "_seed" +
                  std::to_string(i) + ".ckpt"))
                    .string();
            Checkpoint c;
            c.config = cfg;
            c.config.num_filters = k;
            c.run_seed = run_seed;
            c.src_vocab = data.src_vocab;
            c.tgt_vocab = data.tgt_vocab;
            c.encoder = enc;
            c.gmm = bank.gmm;
            c.filters = bank.filters;
            c.representations = reps;
            c.autoencoder_log = ae_log;
            c.filter_logs = filter_logs;
            save_checkpoint(c, ckpt);
        }
    }

    std::vector<SweepRow> rows;
    for (size_t ki = 0; ki < k_range.size(); ++ki) {
        SweepRow r;
        r.k = k_range[ki];
        for (const auto& c : cells[ki]) {
            r.silhouette_mean += c.silhouette;
            r.token_mean += c.token;
            r.denotation_proxy_mean += c.proxy;
            r.bleu_mean += c.bleu_v;
        }
        const double n = static_cast<double>(cells[ki].size());
        r.silhouette_mean /= n;
        r.token_mean /= n;
        r.denotation_proxy_mean /= n;
        r.bleu_mean /= n;
        rows.push_back(r);
    }

    using harness_detail::fmt;
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream csv(std::filesystem::path(cfg.out_dir) /
                          ("sweep_" + to_string(cfg.task) + ".csv"),
                      std::ios::trunc);
    csv << "k,silhouette,token,denotation-proxy,BLEU\n";
    for (const auto& r : rows)
        csv << r.k << ',' << fmt(r.silhouette_mean) << ',' << fmt(r.token_mean) << ','
            << fmt(r.denotation_proxy_mean) << ',' << fmt(r.bleu_mean) << '\n';
    return rows;
}

// ---------------------------------------------------------------------------
// latent-space scatter export (CSV + SVG)
// ---------------------------------------------------------------------------

inline void export_latent_scatter(const std::string& checkpoint_path,
                                  const std::string& out_prefix) {
    const Checkpoint c = load_checkpoint(checkpoint_path);
    if (c.representations.size() < 2)
        throw ContractError("export_latent_scatter: need at least 2 samples");
    if (!c.gmm) throw ContractError("export_latent_scatter: checkpoint has no GMM");

    const Pca2 p = pca_top2(c.representations);
    const Rows proj = pca_project2(p, c.representations);
    std::vector<int> labels;
    labels.reserve(c.representations.size());
    for (const auto& r : c.representations) labels.push_back(assign(*c.gmm, r));

    using harness_detail::fmt;
    const std::filesystem::path prefix(out_prefix);
    if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());
    std::ofstream csv(out_prefix + ".csv", std::ios::trunc);
    if (!csv) throw IoError("cannot write " + out_prefix + ".csv");
    csv << "x,y,cluster\n";
    for (size_t i = 0; i < proj.size(); ++i)
        csv << fmt(proj[i][0]) << ',' << fmt(proj[i][1]) << ',' << labels[i] << '\n';

    // bounding box with a margin; degenerate axes get a unit span
    double xmin = proj[0][0], xmax = proj[0][0], ymin = proj[0][1], ymax = proj[0][1];
    for (const auto& q : proj) {
        xmin = std::min(xmin, q[0]);
        xmax = std::max(xmax, q[0]);
        ymin = std::min(ymin, q[1]);
        ymax = std::max(ymax, q[1]);
    }
    if (xmax - xmin < 1e-12) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if (ymax - ymin < 1e-12) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    const double W = 640.0, Hgt = 640.0, margin = 24.0;
    std::ofstream svg(out_prefix + ".svg", std::ios::trunc);
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << Hgt
        << "\" viewBox=\"0 0 " << W << " " << Hgt << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (size_t i = 0; i < proj.size(); ++i) {
        const double sx = margin + (proj[i][0] - xmin) / (xmax - xmin) * (W - 2 * margin);
        const double sy = Hgt - margin - (proj[i][1] - ymin) / (ymax - ymin) * (Hgt - 2 * margin);
        svg << "<circle cx=\"" << fmt(sx) << "\" cy=\"" << fmt(sy) << "\" r=\"3\" fill=\""
            << palette[static_cast<size_t>(labels[i]) % 8] << "\" fill-opacity=\"0.7\"/>\n";
    }
    svg << "</svg>\n";
}

// ---------------------------------------------------------------------------
// standalone evaluation of a checkpoint
// ---------------------------------------------------------------------------

inline EvalMetrics cmd_eval(const std::string& checkpoint_path, const ExperimentConfig& overrides,
                            bool have_decode_mode, DecodeMode decode_mode) {
    Checkpoint c = load_checkpoint(checkpoint_path);
    ExperimentConfig cfg = c.config;
    if (!overrides.train_path.empty()) cfg.train_path = overrides.train_path;
    if (!overrides.dev_path.empty()) cfg.dev_path = overrides.dev_path;
    if (!overrides.data_dir.empty()) cfg.data_dir = overrides.data_dir;
    cfg.seed = c.config.seed; // the split (translation mode) must match training
    const DecodeMode mode = have_decode_mode ? decode_mode : cfg.decode_mode;

    const LoadedData data = load_task_data(cfg);
    if (!c.encoder) throw FormatError("checkpoint has no encoder");
    const int max_len = cfg.max_len > 0 ? cfg.max_len : default_max_len(data.train);
    if (!c.filters.empty() && c.gmm) {
        FilterBank bank;
        bank.gmm = *c.gmm;
        bank.filters = c.filters;
        return evaluate_bank(bank, *c.encoder, data.dev, mode, max_len, cfg.bp_mode);
    }
    if (c.decoder) return evaluate_decoder(*c.decoder, *c.encoder, data.dev, max_len, cfg.bp_mode);
    throw FormatError("checkpoint has neither filters nor a decoder");
}

} // namespace mgmae
