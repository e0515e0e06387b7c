#pragma once

// Tokenization, vocabularies and the two dataset loaders. Loaders are
// deterministic given file bytes; malformed lines are skipped and counted.

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mgmae/error.hpp"

namespace mgmae {

// Special token ids are fixed across the whole toolkit.
constexpr int PAD = 0;
constexpr int SOS = 1;
constexpr int EOS = 2;
constexpr int UNK = 3;

using TokenSeq = std::vector<int>;

// Lowercase, isolate the punctuation marks . , ! ? ' " and split on
// whitespace. "" tokenizes to [].
inline std::vector<std::string> tokenize(std::string_view text) {
    static constexpr std::string_view punct = ".,!?'\"";
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    };
    for (char ch : text) {
        unsigned char u = static_cast<unsigned char>(ch);
        if (std::isspace(u)) {
            flush();
        } else if (punct.find(ch) != std::string_view::npos) {
            flush();
            out.emplace_back(1, ch);
        } else {
            cur.push_back(static_cast<char>(std::tolower(u)));
        }
    }
    flush();
    return out;
}

// Logical-form tokenizer for Geo-query targets: parentheses and commas are
// their own tokens, whitespace separates. Case is preserved (Prolog-style
// variables are case-sensitive).
inline std::vector<std::string> tokenize_logical(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    };
    for (char ch : text) {
        unsigned char u = static_cast<unsigned char>(ch);
        if (std::isspace(u)) {
            flush();
        } else if (ch == '(' || ch == ')' || ch == ',') {
            flush();
            out.emplace_back(1, ch);
        } else {
            cur.push_back(ch);
        }
    }
    flush();
    return out;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string s;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) s += ' ';
        s += tokens[i];
    }
    return s;
}

// ---------------------------------------------------------------------------
// vocabulary
// ---------------------------------------------------------------------------

class Vocab {
public:
    Vocab() {
        for (const char* s : {"<pad>", "<sos>", "<eos>", "<unk>"}) add(s);
    }

    int add(const std::string& token) {
        auto it = to_id_.find(token);
        if (it != to_id_.end()) return it->second;
        const int id = static_cast<int>(tokens_.size());
        to_id_.emplace(token, id);
        tokens_.push_back(token);
        return id;
    }

    // Unknown tokens map to UNK.
    int id(const std::string& token) const {
        auto it = to_id_.find(token);
        return it == to_id_.end() ? UNK : it->second;
    }

    bool contains(const std::string& token) const { return to_id_.count(token) > 0; }

    const std::string& token(int id) const {
        if (id < 0 || static_cast<size_t>(id) >= tokens_.size())
            throw VocabError("token id " + std::to_string(id) + " out of range");
        return tokens_[static_cast<size_t>(id)];
    }

    int size() const { return static_cast<int>(tokens_.size()); }
    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::unordered_map<std::string, int> to_id_;
    std::vector<std::string> tokens_;
};

// First-occurrence insertion order; tokens below min_count map to UNK.
inline Vocab build_vocab(const std::vector<std::vector<std::string>>& sentences,
                         int min_count = 1) {
    std::unordered_map<std::string, int> counts;
    std::vector<std::string> order;
    for (const auto& sent : sentences)
        for (const auto& tok : sent) {
            if (counts[tok]++ == 0) order.push_back(tok);
        }
    Vocab v;
    for (const auto& tok : order)
        if (counts[tok] >= min_count) v.add(tok);
    return v;
}

inline TokenSeq encode_tokens(const std::vector<std::string>& tokens, const Vocab& vocab,
                              bool append_eos = true) {
    TokenSeq ids;
    ids.reserve(tokens.size() + 1);
    for (const auto& t : tokens) ids.push_back(vocab.id(t));
    if (append_eos) ids.push_back(EOS);
    return ids;
}

inline std::vector<std::string> decode_tokens(const TokenSeq& ids, const Vocab& vocab) {
    std::vector<std::string> out;
    for (int id : ids) {
        if (id == EOS) break;
        out.push_back(vocab.token(id));
    }
    return out;
}

// ---------------------------------------------------------------------------
// corpora
// ---------------------------------------------------------------------------

struct SeqPair {
    TokenSeq src;
    TokenSeq tgt;
};

struct RawCorpus {
    std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> pairs;
    size_t skipped_lines = 0;
};

struct ParallelCorpus {
    std::vector<SeqPair> pairs;
    Vocab src_vocab;
    Vocab tgt_vocab;
    size_t skipped_lines = 0;

    size_t size() const { return pairs.size(); }
};

// Reads "source TAB target" lines; extra columns ignored, malformed lines
// (no tab or an empty side) skipped and counted.
inline RawCorpus read_tsv(const std::string& path, size_t limit, bool logical_target) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    RawCorpus raw;
    std::string line;
    while (raw.pairs.size() < limit && std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            ++raw.skipped_lines;
            continue;
        }
        std::string src_text = line.substr(0, tab);
        std::string tgt_text = line.substr(tab + 1);
        const size_t tab2 = tgt_text.find('\t');
        if (tab2 != std::string::npos) tgt_text.resize(tab2);
        auto src = tokenize(src_text);
        auto tgt = logical_target ? tokenize_logical(tgt_text) : tokenize(tgt_text);
        if (src.empty() || tgt.empty()) {
            ++raw.skipped_lines;
            continue;
        }
        raw.pairs.emplace_back(std::move(src), std::move(tgt));
    }
    return raw;
}

inline std::vector<SeqPair> encode_raw(const RawCorpus& raw, const Vocab& src_vocab,
                                       const Vocab& tgt_vocab) {
    std::vector<SeqPair> pairs;
    pairs.reserve(raw.pairs.size());
    for (const auto& [src, tgt] : raw.pairs)
        pairs.push_back({encode_tokens(src, src_vocab), encode_tokens(tgt, tgt_vocab)});
    return pairs;
}

inline ParallelCorpus corpus_from_raw(const RawCorpus& raw, int min_count = 1) {
    std::vector<std::vector<std::string>> src_side, tgt_side;
    src_side.reserve(raw.pairs.size());
    tgt_side.reserve(raw.pairs.size());
    for (const auto& [src, tgt] : raw.pairs) {
        src_side.push_back(src);
        tgt_side.push_back(tgt);
    }
    ParallelCorpus corpus;
    corpus.src_vocab = build_vocab(src_side, min_count);
    corpus.tgt_vocab = build_vocab(tgt_side, min_count);
    corpus.pairs = encode_raw(raw, corpus.src_vocab, corpus.tgt_vocab);
    corpus.skipped_lines = raw.skipped_lines;
    return corpus;
}

inline ParallelCorpus load_tsv_pairs(const std::string& path, size_t limit = SIZE_MAX) {
    return corpus_from_raw(read_tsv(path, limit, /*logical_target=*/false));
}

inline ParallelCorpus load_geoquery(const std::string& path) {
    return corpus_from_raw(read_tsv(path, SIZE_MAX, /*logical_target=*/true));
}

} // namespace mgmae
