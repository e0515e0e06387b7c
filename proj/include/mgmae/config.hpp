#pragma once

// Experiment configuration: defaults mirror the experimental settings
// (embedding 150, hidden 200, lr 0.001, dropout 0.2, 10 epochs for Geo-query
// and 20 for translation, five seeds). Loaded from a key=value file with
// flag overrides on top.

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "mgmae/error.hpp"
#include "mgmae/metrics.hpp"

namespace mgmae {

enum class Task { geoquery, translation };
enum class DecodeMode { hard, soft };

struct ExperimentConfig {
    Task task = Task::geoquery;
    std::string train_path;
    std::string dev_path;
    std::string data_dir; // empty -> $MGMAE_DATA_DIR if set
    std::string out_dir = "runs";

    int embed_dim = 150;
    int hidden_dim = 200;
    double lr = 0.001;
    double dropout = 0.2;
    int epochs = -1; // -1 -> task default (10 geoquery / 20 translation)
    int num_filters = 2;
    DecodeMode decode_mode = DecodeMode::hard;
    BpMode bp_mode = BpMode::standard;
    uint64_t seed = 1;
    int num_seeds = 5;

    size_t train_limit = 10000; // translation split sizes
    size_t dev_limit = 2000;
    int max_len = -1; // -1 -> 1.5x longest training target, min 20

    int epochs_resolved() const {
        if (epochs >= 0) return epochs;
        return task == Task::geoquery ? 10 : 20;
    }
};

inline std::string to_string(Task t) { return t == Task::geoquery ? "geoquery" : "translation"; }
inline std::string to_string(DecodeMode m) { return m == DecodeMode::hard ? "hard" : "soft"; }
inline std::string to_string(BpMode m) {
    return m == BpMode::standard ? "standard" : "paper-exact";
}

inline Task task_from_string(const std::string& s) {
    if (s == "geoquery") return Task::geoquery;
    if (s == "translation") return Task::translation;
    throw ConfigError("unknown task: " + s);
}

inline DecodeMode decode_mode_from_string(const std::string& s) {
    if (s == "hard") return DecodeMode::hard;
    if (s == "soft") return DecodeMode::soft;
    throw ConfigError("unknown decode mode: " + s);
}

inline BpMode bp_mode_from_string(const std::string& s) {
    if (s == "standard") return BpMode::standard;
    if (s == "paper-exact" || s == "paper_exact") return BpMode::paper_exact;
    throw ConfigError("unknown bp mode: " + s);
}

inline void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                               const std::string& value) {
    try {
        if (key == "task") cfg.task = task_from_string(value);
        else if (key == "train_path") cfg.train_path = value;
        else if (key == "dev_path") cfg.dev_path = value;
        else if (key == "data_dir") cfg.data_dir = value;
        else if (key == "out_dir") cfg.out_dir = value;
        else if (key == "embed_dim") cfg.embed_dim = std::stoi(value);
        else if (key == "hidden_dim") cfg.hidden_dim = std::stoi(value);
        else if (key == "lr") cfg.lr = std::stod(value);
        else if (key == "dropout") cfg.dropout = std::stod(value);
        else if (key == "epochs") cfg.epochs = std::stoi(value);
        else if (key == "num_filters") cfg.num_filters = std::stoi(value);
        else if (key == "decode_mode") cfg.decode_mode = decode_mode_from_string(value);
        else if (key == "bp_mode") cfg.bp_mode = bp_mode_from_string(value);
        else if (key == "seed") cfg.seed = std::stoull(value);
        else if (key == "num_seeds") cfg.num_seeds = std::stoi(value);
        else if (key == "train_limit") cfg.train_limit = std::stoull(value);
        else if (key == "dev_limit") cfg.dev_limit = std::stoull(value);
        else if (key == "max_len") cfg.max_len = std::stoi(value);
        else throw ConfigError("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
        throw ConfigError("bad value for " + key + ": " + value);
    } catch (const std::out_of_range&) {
        throw ConfigError("bad value for " + key + ": " + value);
    }
}

// key = value lines; '#' starts a comment; blank lines ignored.
inline ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    ExperimentConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("malformed config line " + std::to_string(lineno) + ": " + line);
        apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

inline std::string config_to_string(const ExperimentConfig& c) {
    std::ostringstream os;
    os << "task = " << to_string(c.task) << "\n"
       << "train_path = " << c.train_path << "\n"
       << "dev_path = " << c.dev_path << "\n"
       << "data_dir = " << c.data_dir << "\n"
       << "out_dir = " << c.out_dir << "\n"
       << "embed_dim = " << c.embed_dim << "\n"
       << "hidden_dim = " << c.hidden_dim << "\n"
       << "lr = " << c.lr << "\n"
       << "dropout = " << c.dropout << "\n"
       << "epochs = " << c.epochs << "\n"
       << "num_filters = " << c.num_filters << "\n"
       << "decode_mode = " << to_string(c.decode_mode) << "\n"
       << "bp_mode = " << to_string(c.bp_mode) << "\n"
       << "seed = " << c.seed << "\n"
       << "num_seeds = " << c.num_seeds << "\n"
       << "train_limit = " << c.train_limit << "\n"
       << "dev_limit = " << c.dev_limit << "\n"
       << "max_len = " << c.max_len << "\n";
    return os.str();
}

inline ExperimentConfig config_from_string(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (value.empty()) continue;
        apply_config_entry(cfg, key, value);
    }
    return cfg;
}

} // namespace mgmae
