// mgmae command-line harness: run the full pipeline, the encoder-decoder
// baseline, filter-count sweeps, latent-space scatter export and checkpoint
// evaluation. `synth-data` writes small generated datasets in the expected
// TSV formats for demos and smoke runs.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "mgmae/harness.hpp"

namespace {

using namespace mgmae;

void add_config_flags(CLI::App* cmd, ExperimentConfig& cfg, std::string& config_path) {
    cmd->add_option("--config", config_path, "key=value config file (flags override)");
    cmd->add_option("--task", [&cfg](const std::vector<std::string>& v) {
        cfg.task = task_from_string(v.front());
        return true;
    }, "geoquery | translation");
    cmd->add_option("--train", cfg.train_path, "training TSV");
    cmd->add_option("--dev", cfg.dev_path,
                    "dev TSV (translation: omit to split one file 10000/2000)");
    cmd->add_option("--data-dir", cfg.data_dir, "base dir for relative paths ($MGMAE_DATA_DIR)");
    cmd->add_option("--out-dir", cfg.out_dir, "reports and checkpoints directory");
    cmd->add_option("--embed-dim", cfg.embed_dim, "word embedding dimension");
    cmd->add_option("--hidden-dim", cfg.hidden_dim, "LSTM hidden (= latent) dimension");
    cmd->add_option("--lr", cfg.lr, "learning rate");
    cmd->add_option("--dropout", cfg.dropout, "dropout rate");
    cmd->add_option("--epochs", cfg.epochs, "training epochs (-1: task default)");
    cmd->add_option("-k,--filters", cfg.num_filters, "number of Gaussian components / filters");
    cmd->add_option("--decode-mode", [&cfg](const std::vector<std::string>& v) {
        cfg.decode_mode = decode_mode_from_string(v.front());
        return true;
    }, "hard | soft");
    cmd->add_option("--bp-mode", [&cfg](const std::vector<std::string>& v) {
        cfg.bp_mode = bp_mode_from_string(v.front());
        return true;
    }, "standard | paper-exact");
    cmd->add_option("--seed", cfg.seed, "master seed");
    cmd->add_option("--num-seeds", cfg.num_seeds, "seeds per configuration");
    cmd->add_option("--train-limit", cfg.train_limit, "translation training pairs");
    cmd->add_option("--dev-limit", cfg.dev_limit, "translation dev pairs");
    cmd->add_option("--max-len", cfg.max_len, "decode cap (-1: 1.5x longest target, min 20)");
}

ExperimentConfig finalize_config(const ExperimentConfig& flag_cfg, const std::string& config_path,
                                 const CLI::App* cmd) {
    if (config_path.empty()) return flag_cfg;
    ExperimentConfig cfg = parse_config_file(config_path);
    // re-apply only the flags the user actually passed
    auto passed = [cmd](const std::string& name) { return cmd->count(name) > 0; };
    if (passed("--task")) cfg.task = flag_cfg.task;
    if (passed("--train")) cfg.train_path = flag_cfg.train_path;
    if (passed("--dev")) cfg.dev_path = flag_cfg.dev_path;
    if (passed("--data-dir")) cfg.data_dir = flag_cfg.data_dir;
    if (passed("--out-dir")) cfg.out_dir = flag_cfg.out_dir;
    if (passed("--embed-dim")) cfg.embed_dim = flag_cfg.embed_dim;
    if (passed("--hidden-dim")) cfg.hidden_dim = flag_cfg.hidden_dim;
    if (passed("--lr")) cfg.lr = flag_cfg.lr;
    if (passed("--dropout")) cfg.dropout = flag_cfg.dropout;
    if (passed("--epochs")) cfg.epochs = flag_cfg.epochs;
    if (passed("--filters") || passed("-k")) cfg.num_filters = flag_cfg.num_filters;
    if (passed("--decode-mode")) cfg.decode_mode = flag_cfg.decode_mode;
    if (passed("--bp-mode")) cfg.bp_mode = flag_cfg.bp_mode;
    if (passed("--seed")) cfg.seed = flag_cfg.seed;
    if (passed("--num-seeds")) cfg.num_seeds = flag_cfg.num_seeds;
    if (passed("--train-limit")) cfg.train_limit = flag_cfg.train_limit;
    if (passed("--dev-limit")) cfg.dev_limit = flag_cfg.dev_limit;
    if (passed("--max-len")) cfg.max_len = flag_cfg.max_len;
    return cfg;
}

void print_report(const RunReport& report) {
    const auto tok = report.tokens(), prox = report.proxies(), bl = report.bleus();
    std::printf("seeds: %zu\n", report.seeds.size());
    std::printf("token accuracy:      mean %.3f\n", RunReport::mean_of(tok));
    std::printf("denotation (proxy):  mean %.3f\n", RunReport::mean_of(prox));
    std::printf("BLEU:                mean %.3f\n", RunReport::mean_of(bl));
    if (report.seeds.size() >= 2)
        std::printf("std: token %.3f  denotation(proxy) %.3f  BLEU %.3f\n",
                    RunReport::std_of(tok), RunReport::std_of(prox), RunReport::std_of(bl));
}

// ---------------------------------------------------------------------------
// synthetic demo datasets
// ---------------------------------------------------------------------------

void write_synth_geoquery(const std::string& out_dir, uint64_t seed) {
    static const char* states[] = {
        "alabama", "alaska", "arizona", "arkansas", "california", "colorado", "connecticut",
        "delaware", "florida", "georgia", "hawaii", "idaho", "illinois", "indiana", "iowa",
        "kansas", "kentucky", "louisiana", "maine", "maryland", "massachusetts", "michigan",
        "minnesota", "mississippi", "missouri", "montana", "nebraska", "nevada", "ohio",
        "oklahoma", "oregon", "pennsylvania", "tennessee", "texas", "utah", "vermont",
        "virginia", "washington", "wisconsin", "wyoming"};
    struct Template {
        const char* question;
        const char* logical;
    };
    static const Template templates[] = {
        {"what is the capital of %s ?", "answer(capital(stateid(%s)))"},
        {"what is the population of %s ?", "answer(population(stateid(%s)))"},
        {"which states border %s ?", "answer(state(next_to_2(stateid(%s))))"},
        {"how large is %s ?", "answer(size(stateid(%s)))"},
        {"name the rivers in %s .", "answer(river(loc_2(stateid(%s))))"},
        {"what is the highest point in %s ?", "answer(highest(place(loc_2(stateid(%s)))))"},
        {"how many cities are in %s ?", "answer(count(city(loc_2(stateid(%s)))))"},
        {"what is the area of %s ?", "answer(area(stateid(%s)))"},
        {"what rivers flow through %s ?", "answer(river(traverse_2(stateid(%s))))"},
        {"what is the lowest point in %s ?", "answer(lowest(place(loc_2(stateid(%s)))))"},
        {"what is the density of %s ?", "answer(density(stateid(%s)))"},
        {"name the major cities in %s .", "answer(major(city(loc_2(stateid(%s)))))"},
        {"how many people live in %s ?", "answer(population(stateid(%s)))"},
        {"what states are next to %s ?", "answer(state(next_to_2(stateid(%s))))"},
        {"what is the biggest city in %s ?", "answer(largest(city(loc_2(stateid(%s)))))"}};
    std::vector<std::pair<std::string, std::string>> pairs;
    char qbuf[160], lbuf[160];
    for (const auto& t : templates)
        for (const char* s : states) {
            std::snprintf(qbuf, sizeof(qbuf), t.question, s);
            std::snprintf(lbuf, sizeof(lbuf), t.logical, s);
            pairs.emplace_back(qbuf, lbuf);
        }
    Rng rng(seed);
    rng.shuffle(pairs);
    std::filesystem::create_directories(out_dir);
    const auto train_path = std::filesystem::path(out_dir) / "geo_train.tsv";
    const auto dev_path = std::filesystem::path(out_dir) / "geo_dev.tsv";
    std::ofstream train(train_path, std::ios::trunc);
    std::ofstream dev(dev_path, std::ios::trunc);
    for (size_t i = 0; i < 480; ++i) train << pairs[i].first << '\t' << pairs[i].second << '\n';
    for (size_t i = 480; i < 600; ++i) dev << pairs[i].first << '\t' << pairs[i].second << '\n';
    std::printf("wrote %s (480 pairs) and %s (120 pairs)\n", train_path.c_str(),
                dev_path.c_str());
}

void write_synth_translation(const std::string& out_dir, uint64_t seed, size_t count) {
    struct Subject {
        const char* en;
        const char* fr;
        int person; // conjugation row
    };
    static const Subject subjects[] = {{"i", "je", 0},    {"you", "tu", 1},  {"he", "il", 2},
                                       {"she", "elle", 2}, {"we", "nous", 3}, {"they", "ils", 4}};
    struct Verb {
        const char* en;
        const char* fr[5]; // je, tu, il/elle, nous, ils
    };
    static const Verb verbs[] = {
        {"see", {"vois", "vois", "voit", "voyons", "voient"}},
        {"like", {"aime", "aimes", "aime", "aimons", "aiment"}},
        {"have", {"ai", "as", "a", "avons", "ont"}},
        {"want", {"veux", "veux", "veut", "voulons", "veulent"}},
        {"eat", {"mange", "manges", "mange", "mangeons", "mangent"}},
        {"find", {"trouve", "trouves", "trouve", "trouvons", "trouvent"}},
        {"watch", {"regarde", "regardes", "regarde", "regardons", "regardent"}},
        {"hear", {"entends", "entends", "entend", "entendons", "entendent"}},
        {"buy", {"achete", "achetes", "achete", "achetons", "achetent"}},
        {"know", {"connais", "connais", "connait", "connaissons", "connaissent"}}};
    struct Noun {
        const char* en;
        const char* fr;
    };
    static const Noun nouns[] = {{"the dog", "le chien"},     {"the cat", "le chat"},
                                 {"the book", "le livre"},    {"an apple", "une pomme"},
                                 {"the house", "la maison"},  {"the car", "la voiture"},
                                 {"the bread", "le pain"},    {"a bird", "un oiseau"},
                                 {"the school", "l'ecole"},   {"the garden", "le jardin"},
                                 {"the river", "la riviere"}, {"a film", "un film"},
                                 {"the music", "la musique"}, {"the town", "la ville"},
                                 {"the tree", "l'arbre"},     {"a horse", "un cheval"}};
    static const Noun tails[] = {{"", ""},
                                 {"today", "aujourd'hui"},
                                 {"now", "maintenant"},
                                 {"often", "souvent"},
                                 {"here", "ici"}};
    Rng rng(seed);
    std::filesystem::create_directories(out_dir);
    const auto path = std::filesystem::path(out_dir) / "pairs.tsv";
    std::ofstream out(path, std::ios::trunc);
    for (size_t i = 0; i < count; ++i) {
        const auto& s = subjects[rng.index(std::size(subjects))];
        const auto& v = verbs[rng.index(std::size(verbs))];
        const auto& o = nouns[rng.index(std::size(nouns))];
        const auto& t = tails[rng.index(std::size(tails))];
        std::string en = std::string(s.en) + " " + v.en + " " + o.en;
        std::string fr = std::string(s.fr) + " " + v.fr[s.person] + " " + o.fr;
        if (*t.en) {
            en += std::string(" ") + t.en;
            fr += std::string(" ") + t.fr;
        }
        en += " .";
        fr += " .";
        out << en << '\t' << fr << '\n';
    }
    std::printf("wrote %s (%zu pairs)\n", path.c_str(), count);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-filter Gaussian Mixture Autoencoder toolkit"};
    app.require_subcommand(1);

    ExperimentConfig cfg;
    std::string config_path;

    auto* run = app.add_subcommand("run", "full pipeline: autoencoder, GMM, filters, evaluate");
    add_config_flags(run, cfg, config_path);
    auto* baseline = app.add_subcommand("baseline", "ordinary encoder-decoder baseline");
    add_config_flags(baseline, cfg, config_path);
    auto* sweep = app.add_subcommand("sweep-filters", "silhouette vs metrics over a k range");
    add_config_flags(sweep, cfg, config_path);
    int k_min = 2, k_max = 6;
    sweep->add_option("--k-min", k_min, "smallest filter count");
    sweep->add_option("--k-max", k_max, "largest filter count");

    auto* plot = app.add_subcommand("plot-latent", "export 2-D PCA scatter of the latent space");
    std::string ckpt_path, out_prefix = "latent";
    plot->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
    plot->add_option("--out", out_prefix, "output prefix (.csv and .svg)");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dev set");
    ExperimentConfig eval_overrides;
    std::string eval_ckpt, eval_decode_mode;
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval->add_option("--train", eval_overrides.train_path, "override training TSV");
    eval->add_option("--dev", eval_overrides.dev_path, "override dev TSV");
    eval->add_option("--data-dir", eval_overrides.data_dir, "override data dir");
    eval->add_option("--decode-mode", eval_decode_mode, "hard | soft");

    auto* synth = app.add_subcommand("synth-data", "generate small demo datasets");
    std::string synth_task = "geoquery", synth_out = "data";
    uint64_t synth_seed = 1;
    size_t synth_count = 12000;
    synth->add_option("--task", synth_task, "geoquery | translation");
    synth->add_option("--out-dir", synth_out, "output directory");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--pairs", synth_count, "pair count (translation)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            const ExperimentConfig final_cfg = finalize_config(cfg, config_path, run);
            print_report(cmd_run(final_cfg));
        } else if (baseline->parsed()) {
            const ExperimentConfig final_cfg = finalize_config(cfg, config_path, baseline);
            print_report(cmd_baseline(final_cfg));
        } else if (sweep->parsed()) {
            const ExperimentConfig final_cfg = finalize_config(cfg, config_path, sweep);
            if (k_min < 2 || k_max < k_min)
                throw mgmae::ConfigError("need 2 <= k-min <= k-max");
            std::vector<int> ks;
            for (int k = k_min; k <= k_max; ++k) ks.push_back(k);
            const auto rows = cmd_sweep_filters(final_cfg, ks);
            std::printf("k,silhouette,token,denotation-proxy,BLEU\n");
            for (const auto& r : rows)
                std::printf("%d,%.6f,%.3f,%.3f,%.3f\n", r.k, r.silhouette_mean, r.token_mean,
                            r.denotation_proxy_mean, r.bleu_mean);
        } else if (plot->parsed()) {
            export_latent_scatter(ckpt_path, out_prefix);
            std::printf("wrote %s.csv and %s.svg\n", out_prefix.c_str(), out_prefix.c_str());
        } else if (eval->parsed()) {
            const bool have_mode = !eval_decode_mode.empty();
            const EvalMetrics m =
                cmd_eval(eval_ckpt, eval_overrides, have_mode,
                         have_mode ? decode_mode_from_string(eval_decode_mode)
                                   : DecodeMode::hard);
            std::printf("token accuracy:     %.3f\n", m.token_acc);
            std::printf("denotation (proxy): %.3f\n", m.denotation_proxy);
            std::printf("BLEU:               %.3f\n", m.bleu_score);
        } else if (synth->parsed()) {
            if (synth_task == "geoquery")
                write_synth_geoquery(synth_out, synth_seed);
            else if (synth_task == "translation")
                write_synth_translation(synth_out, synth_seed, synth_count);
            else
                throw mgmae::ConfigError("unknown synth task: " + synth_task);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
