#pragma once

#include <cmath>
#include <vector>

#include "mgmae/tensor.hpp"

namespace mgmae {

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 5.0; // global-norm gradient clip; <= 0 disables
};

// Adam over a fixed parameter set. step() reads gradients off the tape for
// parameters watched during the current pass, clips by global norm, updates
// in place. One optimizer instance per trained model.
class Adam {
public:
    Adam(std::vector<Parameter*> params, AdamOptions opts)
        : params_(std::move(params)), opts_(opts) {}

    void step(Tape& tape) {
        struct Entry {
            Parameter* p;
            const std::vector<double>* g;
        };
        std::vector<Entry> live;
        live.reserve(params_.size());
        double sq = 0.0;
        for (Parameter* p : params_) {
            const int node = p->node_in(tape);
            if (node < 0) continue;
            const std::vector<double>* g = tape.grad(node);
            if (!g) continue;
            for (double v : *g) sq += v * v;
            live.push_back({p, g});
        }
        if (live.empty()) return;
        const double norm = std::sqrt(sq);
        const double scale =
            (opts_.clip_norm > 0.0 && norm > opts_.clip_norm) ? opts_.clip_norm / norm : 1.0;
        ++t_;
        const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
        for (auto& e : live) {
            auto& m = e.p->adam_m;
            auto& v = e.p->adam_v;
            auto& w = e.p->value().mut_data();
            if (m.size() != w.size()) m.assign(w.size(), 0.0);
            if (v.size() != w.size()) v.assign(w.size(), 0.0);
            for (size_t i = 0; i < w.size(); ++i) {
                const double g = (*e.g)[i] * scale;
                m[i] = opts_.beta1 * m[i] + (1.0 - opts_.beta1) * g;
                v[i] = opts_.beta2 * v[i] + (1.0 - opts_.beta2) * g * g;
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                w[i] -= opts_.lr * mhat / (std::sqrt(vhat) + opts_.eps);
            }
        }
    }

    long steps() const { return t_; }

private:
    std::vector<Parameter*> params_;
    AdamOptions opts_;
    long t_ = 0;
};

} // namespace mgmae
