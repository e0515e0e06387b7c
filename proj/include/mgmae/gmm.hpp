#pragma once

// Gaussian mixture over latent representations: diagonal-covariance
// densities, EM fitting with k-means++ seeding, posteriors, hard assignment
// and the silhouette coefficient used for model selection.
//
// All density math runs in log space; at L = 200 the raw normalizer
// underflows long before the math gets interesting.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "mgmae/error.hpp"
#include "mgmae/rng.hpp"

namespace mgmae {

using Rows = std::vector<std::vector<double>>;

constexpr double kVarianceFloor = 1e-6;

struct GaussianComponent {
    std::vector<double> mu;  // mean
    std::vector<double> var; // diagonal covariance (variances)
    double weight = 1.0;
};

struct GmmModel {
    std::vector<GaussianComponent> components;
    int dim = 0;

    int M() const { return static_cast<int>(components.size()); }
};

inline double component_log_density(const GaussianComponent& c, std::span<const double> x) {
    const size_t L = c.mu.size();
    if (x.size() != L) throw DimensionError("component_log_density: dimension mismatch");
    constexpr double kLog2Pi = 1.8378770664093454836; // ln(2*pi)
    double log_det = 0.0, maha = 0.0;
    for (size_t j = 0; j < L; ++j) {
        const double v = c.var[j];
        if (v < kVarianceFloor * (1.0 - 1e-12))
            throw ContractError("component variance below floor");
        const double d = x[j] - c.mu[j];
        log_det += std::log(v);
        maha += d * d / v;
    }
    return -0.5 * (static_cast<double>(L) * kLog2Pi + log_det + maha);
}

namespace detail {

inline double logsumexp(std::span<const double> v) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : v) mx = std::max(mx, x);
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

} // namespace detail

inline double mixture_log_density(const GmmModel& m, std::span<const double> x) {
    if (m.components.empty()) throw ContractError("mixture_log_density: empty model");
    std::vector<double> terms(m.components.size());
    for (size_t i = 0; i < m.components.size(); ++i)
        terms[i] = std::log(m.components[i].weight) + component_log_density(m.components[i], x);
    return detail::logsumexp(terms);
}

// Pr(i | x) via log-space normalization; sums to 1.
inline std::vector<double> posterior(const GmmModel& m, std::span<const double> x) {
    std::vector<double> logits(m.components.size());
    for (size_t i = 0; i < m.components.size(); ++i)
        logits[i] = std::log(m.components[i].weight) + component_log_density(m.components[i], x);
    const double lse = detail::logsumexp(logits);
    std::vector<double> post(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) post[i] = std::exp(logits[i] - lse);
    return post;
}

// Argmax of the posterior; ties break toward the lowest index.
inline int assign(const GmmModel& m, std::span<const double> x) {
    const auto post = posterior(m, x);
    int best = 0;
    for (size_t i = 1; i < post.size(); ++i)
        if (post[i] > post[static_cast<size_t>(best)]) best = static_cast<int>(i);
    return best;
}

struct EmOptions {
    int max_iter = 200;
    double tol = 1e-6; // stop when mean log-likelihood improves less than this
};

namespace detail {

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (size_t j = 0; j < a.size(); ++j) {
        const double d = a[j] - b[j];
        s += d * d;
    }
    return s;
}

// k-means++ seeding: first center uniform, then proportional to squared
// distance from the nearest chosen center.
inline std::vector<size_t> kmeanspp_seeds(const Rows& data, int M, Rng& rng) {
    std::vector<size_t> seeds;
    seeds.push_back(rng.index(data.size()));
    std::vector<double> d2(data.size());
    while (static_cast<int>(seeds.size()) < M) {
        double total = 0.0;
        for (size_t n = 0; n < data.size(); ++n) {
            double best = std::numeric_limits<double>::infinity();
            for (size_t s : seeds) best = std::min(best, sq_dist(data[n], data[s]));
            d2[n] = best;
            total += best;
        }
        size_t pick;
        if (total <= 0.0) {
            pick = rng.index(data.size()); // all points coincide with a seed
        } else {
            double r = rng.uniform() * total;
            pick = data.size() - 1;
            for (size_t n = 0; n < data.size(); ++n) {
                r -= d2[n];
                if (r <= 0.0) {
                    pick = n;
                    break;
                }
            }
        }
        seeds.push_back(pick);
    }
    return seeds;
}

} // namespace detail

// EM for a diagonal-covariance mixture. Initialization: k-means++ means,
// uniform weights, global per-dimension variance. Empty components are
// re-seeded at the point with the lowest mixture density. ll_trace, when
// given, receives the mean log-likelihood of each iteration.
inline GmmModel fit_em(const Rows& data, int M, uint64_t seed, EmOptions opts = {},
                       std::vector<double>* ll_trace = nullptr) {
    const size_t N = data.size();
    if (M < 1) throw ConfigError("fit_em: M must be >= 1");
    if (N < static_cast<size_t>(M))
        throw ConfigError("fit_em: need at least M=" + std::to_string(M) + " points, got " +
                          std::to_string(N));
    const size_t L = data[0].size();
    if (L < 1) throw ConfigError("fit_em: empty feature vectors");
    for (const auto& rowv : data)
        if (rowv.size() != L) throw DimensionError("fit_em: ragged data matrix");

    // global per-dimension variance for initialization and re-seeding
    std::vector<double> gmean(L, 0.0), gvar(L, 0.0);
    for (const auto& rowv : data)
        for (size_t j = 0; j < L; ++j) gmean[j] += rowv[j];
    for (size_t j = 0; j < L; ++j) gmean[j] /= static_cast<double>(N);
    for (const auto& rowv : data)
        for (size_t j = 0; j < L; ++j) {
            const double d = rowv[j] - gmean[j];
            gvar[j] += d * d;
        }
    for (size_t j = 0; j < L; ++j)
        gvar[j] = std::max(gvar[j] / static_cast<double>(N), kVarianceFloor);

    Rng rng(seed);
    GmmModel model;
    model.dim = static_cast<int>(L);
    for (size_t s : detail::kmeanspp_seeds(data, M, rng))
        model.components.push_back({data[s], gvar, 1.0 / static_cast<double>(M)});

    std::vector<std::vector<double>> resp(N, std::vector<double>(static_cast<size_t>(M)));
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < opts.max_iter; ++iter) {
        // E-step
        double ll = 0.0;
        std::vector<double> logits(static_cast<size_t>(M));
        for (size_t n = 0; n < N; ++n) {
            for (int i = 0; i < M; ++i)
                logits[static_cast<size_t>(i)] =
                    std::log(model.components[static_cast<size_t>(i)].weight) +
                    component_log_density(model.components[static_cast<size_t>(i)], data[n]);
            const double lse = detail::logsumexp(logits);
            ll += lse;
            for (int i = 0; i < M; ++i)
                resp[n][static_cast<size_t>(i)] = std::exp(logits[static_cast<size_t>(i)] - lse);
        }
        ll /= static_cast<double>(N);
        if (ll_trace) ll_trace->push_back(ll);

        // M-step
        for (int i = 0; i < M; ++i) {
            auto& comp = model.components[static_cast<size_t>(i)];
            double mass = 0.0;
            for (size_t n = 0; n < N; ++n) mass += resp[n][static_cast<size_t>(i)];
            if (mass < 1e-10) {
                // re-seed at the point the current mixture explains worst
                size_t worst = 0;
                double worst_ll = std::numeric_limits<double>::infinity();
                for (size_t n = 0; n < N; ++n) {
                    const double d = mixture_log_density(model, data[n]);
                    if (d < worst_ll) {
                        worst_ll = d;
                        worst = n;
                    }
                }
                comp.mu = data[worst];
                comp.var = gvar;
                comp.weight = 1.0 / static_cast<double>(N);
                continue;
            }
            comp.weight = mass / static_cast<double>(N);
            for (size_t j = 0; j < L; ++j) {
                double mu = 0.0;
                for (size_t n = 0; n < N; ++n) mu += resp[n][static_cast<size_t>(i)] * data[n][j];
                mu /= mass;
                double var = 0.0;
                for (size_t n = 0; n < N; ++n) {
                    const double d = data[n][j] - mu;
                    var += resp[n][static_cast<size_t>(i)] * d * d;
                }
                comp.mu[j] = mu;
                comp.var[j] = std::max(var / mass, kVarianceFloor);
            }
        }
        // renormalize weights (exact under normal updates, needed after re-seeds)
        double wsum = 0.0;
        for (const auto& c : model.components) wsum += c.weight;
        for (auto& c : model.components) c.weight /= wsum;

        if (iter > 0 && ll - prev_ll < opts.tol) break;
        prev_ll = ll;
    }
    return model;
}

// Mean over points of (b - a) / max(a, b); Euclidean distance; singleton
// clusters contribute 0. Requires at least two distinct labels.
inline double silhouette(const Rows& data, const std::vector<int>& labels) {
    const size_t N = data.size();
    if (labels.size() != N) throw ContractError("silhouette: labels/data size mismatch");
    std::vector<int> distinct(labels);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2) throw ContractError("silhouette: need at least two clusters");

    std::vector<size_t> cluster_size(distinct.size(), 0);
    std::vector<int> label_index(N);
    for (size_t n = 0; n < N; ++n) {
        const auto it = std::lower_bound(distinct.begin(), distinct.end(), labels[n]);
        label_index[n] = static_cast<int>(it - distinct.begin());
        ++cluster_size[static_cast<size_t>(label_index[n])];
    }

    double total = 0.0;
    std::vector<double> dist_sum(distinct.size());
    for (size_t n = 0; n < N; ++n) {
        const size_t own = static_cast<size_t>(label_index[n]);
        if (cluster_size[own] <= 1) continue; // singleton contributes 0
        std::fill(dist_sum.begin(), dist_sum.end(), 0.0);
        for (size_t m = 0; m < N; ++m) {
            if (m == n) continue;
            dist_sum[static_cast<size_t>(label_index[m])] +=
                std::sqrt(detail::sq_dist(data[n], data[m]));
        }
        const double a = dist_sum[own] / static_cast<double>(cluster_size[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (size_t k = 0; k < distinct.size(); ++k) {
            if (k == own || cluster_size[k] == 0) continue;
            b = std::min(b, dist_sum[k] / static_cast<double>(cluster_size[k]));
        }
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return total / static_cast<double>(N);
}

} // namespace mgmae
