#pragma once

// Top-2 principal components for the latent-space scatter export. Power
// iteration with Gram-Schmidt deflation on the covariance matrix; fully
// deterministic (fixed start vectors, fixed iteration count + tolerance).

#include <cmath>
#include <vector>

#include "mgmae/error.hpp"
#include "mgmae/gmm.hpp"

namespace mgmae {

struct Pca2 {
    std::vector<double> mean;
    std::vector<double> pc1, pc2; // unit vectors
    double var1 = 0.0, var2 = 0.0;
};

namespace pca_detail {

inline std::vector<double> matvec_sym(const std::vector<double>& A, int n,
                                      const std::vector<double>& x) {
    std::vector<double> y(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        const double* rowp = A.data() + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) acc += rowp[j] * x[static_cast<size_t>(j)];
        y[static_cast<size_t>(i)] = acc;
    }
    return y;
}

inline double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline void orthogonalize(std::vector<double>& v, const std::vector<double>& against) {
    if (against.empty()) return;
    double dot = 0.0;
    for (size_t i = 0; i < v.size(); ++i) dot += v[i] * against[i];
    for (size_t i = 0; i < v.size(); ++i) v[i] -= dot * against[i];
}

// Largest eigenpair of A restricted to the complement of `deflate`.
// Eigenvalues at or below zero_floor are treated as exactly zero; iterating
// on them would only amplify rounding dust back toward the deflated vector.
inline std::pair<double, std::vector<double>> power_iterate(const std::vector<double>& A, int n,
                                                            const std::vector<double>& deflate,
                                                            double zero_floor) {
    Rng rng(0x9CA0u + static_cast<uint64_t>(deflate.empty() ? 1 : 2));
    std::vector<double> v(static_cast<size_t>(n));
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    orthogonalize(v, deflate);
    double nv = norm(v);
    if (nv == 0.0) {
        v[0] = 1.0;
        orthogonalize(v, deflate);
        nv = norm(v);
    }
    for (auto& x : v) x /= nv;
    double eig = 0.0;
    for (int it = 0; it < 1000; ++it) {
        auto w = matvec_sym(A, n, v);
        orthogonalize(w, deflate);
        const double nw = norm(w);
        if (nw <= zero_floor) return {0.0, v};
        for (auto& x : w) x /= nw;
        double delta = 0.0;
        for (size_t i = 0; i < w.size(); ++i) delta = std::max(delta, std::abs(w[i] - v[i]));
        v = w;
        eig = nw;
        if (it > 3 && delta < 1e-13) break;
    }
    return {eig, v};
}

} // namespace pca_detail

inline Pca2 pca_top2(const Rows& data) {
    const size_t N = data.size();
    if (N < 2) throw ContractError("pca_top2: need at least 2 samples");
    const int L = static_cast<int>(data[0].size());
    Pca2 p;
    p.mean.assign(static_cast<size_t>(L), 0.0);
    for (const auto& rowv : data)
        for (int j = 0; j < L; ++j) p.mean[static_cast<size_t>(j)] += rowv[static_cast<size_t>(j)];
    for (auto& m : p.mean) m /= static_cast<double>(N);

    std::vector<double> cov(static_cast<size_t>(L) * L, 0.0);
    for (const auto& rowv : data) {
        for (int i = 0; i < L; ++i) {
            const double di = rowv[static_cast<size_t>(i)] - p.mean[static_cast<size_t>(i)];
            for (int j = i; j < L; ++j)
                cov[static_cast<size_t>(i) * L + j] +=
                    di * (rowv[static_cast<size_t>(j)] - p.mean[static_cast<size_t>(j)]);
        }
    }
    for (int i = 0; i < L; ++i)
        for (int j = i; j < L; ++j) {
            cov[static_cast<size_t>(i) * L + j] /= static_cast<double>(N - 1);
            cov[static_cast<size_t>(j) * L + i] = cov[static_cast<size_t>(i) * L + j];
        }

    auto [e1, v1] = pca_detail::power_iterate(cov, L, {}, 0.0);
    auto [e2, v2] = pca_detail::power_iterate(cov, L, v1, std::max(e1, 1e-30) * 1e-12);
    // keep pc2 exactly orthogonal to pc1 even in degenerate cases
    pca_detail::orthogonalize(v2, v1);
    const double n2 = pca_detail::norm(v2);
    if (n2 > 0.0)
        for (auto& x : v2) x /= n2;
    // deterministic sign: largest-magnitude coordinate is positive
    auto fix_sign = [](std::vector<double>& v) {
        size_t arg = 0;
        for (size_t i = 1; i < v.size(); ++i)
            if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
        if (v[arg] < 0.0)
            for (auto& x : v) x = -x;
    };
    fix_sign(v1);
    fix_sign(v2);
    p.pc1 = std::move(v1);
    p.pc2 = std::move(v2);
    p.var1 = e1;
    p.var2 = e2;
    return p;
}

// N x 2 projection of (data - mean) onto the two components.
inline Rows pca_project2(const Pca2& p, const Rows& data) {
    Rows out;
    out.reserve(data.size());
    for (const auto& rowv : data) {
        double x = 0.0, y = 0.0;
        for (size_t j = 0; j < rowv.size(); ++j) {
            const double d = rowv[j] - p.mean[j];
            x += d * p.pc1[j];
            y += d * p.pc2[j];
        }
        out.push_back({x, y});
    }
    return out;
}

} // namespace mgmae
