#pragma once

// Dense double tensors with tape-based reverse-mode differentiation.
// The tape is define-by-run: it is rebuilt on every forward pass, which keeps
// variable-length sequence models straightforward. A tape and the tensors
// recorded on it belong to a single worker; nothing in here touches shared
// mutable state.

#include <atomic>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mgmae/error.hpp"
#include "mgmae/rng.hpp"

namespace mgmae {

using Shape = std::vector<int>;

inline size_t shape_numel(const Shape& s) {
    size_t n = 1;
    for (int d : s) {
        if (d <= 0) throw DimensionError("shape dimensions must be positive");
        n *= static_cast<size_t>(d);
    }
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

class Tape;

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape) {
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_ = std::make_shared<std::vector<double>>(shape_numel(t.shape_), 0.0);
        return t;
    }

    static Tensor from(Shape shape, std::vector<double> values) {
        if (shape_numel(shape) != values.size())
            throw DimensionError("value count does not match shape " + shape_str(shape));
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_ = std::make_shared<std::vector<double>>(std::move(values));
        return t;
    }

    static Tensor scalar(double v) { return from({1}, {v}); }

    const Shape& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
    size_t size() const { return data_ ? data_->size() : 0; }
    bool defined() const { return static_cast<bool>(data_); }

    const std::vector<double>& data() const { return *data_; }
    // In-place access for initialization of untracked tensors only.
    std::vector<double>& mut_data() { return *data_; }
    std::shared_ptr<std::vector<double>> storage() const { return data_; }

    double at(int i) const { return (*data_)[static_cast<size_t>(i)]; }
    double at(int i, int j) const {
        return (*data_)[static_cast<size_t>(i) * static_cast<size_t>(shape_[1]) +
                        static_cast<size_t>(j)];
    }
    double item() const {
        if (size() != 1) throw ContractError("item() requires a scalar tensor");
        return (*data_)[0];
    }

    bool tracked() const { return node_ >= 0; }
    int node() const { return node_; }
    Tape* tape() const { return tape_; }

private:
    friend class Tape;
    friend class Parameter;
    Shape shape_;
    std::shared_ptr<std::vector<double>> data_;
    Tape* tape_ = nullptr;
    int node_ = -1;
};

// Append-only record of primitive applications. Node i's parents always have
// index < i, so a single reverse sweep visits each node exactly once.
class Tape {
public:
    using BackFn = std::function<void(Tape&, const std::vector<double>&)>;

    Tensor leaf(const Tensor& value) {
        Tensor t = attach(value.shape(), value.storage(), nullptr, true);
        return t;
    }

    Tensor record(Shape shape, std::vector<double> data, const std::vector<int>& parents,
                  BackFn back) {
        int id = static_cast<int>(nodes_.size());
        for (int p : parents)
            if (p >= id) throw ContractError("tape parents must precede the node");
        auto storage = std::make_shared<std::vector<double>>(std::move(data));
        return attach(std::move(shape), storage, std::move(back), false);
    }

    void backward(const Tensor& loss) {
        if (!loss.tracked() || loss.tape() != this)
            throw ContractError("backward: loss is not recorded on this tape");
        if (loss.size() != 1)
            throw ContractError("backward: loss must be scalar, got " + shape_str(loss.shape()));
        grads_.assign(nodes_.size(), {});
        grad_buf(loss.node())[0] = 1.0;
        for (int i = loss.node(); i >= 0; --i) {
            if (!grads_[static_cast<size_t>(i)].empty() && nodes_[static_cast<size_t>(i)].back)
                nodes_[static_cast<size_t>(i)].back(*this, grads_[static_cast<size_t>(i)]);
        }
    }

    // Zero-initialized gradient accumulator for a node; adjoint closures add
    // into this directly so scatter-style ops never allocate dense temporaries.
    std::vector<double>& grad_buf(int node) {
        auto& g = grads_[static_cast<size_t>(node)];
        if (g.empty()) g.assign(nodes_[static_cast<size_t>(node)].size, 0.0);
        return g;
    }

    // Gradient of the last backward() w.r.t. a node; nullptr if none flowed.
    const std::vector<double>* grad(int node) const {
        if (node < 0 || static_cast<size_t>(node) >= grads_.size()) return nullptr;
        const auto& g = grads_[static_cast<size_t>(node)];
        return g.empty() ? nullptr : &g;
    }

    const std::vector<int>& leaves() const { return leaves_; }
    size_t num_nodes() const { return nodes_.size(); }
    uint64_t epoch() const { return epoch_; }

    void reset() {
        nodes_.clear();
        grads_.clear();
        leaves_.clear();
        epoch_ = next_epoch();
    }

private:
    struct Node {
        size_t size;
        BackFn back;
    };

    // Epochs are process-unique so a stale (tape pointer, epoch) pair can
    // never alias a new tape that happens to reuse the same address. Atomic:
    // distinct workers may own distinct tapes concurrently.
    static uint64_t next_epoch() {
        static std::atomic<uint64_t> counter{0};
        return ++counter;
    }

    Tensor attach(Shape shape, std::shared_ptr<std::vector<double>> storage, BackFn back,
                  bool is_leaf) {
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_ = std::move(storage);
        t.tape_ = this;
        t.node_ = static_cast<int>(nodes_.size());
        nodes_.push_back(Node{t.data_->size(), std::move(back)});
        if (is_leaf) leaves_.push_back(t.node_);
        return t;
    }

    std::vector<Node> nodes_;
    std::vector<std::vector<double>> grads_;
    std::vector<int> leaves_;
    uint64_t epoch_ = next_epoch();
};

// Gradients of a scalar loss w.r.t. every tracked leaf, keyed by node id.
inline std::map<int, Tensor> backward(Tape& tape, const Tensor& loss) {
    tape.backward(loss);
    std::map<int, Tensor> out;
    for (int id : tape.leaves()) {
        const auto* g = tape.grad(id);
        if (g) out.emplace(id, Tensor::from({static_cast<int>(g->size())}, *g));
    }
    return out;
}

// A trainable weight. The underlying storage is shared with the tape leaf
// recorded by use(), so watching is free; the optimizer mutates value()
// in place between passes.
class Parameter {
public:
    Parameter() = default;
    explicit Parameter(Tensor value) : value_(std::move(value)) {}

    Tensor use(Tape* tape) const {
        if (!tape) return value_;
        // value already recorded on this tape (e.g. a test wrapping a leaf)
        if (value_.tracked() && value_.tape() == tape) return value_;
        if (bound_ != tape || epoch_ != tape->epoch()) {
            Tensor t = tape->leaf(value_);
            bound_ = tape;
            epoch_ = tape->epoch();
            node_ = t.node();
            return t;
        }
        Tensor t = value_;
        t.tape_ = bound_;
        t.node_ = node_;
        return t;
    }

    Tensor& value() { return value_; }
    const Tensor& value() const { return value_; }
    size_t size() const { return value_.size(); }

    // Node id in the given tape for the current epoch, or -1 if unused.
    int node_in(const Tape& tape) const {
        return (bound_ == &tape && epoch_ == tape.epoch()) ? node_ : -1;
    }

    std::vector<double> adam_m, adam_v; // lazily sized by the optimizer

private:
    Tensor value_;
    mutable Tape* bound_ = nullptr;
    mutable uint64_t epoch_ = 0;
    mutable int node_ = -1;
};

// ---------------------------------------------------------------------------
// op helpers
// ---------------------------------------------------------------------------

namespace detail {

inline Tape* common_tape(std::initializer_list<const Tensor*> ts) {
    Tape* tape = nullptr;
    for (const Tensor* t : ts) {
        if (!t->tracked()) continue;
        if (!tape)
            tape = t->tape();
        else if (tape != t->tape())
            throw ContractError("operands recorded on different tapes");
    }
    return tape;
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
}

inline void require_matrix(const Tensor& t, const char* op) {
    if (t.ndim() != 2)
        throw DimensionError(std::string(op) + ": expected 2-D tensor, got " +
                             shape_str(t.shape()));
}

inline void require_vector(const Tensor& t, const char* op) {
    if (t.ndim() != 1)
        throw DimensionError(std::string(op) + ": expected 1-D tensor, got " +
                             shape_str(t.shape()));
}

} // namespace detail

// ---------------------------------------------------------------------------
// matrix / vector products
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    detail::require_matrix(a, "matmul");
    detail::require_matrix(b, "matmul");
    const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2)
        throw DimensionError("matmul: inner dimensions disagree " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
    const auto& A = a.data();
    const auto& B = b.data();
    for (int i = 0; i < m; ++i) {
        double* orow = out.data() + static_cast<size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            const double aik = A[static_cast<size_t>(i) * k + kk];
            const double* brow = B.data() + static_cast<size_t>(kk) * n;
            for (int j = 0; j < n; ++j) orow[j] += aik * brow[j];
        }
    }
    Tape* tape = detail::common_tape({&a, &b});
    if (!tape) return Tensor::from({m, n}, std::move(out));
    const int pa = a.node(), pb = b.node();
    auto da = a.storage();
    auto db = b.storage();
    return tape->record(
        {m, n}, std::move(out), {pa, pb},
        [=](Tape& t, const std::vector<double>& g) {
            if (pa >= 0) {
                auto& ga = t.grad_buf(pa); // dA = G * B^T
                for (int i = 0; i < m; ++i)
                    for (int kk = 0; kk < k; ++kk) {
                        double acc = 0.0;
                        const double* grow = g.data() + static_cast<size_t>(i) * n;
                        const double* brow = db->data() + static_cast<size_t>(kk) * n;
                        for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        ga[static_cast<size_t>(i) * k + kk] += acc;
                    }
            }
            if (pb >= 0) {
                auto& gb = t.grad_buf(pb); // dB = A^T * G
                for (int i = 0; i < m; ++i)
                    for (int kk = 0; kk < k; ++kk) {
                        const double aik = (*da)[static_cast<size_t>(i) * k + kk];
                        const double* grow = g.data() + static_cast<size_t>(i) * n;
                        double* brow = gb.data() + static_cast<size_t>(kk) * n;
                        for (int j = 0; j < n; ++j) brow[j] += aik * grow[j];
                    }
            }
        });
}

// y = A x for A[m x k], x[k]
inline Tensor matvec(const Tensor& a, const Tensor& x) {
    detail::require_matrix(a, "matvec");
    detail::require_vector(x, "matvec");
    const int m = a.dim(0), k = a.dim(1);
    if (k != x.dim(0))
        throw DimensionError("matvec: dimensions disagree " + shape_str(a.shape()) + " vs " +
                             shape_str(x.shape()));
    std::vector<double> out(static_cast<size_t>(m), 0.0);
    const auto& A = a.data();
    const auto& X = x.data();
    for (int i = 0; i < m; ++i) {
        const double* arow = A.data() + static_cast<size_t>(i) * k;
        double acc = 0.0;
        for (int j = 0; j < k; ++j) acc += arow[j] * X[static_cast<size_t>(j)];
        out[static_cast<size_t>(i)] = acc;
    }
    Tape* tape = detail::common_tape({&a, &x});
    if (!tape) return Tensor::from({m}, std::move(out));
    const int pa = a.node(), px = x.node();
    auto da = a.storage();
    auto dx = x.storage();
    return tape->record(
        {m}, std::move(out), {pa, px},
        [=](Tape& t, const std::vector<double>& g) {
            if (pa >= 0) {
                auto& ga = t.grad_buf(pa); // dA[i,:] += g_i * x
                for (int i = 0; i < m; ++i) {
                    const double gi = g[static_cast<size_t>(i)];
                    double* row = ga.data() + static_cast<size_t>(i) * k;
                    for (int j = 0; j < k; ++j) row[j] += gi * (*dx)[static_cast<size_t>(j)];
                }
            }
            if (px >= 0) {
                auto& gx = t.grad_buf(px); // dx += A^T g
                for (int i = 0; i < m; ++i) {
                    const double gi = g[static_cast<size_t>(i)];
                    const double* row = da->data() + static_cast<size_t>(i) * k;
                    for (int j = 0; j < k; ++j) gx[static_cast<size_t>(j)] += gi * row[j];
                }
            }
        });
}

// y = A^T x for A[m x k], x[m] -> y[k]; avoids materializing transposes.
inline Tensor matvec_t(const Tensor& a, const Tensor& x) {
    detail::require_matrix(a, "matvec_t");
    detail::require_vector(x, "matvec_t");
    const int m = a.dim(0), k = a.dim(1);
    if (m != x.dim(0))
        throw DimensionError("matvec_t: dimensions disagree " + shape_str(a.shape()) + " vs " +
                             shape_str(x.shape()));
    std::vector<double> out(static_cast<size_t>(k), 0.0);
    const auto& A = a.data();
    const auto& X = x.data();
    for (int i = 0; i < m; ++i) {
        const double xi = X[static_cast<size_t>(i)];
        const double* arow = A.data() + static_cast<size_t>(i) * k;
        for (int j = 0; j < k; ++j) out[static_cast<size_t>(j)] += xi * arow[j];
    }
    Tape* tape = detail::common_tape({&a, &x});
    if (!tape) return Tensor::from({k}, std::move(out));
    const int pa = a.node(), px = x.node();
    auto da = a.storage();
    auto dx = x.storage();
    return tape->record(
        {k}, std::move(out), {pa, px},
        [=](Tape& t, const std::vector<double>& g) {
            if (pa >= 0) {
                auto& ga = t.grad_buf(pa); // dA[i,:] += x_i * g
                for (int i = 0; i < m; ++i) {
                    const double xi = (*dx)[static_cast<size_t>(i)];
                    double* row = ga.data() + static_cast<size_t>(i) * k;
                    for (int j = 0; j < k; ++j) row[j] += xi * g[static_cast<size_t>(j)];
                }
            }
            if (px >= 0) {
                auto& gx = t.grad_buf(px); // dx_i += A[i,:] . g
                for (int i = 0; i < m; ++i) {
                    const double* row = da->data() + static_cast<size_t>(i) * k;
                    double acc = 0.0;
                    for (int j = 0; j < k; ++j) acc += row[j] * g[static_cast<size_t>(j)];
                    gx[static_cast<size_t>(i)] += acc;
                }
            }
        });
}

inline Tensor transpose(const Tensor& a) {
    detail::require_matrix(a, "transpose");
    const int m = a.dim(0), n = a.dim(1);
    std::vector<double> out(a.size());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<size_t>(j) * m + i] = a.at(i, j);
    Tape* tape = detail::common_tape({&a});
    if (!tape) return Tensor::from({n, m}, std::move(out));
    const int pa = a.node();
    return tape->record({n, m}, std::move(out), {pa},
                        [=](Tape& t, const std::vector<double>& g) {
                            auto& ga = t.grad_buf(pa);
                            for (int j = 0; j < n; ++j)
                                for (int i = 0; i < m; ++i)
                                    ga[static_cast<size_t>(i) * n + j] +=
                                        g[static_cast<size_t>(j) * m + i];
                        });
}

// ---------------------------------------------------------------------------
// elementwise ops (identical shapes; scalar variants below)
// ---------------------------------------------------------------------------

namespace detail {

template <typename Fwd, typename Bwd>
Tensor binary_elementwise(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, Bwd bwd) {
    require_same_shape(a, b, name);
    const size_t n = a.size();
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = fwd(a.data()[i], b.data()[i]);
    Tape* tape = common_tape({&a, &b});
    if (!tape) return Tensor::from(a.shape(), std::move(out));
    const int pa = a.node(), pb = b.node();
    auto da = a.storage();
    auto db = b.storage();
    return tape->record(a.shape(), std::move(out), {pa, pb},
                        [=](Tape& t, const std::vector<double>& g) {
                            for (size_t i = 0; i < g.size(); ++i) {
                                auto [ga, gb] = bwd((*da)[i], (*db)[i], g[i]);
                                if (pa >= 0) t.grad_buf(pa)[i] += ga;
                                if (pb >= 0) t.grad_buf(pb)[i] += gb;
                            }
                        });
}

// Unary op where the adjoint is a function of the primal output.
template <typename Fwd, typename BwdFromOut>
Tensor unary_from_output(const Tensor& a, const char* name, Fwd fwd, BwdFromOut bwd) {
    (void)name;
    const size_t n = a.size();
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = fwd(a.data()[i]);
    Tape* tape = common_tape({&a});
    if (!tape) return Tensor::from(a.shape(), std::move(out));
    const int pa = a.node();
    auto saved = std::make_shared<std::vector<double>>(out);
    return tape->record(a.shape(), std::move(out), {pa},
                        [=](Tape& t, const std::vector<double>& g) {
                            auto& ga = t.grad_buf(pa);
                            for (size_t i = 0; i < g.size(); ++i)
                                ga[i] += bwd((*saved)[i]) * g[i];
                        });
}

} // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
    return detail::binary_elementwise(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double, double, double g) { return std::pair<double, double>{g, g}; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    return detail::binary_elementwise(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double, double g) { return std::pair<double, double>{g, -g}; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    return detail::binary_elementwise(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double x, double y, double g) { return std::pair<double, double>{g * y, g * x}; });
}

inline Tensor add_scalar(const Tensor& a, double c) {
    return detail::unary_from_output(
        a, "add_scalar", [c](double x) { return x + c; }, [](double) { return 1.0; });
}

inline Tensor mul_scalar(const Tensor& a, double c) {
    return detail::unary_from_output(
        a, "mul_scalar", [c](double x) { return x * c; }, [c](double) { return c; });
}

inline Tensor tanh(const Tensor& a) {
    return detail::unary_from_output(
        a, "tanh", [](double x) { return std::tanh(x); },
        [](double y) { return 1.0 - y * y; });
}

inline Tensor sigmoid(const Tensor& a) {
    return detail::unary_from_output(
        a, "sigmoid",
        [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                       : std::exp(x) / (1.0 + std::exp(x)); },
        [](double y) { return y * (1.0 - y); });
}

inline Tensor exp(const Tensor& a) {
    return detail::unary_from_output(
        a, "exp", [](double x) { return std::exp(x); }, [](double y) { return y; });
}

inline Tensor log(const Tensor& a) {
    for (double v : a.data())
        if (!(v > 0.0)) throw DomainError("log: non-positive input");
    const size_t n = a.size();
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = std::log(a.data()[i]);
    Tape* tape = detail::common_tape({&a});
    if (!tape) return Tensor::from(a.shape(), std::move(out));
    const int pa = a.node();
    auto da = a.storage();
    return tape->record(a.shape(), std::move(out), {pa},
                        [=](Tape& t, const std::vector<double>& g) {
                            auto& ga = t.grad_buf(pa);
                            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / (*da)[i];
                        });
}

// Inverted dropout: zero with probability p, scale survivors by 1/(1-p).
// Identity when not training or p == 0.
inline Tensor dropout_mask(const Tensor& a, double p, Rng& rng, bool training) {
    if (p < 0.0 || p >= 1.0) throw ContractError("dropout: p must be in [0, 1)");
    if (!training || p == 0.0) return a;
    const size_t n = a.size();
    auto mask = std::make_shared<std::vector<double>>(n);
    const double keep_scale = 1.0 / (1.0 - p);
    for (size_t i = 0; i < n; ++i)
        (*mask)[i] = (rng.uniform() >= p) ? keep_scale : 0.0;
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = a.data()[i] * (*mask)[i];
    Tape* tape = detail::common_tape({&a});
    if (!tape) return Tensor::from(a.shape(), std::move(out));
    const int pa = a.node();
    return tape->record(a.shape(), std::move(out), {pa},
                        [=](Tape& t, const std::vector<double>& g) {
                            auto& ga = t.grad_buf(pa);
                            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (*mask)[i];
                        });
}

// ---------------------------------------------------------------------------
// softmax family (1-D)
// ---------------------------------------------------------------------------

inline Tensor log_softmax(const Tensor& x) {
    detail::require_vector(x, "log_softmax");
    const size_t n = x.size();
    if (n == 0) throw ContractError("log_softmax: empty input");
    double mx = x.data()[0];
    for (double v : x.data()) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : x.data()) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = x.data()[i] - lse;
    Tape* tape = detail::common_tape({&x});
    if (!tape) return Tensor::from(x.shape(), std::move(out));
    const int px = x.node();
    auto saved = std::make_shared<std::vector<double>>(out);
    return tape->record(x.shape(), std::move(out), {px},
                        [=](Tape& t, const std::vector<double>& g) {
                            double gsum = 0.0;
                            for (double v : g) gsum += v;
                            auto& gx = t.grad_buf(px);
                            for (size_t i = 0; i < g.size(); ++i)
                                gx[i] += g[i] - std::exp((*saved)[i]) * gsum;
                        });
}

inline Tensor softmax(const Tensor& x) {
    detail::require_vector(x, "softmax");
    const size_t n = x.size();
    if (n == 0) throw ContractError("softmax: empty input");
    double mx = x.data()[0];
    for (double v : x.data()) mx = std::max(mx, v);
    std::vector<double> out(n);
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        out[i] = std::exp(x.data()[i] - mx);
        sum += out[i];
    }
    for (size_t i = 0; i < n; ++i) out[i] /= sum;
    Tape* tape = detail::common_tape({&x});
    if (!tape) return Tensor::from(x.shape(), std::move(out));
    const int px = x.node();
    auto saved = std::make_shared<std::vector<double>>(out);
    return tape->record(x.shape(), std::move(out), {px},
                        [=](Tape& t, const std::vector<double>& g) {
                            double dot = 0.0;
                            for (size_t i = 0; i < g.size(); ++i) dot += g[i] * (*saved)[i];
                            auto& gx = t.grad_buf(px);
                            for (size_t i = 0; i < g.size(); ++i)
                                gx[i] += (*saved)[i] * (g[i] - dot);
                        });
}

// ---------------------------------------------------------------------------
// structural ops
// ---------------------------------------------------------------------------

inline Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    Tape* tape = detail::common_tape({&a});
    if (!tape) return Tensor::scalar(s);
    const int pa = a.node();
    const size_t n = a.size();
    return tape->record({1}, {s}, {pa},
                        [=](Tape& t, const std::vector<double>& g) {
                            auto& ga = t.grad_buf(pa);
                            for (size_t i = 0; i < n; ++i) ga[i] += g[0];
                        });
}

inline Tensor concat(const Tensor& a, const Tensor& b) {
    detail::require_vector(a, "concat");
    detail::require_vector(b, "concat");
    const int na = a.dim(0), nb = b.dim(0);
    std::vector<double> out;
    out.reserve(static_cast<size_t>(na + nb));
    out.insert(out.end(), a.data().begin(), a.data().end());
    out.insert(out.end(), b.data().begin(), b.data().end());
    Tape* tape = detail::common_tape({&a, &b});
    if (!tape) return Tensor::from({na + nb}, std::move(out));
    const int pa = a.node(), pb = b.node();
    return tape->record({na + nb}, std::move(out), {pa, pb},
                        [=](Tape& t, const std::vector<double>& g) {
                            if (pa >= 0) {
                                auto& ga = t.grad_buf(pa);
                                for (int i = 0; i < na; ++i) ga[static_cast<size_t>(i)] += g[static_cast<size_t>(i)];
                            }
                            if (pb >= 0) {
                                auto& gb = t.grad_buf(pb);
                                for (int i = 0; i < nb; ++i)
                                    gb[static_cast<size_t>(i)] += g[static_cast<size_t>(na + i)];
                            }
                        });
}

inline Tensor slice(const Tensor& a, int offset, int len) {
    detail::require_vector(a, "slice");
    if (offset < 0 || len <= 0 || offset + len > a.dim(0))
        throw DimensionError("slice: range out of bounds for " + shape_str(a.shape()));
    std::vector<double> out(a.data().begin() + offset, a.data().begin() + offset + len);
    Tape* tape = detail::common_tape({&a});
    if (!tape) return Tensor::from({len}, std::move(out));
    const int pa = a.node();
    return tape->record({len}, std::move(out), {pa},
                        [=](Tape& t, const std::vector<double>& g) {
                            auto& ga = t.grad_buf(pa);
                            for (int i = 0; i < len; ++i)
                                ga[static_cast<size_t>(offset + i)] += g[static_cast<size_t>(i)];
                        });
}

inline Tensor row(const Tensor& m, int i) {
    detail::require_matrix(m, "row");
    if (i < 0 || i >= m.dim(0)) throw DimensionError("row: index out of range");
    const int n = m.dim(1);
    std::vector<double> out(m.data().begin() + static_cast<size_t>(i) * n,
                            m.data().begin() + static_cast<size_t>(i + 1) * n);
    Tape* tape = detail::common_tape({&m});
    if (!tape) return Tensor::from({n}, std::move(out));
    const int pm = m.node();
    return tape->record({n}, std::move(out), {pm},
                        [=](Tape& t, const std::vector<double>& g) {
                            auto& gm = t.grad_buf(pm);
                            for (int j = 0; j < n; ++j)
                                gm[static_cast<size_t>(i) * n + j] += g[static_cast<size_t>(j)];
                        });
}

// Stack equal-length vectors into a [T x n] matrix.
inline Tensor stack_rows(const std::vector<Tensor>& rows) {
    if (rows.empty()) throw ContractError("stack_rows: empty row list");
    const int n = rows[0].dim(0);
    const int T = static_cast<int>(rows.size());
    std::vector<double> out;
    out.reserve(static_cast<size_t>(T) * n);
    Tape* tape = nullptr;
    std::vector<int> parents(rows.size(), -1);
    for (size_t t = 0; t < rows.size(); ++t) {
        detail::require_vector(rows[t], "stack_rows");
        if (rows[t].dim(0) != n) throw DimensionError("stack_rows: ragged rows");
        out.insert(out.end(), rows[t].data().begin(), rows[t].data().end());
        if (rows[t].tracked()) {
            if (tape && tape != rows[t].tape())
                throw ContractError("stack_rows: rows on different tapes");
            tape = rows[t].tape();
            parents[t] = rows[t].node();
        }
    }
    if (!tape) return Tensor::from({T, n}, std::move(out));
    return tape->record({T, n}, std::move(out), parents,
                        [parents, n](Tape& t, const std::vector<double>& g) {
                            for (size_t r = 0; r < parents.size(); ++r) {
                                if (parents[r] < 0) continue;
                                auto& gr = t.grad_buf(parents[r]);
                                const double* grow = g.data() + r * static_cast<size_t>(n);
                                for (int j = 0; j < n; ++j) gr[static_cast<size_t>(j)] += grow[j];
                            }
                        });
}

// Add a row vector to every row of a matrix.
inline Tensor add_rowvec(const Tensor& m, const Tensor& v) {
    detail::require_matrix(m, "add_rowvec");
    detail::require_vector(v, "add_rowvec");
    const int T = m.dim(0), n = m.dim(1);
    if (v.dim(0) != n)
        throw DimensionError("add_rowvec: width mismatch " + shape_str(m.shape()) + " vs " +
                             shape_str(v.shape()));
    std::vector<double> out(m.data());
    for (int i = 0; i < T; ++i)
        for (int j = 0; j < n; ++j) out[static_cast<size_t>(i) * n + j] += v.at(j);
    Tape* tape = detail::common_tape({&m, &v});
    if (!tape) return Tensor::from({T, n}, std::move(out));
    const int pm = m.node(), pv = v.node();
    return tape->record({T, n}, std::move(out), {pm, pv},
                        [=](Tape& t, const std::vector<double>& g) {
                            if (pm >= 0) {
                                auto& gm = t.grad_buf(pm);
                                for (size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
                            }
                            if (pv >= 0) {
                                auto& gv = t.grad_buf(pv);
                                for (int i = 0; i < T; ++i)
                                    for (int j = 0; j < n; ++j)
                                        gv[static_cast<size_t>(j)] += g[static_cast<size_t>(i) * n + j];
                            }
                        });
}

inline Tensor pick(const Tensor& x, int index) {
    detail::require_vector(x, "pick");
    if (index < 0 || index >= x.dim(0)) throw DimensionError("pick: index out of range");
    Tape* tape = detail::common_tape({&x});
    const double v = x.at(index);
    if (!tape) return Tensor::scalar(v);
    const int px = x.node();
    return tape->record({1}, {v}, {px},
                        [=](Tape& t, const std::vector<double>& g) {
                            t.grad_buf(px)[static_cast<size_t>(index)] += g[0];
                        });
}

inline bool all_finite(const Tensor& t) {
    for (double v : t.data())
        if (!std::isfinite(v)) return false;
    return true;
}

} // namespace mgmae
