#pragma once

// Differentiable primitives. Every op validates shapes, computes the
// forward result eagerly, and registers a backward closure when an input
// requires grad. Backward closures read the node's adjoint and accumulate
// into the parents' adjoints; saved activations are either the node's own
// output or cheap to recompute from parent values.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bmgf/error.hpp"
#include "bmgf/rng.hpp"
#include "bmgf/tensor.hpp"

namespace bmgf {

namespace detail {

inline void require_matrix(const Tensor& t, const char* op) {
    if (t.dim() != 2) {
        throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
    }
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
}

// Accepts {n} or (1 x n); returns n or throws.
inline int vector_length(const Tensor& t, const char* op) {
    if (t.dim() == 1) return t.extent(0);
    if (t.dim() == 2 && t.extent(0) == 1) return t.extent(1);
    throw ShapeError(std::string(op) + ": expected a vector, got " + shape_str(t.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "add");
    std::vector<double> out(a.values());
    for (size_t i = 0; i < out.size(); ++i) out[i] += b.value_at(static_cast<int>(i));
    return detail::make_op("add", a.shape(), std::move(out), {a, b}, [](detail::TensorNode& n) {
        for (size_t i = 0; i < n.adj.size(); ++i) {
            n.parents[0]->adj[i] += n.adj[i];
            n.parents[1]->adj[i] += n.adj[i];
        }
    });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "mul");
    std::vector<double> out(a.values());
    for (size_t i = 0; i < out.size(); ++i) out[i] *= b.value_at(static_cast<int>(i));
    return detail::make_op("mul", a.shape(), std::move(out), {a, b}, [](detail::TensorNode& n) {
        const auto& av = n.parents[0]->value;
        const auto& bv = n.parents[1]->value;
        for (size_t i = 0; i < n.adj.size(); ++i) {
            n.parents[0]->adj[i] += n.adj[i] * bv[i];
            n.parents[1]->adj[i] += n.adj[i] * av[i];
        }
    });
}

// alpha * x + beta, elementwise with constants.
inline Tensor affine(const Tensor& x, double alpha, double beta) {
    std::vector<double> out(x.values());
    for (double& v : out) v = alpha * v + beta;
    return detail::make_op("affine", x.shape(), std::move(out), {x}, [alpha](detail::TensorNode& n) {
        for (size_t i = 0; i < n.adj.size(); ++i) n.parents[0]->adj[i] += alpha * n.adj[i];
    });
}

inline Tensor relu(const Tensor& x) {
    std::vector<double> out(x.values());
    for (double& v : out) v = v > 0.0 ? v : 0.0;
    return detail::make_op("relu", x.shape(), std::move(out), {x}, [](detail::TensorNode& n) {
        const auto& xv = n.parents[0]->value;
        for (size_t i = 0; i < n.adj.size(); ++i) {
            if (xv[i] > 0.0) n.parents[0]->adj[i] += n.adj[i];
        }
    });
}

inline Tensor sigmoid(const Tensor& x) {
    std::vector<double> out(x.values());
    for (double& v : out) v = 1.0 / (1.0 + std::exp(-v));
    return detail::make_op("sigmoid", x.shape(), std::move(out), {x}, [](detail::TensorNode& n) {
        for (size_t i = 0; i < n.adj.size(); ++i) {
            double s = n.value[i];
            n.parents[0]->adj[i] += n.adj[i] * s * (1.0 - s);
        }
    });
}

// Elementwise max; on ties the gradient goes to the first input.
inline Tensor maximum(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "maximum");
    std::vector<double> out(a.values());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], b.value_at(static_cast<int>(i)));
    return detail::make_op("maximum", a.shape(), std::move(out), {a, b}, [](detail::TensorNode& n) {
        const auto& av = n.parents[0]->value;
        const auto& bv = n.parents[1]->value;
        for (size_t i = 0; i < n.adj.size(); ++i) {
            if (av[i] >= bv[i]) {
                n.parents[0]->adj[i] += n.adj[i];
            } else {
                n.parents[1]->adj[i] += n.adj[i];
            }
        }
    });
}

// ---------------------------------------------------------------------------
// matrix structure
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    detail::require_matrix(a, "matmul");
    detail::require_matrix(b, "matmul");
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: cannot multiply " + detail::shape_str(a.shape()) + " by " +
                         detail::shape_str(b.shape()));
    }
    const int m = a.rows(), k = a.cols(), nn = b.cols();
    std::vector<double> out(static_cast<size_t>(m) * nn, 0.0);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (int i = 0; i < m; ++i) {
        for (int l = 0; l < k; ++l) {
            double s = av[static_cast<size_t>(i) * k + l];
            if (s == 0.0) continue;
            const double* brow = &bv[static_cast<size_t>(l) * nn];
            double* orow = &out[static_cast<size_t>(i) * nn];
            for (int j = 0; j < nn; ++j) orow[j] += s * brow[j];
        }
    }
    return detail::make_op("matmul", {m, nn}, std::move(out), {a, b}, [m, k, nn](detail::TensorNode& n) {
        const auto& av = n.parents[0]->value;
        const auto& bv = n.parents[1]->value;
        auto& da = n.parents[0]->adj;
        auto& db = n.parents[1]->adj;
        // dA = dC * B^T
        for (int i = 0; i < m; ++i) {
            const double* crow = &n.adj[static_cast<size_t>(i) * nn];
            for (int l = 0; l < k; ++l) {
                const double* brow = &bv[static_cast<size_t>(l) * nn];
                double s = 0.0;
                for (int j = 0; j < nn; ++j) s += crow[j] * brow[j];
                da[static_cast<size_t>(i) * k + l] += s;
            }
        }
        // dB = A^T * dC
        for (int i = 0; i < m; ++i) {
            const double* crow = &n.adj[static_cast<size_t>(i) * nn];
            for (int l = 0; l < k; ++l) {
                double s = av[static_cast<size_t>(i) * k + l];
                if (s == 0.0) continue;
                double* brow = &db[static_cast<size_t>(l) * nn];
                for (int j = 0; j < nn; ++j) brow[j] += s * crow[j];
            }
        }
    });
}

inline Tensor transpose(const Tensor& a) {
    detail::require_matrix(a, "transpose");
    const int m = a.rows(), nn = a.cols();
    std::vector<double> out(static_cast<size_t>(m) * nn);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < nn; ++j) out[static_cast<size_t>(j) * m + i] = a.at(i, j);
    return detail::make_op("transpose", {nn, m}, std::move(out), {a}, [m, nn](detail::TensorNode& n) {
        for (int j = 0; j < nn; ++j)
            for (int i = 0; i < m; ++i)
                n.parents[0]->adj[static_cast<size_t>(i) * nn + j] += n.adj[static_cast<size_t>(j) * m + i];
    });
}

// Adds a length-n bias to every row of an (m x n) matrix.
inline Tensor add_bias(const Tensor& a, const Tensor& b) {
    detail::require_matrix(a, "add_bias");
    const int nn = detail::vector_length(b, "add_bias");
    if (nn != a.cols()) {
        throw ShapeError("add_bias: bias " + detail::shape_str(b.shape()) + " does not match " +
                         detail::shape_str(a.shape()));
    }
    const int m = a.rows();
    std::vector<double> out(a.values());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < nn; ++j) out[static_cast<size_t>(i) * nn + j] += b.value_at(j);
    return detail::make_op("add_bias", a.shape(), std::move(out), {a, b}, [m, nn](detail::TensorNode& n) {
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < nn; ++j) {
                double g = n.adj[static_cast<size_t>(i) * nn + j];
                n.parents[0]->adj[static_cast<size_t>(i) * nn + j] += g;
                n.parents[1]->adj[j] += g;
            }
        }
    });
}

// Multiplies every row of an (m x n) matrix elementwise by a length-n vector.
inline Tensor mul_row(const Tensor& a, const Tensor& r) {
    detail::require_matrix(a, "mul_row");
    const int nn = detail::vector_length(r, "mul_row");
    if (nn != a.cols()) {
        throw ShapeError("mul_row: vector " + detail::shape_str(r.shape()) + " does not match " +
                         detail::shape_str(a.shape()));
    }
    const int m = a.rows();
    std::vector<double> out(a.values());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < nn; ++j) out[static_cast<size_t>(i) * nn + j] *= r.value_at(j);
    return detail::make_op("mul_row", a.shape(), std::move(out), {a, r}, [m, nn](detail::TensorNode& n) {
        const auto& av = n.parents[0]->value;
        const auto& rv = n.parents[1]->value;
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < nn; ++j) {
                double g = n.adj[static_cast<size_t>(i) * nn + j];
                n.parents[0]->adj[static_cast<size_t>(i) * nn + j] += g * rv[j];
                n.parents[1]->adj[j] += g * av[static_cast<size_t>(i) * nn + j];
            }
        }
    });
}

// Multiplies row i of an (m x n) matrix by scalar c[i]; c is {m} or (m x 1).
inline Tensor mul_col(const Tensor& a, const Tensor& c) {
    detail::require_matrix(a, "mul_col");
    int m = a.rows();
    bool ok = (c.dim() == 1 && c.extent(0) == m) || (c.dim() == 2 && c.rows() == m && c.cols() == 1);
    if (!ok) {
        throw ShapeError("mul_col: gate " + detail::shape_str(c.shape()) + " does not match " +
                         detail::shape_str(a.shape()));
    }
    const int nn = a.cols();
    std::vector<double> out(a.values());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < nn; ++j) out[static_cast<size_t>(i) * nn + j] *= c.value_at(i);
    return detail::make_op("mul_col", a.shape(), std::move(out), {a, c}, [m, nn](detail::TensorNode& n) {
        const auto& av = n.parents[0]->value;
        const auto& cv = n.parents[1]->value;
        for (int i = 0; i < m; ++i) {
            double acc = 0.0;
            for (int j = 0; j < nn; ++j) {
                double g = n.adj[static_cast<size_t>(i) * nn + j];
                n.parents[0]->adj[static_cast<size_t>(i) * nn + j] += g * cv[i];
                acc += g * av[static_cast<size_t>(i) * nn + j];
            }
            n.parents[1]->adj[i] += acc;
        }
    });
}

// ---------------------------------------------------------------------------
// concatenation and slicing
// ---------------------------------------------------------------------------

inline Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    detail::require_matrix(parts[0], "concat_rows");
    const int nn = parts[0].cols();
    int m = 0;
    for (const Tensor& p : parts) {
        detail::require_matrix(p, "concat_rows");
        if (p.cols() != nn) {
            throw ShapeError("concat_rows: column mismatch " + detail::shape_str(p.shape()) +
                             " vs " + detail::shape_str(parts[0].shape()));
        }
        m += p.rows();
    }
    std::vector<double> out;
    out.reserve(static_cast<size_t>(m) * nn);
    for (const Tensor& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
    return detail::make_op("concat_rows", {m, nn}, std::move(out), parts, [](detail::TensorNode& n) {
        size_t off = 0;
        for (auto& p : n.parents) {
            for (size_t i = 0; i < p->value.size(); ++i) p->adj[i] += n.adj[off + i];
            off += p->value.size();
        }
    });
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    detail::require_matrix(parts[0], "concat_cols");
    const int m = parts[0].rows();
    int nn = 0;
    for (const Tensor& p : parts) {
        detail::require_matrix(p, "concat_cols");
        if (p.rows() != m) {
            throw ShapeError("concat_cols: row mismatch " + detail::shape_str(p.shape()) +
                             " vs " + detail::shape_str(parts[0].shape()));
        }
        nn += p.cols();
    }
    std::vector<double> out(static_cast<size_t>(m) * nn);
    int coff = 0;
    for (const Tensor& p : parts) {
        const int pc = p.cols();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < pc; ++j)
                out[static_cast<size_t>(i) * nn + coff + j] = p.at(i, j);
        coff += pc;
    }
    return detail::make_op("concat_cols", {m, nn}, std::move(out), parts, [m, nn](detail::TensorNode& n) {
        int coff = 0;
        for (auto& p : n.parents) {
            const int pc = static_cast<int>(p->value.size()) / m;
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < pc; ++j)
                    p->adj[static_cast<size_t>(i) * pc + j] += n.adj[static_cast<size_t>(i) * nn + coff + j];
            coff += pc;
        }
    });
}

// Rows [begin, end) of a matrix.
inline Tensor slice_rows(const Tensor& a, int begin, int end) {
    detail::require_matrix(a, "slice_rows");
    if (begin < 0 || end > a.rows() || begin >= end) {
        throw ContractError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                            ") out of " + detail::shape_str(a.shape()));
    }
    const int nn = a.cols();
    std::vector<double> out(a.values().begin() + static_cast<size_t>(begin) * nn,
                            a.values().begin() + static_cast<size_t>(end) * nn);
    return detail::make_op("slice_rows", {end - begin, nn}, std::move(out), {a},
                           [begin, nn](detail::TensorNode& n) {
                               size_t off = static_cast<size_t>(begin) * nn;
                               for (size_t i = 0; i < n.adj.size(); ++i) n.parents[0]->adj[off + i] += n.adj[i];
                           });
}

// Columns [begin, end) of a matrix.
inline Tensor slice_cols(const Tensor& a, int begin, int end) {
    detail::require_matrix(a, "slice_cols");
    if (begin < 0 || end > a.cols() || begin >= end) {
        throw ContractError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                            ") out of " + detail::shape_str(a.shape()));
    }
    const int m = a.rows(), nn = a.cols(), w = end - begin;
    std::vector<double> out(static_cast<size_t>(m) * w);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < w; ++j) out[static_cast<size_t>(i) * w + j] = a.at(i, begin + j);
    return detail::make_op("slice_cols", {m, w}, std::move(out), {a}, [m, nn, begin, w](detail::TensorNode& n) {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < w; ++j)
                n.parents[0]->adj[static_cast<size_t>(i) * nn + begin + j] += n.adj[static_cast<size_t>(i) * w + j];
    });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

inline Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    return detail::make_op("sum_all", {1}, {s}, {a}, [](detail::TensorNode& n) {
        for (double& g : n.parents[0]->adj) g += n.adj[0];
    });
}

inline Tensor mean_all(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    const double inv = 1.0 / a.numel();
    return detail::make_op("mean_all", {1}, {s * inv}, {a}, [inv](detail::TensorNode& n) {
        for (double& g : n.parents[0]->adj) g += n.adj[0] * inv;
    });
}

// Max over each row of an (m x n) matrix -> (m x 1). Ties route the
// gradient to the smallest column index.
inline Tensor rowwise_max(const Tensor& a) {
    detail::require_matrix(a, "rowwise_max");
    const int m = a.rows(), nn = a.cols();
    std::vector<double> out(m);
    std::vector<int> arg(m);
    for (int i = 0; i < m; ++i) {
        int best = 0;
        double bv = a.at(i, 0);
        for (int j = 1; j < nn; ++j) {
            if (a.at(i, j) > bv) {
                bv = a.at(i, j);
                best = j;
            }
        }
        out[i] = bv;
        arg[i] = best;
    }
    return detail::make_op("rowwise_max", {m, 1}, std::move(out), {a},
                           [nn, arg = std::move(arg)](detail::TensorNode& n) {
                               for (size_t i = 0; i < n.adj.size(); ++i)
                                   n.parents[0]->adj[i * nn + arg[i]] += n.adj[i];
                           });
}

// Max over each column of an (m x n) matrix -> (1 x n).
inline Tensor colwise_max(const Tensor& a) {
    detail::require_matrix(a, "colwise_max");
    const int m = a.rows(), nn = a.cols();
    std::vector<double> out(nn);
    std::vector<int> arg(nn);
    for (int j = 0; j < nn; ++j) {
        int best = 0;
        double bv = a.at(0, j);
        for (int i = 1; i < m; ++i) {
            if (a.at(i, j) > bv) {
                bv = a.at(i, j);
                best = i;
            }
        }
        out[j] = bv;
        arg[j] = best;
    }
    return detail::make_op("colwise_max", {1, nn}, std::move(out), {a},
                           [nn, arg = std::move(arg)](detail::TensorNode& n) {
                               for (int j = 0; j < nn; ++j)
                                   n.parents[0]->adj[static_cast<size_t>(arg[j]) * nn + j] += n.adj[j];
                           });
}

// Argmax along each row; plain data, not differentiable. Ties -> smallest index.
inline std::vector<int> rowwise_argmax(const Tensor& a) {
    detail::require_matrix(a, "rowwise_argmax");
    const int m = a.rows(), nn = a.cols();
    std::vector<int> arg(m);
    for (int i = 0; i < m; ++i) {
        int best = 0;
        double bv = a.at(i, 0);
        for (int j = 1; j < nn; ++j) {
            if (a.at(i, j) > bv) {
                bv = a.at(i, j);
                best = j;
            }
        }
        arg[i] = best;
    }
    return arg;
}

// ---------------------------------------------------------------------------
// softmax
// ---------------------------------------------------------------------------

// Row-wise softmax. When `valid` is non-empty it flags which columns may
// receive probability mass; masked columns get exactly 0.
inline Tensor softmax_rows(const Tensor& a, const std::vector<uint8_t>& valid = {}) {
    detail::require_matrix(a, "softmax_rows");
    const int m = a.rows(), nn = a.cols();
    if (!valid.empty() && static_cast<int>(valid.size()) != nn) {
        throw ShapeError("softmax_rows: mask of size " + std::to_string(valid.size()) +
                         " does not match " + detail::shape_str(a.shape()));
    }
    auto ok = [&](int j) { return valid.empty() || valid[j]; };
    int nvalid = 0;
    for (int j = 0; j < nn; ++j) nvalid += ok(j) ? 1 : 0;
    if (nvalid == 0) throw ContractError("softmax_rows: mask excludes every column");

    std::vector<double> out(static_cast<size_t>(m) * nn, 0.0);
    for (int i = 0; i < m; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < nn; ++j)
            if (ok(j)) mx = std::max(mx, a.at(i, j));
        double z = 0.0;
        for (int j = 0; j < nn; ++j) {
            if (ok(j)) {
                double e = std::exp(a.at(i, j) - mx);
                out[static_cast<size_t>(i) * nn + j] = e;
                z += e;
            }
        }
        for (int j = 0; j < nn; ++j) out[static_cast<size_t>(i) * nn + j] /= z;
    }
    return detail::make_op("softmax_rows", a.shape(), std::move(out), {a},
                           [m, nn, valid](detail::TensorNode& n) {
                               auto ok = [&](int j) { return valid.empty() || valid[j]; };
                               for (int i = 0; i < m; ++i) {
                                   const double* p = &n.value[static_cast<size_t>(i) * nn];
                                   const double* g = &n.adj[static_cast<size_t>(i) * nn];
                                   double dot = 0.0;
                                   for (int j = 0; j < nn; ++j)
                                       if (ok(j)) dot += g[j] * p[j];
                                   for (int j = 0; j < nn; ++j)
                                       if (ok(j)) n.parents[0]->adj[static_cast<size_t>(i) * nn + j] += p[j] * (g[j] - dot);
                               }
                           });
}

// Softmax over a 1-D vector.
inline Tensor softmax(const Tensor& x) {
    if (x.dim() == 2) return softmax_rows(x);
    if (x.dim() != 1) throw ShapeError("softmax: expected a vector, got " + detail::shape_str(x.shape()));
    const int nn = x.extent(0);
    double mx = *std::max_element(x.values().begin(), x.values().end());
    std::vector<double> out(nn);
    double z = 0.0;
    for (int j = 0; j < nn; ++j) {
        out[j] = std::exp(x.value_at(j) - mx);
        z += out[j];
    }
    for (double& v : out) v /= z;
    return detail::make_op("softmax", x.shape(), std::move(out), {x}, [](detail::TensorNode& n) {
        double dot = 0.0;
        for (size_t j = 0; j < n.adj.size(); ++j) dot += n.adj[j] * n.value[j];
        for (size_t j = 0; j < n.adj.size(); ++j) n.parents[0]->adj[j] += n.value[j] * (n.adj[j] - dot);
    });
}

// ---------------------------------------------------------------------------
// normalization, lookup, dropout, convolution
// ---------------------------------------------------------------------------

inline constexpr double kLayerNormEps = 1e-5;

// Row-wise layer normalization with per-channel gain and bias.
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
    detail::require_matrix(x, "layer_norm");
    const int m = x.rows(), nn = x.cols();
    if (detail::vector_length(gain, "layer_norm") != nn || detail::vector_length(bias, "layer_norm") != nn) {
        throw ShapeError("layer_norm: gain/bias do not match " + detail::shape_str(x.shape()));
    }
    std::vector<double> out(static_cast<size_t>(m) * nn);
    std::vector<double> inv_sigma(m);
    for (int i = 0; i < m; ++i) {
        const double* row = &x.values()[static_cast<size_t>(i) * nn];
        double mu = 0.0;
        for (int j = 0; j < nn; ++j) mu += row[j];
        mu /= nn;
        double var = 0.0;
        for (int j = 0; j < nn; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= nn;
        double is = 1.0 / std::sqrt(var + kLayerNormEps);
        inv_sigma[i] = is;
        for (int j = 0; j < nn; ++j)
            out[static_cast<size_t>(i) * nn + j] = (row[j] - mu) * is * gain.value_at(j) + bias.value_at(j);
    }
    return detail::make_op(
        "layer_norm", x.shape(), std::move(out), {x, gain, bias},
        [m, nn, inv_sigma = std::move(inv_sigma)](detail::TensorNode& n) {
            const auto& xv = n.parents[0]->value;
            const auto& gv = n.parents[1]->value;
            for (int i = 0; i < m; ++i) {
                const double* row = &xv[static_cast<size_t>(i) * nn];
                const double* dy = &n.adj[static_cast<size_t>(i) * nn];
                double mu = 0.0;
                for (int j = 0; j < nn; ++j) mu += row[j];
                mu /= nn;
                double is = inv_sigma[i];
                // xhat, dxhat, and the two row means the gradient needs
                double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                for (int j = 0; j < nn; ++j) {
                    double xhat = (row[j] - mu) * is;
                    double dxhat = dy[j] * gv[j];
                    mean_dxhat += dxhat;
                    mean_dxhat_xhat += dxhat * xhat;
                }
                mean_dxhat /= nn;
                mean_dxhat_xhat /= nn;
                for (int j = 0; j < nn; ++j) {
                    double xhat = (row[j] - mu) * is;
                    double dxhat = dy[j] * gv[j];
                    n.parents[0]->adj[static_cast<size_t>(i) * nn + j] +=
                        is * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
                    n.parents[1]->adj[j] += dy[j] * xhat;
                    n.parents[2]->adj[j] += dy[j];
                }
            }
        });
}

// Gathers table rows by token id -> (ids.size() x d).
inline Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids) {
    detail::require_matrix(table, "embedding_rows");
    const int v = table.rows(), d = table.cols();
    for (int id : ids) {
        if (id < 0 || id >= v) {
            throw InputError("embedding_rows: id " + std::to_string(id) + " outside table of " +
                             std::to_string(v) + " rows");
        }
    }
    const int L = static_cast<int>(ids.size());
    std::vector<double> out(static_cast<size_t>(L) * d);
    for (int t = 0; t < L; ++t)
        std::copy_n(&table.values()[static_cast<size_t>(ids[t]) * d], d, &out[static_cast<size_t>(t) * d]);
    return detail::make_op("embedding_rows", {L, d}, std::move(out), {table},
                           [d, ids](detail::TensorNode& n) {
                               for (size_t t = 0; t < ids.size(); ++t)
                                   for (int j = 0; j < d; ++j)
                                       n.parents[0]->adj[static_cast<size_t>(ids[t]) * d + j] += n.adj[t * d + j];
                           });
}

// Gathers arbitrary rows of a matrix; backward scatter-adds.
inline Tensor gather_rows(const Tensor& a, const std::vector<int>& idx) {
    detail::require_matrix(a, "gather_rows");
    const int m = a.rows(), nn = a.cols();
    for (int i : idx) {
        if (i < 0 || i >= m) throw ContractError("gather_rows: row " + std::to_string(i) + " out of range");
    }
    const int L = static_cast<int>(idx.size());
    std::vector<double> out(static_cast<size_t>(L) * nn);
    for (int t = 0; t < L; ++t)
        std::copy_n(&a.values()[static_cast<size_t>(idx[t]) * nn], nn, &out[static_cast<size_t>(t) * nn]);
    return detail::make_op("gather_rows", {L, nn}, std::move(out), {a}, [nn, idx](detail::TensorNode& n) {
        for (size_t t = 0; t < idx.size(); ++t)
            for (int j = 0; j < nn; ++j)
                n.parents[0]->adj[static_cast<size_t>(idx[t]) * nn + j] += n.adj[t * nn + j];
    });
}

// Inverted dropout: at train time keeps each element with probability
// keep_prob and scales by 1/keep_prob; identity at eval.
inline Tensor dropout(const Tensor& x, double keep_prob, Rng& rng, bool training) {
    if (!(keep_prob > 0.0 && keep_prob <= 1.0)) {
        throw ContractError("dropout: keep probability " + std::to_string(keep_prob) + " outside (0, 1]");
    }
    if (!training || keep_prob == 1.0) return x;
    std::vector<double> mask(x.numel());
    const double inv = 1.0 / keep_prob;
    for (double& mv : mask) mv = rng.bernoulli(keep_prob) ? inv : 0.0;
    std::vector<double> out(x.values());
    for (size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    return detail::make_op("dropout", x.shape(), std::move(out), {x},
                           [mask = std::move(mask)](detail::TensorNode& n) {
                               for (size_t i = 0; i < n.adj.size(); ++i)
                                   n.parents[0]->adj[i] += n.adj[i] * mask[i];
                           });
}

// 1-D convolution over a (T x D) sequence with s filters of kernel size c,
// stride 1, no padding. Weights are (s x c*D) with filter f tap t channel
// ch at [f, t*D+ch]; bias has length s. Output is (T-c+1 x s).
inline Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b, int kernel) {
    detail::require_matrix(x, "conv1d");
    detail::require_matrix(w, "conv1d");
    const int T = x.rows(), D = x.cols(), s = w.rows();
    if (kernel < 1 || w.cols() != kernel * D) {
        throw ShapeError("conv1d: weights " + detail::shape_str(w.shape()) + " do not match kernel " +
                         std::to_string(kernel) + " over " + detail::shape_str(x.shape()));
    }
    if (detail::vector_length(b, "conv1d") != s) {
        throw ShapeError("conv1d: bias " + detail::shape_str(b.shape()) + " does not match " +
                         std::to_string(s) + " filters");
    }
    if (T < kernel) {
        throw ShapeError("conv1d: sequence " + detail::shape_str(x.shape()) + " shorter than kernel " +
                         std::to_string(kernel));
    }
    const int To = T - kernel + 1;
    std::vector<double> out(static_cast<size_t>(To) * s);
    const int wlen = kernel * D;
    for (int t = 0; t < To; ++t) {
        const double* win = &x.values()[static_cast<size_t>(t) * D];
        for (int f = 0; f < s; ++f) {
            const double* wf = &w.values()[static_cast<size_t>(f) * wlen];
            double acc = b.value_at(f);
            for (int u = 0; u < wlen; ++u) acc += win[u] * wf[u];
            out[static_cast<size_t>(t) * s + f] = acc;
        }
    }
    return detail::make_op("conv1d", {To, s}, std::move(out), {x, w, b},
                           [To, s, D, wlen](detail::TensorNode& n) {
                               const auto& xv = n.parents[0]->value;
                               const auto& wv = n.parents[1]->value;
                               for (int t = 0; t < To; ++t) {
                                   const double* win = &xv[static_cast<size_t>(t) * D];
                                   double* dwin = &n.parents[0]->adj[static_cast<size_t>(t) * D];
                                   for (int f = 0; f < s; ++f) {
                                       double g = n.adj[static_cast<size_t>(t) * s + f];
                                       if (g == 0.0) continue;
                                       const double* wf = &wv[static_cast<size_t>(f) * wlen];
                                       double* dwf = &n.parents[1]->adj[static_cast<size_t>(f) * wlen];
                                       for (int u = 0; u < wlen; ++u) {
                                           dwin[u] += g * wf[u];
                                           dwf[u] += g * win[u];
                                       }
                                       n.parents[2]->adj[f] += g;
                                   }
                               }
                           });
}

// ---------------------------------------------------------------------------
// cosine family
// ---------------------------------------------------------------------------

// Cosine of a zero vector with anything is 0, with zero gradient; padded
// or zero-scaled positions then stay neutral under max and averaging.

namespace detail {

struct CosParts {
    double cos, p, q;  // cosine and the two norms; cos==0 when degenerate
    bool degenerate;
};

inline CosParts cos_parts(const double* u, const double* v, int d) {
    double s = 0.0, pp = 0.0, qq = 0.0;
    for (int t = 0; t < d; ++t) {
        s += u[t] * v[t];
        pp += u[t] * u[t];
        qq += v[t] * v[t];
    }
    if (pp == 0.0 || qq == 0.0) return {0.0, 0.0, 0.0, true};
    double p = std::sqrt(pp), q = std::sqrt(qq);
    return {s / (p * q), p, q, false};
}

// d(cos)/du and d(cos)/dv scaled by the upstream gradient g, accumulated
// into du/dv buffers.
inline void cos_backward(const double* u, const double* v, int d, const CosParts& cp, double g,
                         double* du, double* dv) {
    if (cp.degenerate || g == 0.0) return;
    const double ipq = 1.0 / (cp.p * cp.q);
    const double cu = cp.cos / (cp.p * cp.p);
    const double cv = cp.cos / (cp.q * cp.q);
    for (int t = 0; t < d; ++t) {
        du[t] += g * (v[t] * ipq - cu * u[t]);
        dv[t] += g * (u[t] * ipq - cv * v[t]);
    }
}

}  // namespace detail

// Plain cosine similarity of two equal-length vectors -> scalar.
inline Tensor cosine(const Tensor& u, const Tensor& v) {
    const int d = detail::vector_length(u, "cosine");
    if (detail::vector_length(v, "cosine") != d) {
        throw ShapeError("cosine: shape mismatch " + detail::shape_str(u.shape()) + " vs " +
                         detail::shape_str(v.shape()));
    }
    auto cp = detail::cos_parts(u.values().data(), v.values().data(), d);
    return detail::make_op("cosine", {1}, {cp.cos}, {u, v}, [d, cp](detail::TensorNode& n) {
        detail::cos_backward(n.parents[0]->value.data(), n.parents[1]->value.data(), d, cp, n.adj[0],
                             n.parents[0]->adj.data(), n.parents[1]->adj.data());
    });
}

// All-pairs cosine: out[i,j] = cos(x_i, y_j) for X (A x d), Y (B x d).
inline Tensor cosine_pairwise(const Tensor& x, const Tensor& y) {
    detail::require_matrix(x, "cosine_pairwise");
    detail::require_matrix(y, "cosine_pairwise");
    if (x.cols() != y.cols()) {
        throw ShapeError("cosine_pairwise: shape mismatch " + detail::shape_str(x.shape()) + " vs " +
                         detail::shape_str(y.shape()));
    }
    const int A = x.rows(), B = y.rows(), d = x.cols();
    std::vector<double> out(static_cast<size_t>(A) * B);
    for (int i = 0; i < A; ++i) {
        const double* xi = &x.values()[static_cast<size_t>(i) * d];
        for (int j = 0; j < B; ++j) {
            out[static_cast<size_t>(i) * B + j] =
                detail::cos_parts(xi, &y.values()[static_cast<size_t>(j) * d], d).cos;
        }
    }
    return detail::make_op("cosine_pairwise", {A, B}, std::move(out), {x, y},
                           [A, B, d](detail::TensorNode& n) {
                               const auto& xv = n.parents[0]->value;
                               const auto& yv = n.parents[1]->value;
                               for (int i = 0; i < A; ++i) {
                                   const double* xi = &xv[static_cast<size_t>(i) * d];
                                   double* dxi = &n.parents[0]->adj[static_cast<size_t>(i) * d];
                                   for (int j = 0; j < B; ++j) {
                                       double g = n.adj[static_cast<size_t>(i) * B + j];
                                       if (g == 0.0) continue;
                                       const double* yj = &yv[static_cast<size_t>(j) * d];
                                       auto cp = detail::cos_parts(xi, yj, d);
                                       detail::cos_backward(xi, yj, d, cp, g, dxi,
                                                            &n.parents[1]->adj[static_cast<size_t>(j) * d]);
                                   }
                               }
                           });
}

namespace detail {

// Shared backward piece for all MultiCos variants: given the upstream
// gradient g of cos(w * x, w * y), accumulates into dx, dy, dw.
inline void multicos_backward_pair(const double* x, const double* y, const double* w, int d, double g,
                                   double* dx, double* dy, double* dw) {
    if (g == 0.0) return;
    double s = 0.0, pp = 0.0, qq = 0.0;
    for (int t = 0; t < d; ++t) {
        double u = w[t] * x[t], v = w[t] * y[t];
        s += u * v;
        pp += u * u;
        qq += v * v;
    }
    if (pp == 0.0 || qq == 0.0) return;
    double p = std::sqrt(pp), q = std::sqrt(qq);
    double c = s / (p * q);
    const double ipq = 1.0 / (p * q);
    const double cu = c / pp;
    const double cv = c / qq;
    for (int t = 0; t < d; ++t) {
        double u = w[t] * x[t], v = w[t] * y[t];
        double du = g * (v * ipq - cu * u);
        double dv = g * (u * ipq - cv * v);
        dx[t] += w[t] * du;
        dy[t] += w[t] * dv;
        dw[t] += x[t] * du + y[t] * dv;
    }
}

inline double multicos_forward_pair(const double* x, const double* y, const double* w, int d) {
    double s = 0.0, pp = 0.0, qq = 0.0;
    for (int t = 0; t < d; ++t) {
        double u = w[t] * x[t], v = w[t] * y[t];
        s += u * v;
        pp += u * u;
        qq += v * v;
    }
    if (pp == 0.0 || qq == 0.0) return 0.0;
    return s / (std::sqrt(pp) * std::sqrt(qq));
}

inline void multicos_check(const Tensor& x, const Tensor& w, const char* op) {
    require_matrix(x, op);
    require_matrix(w, op);
    if (w.cols() != x.cols()) {
        throw ShapeError(std::string(op) + ": perspectives " + shape_str(w.shape()) +
                         " do not match vectors " + shape_str(x.shape()));
    }
}

}  // namespace detail

// Multi-perspective cosine of paired rows: out[i,k] = cos(w_k * x_i, w_k * y_i)
// for X, Y (A x d) and W (l x d).
inline Tensor multicos_rows(const Tensor& x, const Tensor& y, const Tensor& w) {
    detail::multicos_check(x, w, "multicos_rows");
    detail::require_same_shape(x, y, "multicos_rows");
    const int A = x.rows(), d = x.cols(), l = w.rows();
    std::vector<double> out(static_cast<size_t>(A) * l);
    for (int i = 0; i < A; ++i)
        for (int k = 0; k < l; ++k)
            out[static_cast<size_t>(i) * l + k] = detail::multicos_forward_pair(
                &x.values()[static_cast<size_t>(i) * d], &y.values()[static_cast<size_t>(i) * d],
                &w.values()[static_cast<size_t>(k) * d], d);
    return detail::make_op("multicos_rows", {A, l}, std::move(out), {x, y, w},
                           [A, d, l](detail::TensorNode& n) {
                               const auto& xv = n.parents[0]->value;
                               const auto& yv = n.parents[1]->value;
                               const auto& wv = n.parents[2]->value;
                               for (int i = 0; i < A; ++i)
                                   for (int k = 0; k < l; ++k)
                                       detail::multicos_backward_pair(
                                           &xv[static_cast<size_t>(i) * d], &yv[static_cast<size_t>(i) * d],
                                           &wv[static_cast<size_t>(k) * d], d,
                                           n.adj[static_cast<size_t>(i) * l + k],
                                           &n.parents[0]->adj[static_cast<size_t>(i) * d],
                                           &n.parents[1]->adj[static_cast<size_t>(i) * d],
                                           &n.parents[2]->adj[static_cast<size_t>(k) * d]);
                           });
}

// Multi-perspective cosine of every row of X against one shared vector:
// out[i,k] = cos(w_k * x_i, w_k * y).
inline Tensor multicos_one(const Tensor& x, const Tensor& y, const Tensor& w) {
    detail::multicos_check(x, w, "multicos_one");
    const int d = x.cols();
    if (detail::vector_length(y, "multicos_one") != d) {
        throw ShapeError("multicos_one: vector " + detail::shape_str(y.shape()) + " does not match " +
                         detail::shape_str(x.shape()));
    }
    const int A = x.rows(), l = w.rows();
    std::vector<double> out(static_cast<size_t>(A) * l);
    for (int i = 0; i < A; ++i)
        for (int k = 0; k < l; ++k)
            out[static_cast<size_t>(i) * l + k] = detail::multicos_forward_pair(
                &x.values()[static_cast<size_t>(i) * d], y.values().data(),
                &w.values()[static_cast<size_t>(k) * d], d);
    return detail::make_op("multicos_one", {A, l}, std::move(out), {x, y, w},
                           [A, d, l](detail::TensorNode& n) {
                               const auto& xv = n.parents[0]->value;
                               const auto& yv = n.parents[1]->value;
                               const auto& wv = n.parents[2]->value;
                               for (int i = 0; i < A; ++i)
                                   for (int k = 0; k < l; ++k)
                                       detail::multicos_backward_pair(
                                           &xv[static_cast<size_t>(i) * d], yv.data(),
                                           &wv[static_cast<size_t>(k) * d], d,
                                           n.adj[static_cast<size_t>(i) * l + k],
                                           &n.parents[0]->adj[static_cast<size_t>(i) * d],
                                           n.parents[1]->adj.data(),
                                           &n.parents[2]->adj[static_cast<size_t>(k) * d]);
                           });
}

// Maxpooling MultiCos: out[i,k] = max_j cos(w_k * x_i, w_k * y_j); the max is
// elementwise per perspective, ties keep the smallest j, and the gradient
// flows only through the winning pair.
inline Tensor multicos_max(const Tensor& x, const Tensor& y, const Tensor& w) {
    detail::multicos_check(x, w, "multicos_max");
    detail::multicos_check(y, w, "multicos_max");
    const int A = x.rows(), B = y.rows(), d = x.cols(), l = w.rows();
    std::vector<double> out(static_cast<size_t>(A) * l);
    std::vector<int> argmax(static_cast<size_t>(A) * l);
    // Per perspective, scale both sides once and reuse.
    std::vector<double> xs(static_cast<size_t>(A) * d), ys(static_cast<size_t>(B) * d);
    std::vector<double> xn(A), yn(B);
    for (int k = 0; k < l; ++k) {
        const double* wk = &w.values()[static_cast<size_t>(k) * d];
        for (int i = 0; i < A; ++i) {
            double nrm = 0.0;
            for (int t = 0; t < d; ++t) {
                double u = wk[t] * x.values()[static_cast<size_t>(i) * d + t];
                xs[static_cast<size_t>(i) * d + t] = u;
                nrm += u * u;
            }
            xn[i] = std::sqrt(nrm);
        }
        for (int j = 0; j < B; ++j) {
            double nrm = 0.0;
            for (int t = 0; t < d; ++t) {
                double v = wk[t] * y.values()[static_cast<size_t>(j) * d + t];
                ys[static_cast<size_t>(j) * d + t] = v;
                nrm += v * v;
            }
            yn[j] = std::sqrt(nrm);
        }
        for (int i = 0; i < A; ++i) {
            const double* u = &xs[static_cast<size_t>(i) * d];
            double best = -std::numeric_limits<double>::infinity();
            int bestj = 0;
            for (int j = 0; j < B; ++j) {
                double c = 0.0;
                if (xn[i] != 0.0 && yn[j] != 0.0) {
                    const double* v = &ys[static_cast<size_t>(j) * d];
                    double s = 0.0;
                    for (int t = 0; t < d; ++t) s += u[t] * v[t];
                    c = s / (xn[i] * yn[j]);
                }
                if (c > best) {
                    best = c;
                    bestj = j;
                }
            }
            out[static_cast<size_t>(i) * l + k] = best;
            argmax[static_cast<size_t>(i) * l + k] = bestj;
        }
    }
    return detail::make_op("multicos_max", {A, l}, std::move(out), {x, y, w},
                           [A, d, l, argmax = std::move(argmax)](detail::TensorNode& n) {
                               const auto& xv = n.parents[0]->value;
                               const auto& yv = n.parents[1]->value;
                               const auto& wv = n.parents[2]->value;
                               for (int i = 0; i < A; ++i) {
                                   for (int k = 0; k < l; ++k) {
                                       int j = argmax[static_cast<size_t>(i) * l + k];
                                       detail::multicos_backward_pair(
                                           &xv[static_cast<size_t>(i) * d], &yv[static_cast<size_t>(j) * d],
                                           &wv[static_cast<size_t>(k) * d], d,
                                           n.adj[static_cast<size_t>(i) * l + k],
                                           &n.parents[0]->adj[static_cast<size_t>(i) * d],
                                           &n.parents[1]->adj[static_cast<size_t>(j) * d],
                                           &n.parents[2]->adj[static_cast<size_t>(k) * d]);
                                   }
                               }
                           });
}

// ---------------------------------------------------------------------------
// weighted averaging and loss
// ---------------------------------------------------------------------------

inline constexpr double kAttentiveDenEps = 1e-8;

// Cosine-weighted mean of H's rows: out[i] = sum_j C[i,j]*H[j] / sum_j C[i,j].
// Because cosine weights are signed, a row whose denominator has magnitude
// below kAttentiveDenEps falls back to the unweighted mean of H's rows (the
// fallback output is locally constant in C, so C gets no gradient there).
inline Tensor attentive_average(const Tensor& c, const Tensor& h) {
    detail::require_matrix(c, "attentive_average");
    detail::require_matrix(h, "attentive_average");
    if (c.cols() != h.rows()) {
        throw ShapeError("attentive_average: weights " + detail::shape_str(c.shape()) +
                         " do not match rows " + detail::shape_str(h.shape()));
    }
    const int A = c.rows(), B = c.cols(), d = h.cols();
    std::vector<double> out(static_cast<size_t>(A) * d, 0.0);
    std::vector<double> dens(A);
    std::vector<uint8_t> fallback(A, 0);
    for (int i = 0; i < A; ++i) {
        double den = 0.0;
        for (int j = 0; j < B; ++j) den += c.at(i, j);
        dens[i] = den;
        double* oi = &out[static_cast<size_t>(i) * d];
        if (std::abs(den) < kAttentiveDenEps) {
            fallback[i] = 1;
            const double inv = 1.0 / B;
            for (int j = 0; j < B; ++j)
                for (int t = 0; t < d; ++t) oi[t] += inv * h.at(j, t);
        } else {
            for (int j = 0; j < B; ++j) {
                double wj = c.at(i, j) / den;
                if (wj == 0.0) continue;
                const double* hj = &h.values()[static_cast<size_t>(j) * d];
                for (int t = 0; t < d; ++t) oi[t] += wj * hj[t];
            }
        }
    }
    return detail::make_op(
        "attentive_average", {A, d}, std::move(out), {c, h},
        [A, B, d, dens = std::move(dens), fallback = std::move(fallback)](detail::TensorNode& n) {
            const auto& cv = n.parents[0]->value;
            const auto& hv = n.parents[1]->value;
            for (int i = 0; i < A; ++i) {
                const double* gi = &n.adj[static_cast<size_t>(i) * d];
                if (fallback[i]) {
                    const double inv = 1.0 / B;
                    for (int j = 0; j < B; ++j)
                        for (int t = 0; t < d; ++t)
                            n.parents[1]->adj[static_cast<size_t>(j) * d + t] += inv * gi[t];
                    continue;
                }
                const double* oi = &n.value[static_cast<size_t>(i) * d];
                const double inv_den = 1.0 / dens[i];
                for (int j = 0; j < B; ++j) {
                    const double* hj = &hv[static_cast<size_t>(j) * d];
                    double cw = cv[static_cast<size_t>(i) * B + j] * inv_den;
                    double dc = 0.0;
                    for (int t = 0; t < d; ++t) {
                        dc += gi[t] * (hj[t] - oi[t]);
                        n.parents[1]->adj[static_cast<size_t>(j) * d + t] += cw * gi[t];
                    }
                    n.parents[0]->adj[static_cast<size_t>(i) * B + j] += dc * inv_den;
                }
            }
        });
}

// Cross-entropy of a probability vector against a fixed target
// distribution: -sum_i target[i] * ln(p[i]).
inline Tensor cross_entropy(const Tensor& probs, const std::vector<double>& target) {
    if (probs.numel() != static_cast<int>(target.size())) {
        throw ShapeError("cross_entropy: " + std::to_string(target.size()) + " targets vs " +
                         detail::shape_str(probs.shape()));
    }
    double loss = 0.0;
    for (size_t i = 0; i < target.size(); ++i) {
        if (target[i] == 0.0) continue;
        double p = probs.value_at(static_cast<int>(i));
        if (p <= 0.0) {
            throw ContractError("cross_entropy: zero probability on a target class");
        }
        loss -= target[i] * std::log(p);
    }
    return detail::make_op("cross_entropy", {1}, {loss}, {probs}, [target](detail::TensorNode& n) {
        const auto& pv = n.parents[0]->value;
        for (size_t i = 0; i < target.size(); ++i) {
            if (target[i] != 0.0) n.parents[0]->adj[i] -= n.adj[0] * target[i] / pv[i];
        }
    });
}

}  // namespace bmgf
