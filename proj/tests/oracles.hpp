#pragma once

// Reference implementations written as plain scalar loops, independent of
// the tensor library, for checking module outputs against.

#include <cmath>
#include <cstdlib>
#include <vector>

#include "bmgf/tensor.hpp"

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const bmgf::Tensor& t) {
    Mat m(t.rows(), std::vector<double>(t.cols()));
    for (int i = 0; i < t.rows(); ++i)
        for (int j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
    return m;
}

inline double cosv(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0, pa = 0, pb = 0;
    for (size_t t = 0; t < a.size(); ++t) {
        s += a[t] * b[t];
        pa += a[t] * a[t];
        pb += b[t] * b[t];
    }
    if (pa == 0.0 || pb == 0.0) return 0.0;
    return s / (std::sqrt(pa) * std::sqrt(pb));
}

inline std::vector<double> scaled(const std::vector<double>& w, const std::vector<double>& x) {
    std::vector<double> out(x.size());
    for (size_t t = 0; t < x.size(); ++t) out[t] = w[t] * x[t];
    return out;
}

// One matching direction: every row of a against the rows of b, under the
// five perspective matrices. Feature order per row:
//   [ full-vs-first (l) | full-vs-last (l) | maxpool (l) | attentive (l) | max-attentive (l) ]
inline Mat match_direction(const Mat& a, const Mat& b, const Mat& wf, const Mat& wl, const Mat& wmax,
                           const Mat& watt, const Mat& wmaxatt) {
    const size_t l = wf.size();
    const size_t A = a.size(), B = b.size(), d = a[0].size();
    Mat out(A, std::vector<double>(5 * l, 0.0));
    for (size_t i = 0; i < A; ++i) {
        // plain cosine row against every b row, for both attentive modes
        std::vector<double> c(B);
        for (size_t j = 0; j < B; ++j) c[j] = cosv(a[i], b[j]);
        double den = 0;
        for (double v : c) den += v;
        std::vector<double> mean_b(d, 0.0);
        if (std::abs(den) < 1e-8) {
            for (size_t j = 0; j < B; ++j)
                for (size_t t = 0; t < d; ++t) mean_b[t] += b[j][t] / B;
        } else {
            for (size_t j = 0; j < B; ++j)
                for (size_t t = 0; t < d; ++t) mean_b[t] += c[j] / den * b[j][t];
        }
        size_t best_j = 0;
        for (size_t j = 1; j < B; ++j)
            if (c[j] > c[best_j]) best_j = j;

        for (size_t k = 0; k < l; ++k) {
            out[i][k] = cosv(scaled(wf[k], a[i]), scaled(wf[k], b.front()));
            out[i][l + k] = cosv(scaled(wl[k], a[i]), scaled(wl[k], b.back()));
            double mx = -2.0;
            for (size_t j = 0; j < B; ++j)
                mx = std::max(mx, cosv(scaled(wmax[k], a[i]), scaled(wmax[k], b[j])));
            out[i][2 * l + k] = mx;
            out[i][3 * l + k] = cosv(scaled(watt[k], a[i]), scaled(watt[k], mean_b));
            out[i][4 * l + k] = cosv(scaled(wmaxatt[k], a[i]), scaled(wmaxatt[k], b[best_j]));
        }
    }
    return out;
}

}  // namespace oracle
