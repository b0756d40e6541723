#pragma once

// Dense 2D/4D double arrays plus the three convolution-like kernels the rest
// of the library builds on: fixed 2D convolution, varying 2D convolution and
// zero-order up/down-sampling.
//
// Index conventions, used everywhere:
//   - Map2D(m, n): row m, column n, row-major storage.
//   - Every convolution anchors the kernel at its (0,0) element: output pixel
//     (m, n) reads input (m+r, n+t). No kernel rotation anywhere.
//   - Cache4D(m, n, r, t): a kernel-sized 2D patch over (r, t) sitting at
//     every map position (m, n).
//
// Summation order is fixed (kernel indices row-major innermost, map indices
// outermost) so that results are bit-reproducible run to run.

#include <cmath>
#include <cstddef>
#include <sstream>
#include <utility>
#include <vector>

#include "onn/errors.hpp"

namespace onn {

enum class PaddingMode {
    NoZeroPad, // output shrinks to (M-Kx+1) x (N-Ky+1)
    SamePad    // output keeps M x N; out-of-range input reads as 0
};

inline const char* to_string(PaddingMode m) {
    return m == PaddingMode::NoZeroPad ? "none" : "same";
}

struct Map2D {
    int rows = 0;
    int cols = 0;
    std::vector<double> data; // row-major, rows*cols entries

    Map2D() = default;

    Map2D(int r, int c, double fill = 0.0) : rows(r), cols(c) {
        if (r < 1 || c < 1) {
            std::ostringstream os;
            os << "Map2D dims must be positive, got " << r << "x" << c;
            throw DimensionError(os.str());
        }
        data.assign(static_cast<std::size_t>(r) * c, fill);
    }

    static Map2D from_data(int r, int c, std::vector<double> values) {
        Map2D m(r, c);
        if (values.size() != m.data.size()) {
            std::ostringstream os;
            os << "Map2D data length " << values.size() << " != " << r << "x" << c;
            throw DimensionError(os.str());
        }
        m.data = std::move(values);
        if (!m.all_finite())
            throw NumericError("Map2D constructed from non-finite data");
        return m;
    }

    double& operator()(int m, int n) { return data[static_cast<std::size_t>(m) * cols + n]; }
    double operator()(int m, int n) const { return data[static_cast<std::size_t>(m) * cols + n]; }

    // Guarded read: out-of-range positions are the constant zero pad.
    double at_or_zero(int m, int n) const {
        if (m < 0 || n < 0 || m >= rows || n >= cols)
            return 0.0;
        return (*this)(m, n);
    }

    int size() const { return rows * cols; }

    bool same_dims(const Map2D& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v))
                return false;
        return true;
    }
};

struct Cache4D {
    int rows = 0;  // map rows (M)
    int cols = 0;  // map cols (N)
    int krows = 0; // kernel rows (Kx)
    int kcols = 0; // kernel cols (Ky)
    std::vector<double> data; // indexed (m, n, r, t), t fastest

    Cache4D() = default;

    Cache4D(int m, int n, int kr, int kc, double fill = 0.0)
        : rows(m), cols(n), krows(kr), kcols(kc) {
        if (m < 1 || n < 1 || kr < 1 || kc < 1) {
            std::ostringstream os;
            os << "Cache4D dims must be positive, got " << m << "x" << n << "x" << kr << "x" << kc;
            throw DimensionError(os.str());
        }
        data.assign(static_cast<std::size_t>(m) * n * kr * kc, fill);
    }

    double& operator()(int m, int n, int r, int t) {
        return data[((static_cast<std::size_t>(m) * cols + n) * krows + r) * kcols + t];
    }
    double operator()(int m, int n, int r, int t) const {
        return data[((static_cast<std::size_t>(m) * cols + n) * krows + r) * kcols + t];
    }
};

namespace detail {

inline void require_finite(const Map2D& m, const char* what) {
    if (!m.all_finite()) {
        std::ostringstream os;
        os << what << " produced a non-finite value";
        throw NumericError(os.str());
    }
}

} // namespace detail

// Fixed 2D convolution (correlation form), kernel anchored at (0,0):
//   out(m, n) = sum_{r,t} kernel(r, t) * input(m+r, n+t)
// NoZeroPad: m in [0, M-Kx], output (M-Kx+1) x (N-Ky+1).
// SamePad:   m in [0, M-1], out-of-range input reads as 0, output M x N.
inline Map2D conv2d(const Map2D& input, const Map2D& kernel, PaddingMode mode) {
    if (kernel.rows > input.rows || kernel.cols > input.cols) {
        std::ostringstream os;
        os << "conv2d kernel " << kernel.rows << "x" << kernel.cols << " exceeds input "
           << input.rows << "x" << input.cols;
        throw DimensionError(os.str());
    }
    const int out_rows = mode == PaddingMode::SamePad ? input.rows : input.rows - kernel.rows + 1;
    const int out_cols = mode == PaddingMode::SamePad ? input.cols : input.cols - kernel.cols + 1;
    Map2D out(out_rows, out_cols);
    for (int m = 0; m < out_rows; ++m) {
        for (int n = 0; n < out_cols; ++n) {
            double acc = 0.0;
            for (int r = 0; r < kernel.rows; ++r)
                for (int t = 0; t < kernel.cols; ++t)
                    acc += kernel(r, t) * input.at_or_zero(m + r, n + t);
            out(m, n) = acc;
        }
    }
    detail::require_finite(out, "conv2d");
    return out;
}

// Full convolution with zero padding: the delta map is padded by (Kx-1, Ky-1)
// zeros on every boundary and correlated with the kernel as given, growing
// the output to (Md+Kx-1) x (Nd+Ky-1). Callers wanting the classic CNN
// delta back-propagation pass a rot180'ed kernel.
inline Map2D conv2d_full(const Map2D& delta, const Map2D& kernel) {
    const int out_rows = delta.rows + kernel.rows - 1;
    const int out_cols = delta.cols + kernel.cols - 1;
    Map2D out(out_rows, out_cols);
    for (int m = 0; m < out_rows; ++m) {
        for (int n = 0; n < out_cols; ++n) {
            double acc = 0.0;
            for (int r = 0; r < kernel.rows; ++r)
                for (int t = 0; t < kernel.cols; ++t)
                    acc += kernel(r, t) *
                           delta.at_or_zero(m + r - (kernel.rows - 1), n + t - (kernel.cols - 1));
            out(m, n) = acc;
        }
    }
    detail::require_finite(out, "conv2d_full");
    return out;
}

// Varying 2D convolution, delta mode: the kernel changes with the output
// position. Produces a map with the varying kernel's (rows, cols):
//   out(m, n) = sum_{r,t} delta(m-r, n-t) * K(m, n, r, t)
// with out-of-range delta reads as 0.
inline Map2D conv2dvar_delta(const Map2D& delta, const Cache4D& varying) {
    Map2D out(varying.rows, varying.cols);
    for (int m = 0; m < varying.rows; ++m) {
        for (int n = 0; n < varying.cols; ++n) {
            double acc = 0.0;
            for (int r = 0; r < varying.krows; ++r)
                for (int t = 0; t < varying.kcols; ++t)
                    acc += delta.at_or_zero(m - r, n - t) * varying(m, n, r, t);
            out(m, n) = acc;
        }
    }
    detail::require_finite(out, "conv2dvar_delta");
    return out;
}

// Varying 2D convolution, weight mode: accumulates one value per kernel
// position out of the whole delta map:
//   out(r, t) = sum_{m,n} delta(m, n) * K(m+r, n+t, r, t)
// The varying kernel must extend the delta dims by the kernel dims minus one
// so every (m+r, n+t) read exists.
inline Map2D conv2dvar_weight(const Map2D& delta, const Cache4D& varying) {
    if (varying.rows != delta.rows + varying.krows - 1 ||
        varying.cols != delta.cols + varying.kcols - 1) {
        std::ostringstream os;
        os << "conv2dvar_weight: varying kernel " << varying.rows << "x" << varying.cols
           << " inconsistent with delta " << delta.rows << "x" << delta.cols << " and kernel "
           << varying.krows << "x" << varying.kcols;
        throw DimensionError(os.str());
    }
    Map2D out(varying.krows, varying.kcols);
    for (int r = 0; r < varying.krows; ++r) {
        for (int t = 0; t < varying.kcols; ++t) {
            double acc = 0.0;
            for (int m = 0; m < delta.rows; ++m)
                for (int n = 0; n < delta.cols; ++n)
                    acc += delta(m, n) * varying(m + r, n + t, r, t);
            out(r, t) = acc;
        }
    }
    detail::require_finite(out, "conv2dvar_weight");
    return out;
}

// Average pooling over non-overlapping ssx x ssy blocks. Dims that do not
// divide evenly produce trailing partial blocks averaged over the pixels
// actually present.
inline Map2D downsample(const Map2D& map, int ssx, int ssy) {
    if (ssx < 1 || ssy < 1) {
        std::ostringstream os;
        os << "downsample factors must be >= 1, got " << ssx << "x" << ssy;
        throw InputError(os.str());
    }
    const int out_rows = (map.rows + ssx - 1) / ssx;
    const int out_cols = (map.cols + ssy - 1) / ssy;
    Map2D out(out_rows, out_cols);
    for (int m = 0; m < out_rows; ++m) {
        for (int n = 0; n < out_cols; ++n) {
            const int r_end = std::min(map.rows, (m + 1) * ssx);
            const int c_end = std::min(map.cols, (n + 1) * ssy);
            double acc = 0.0;
            for (int r = m * ssx; r < r_end; ++r)
                for (int c = n * ssy; c < c_end; ++c)
                    acc += map(r, c);
            out(m, n) = acc / ((r_end - m * ssx) * (c_end - n * ssy));
        }
    }
    detail::require_finite(out, "downsample");
    return out;
}

// Zero-order up-sampling: each pixel replicated into a usx x usy block.
inline Map2D upsample(const Map2D& map, int usx, int usy) {
    if (usx < 1 || usy < 1) {
        std::ostringstream os;
        os << "upsample factors must be >= 1, got " << usx << "x" << usy;
        throw InputError(os.str());
    }
    Map2D out(map.rows * usx, map.cols * usy);
    for (int m = 0; m < out.rows; ++m)
        for (int n = 0; n < out.cols; ++n)
            out(m, n) = map(m / usx, n / usy);
    return out;
}

// Adjoint of downsample onto a map of the given dims: each pooled delta pixel
// spreads back to its block scaled by 1/|block|. Equals upsample(dy)/(ssx*ssy)
// when the dims divide evenly.
inline Map2D downsample_adjoint(const Map2D& dy, int ssx, int ssy, int target_rows,
                                int target_cols) {
    if ((target_rows + ssx - 1) / ssx != dy.rows || (target_cols + ssy - 1) / ssy != dy.cols) {
        std::ostringstream os;
        os << "downsample_adjoint: delta " << dy.rows << "x" << dy.cols
           << " inconsistent with target " << target_rows << "x" << target_cols << " at factors "
           << ssx << "x" << ssy;
        throw DimensionError(os.str());
    }
    Map2D out(target_rows, target_cols);
    for (int m = 0; m < target_rows; ++m) {
        for (int n = 0; n < target_cols; ++n) {
            const int bm = m / ssx;
            const int bn = n / ssy;
            const int block_r = std::min(target_rows, (bm + 1) * ssx) - bm * ssx;
            const int block_c = std::min(target_cols, (bn + 1) * ssy) - bn * ssy;
            out(m, n) = dy(bm, bn) / (block_r * block_c);
        }
    }
    return out;
}

// Adjoint of upsample: sums each usx x usy block of the delta back onto the
// source pixel, i.e. (usx*usy) * downsample(dy).
inline Map2D upsample_adjoint(const Map2D& dy, int usx, int usy) {
    if (dy.rows % usx != 0 || dy.cols % usy != 0) {
        std::ostringstream os;
        os << "upsample_adjoint: delta " << dy.rows << "x" << dy.cols << " not divisible by "
           << usx << "x" << usy;
        throw DimensionError(os.str());
    }
    Map2D out(dy.rows / usx, dy.cols / usy);
    for (int m = 0; m < out.rows; ++m) {
        for (int n = 0; n < out.cols; ++n) {
            double acc = 0.0;
            for (int r = m * usx; r < (m + 1) * usx; ++r)
                for (int c = n * usy; c < (n + 1) * usy; ++c)
                    acc += dy(r, c);
            out(m, n) = acc;
        }
    }
    return out;
}

inline Map2D rot180(const Map2D& m) {
    Map2D out(m.rows, m.cols);
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c)
            out(r, c) = m(m.rows - 1 - r, m.cols - 1 - c);
    return out;
}

inline Map2D hadamard(const Map2D& a, const Map2D& b) {
    if (!a.same_dims(b)) {
        std::ostringstream os;
        os << "hadamard dims mismatch: " << a.rows << "x" << a.cols << " vs " << b.rows << "x"
           << b.cols;
        throw DimensionError(os.str());
    }
    Map2D out = a;
    for (int i = 0; i < out.size(); ++i)
        out.data[i] *= b.data[i];
    return out;
}

inline void add_in_place(Map2D& acc, const Map2D& m) {
    if (!acc.same_dims(m)) {
        std::ostringstream os;
        os << "add_in_place dims mismatch: " << acc.rows << "x" << acc.cols << " vs " << m.rows
           << "x" << m.cols;
        throw DimensionError(os.str());
    }
    for (int i = 0; i < acc.size(); ++i)
        acc.data[i] += m.data[i];
}

inline void scale_in_place(Map2D& m, double s) {
    for (double& v : m.data)
        v *= s;
}

inline double sum(const Map2D& m) {
    double acc = 0.0;
    for (double v : m.data)
        acc += v;
    return acc;
}

inline double max_abs_diff(const Map2D& a, const Map2D& b) {
    if (!a.same_dims(b))
        throw DimensionError("max_abs_diff dims mismatch");
    double d = 0.0;
    for (int i = 0; i < a.size(); ++i)
        d = std::max(d, std::fabs(a.data[i] - b.data[i]));
    return d;
}

} // namespace onn
