#pragma once

// The operator library: 7 nodal operators, 2 pool operators and 2 activation
// operators together with their analytic derivatives, plus the 28-entry
// operator-set enumeration (index = pool*14 + act*7 + nodal).
//
// A nodal operator psi(y, w) transforms one input pixel y under one kernel
// weight w; a pool operator aggregates the kernel window's nodal terms; the
// activation squashes the pooled map. Set index 0 (sum, tanh, mul) makes an
// operational neuron an ordinary convolutional one.

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>
#include <vector>

#include "onn/errors.hpp"

namespace onn {

enum class NodalId : int {
    Mul = 0,
    Cubic = 1,
    Harmonic = 2,
    Exp = 3,
    DoG = 4,
    Sinc = 5,
    Chirp = 6,
};

enum class PoolId : int {
    Summation = 0,
    Median = 1,
};

enum class ActId : int {
    Tanh = 0,
    LinCut = 1,
};

inline constexpr int kNodalCount = 7;
inline constexpr int kPoolCount = 2;
inline constexpr int kActCount = 2;
inline constexpr int kOperatorSetCount = kPoolCount * kActCount * kNodalCount; // 28

// |y| below this uses the series form of sinc (removable singularity at 0).
inline constexpr double kSincGuard = 1e-6;

inline const char* to_string(NodalId id) {
    switch (id) {
    case NodalId::Mul: return "mul";
    case NodalId::Cubic: return "cubic";
    case NodalId::Harmonic: return "harmonic";
    case NodalId::Exp: return "exp";
    case NodalId::DoG: return "dog";
    case NodalId::Sinc: return "sinc";
    case NodalId::Chirp: return "chirp";
    }
    return "?";
}

inline const char* to_string(PoolId id) { return id == PoolId::Summation ? "sum" : "median"; }
inline const char* to_string(ActId id) { return id == ActId::Tanh ? "tanh" : "lincut"; }

// Scale constants of the parametric operators. The operating range of maps is
// [-1, 1] and fresh weights sit in (-0.1, 0.1); the defaults keep each nodal
// output bounded and the nonlinearity active there.
struct OperatorParams {
    double k_harmonic = 1.5707963267948966; // K in sin(K*w*y), shared with sinc
    double k_cubic = 1.5707963267948966;    // K in K*w*y^3
    double k_chirp = 1.5707963267948966;    // K_C in sin(K_C*w*y^2)
    double k_dog = 1.0;                     // K_D in w*y*exp(-K_D*w^2*y^2)
    double cut = 1.0;                       // lin-cut threshold

    void validate() const {
        if (!(k_harmonic > 0.0 && k_cubic > 0.0 && k_chirp > 0.0 && k_dog > 0.0 && cut > 0.0))
            throw InputError("OperatorParams constants must all be strictly positive");
    }
};

struct OperatorSet {
    PoolId pool = PoolId::Summation;
    ActId act = ActId::Tanh;
    NodalId nodal = NodalId::Mul;

    bool operator==(const OperatorSet&) const = default;
};

inline int set_to_index(const OperatorSet& s) {
    return static_cast<int>(s.pool) * (kActCount * kNodalCount) +
           static_cast<int>(s.act) * kNodalCount + static_cast<int>(s.nodal);
}

inline OperatorSet index_to_set(int index) {
    if (index < 0 || index >= kOperatorSetCount) {
        std::ostringstream os;
        os << "operator set index " << index << " outside [0, " << (kOperatorSetCount - 1) << "]";
        throw InputError(os.str());
    }
    OperatorSet s;
    s.pool = static_cast<PoolId>(index / (kActCount * kNodalCount));
    s.act = static_cast<ActId>((index / kNodalCount) % kActCount);
    s.nodal = static_cast<NodalId>(index % kNodalCount);
    return s;
}

namespace detail {

inline void require_finite_scalar(double y, double w, const char* what) {
    if (!std::isfinite(y) || !std::isfinite(w)) {
        std::ostringstream os;
        os << what << " needs finite inputs, got y=" << y << " w=" << w;
        throw NumericError(os.str());
    }
}

} // namespace detail

inline double nodal_eval(NodalId id, double y, double w, const OperatorParams& p) {
    detail::require_finite_scalar(y, w, "nodal_eval");
    switch (id) {
    case NodalId::Mul:
        return w * y;
    case NodalId::Cubic:
        return p.k_cubic * w * y * y * y;
    case NodalId::Harmonic:
        return std::sin(p.k_harmonic * w * y);
    case NodalId::Exp:
        return std::exp(w * y) - 1.0;
    case NodalId::DoG: {
        const double g = p.k_dog * w * w * y * y;
        return w * y * std::exp(-g);
    }
    case NodalId::Sinc: {
        const double a = p.k_harmonic * w;
        if (std::fabs(y) < kSincGuard) {
            const double ay = a * y;
            return a * (1.0 - ay * ay / 6.0); // sin(a*y)/y near the y=0 limit a
        }
        return std::sin(a * y) / y;
    }
    case NodalId::Chirp:
        return std::sin(p.k_chirp * w * y * y);
    }
    throw InputError("unknown nodal id");
}

struct NodalGrad {
    double d_w = 0.0;
    double d_y = 0.0;
};

inline NodalGrad nodal_grad(NodalId id, double y, double w, const OperatorParams& p) {
    detail::require_finite_scalar(y, w, "nodal_grad");
    switch (id) {
    case NodalId::Mul:
        return {y, w};
    case NodalId::Cubic:
        return {p.k_cubic * y * y * y, 3.0 * p.k_cubic * w * y * y};
    case NodalId::Harmonic: {
        const double c = std::cos(p.k_harmonic * w * y);
        return {p.k_harmonic * y * c, p.k_harmonic * w * c};
    }
    case NodalId::Exp: {
        const double e = std::exp(w * y);
        return {y * e, w * e};
    }
    case NodalId::DoG: {
        const double g = p.k_dog * w * w * y * y;
        const double e = std::exp(-g);
        const double common = (1.0 - 2.0 * g) * e;
        return {y * common, w * common};
    }
    case NodalId::Sinc: {
        const double a = p.k_harmonic * w;
        const double dw = p.k_harmonic * std::cos(a * y);
        if (std::fabs(y) < kSincGuard) {
            // d/dy [a - a^3 y^2/6] = -a^3 y / 3
            return {dw, -a * a * a * y / 3.0};
        }
        const double dy = (a * std::cos(a * y)) / y - std::sin(a * y) / (y * y);
        return {dw, dy};
    }
    case NodalId::Chirp: {
        const double c = std::cos(p.k_chirp * w * y * y);
        return {p.k_chirp * y * y * c, 2.0 * p.k_chirp * w * y * c};
    }
    }
    throw InputError("unknown nodal id");
}

struct PoolValue {
    double value = 0.0;
    int argmedian = -1; // original term index the median subgradient routes to; -1 for summation
};

// Summation pools to the plain sum. Median picks the lower-middle order
// statistic; on ties the subgradient routes to the lowest original index
// among equal values (deterministic).
inline PoolValue pool_eval(PoolId id, std::span<const double> terms) {
    if (terms.empty())
        throw InputError("pool_eval: empty term list");
    if (id == PoolId::Summation) {
        double acc = 0.0;
        for (double v : terms)
            acc += v;
        return {acc, -1};
    }
    constexpr int kStack = 64;
    const int n = static_cast<int>(terms.size());
    const int k = (n - 1) / 2;
    double stack_buf[kStack];
    std::vector<double> heap_buf;
    double* buf = stack_buf;
    if (n > kStack) {
        heap_buf.assign(terms.begin(), terms.end());
        buf = heap_buf.data();
    } else {
        std::copy(terms.begin(), terms.end(), stack_buf);
    }
    std::nth_element(buf, buf + k, buf + n);
    const double v = buf[k];
    for (int i = 0; i < n; ++i)
        if (terms[i] == v)
            return {v, i};
    throw NumericError("pool_eval: median not found among terms (NaN input?)");
}

inline double pool_grad(PoolId id, std::span<const double> terms, int term_index) {
    if (term_index < 0 || term_index >= static_cast<int>(terms.size()))
        throw InputError("pool_grad: term index out of range");
    if (id == PoolId::Summation)
        return 1.0;
    return pool_eval(PoolId::Median, terms).argmedian == term_index ? 1.0 : 0.0;
}

inline double act_eval(ActId id, double x, const OperatorParams& p) {
    if (id == ActId::Tanh) {
        return std::tanh(x); // (1 - e^{-2x}) / (1 + e^{-2x})
    }
    if (x > p.cut)
        return 1.0;
    if (x < -p.cut)
        return -1.0;
    return x / p.cut;
}

inline double act_grad(ActId id, double x, const OperatorParams& p) {
    if (id == ActId::Tanh) {
        const double f = std::tanh(x);
        return 1.0 - f * f;
    }
    return std::fabs(x) <= p.cut ? 1.0 / p.cut : 0.0;
}

} // namespace onn
