#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "onn/operators.hpp"
#include "onn/rng.hpp"

using namespace onn;

namespace {

// Relative error with a unit absolute floor: finite differences of O(1..50)
// function values at h=1e-7 carry ~1e-7 absolute noise, so tiny derivatives
// are held to a matching absolute tolerance.
double rel_err(double a, double b) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1.0});
}

} // namespace

TEST_CASE("operator set index encoding is the table order and bijective") {
    REQUIRE(set_to_index({PoolId::Summation, ActId::Tanh, NodalId::Mul}) == 0);
    REQUIRE(index_to_set(9) == OperatorSet{PoolId::Summation, ActId::LinCut, NodalId::Harmonic});
    REQUIRE(index_to_set(12) == OperatorSet{PoolId::Summation, ActId::LinCut, NodalId::Sinc});
    REQUIRE(index_to_set(13) == OperatorSet{PoolId::Summation, ActId::LinCut, NodalId::Chirp});
    REQUIRE(index_to_set(16) == OperatorSet{PoolId::Median, ActId::Tanh, NodalId::Harmonic});
    REQUIRE(index_to_set(27) == OperatorSet{PoolId::Median, ActId::LinCut, NodalId::Chirp});
    for (int i = 0; i < kOperatorSetCount; ++i)
        REQUIRE(set_to_index(index_to_set(i)) == i);
    REQUIRE_THROWS_AS(index_to_set(28), InputError);
    REQUIRE_THROWS_AS(index_to_set(-1), InputError);
}

TEST_CASE("nodal_eval table values") {
    OperatorParams p;
    REQUIRE(nodal_eval(NodalId::Mul, 0.5, 0.2, p) == Catch::Approx(0.1));
    REQUIRE(nodal_eval(NodalId::Exp, 0.37, 0.0, p) == 0.0);

    p.k_harmonic = 3.14159265358979323846;
    REQUIRE(nodal_eval(NodalId::Harmonic, 0.3, 0.4, p) ==
            Catch::Approx(std::sin(0.12 * 3.14159265358979323846)));

    // All-zero input maps every nodal operator except sinc to 0.
    OperatorParams q;
    for (NodalId id : {NodalId::Mul, NodalId::Cubic, NodalId::Harmonic, NodalId::Exp, NodalId::DoG,
                       NodalId::Chirp})
        REQUIRE(nodal_eval(id, 0.0, 0.07, q) == 0.0);
    REQUIRE(nodal_eval(NodalId::Sinc, 0.0, 0.07, q) == Catch::Approx(q.k_harmonic * 0.07));

    REQUIRE_THROWS_AS(nodal_eval(NodalId::Mul, std::nan(""), 0.1, q), NumericError);
}

TEST_CASE("nodal_grad closed forms at simple points") {
    OperatorParams p;
    const NodalGrad mul = nodal_grad(NodalId::Mul, 0.31, -0.77, p);
    REQUIRE(mul.d_w == 0.31);
    REQUIRE(mul.d_y == -0.77);

    const NodalGrad cubic = nodal_grad(NodalId::Cubic, 0.0, 0.5, p);
    REQUIRE(cubic.d_w == 0.0);
    REQUIRE(cubic.d_y == 0.0);
}

TEST_CASE("nodal gradients match central finite differences on the grid") {
    OperatorParams p;
    const double h = 1e-7;
    const int n = 32;
    for (int idi = 0; idi < kNodalCount; ++idi) {
        const NodalId id = static_cast<NodalId>(idi);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const double y = -1.0 + 2.0 * i / (n - 1);
                const double w = -1.0 + 2.0 * j / (n - 1);
                if (id == NodalId::Sinc && std::fabs(y) < 1e-4)
                    continue;
                const NodalGrad g = nodal_grad(id, y, w, p);
                const double fd_w =
                    (nodal_eval(id, y, w + h, p) - nodal_eval(id, y, w - h, p)) / (2 * h);
                const double fd_y =
                    (nodal_eval(id, y + h, w, p) - nodal_eval(id, y - h, w, p)) / (2 * h);
                INFO("nodal " << to_string(id) << " y=" << y << " w=" << w);
                REQUIRE(rel_err(g.d_w, fd_w) < 1e-6);
                REQUIRE(rel_err(g.d_y, fd_y) < 1e-6);
            }
        }
    }
}

TEST_CASE("nodal gradients with random draws, 1000 per id") {
    OperatorParams p;
    Rng rng(99);
    const double h = 1e-7;
    for (int idi = 0; idi < kNodalCount; ++idi) {
        const NodalId id = static_cast<NodalId>(idi);
        for (int trial = 0; trial < 1000; ++trial) {
            const double y = rng.next_uniform(-1.0, 1.0);
            const double w = rng.next_uniform(-1.0, 1.0);
            if (id == NodalId::Sinc && std::fabs(y) < 1e-4)
                continue;
            const NodalGrad g = nodal_grad(id, y, w, p);
            const double fd_w =
                (nodal_eval(id, y, w + h, p) - nodal_eval(id, y, w - h, p)) / (2 * h);
            const double fd_y =
                (nodal_eval(id, y + h, w, p) - nodal_eval(id, y - h, w, p)) / (2 * h);
            REQUIRE(rel_err(g.d_w, fd_w) < 1e-6);
            REQUIRE(rel_err(g.d_y, fd_y) < 1e-6);
        }
    }
}

TEST_CASE("pool_eval sums and medians") {
    const std::vector<double> terms{1.0, 2.0, 3.0};
    const PoolValue s = pool_eval(PoolId::Summation, terms);
    REQUIRE(s.value == 6.0);
    REQUIRE(s.argmedian == -1);

    const std::vector<double> unordered{3.0, 1.0, 2.0};
    const PoolValue m = pool_eval(PoolId::Median, unordered);
    REQUIRE(m.value == 2.0);
    REQUIRE(m.argmedian == 2);

    // Even counts pick the lower-middle order statistic.
    const std::vector<double> even{4.0, 1.0, 3.0, 2.0};
    REQUIRE(pool_eval(PoolId::Median, even).value == 2.0);

    // Ties route to the lowest original index among equal values.
    const std::vector<double> tied{5.0, 2.0, 2.0};
    REQUIRE(pool_eval(PoolId::Median, tied).argmedian == 1);

    REQUIRE_THROWS_AS(pool_eval(PoolId::Median, std::vector<double>{}), InputError);
}

TEST_CASE("median value is permutation invariant and routes a unit subgradient") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> terms(9);
        for (double& v : terms)
            v = rng.next_uniform(-1.0, 1.0);
        const double value = pool_eval(PoolId::Median, terms).value;

        std::vector<double> shuffled = terms;
        for (int i = 8; i > 0; --i)
            std::swap(shuffled[i], shuffled[rng.next_u64() % (i + 1)]);
        REQUIRE(pool_eval(PoolId::Median, shuffled).value == value);

        double grad_sum = 0.0;
        for (int i = 0; i < 9; ++i)
            grad_sum += pool_grad(PoolId::Median, terms, i);
        REQUIRE(grad_sum == 1.0);
    }
}

TEST_CASE("median subgradient routing behaves like a perturbation switch") {
    const std::vector<double> terms{0.9, -0.4, 0.1, 0.5, -0.8};
    const PoolValue pv = pool_eval(PoolId::Median, terms);
    REQUIRE(pv.value == 0.1);
    const double h = 1e-6;
    for (int i = 0; i < 5; ++i) {
        std::vector<double> up = terms;
        up[i] += h;
        const double moved = pool_eval(PoolId::Median, up).value - pv.value;
        if (i == pv.argmedian)
            REQUIRE(moved == Catch::Approx(h));
        else
            REQUIRE(moved == 0.0);
    }
}

TEST_CASE("pool_grad values and validation") {
    const std::vector<double> terms{1.0, 5.0, 3.0};
    REQUIRE(pool_grad(PoolId::Summation, terms, 0) == 1.0);
    REQUIRE(pool_grad(PoolId::Median, terms, 2) == 1.0); // 3 is the median
    REQUIRE(pool_grad(PoolId::Median, terms, 1) == 0.0);
    REQUIRE_THROWS_AS(pool_grad(PoolId::Summation, terms, 3), InputError);
}

TEST_CASE("activations and their derivatives") {
    OperatorParams p;
    REQUIRE(act_eval(ActId::Tanh, 0.0, p) == 0.0);
    REQUIRE(act_grad(ActId::Tanh, 0.0, p) == 1.0);

    REQUIRE(act_eval(ActId::LinCut, 2.0, p) == 1.0);
    REQUIRE(act_grad(ActId::LinCut, 2.0, p) == 0.0);
    REQUIRE(act_eval(ActId::LinCut, 0.25, p) == 0.25);
    REQUIRE(act_grad(ActId::LinCut, 0.25, p) == 1.0);

    // lin-cut is odd.
    Rng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        const double x = rng.next_uniform(-3.0, 3.0);
        REQUIRE(act_eval(ActId::LinCut, -x, p) == -act_eval(ActId::LinCut, x, p));
    }

    // Derivatives vs finite differences away from the lin-cut kink.
    const double h = 1e-7;
    for (int trial = 0; trial < 1000; ++trial) {
        const double x = rng.next_uniform(-3.0, 3.0);
        for (ActId id : {ActId::Tanh, ActId::LinCut}) {
            if (id == ActId::LinCut && std::fabs(std::fabs(x) - p.cut) < 1e-4)
                continue;
            const double fd = (act_eval(id, x + h, p) - act_eval(id, x - h, p)) / (2 * h);
            REQUIRE(rel_err(act_grad(id, x, p), fd) < 1e-6);
        }
    }
}

TEST_CASE("operator params must be positive") {
    OperatorParams p;
    p.cut = 0.0;
    REQUIRE_THROWS_AS(p.validate(), InputError);
}
