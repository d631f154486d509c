#include <doctest.h>

#include <cmath>

#include "abwave/errors.hpp"
#include "abwave/media.hpp"
#include "support.hpp"

using namespace abwave;
using abwave::testing::Rng;

namespace {

GridPtr small_grid() { return build_domain(abwave::testing::square_with_disk(33)); }

}  // namespace

TEST_CASE("Gordon metric at rest and in vacuum") {
    auto g = small_grid();
    MediumSpec rest(g, ScalarFn::constant(1.7), VectorFn::constant({}));
    MetricTensor m = gordon_metric(rest);
    Mat3 a = m.up(3, 4);
    CHECK(a(0, 0) == doctest::Approx(1.7 * 1.7));
    CHECK(a(1, 1) == doctest::Approx(-1.0));
    CHECK(a(2, 2) == doctest::Approx(-1.0));
    CHECK(a(0, 1) == 0.0);
    CHECK(a(1, 2) == 0.0);

    MediumSpec vacuum(g, ScalarFn::constant(1.0), VectorFn::constant({0.3, -0.2}));
    Mat3 b = gordon_metric(vacuum).up(5, 5);
    Mat3 eta = minkowski_fn()({0, 0});
    CHECK((b - eta).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("Gordon metric for n = 2, w = (0.1, 0)") {
    // Independent evaluation of eta + (n^2 - 1) u u^T with u = gamma (1, w).
    const double n = 2.0, w = 0.1, gamma2 = 1.0 / (1.0 - w * w);
    const double g00 = 1.0 + (n * n - 1.0) * gamma2;
    const double g01 = (n * n - 1.0) * gamma2 * w;
    const double g11 = -1.0 + (n * n - 1.0) * gamma2 * w * w;
    CHECK(g00 == doctest::Approx(1.0 + 3.0 / 0.99).epsilon(1e-14));
    CHECK(g01 == doctest::Approx(0.3 / 0.99).epsilon(1e-14));
    CHECK(g11 == doctest::Approx(-1.0 + 0.03 / 0.99).epsilon(1e-14));

    MediumSpec m(small_grid(), ScalarFn::constant(2.0), VectorFn::constant({0.1, 0.0}));
    Mat3 a = gordon_metric(m).up(7, 7);
    CHECK(std::abs(a(0, 0) - g00) < 1e-13);
    CHECK(std::abs(a(0, 1) - g01) < 1e-13);
    CHECK(std::abs(a(1, 1) - g11) < 1e-13);
    CHECK(std::abs(a(2, 2) + 1.0) < 1e-13);
    CHECK(minkowski_signature(a));
}

TEST_CASE("slow metric for n = 2, w = (0.05, 0)") {
    MediumSpec m(small_grid(), ScalarFn::constant(2.0), VectorFn::constant({0.05, 0.0}));
    MetricTensor s = slow_metric(m);
    Mat3 a = s.up(4, 9);
    CHECK(a(0, 0) == 4.0);
    CHECK(a(0, 1) == doctest::Approx(0.15).epsilon(1e-15));
    CHECK(a(1, 1) == -1.0);
    Mat3 prod = s.g_dn[s.grid->idx(4, 9)] * a;
    CHECK((prod - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(s.det_g[0] == doctest::Approx(1.0 / a.determinant()));
}

TEST_CASE("Minkowski and flat media") {
    auto g = small_grid();
    MediumSpec flat(g, ScalarFn::constant(1.0), VectorFn::constant({}));
    MetricTensor s = slow_metric(flat);
    CHECK((s.up(1, 1) - minkowski_fn()({0, 0})).cwiseAbs().maxCoeff() == 0.0);
    auto r = check_hyperbolicity(s);
    CHECK(r.timelike_ok);
    CHECK(r.elliptic_ok);
    CHECK(r.worst_margin == doctest::Approx(1.0));

    Mat3 bad = minkowski_fn()({0, 0});
    bad(0, 0) = -1.0;
    CHECK_FALSE(check_hyperbolicity(bad).timelike_ok);
    CHECK_FALSE(minkowski_signature(bad));
}

TEST_CASE("medium invariants") {
    auto g = small_grid();
    CHECK_THROWS_AS(MediumSpec::from_coefficient(g, ScalarFn::constant(1.0), VectorFn::constant({0.6, 0.0})),
                    SignatureError);
    CHECK_THROWS_AS(MediumSpec(g, ScalarFn::constant(-1.0), VectorFn::constant({})), SignatureError);
    CHECK_THROWS_AS(gordon_metric(MediumSpec(g, ScalarFn::constant(1.1), VectorFn::constant({1.2, 0.0}))),
                    SuperluminalError);

    MediumSpec m(g, ScalarFn::constant(1.5), VectorFn::constant({0.1, 0.0}));
    CHECK(m.v()(3, 3).x == doctest::Approx(1.25 * 0.1));
    m.set_refr(ScalarFn::constant(1.2));
    CHECK(m.v()(3, 3).x == doctest::Approx(0.44 * 0.1));
    m.set_flow(VectorFn::constant({0.0, 0.2}));
    CHECK(m.v()(3, 3).y == doctest::Approx(0.44 * 0.2));
    CHECK(m.v()(3, 3).x == 0.0);

    MediumSpec direct = MediumSpec::from_coefficient(g, ScalarFn::constant(1.0), VectorFn::constant({0.1, 0.0}));
    CHECK_FALSE(direct.flow_known());
    CHECK(direct.v()(2, 2).x == 0.1);
}

TEST_CASE("property: Gordon and slow metrics differ at second order in |w|") {
    Rng rng(17);
    auto g = small_grid();
    for (int trial = 0; trial < 50; ++trial) {
        double n = rng.uniform(1.0, 2.0);
        double speed = rng.uniform(0.0, 0.1), th = rng.uniform(0, 6.3);
        Vec2 w{speed * std::cos(th), speed * std::sin(th)};
        MediumSpec m(g, ScalarFn::constant(n), VectorFn::constant(w));
        Mat3 diff = gordon_metric(m).up(6, 6) - slow_metric(m).up(6, 6);
        // The dropped terms are (n^2 - 1)(gamma^2 - 1) and (n^2 - 1) gamma^2 w_j w_k.
        CHECK(diff.cwiseAbs().maxCoeff() <= 3.0 * speed * speed / (1.0 - speed * speed) + 1e-15);
    }
}

TEST_CASE("property: slow spatial block is exactly -I and accepted media are hyperbolic") {
    Rng rng(19);
    auto g = small_grid();
    for (int trial = 0; trial < 30; ++trial) {
        ScalarFn n = ScalarFn::gaussian(rng.uniform(1.0, 2.0), rng.uniform(0.0, 0.5), {rng.uniform(), rng.uniform()},
                                        rng.uniform(0.1, 0.3));
        VectorFn w = VectorFn::constant({rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)}) +
                     VectorFn::rotation(rng.uniform(-0.1, 0.1), {0.5, 0.5});
        MediumSpec m(g, n, w);
        MetricTensor s = slow_metric(m);
        for (const auto& a : s.g_up) {
            CHECK(a(1, 1) == -1.0);
            CHECK(a(2, 2) == -1.0);
            CHECK(a(1, 2) == 0.0);
            CHECK(a(2, 1) == 0.0);
        }
        auto r = check_hyperbolicity(s);
        CHECK(r.timelike_ok);
        CHECK(r.elliptic_ok);
        for (int j = 0; j < g->ny; j += 4)
            for (int i = 0; i < g->nx; i += 4)
                if (!g->in_obstacle(i, j)) CHECK(minkowski_signature(s.up(i, j)));
    }
}
