#include <catch2/catch_amalgamated.hpp>

#include "lifecal/optimizer.hpp"
#include "lifecal/scaler.hpp"

using namespace lifecal;
using Catch::Approx;

TEST_CASE("adam first step is approximately signed", "[autodiff]") {
    Tensor p(1, 4);
    p.data = {{1.0, -2.0, 0.5, 3.0}};
    Tensor g(1, 4);
    g.data = {{0.4, -0.2, 1.7, -3.0}};
    const Tensor before = p;

    AdamState adam({&p});
    adam.step({&p}, {&g}, 0.01);
    for (std::size_t j = 0; j < 4; ++j) {
        const double update = p.data[j] - before.data[j];
        CHECK(update == Approx(-0.01 * (g.data[j] > 0 ? 1.0 : -1.0)).epsilon(1e-6));
    }
}

TEST_CASE("adam with zero gradients leaves parameters unchanged", "[autodiff]") {
    Tensor p(2, 2);
    p.data = {{1.0, 2.0, 3.0, 4.0}};
    const Tensor before = p;
    Tensor g(2, 2);
    AdamState adam({&p});
    for (int i = 0; i < 25; ++i) adam.step({&p}, {&g}, 0.05);
    CHECK(p.data == before.data);
}

TEST_CASE("cloned adam state reproduces updates exactly", "[autodiff]") {
    Tensor p1(1, 3);
    p1.data = {{0.3, -0.4, 0.9}};
    Tensor p2 = p1;
    Tensor g(1, 3);
    g.data = {{0.11, -0.07, 0.5}};

    AdamState a1({&p1});
    a1.step({&p1}, {&g}, 0.01);
    AdamState a2 = a1;
    Tensor p1b = p1, p2b = p1;
    a1.step({&p1b}, {&g}, 0.01);
    a2.step({&p2b}, {&g}, 0.01);
    CHECK(p1b.data == p2b.data);
}

TEST_CASE("gradient clipping preserves small norms and rescales large ones", "[autodiff]") {
    SECTION("below the threshold") {
        Tensor g(1, 2);
        g.data = {{30.0, 40.0}}; // norm 50
        const Tensor before = g;
        const double norm = clip_gradients({&g}, 100.0);
        CHECK(norm == Approx(50.0));
        CHECK(g.data == before.data);
    }
    SECTION("above the threshold") {
        Tensor g1(1, 2), g2(1, 1);
        g1.data = {{120.0, 90.0}}; // norm 150
        g2.data = {{(double)std::sqrt(200.0 * 200.0 - 150.0 * 150.0)}};
        const double norm = clip_gradients({&g1, &g2}, 100.0);
        CHECK(norm == Approx(200.0).epsilon(1e-12));
        double after = 0.0;
        for (double v : g1.data) after += v * v;
        for (double v : g2.data) after += v * v;
        CHECK(std::sqrt(after) == Approx(100.0).epsilon(1e-12));
        // direction preserved
        CHECK(g1.data[0] / g1.data[1] == Approx(120.0 / 90.0).epsilon(1e-12));
    }
}

TEST_CASE("learning rate schedule warms up then decays", "[autodiff]") {
    const double base = 0.005;
    CHECK(lr_schedule(0, base) == base);
    CHECK(lr_schedule(49, base) == base);
    CHECK(lr_schedule(50, base) == base); // 0.9^0 at the boundary
    CHECK(lr_schedule(64, base) == base);
    CHECK(lr_schedule(65, base) == Approx(base * 0.9).epsilon(1e-15));
    CHECK(lr_schedule(94, base) == Approx(base * 0.81).epsilon(1e-15));
    CHECK(lr_schedule(95, base) == Approx(base * 0.729).epsilon(1e-15));
}

TEST_CASE("early stopping truth tables", "[autodiff]") {
    SECTION("strictly decreasing losses never stop") {
        EarlyStopping stop(50);
        for (int i = 0; i < 500; ++i) CHECK_FALSE(stop.observe(1.0 / (i + 1)));
    }
    SECTION("a 50-epoch stall after the minimum stops") {
        EarlyStopping stop(50);
        CHECK_FALSE(stop.observe(1.0));
        CHECK_FALSE(stop.observe(0.5));
        bool stopped = false;
        for (int i = 0; i < 50; ++i) stopped = stop.observe(0.5); // no strict improvement
        CHECK(stopped);
        CHECK(stop.best() == 0.5);
    }
    SECTION("an improvement late in a stall resets the counter") {
        EarlyStopping stop(50);
        stop.observe(1.0);
        for (int i = 0; i < 49; ++i) CHECK_FALSE(stop.observe(1.0));
        CHECK_FALSE(stop.observe(0.9)); // epoch 49 of the stall improves
        CHECK(stop.stalled() == 0);
        bool stopped = false;
        for (int i = 0; i < 50; ++i) stopped = stop.observe(0.9);
        CHECK(stopped);
    }
}

TEST_CASE("min-max scaling endpoints and extrapolation", "[autodiff]") {
    Tensor rows(3, 2);
    rows.data = {{18.0, 1.0, 40.0, 4.0, 66.0, 12.0}};
    MinMaxScaler s;
    s.fit(rows);

    CHECK(s.apply_one(18.0, 0) == 0.0);
    CHECK(s.apply_one(66.0, 0) == 1.0);
    CHECK(s.apply_one(80.0, 0) > 1.0); // out-of-range passes through unclamped

    // round trip
    for (double x : {18.0, 33.3, 66.0, 91.5})
        CHECK(s.invert_one(s.apply_one(x, 0), 0) == Approx(x).epsilon(1e-12));
}

TEST_CASE("constant features scale to zero", "[autodiff]") {
    Tensor rows(4, 1);
    rows.data = {{7.0, 7.0, 7.0, 7.0}};
    MinMaxScaler s;
    s.fit(rows);
    CHECK(s.apply_one(7.0, 0) == 0.0);
    CHECK(s.apply_one(9.0, 0) == 0.0);
    CHECK(s.invert_one(0.0, 0) == 7.0);
}
