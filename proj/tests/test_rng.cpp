#include <doctest.h>

#include <cmath>
#include <set>

#include "uhm/rng.hpp"

using uhm::Rng;

TEST_CASE("same seed reproduces the exact stream") {
    Rng a(42);
    Rng b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds give different streams") {
    Rng a(1);
    Rng b(2);
    int same = 0;
    for (int i = 0; i < 64; ++i)
        if (a.next_u64() == b.next_u64()) ++same;
    CHECK(same == 0);
}

TEST_CASE("label splits are independent of draw order") {
    Rng root(7);
    Rng x1 = root.split("x");
    Rng y1 = root.split("y");
    // Splitting again from an untouched root gives the same children.
    Rng root2(7);
    Rng y2 = root2.split("y");
    Rng x2 = root2.split("x");
    CHECK(x1.next_u64() == x2.next_u64());
    CHECK(y1.next_u64() == y2.next_u64());
}

TEST_CASE("split streams do not collide with each other or the parent") {
    Rng root(9);
    Rng a = root.split("a");
    Rng b = root.split("b");
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 32; ++i) {
        seen.insert(a.next_u64());
        seen.insert(b.next_u64());
        seen.insert(root.next_u64());
    }
    CHECK(seen.size() == 96);
}

TEST_CASE("uniform lies in [0,1) and has roughly the right mean") {
    Rng rng(3);
    double acc = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        acc += u;
    }
    CHECK(std::abs(acc / n - 0.5) < 0.01);
}

TEST_CASE("ranged uniform respects its bounds") {
    Rng rng(4);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform(-2.0, 3.0);
        REQUIRE(u >= -2.0);
        REQUIRE(u < 3.0);
    }
}

TEST_CASE("gaussian moments are close to standard normal") {
    Rng rng(5);
    const int n = 100000;
    double mean = 0.0;
    double sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = rng.gaussian();
        REQUIRE(std::isfinite(g));
        mean += g;
        sq += g * g;
    }
    mean /= n;
    sq /= n;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(sq - 1.0) < 0.03);
}

TEST_CASE("index stays in range and covers all buckets") {
    Rng rng(6);
    std::set<std::size_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t k = rng.index(7);
        REQUIRE(k < 7);
        seen.insert(k);
    }
    CHECK(seen.size() == 7);
}
