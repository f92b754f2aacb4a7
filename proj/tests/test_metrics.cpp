#include <algorithm>
#include <random>

#include <doctest.h>

#include "oracles.hpp"
#include "overlay/metrics.hpp"

using namespace overlay;

namespace {
const BinaryLabel P = BinaryLabel::positive;
const BinaryLabel N = BinaryLabel::negative;
}  // namespace

TEST_CASE("category_to_binary: only overlay is positive") {
    CHECK(category_to_binary(Category::overlay) == P);
    CHECK(category_to_binary(Category::natural) == N);
    CHECK(category_to_binary(Category::none) == N);
}

TEST_CASE("confusion: identity predictor") {
    std::vector<BinaryLabel> labels = {P, P, P, N, N, N};
    const auto m = confusion(labels, labels);
    CHECK(m == ConfusionMatrix{3, 0, 0, 3});
}

TEST_CASE("confusion: hand-enumerated mixed case") {
    std::vector<BinaryLabel> truths = {P, P, P, N, N, N};
    std::vector<BinaryLabel> preds = {P, P, N, P, N, N};
    const auto m = confusion(preds, truths);
    CHECK(m == ConfusionMatrix{2, 1, 1, 2});
}

TEST_CASE("confusion: degenerate all-negative predictor") {
    std::vector<BinaryLabel> truths = {P, P, N, N};
    std::vector<BinaryLabel> preds = {N, N, N, N};
    const auto m = confusion(preds, truths);
    CHECK(m == ConfusionMatrix{0, 0, 2, 2});
}

TEST_CASE("confusion: contract errors") {
    std::vector<BinaryLabel> a = {P}, b = {P, N};
    CHECK_THROWS_AS(confusion(a, b), ContractError);
    CHECK_THROWS_AS(confusion({}, {}), ContractError);
}

TEST_CASE("summarize: perfect classifier") {
    const auto r = summarize({3, 0, 0, 3});
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
    CHECK(r.accuracy == 1.0);
    CHECK(r.n == 6);
}

TEST_CASE("summarize: mixed case matches hand arithmetic") {
    const auto r = summarize({2, 1, 1, 2});
    CHECK(*r.precision == doctest::Approx(2.0 / 3.0));
    CHECK(*r.recall == doctest::Approx(2.0 / 3.0));
    CHECK(r.accuracy == doctest::Approx(4.0 / 6.0));
}

TEST_CASE("summarize: zero-denominator metrics are undefined, not 0 or 1") {
    const auto r = summarize({0, 0, 2, 2});
    CHECK_FALSE(r.precision.has_value());
    CHECK(*r.recall == 0.0);
    CHECK(r.accuracy == 0.5);
    CHECK_THROWS_AS(summarize({0, 0, 0, 0}), ContractError);
}

TEST_CASE("property: permutation invariance") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        const size_t n = 1 + rng() % 12;
        std::vector<BinaryLabel> preds(n), truths(n);
        for (size_t i = 0; i < n; ++i) {
            preds[i] = rng() % 2 ? P : N;
            truths[i] = rng() % 2 ? P : N;
        }
        auto m0 = confusion(preds, truths);
        std::vector<size_t> order(n);
        for (size_t i = 0; i < n; ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<BinaryLabel> p2(n), t2(n);
        for (size_t i = 0; i < n; ++i) {
            p2[i] = preds[order[i]];
            t2[i] = truths[order[i]];
        }
        CHECK(confusion(p2, t2) == m0);
    }
}

TEST_CASE("property: flipped predictor accuracies sum to 1") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const size_t n = 1 + rng() % 12;
        std::vector<BinaryLabel> preds(n), flipped(n), truths(n);
        for (size_t i = 0; i < n; ++i) {
            preds[i] = rng() % 2 ? P : N;
            flipped[i] = preds[i] == P ? N : P;
            truths[i] = rng() % 2 ? P : N;
        }
        const double a = summarize(confusion(preds, truths)).accuracy;
        const double b = summarize(confusion(flipped, truths)).accuracy;
        CHECK(a + b == doctest::Approx(1.0));
    }
}

TEST_CASE("property: matches the brute-force oracle") {
    std::mt19937_64 rng(123);
    for (int trial = 0; trial < 200; ++trial) {
        const size_t n = 1 + rng() % 12;
        std::vector<BinaryLabel> preds(n), truths(n);
        for (size_t i = 0; i < n; ++i) {
            preds[i] = rng() % 2 ? P : N;
            truths[i] = rng() % 2 ? P : N;
        }
        const auto m = confusion(preds, truths);
        CHECK(m == overlay::testing::brute_force_confusion(preds, truths));
        const auto r = summarize(m);
        if (r.precision) CHECK((*r.precision >= 0.0 && *r.precision <= 1.0));
        if (r.recall) CHECK((*r.recall >= 0.0 && *r.recall <= 1.0));
        CHECK((r.accuracy >= 0.0 && r.accuracy <= 1.0));
    }
}
