#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "c3f/calibration.hpp"

using namespace c3f;

namespace {

// Independent O(n^2) oracle: evaluate the ECDF from scratch (original input
// order) at every candidate score and take the smallest one reaching the
// level.
double brute_force_quantile(const std::vector<double>& scores,
                            const std::vector<double>& weights, double level) {
    double total = 0.0;
    for (double w : weights) total += w;
    double best = kInf;
    for (double candidate : scores) {
        double mass = 0.0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] <= candidate) mass += weights[i];
        }
        if (mass / total >= level && candidate < best) best = candidate;
    }
    return best;
}

}  // namespace

TEST_CASE("weighted_ecdf basic values") {
    std::vector<double> s{1, 2, 3};
    std::vector<double> w{1, 1, 2};
    CHECK(weighted_ecdf(s, w, 2.0) == doctest::Approx(0.5));
    CHECK(weighted_ecdf(s, w, 0.5) == 0.0);
    CHECK(weighted_ecdf(s, w, 3.0) == 1.0);
    CHECK(weighted_ecdf(s, w, 100.0) == 1.0);
}

TEST_CASE("weighted_ecdf equals unweighted ECDF under equal weights") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(-3.0, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t n = 1 + rng() % 40;
        std::vector<double> s(n), w(n, 2.5);
        for (auto& v : s) v = unif(rng);
        double q = unif(rng);
        double expected = 0.0;
        for (double v : s) expected += v <= q ? 1.0 : 0.0;
        expected /= static_cast<double>(n);
        CHECK(weighted_ecdf(s, w, q) == doctest::Approx(expected).epsilon(1e-14));
    }
}

TEST_CASE("weighted_ecdf is nondecreasing and right-continuous in q") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> s(25), w(25);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = std::floor(unif(rng) * 10.0) / 10.0;  // ties on a grid
        w[i] = 0.2 + unif(rng);
    }
    double prev = 0.0;
    for (double q = -0.2; q <= 1.2; q += 0.01) {
        double v = weighted_ecdf(s, w, q);
        CHECK(v >= prev);
        prev = v;
    }
    // At an observed score the jump is already included, and values just to
    // the right agree (right-continuity); just to the left they drop.
    for (double point : {s[0], s[10], s[20]}) {
        double at = weighted_ecdf(s, w, point);
        CHECK(weighted_ecdf(s, w, point + 1e-12) == doctest::Approx(at).epsilon(1e-14));
        CHECK(weighted_ecdf(s, w, point - 1e-12) < at);
    }
}

TEST_CASE("weighted_ecdf rejects bad input") {
    std::vector<double> s{1, 2}, w{1};
    CHECK_THROWS_AS(weighted_ecdf(s, w, 1.0), Error);
    std::vector<double> empty;
    CHECK_THROWS_AS(weighted_ecdf(empty, empty, 1.0), Error);
}

TEST_CASE("weighted_quantile basic values") {
    std::vector<double> s1{10, 20, 30, 40};
    std::vector<double> w1(4, 1.0);
    CHECK(weighted_quantile(s1, w1, 0.75) == 30.0);

    std::vector<double> s2{1, 2, 3};
    std::vector<double> w2{1, 1, 2};
    CHECK(weighted_quantile(s2, w2, 0.6) == 3.0);

    std::vector<double> s3{4.25};
    std::vector<double> w3{0.7};
    CHECK(weighted_quantile(s3, w3, 0.01) == 4.25);
    CHECK(weighted_quantile(s3, w3, 0.99) == 4.25);

    CHECK_THROWS_AS(weighted_quantile(s1, w1, 0.0), Error);
    CHECK_THROWS_AS(weighted_quantile(s1, w1, 1.0), Error);
}

TEST_CASE("weighted_quantile matches brute force oracle exactly") {
    std::mt19937_64 rng(20240811);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        std::size_t n = 1 + rng() % 50;
        std::vector<double> s(n), w(n);
        bool with_ties = trial % 3 == 0;
        for (std::size_t i = 0; i < n; ++i) {
            // A coarse grid every third instance forces tied scores.
            s[i] = with_ties ? std::floor(unif(rng) * 8.0) / 8.0 : unif(rng) * 10.0 - 5.0;
            w[i] = 0.05 + unif(rng) * 4.0;
        }
        double level = 0.05 + 0.9 * unif(rng);
        double got = weighted_quantile(s, w, level);
        double want = brute_force_quantile(s, w, level);
        CHECK(got == want);
    }
}

TEST_CASE("weighted_quantile is nondecreasing in the level") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t n = 2 + rng() % 30;
        std::vector<double> s(n), w(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = unif(rng);
            w[i] = 0.1 + unif(rng);
        }
        double l1 = 0.1 + 0.4 * unif(rng);
        double l2 = l1 + 0.4 * unif(rng);
        CHECK(weighted_quantile(s, w, l1) <= weighted_quantile(s, w, l2));
    }
}

TEST_CASE("weighted_quantile is permutation invariant") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::size_t n = 23;
    std::vector<double> s(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = unif(rng);
        w[i] = 0.2 + unif(rng);
    }
    double base = weighted_quantile(s, w, 0.8);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int trial = 0; trial < 10; ++trial) {
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<double> s2(n), w2(n);
        for (std::size_t i = 0; i < n; ++i) {
            s2[i] = s[perm[i]];
            w2[i] = w[perm[i]];
        }
        CHECK(weighted_quantile(s2, w2, 0.8) == base);
    }
}

TEST_CASE("finite-sample correction raises the level") {
    std::vector<double> s{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::vector<double> w(10, 1.0);
    CHECK(weighted_quantile(s, w, 0.9, false) == 9.0);
    // corrected level = 0.9 * 11 / 10 = 0.99 -> top order statistic
    CHECK(weighted_quantile(s, w, 0.9, true) == 10.0);
}

TEST_CASE("a corrected level capped at 1 returns the top score, not infinity") {
    std::mt19937_64 rng(71);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 2 + rng() % 12;
        std::vector<double> s(n), w(n);
        double top = -1e9;
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = unif(rng) * 4.0;
            w[i] = 0.01 + unif(rng) * 5.0;
            top = std::max(top, s[i]);
        }
        // level * (n+1)/n >= 1 for these small n
        CHECK(weighted_quantile(s, w, 0.95, true) == top);
    }
}

TEST_CASE("split_budget uniform and scaled") {
    std::vector<std::string> groups{"a", "b", "c"};
    std::map<std::string, double> n{{"a", 10}, {"b", 20}, {"c", 30}};
    auto uniform = split_budget(0.1, groups, n, BudgetScheme::uniform, {}, {});
    for (const auto& g : groups) CHECK(uniform.at(g) == 0.1);

    std::vector<std::string> two{"a", "b"};
    std::map<std::string, double> balanced{{"a", 50}, {"b", 50}};
    auto scaled_eq = split_budget(0.1, two, balanced, BudgetScheme::scaled, {}, {});
    CHECK(scaled_eq.at("a") == doctest::Approx(0.1));
    CHECK(scaled_eq.at("b") == doctest::Approx(0.1));

    std::map<std::string, double> skew{{"a", 90}, {"b", 10}};
    auto scaled = split_budget(0.1, two, skew, BudgetScheme::scaled, {}, {});
    CHECK(scaled.at("a") == doctest::Approx(0.1 * 0.9 / 0.82));
    CHECK(scaled.at("b") == doctest::Approx(0.1 * 0.1 / 0.82));
    // The defining constraint holds exactly.
    double mixed = 0.9 * scaled.at("a") + 0.1 * scaled.at("b");
    CHECK(mixed == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("split_budget explicit validates the constraint") {
    std::vector<std::string> groups{"a", "b"};
    std::map<std::string, double> n{{"a", 10}, {"b", 10}};
    std::map<std::string, double> alpha{{"a", 0.15}, {"b", 0.05}};
    std::map<std::string, double> pi{{"a", 0.5}, {"b", 0.5}};
    auto ok = split_budget(0.1, groups, n, BudgetScheme::explicit_table, alpha, pi);
    CHECK(ok.at("a") == 0.15);

    std::map<std::string, double> bad{{"a", 0.15}, {"b", 0.1}};
    CHECK_THROWS_AS(split_budget(0.1, groups, n, BudgetScheme::explicit_table, bad, pi),
                    Error);
}

TEST_CASE("split_budget clamps extreme budgets with a warning") {
    std::vector<std::string> groups{"a", "b"};
    std::map<std::string, double> n{{"a", 999999}, {"b", 1}};
    WarningLog warnings;
    auto res = split_budget(1e-7, groups, n, BudgetScheme::uniform, {}, {}, &warnings);
    CHECK(res.at("a") == doctest::Approx(1e-6));
    CHECK(!warnings.empty());
}

TEST_CASE("calibrate computes per-group weighted quantiles") {
    GroupSample one;
    for (int i = 1; i <= 100; ++i) {
        one.scores.push_back(i / 100.0);
        one.weights.push_back(1.0);
    }
    one.n = 100;
    std::map<std::string, GroupSample> samples{{"a", one}};
    auto t = calibrate(samples, {{"a", 0.1}}, 0.1, 0.1, false);
    CHECK(t.q_raw.at("a") == doctest::Approx(0.90));
    CHECK(t.q_reg.at("a") == t.q_raw.at("a"));
    CHECK(t.n.at("a") == 100);
    CHECK(t.b_hat.at("a") == 0.0);
}

TEST_CASE("calibrate: identical groups get identical thresholds") {
    GroupSample s;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < 40; ++i) {
        s.scores.push_back(unif(rng));
        s.weights.push_back(0.5 + unif(rng));
    }
    s.n = 40;
    std::map<std::string, GroupSample> samples{{"a", s}, {"b", s}};
    auto t = calibrate(samples, {{"a", 0.2}, {"b", 0.2}}, 0.2, 0.1, false);
    CHECK(t.q_raw.at("a") == t.q_raw.at("b"));
}

TEST_CASE("calibrate: weight scale invariance") {
    GroupSample unit, scaled;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < 30; ++i) {
        double s = unif(rng);
        unit.scores.push_back(s);
        unit.weights.push_back(1.0);
        scaled.scores.push_back(s);
        scaled.weights.push_back(7.0);
    }
    unit.n = scaled.n = 30;
    auto t1 = calibrate({{"a", unit}}, {{"a", 0.1}}, 0.1, 0.1, false);
    auto t2 = calibrate({{"a", scaled}}, {{"a", 0.1}}, 0.1, 0.1, false);
    CHECK(t1.q_raw.at("a") == t2.q_raw.at("a"));
    CHECK(t1.b_hat.at("a") == t2.b_hat.at("a"));
}

TEST_CASE("calibrate rejects tiny groups") {
    GroupSample tiny;
    tiny.scores = {1.0};
    tiny.weights = {1.0};
    tiny.n = 1;
    std::map<std::string, GroupSample> samples{{"small", tiny}};
    CHECK_THROWS_WITH_AS(calibrate(samples, {{"small", 0.1}}, 0.1, 0.1, false),
                         doctest::Contains("small"), Error);
}

TEST_CASE("unit-weight reduction to the plain empirical quantile") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n = 2 + rng() % 49;
        std::vector<double> s(n);
        for (auto& v : s) v = unif(rng) * 20.0 - 10.0;
        double alpha = 0.05 + 0.45 * unif(rng);

        // Independent definition: smallest order statistic whose plain ECDF
        // reaches 1 - alpha.
        std::vector<double> sorted = s;
        std::sort(sorted.begin(), sorted.end());
        double expected = kInf;
        for (std::size_t k = 1; k <= n; ++k) {
            if (static_cast<double>(k) / static_cast<double>(n) >= 1.0 - alpha) {
                expected = sorted[k - 1];
                break;
            }
        }

        std::vector<double> w(n, 1.0);
        CHECK(weighted_quantile(s, w, 1.0 - alpha) == expected);
    }
}

TEST_CASE("coverage_bound closed form") {
    // High-precision long double evaluation as the oracle.
    auto oracle = [](long double n, long double b, long double k, long double delta,
                     long double alpha) {
        return 1.0L - alpha - sqrtl((1.0L + b) / (2.0L * n) * logl(2.0L * k / delta));
    };
    double got = coverage_bound(50, 0.0, 2, 0.1, 0.1);
    CHECK(got == doctest::Approx(0.70793).epsilon(1e-4));
    CHECK(std::abs(got - static_cast<double>(oracle(50, 0, 2, 0.1, 0.1))) < 1e-14);

    // Monotonicity: larger B decreases, larger n increases the bound.
    CHECK(coverage_bound(50, 1.0, 2, 0.1, 0.1) < coverage_bound(50, 0.0, 2, 0.1, 0.1));
    CHECK(coverage_bound(500, 0.0, 2, 0.1, 0.1) > coverage_bound(50, 0.0, 2, 0.1, 0.1));

    // delta -> 1 with huge n approaches 1 - alpha.
    CHECK(coverage_bound(1e12, 0.0, 2, 0.999999, 0.1) == doctest::Approx(0.9).epsilon(1e-5));
}

TEST_CASE("eccg_bound structure") {
    ThresholdSet t;
    t.groups = {"a", "b"};
    t.delta = 0.1;
    t.n = {{"a", 100}, {"b", 400}};
    t.b_hat = {{"a", 0.0}, {"b", 0.0}};
    t.alpha_a = {{"a", 0.1}, {"b", 0.1}};
    t.q_raw = t.q_reg = {{"a", 0.0}, {"b", 0.0}};
    double eps1 = std::sqrt(std::log(40.0) / 200.0);
    double eps2 = std::sqrt(std::log(40.0) / 800.0);
    CHECK(eccg_bound(t) == doctest::Approx(eps1 + eps2).epsilon(1e-12));

    // Identical groups: bound is 2 * eps, first term 0.
    t.n = {{"a", 100}, {"b", 100}};
    CHECK(eccg_bound(t) == doctest::Approx(2.0 * eps1).epsilon(1e-12));

    // Unequal budgets contribute the first term.
    t.alpha_a = {{"a", 0.15}, {"b", 0.05}};
    CHECK(eccg_bound(t) == doctest::Approx(0.1 + 2.0 * eps1).epsilon(1e-12));
}

TEST_CASE("pooled_threshold matches the unit-weight quantile") {
    std::vector<double> s{0.3, 0.1, 0.9, 0.5};
    std::vector<double> w(4, 1.0);
    CHECK(pooled_threshold(s, 0.25) == weighted_quantile(s, w, 0.75));
}
