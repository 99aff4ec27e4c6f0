#include <doctest.h>

#include <cstdio>

#include "ultra/policy.hpp"

using namespace ultra;

TEST_CASE("policy_forward: zero weights give uniform categorical") {
    PolicyParams p = init_policy("pong", PolicyHead::Categorical, 6, 3, 8, 0, 0.0);
    ForwardResult fr = policy_forward(p, std::vector<double>(6, 0.3));
    for (double prob : fr.dist.probs) CHECK(prob == doctest::Approx(1.0 / 3.0));
    CHECK(fr.value == 0.0);
}

TEST_CASE("policy_forward: zero weights give standard normal gaussian head") {
    PolicyParams p = init_policy("hopper-lite", PolicyHead::Gaussian, 11, 3, 8, 0, 0.0);
    ForwardResult fr = policy_forward(p, std::vector<double>(11, 0.1));
    for (double m : fr.dist.mean) CHECK(m == 0.0);
    for (double ls : fr.dist.log_std) CHECK(std::exp(ls) == doctest::Approx(1.0));
}

TEST_CASE("policy_forward: probabilities normalized, shape mismatch rejected") {
    PolicyParams p = init_policy("pong", PolicyHead::Categorical, 6, 3, 32, 5);
    RngStream r(1);
    for (int i = 0; i < 50; ++i) {
        std::vector<double> obs(6);
        for (auto& v : obs) v = 2.0 * r.next_double() - 1.0;
        ForwardResult fr = policy_forward(p, obs);
        double total = 0.0;
        for (double prob : fr.dist.probs) total += prob;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK_THROWS_AS(policy_forward(p, std::vector<double>(5, 0.0)), ShapeMismatchError);
}

TEST_CASE("sample_action: degenerate categorical always picks the mass point") {
    Distribution d;
    d.head = PolicyHead::Categorical;
    d.probs = {1.0, 0.0, 0.0};
    RngStream r(3);
    for (int i = 0; i < 20; ++i) {
        SampledAction s = sample_action(d, r);
        CHECK(s.action.index == 0);
        CHECK(s.log_prob == doctest::Approx(0.0));
    }
}

TEST_CASE("sample_action: gaussian reparameterization identity") {
    Distribution d;
    d.head = PolicyHead::Gaussian;
    d.mean = {2.0};
    d.log_std = {std::log(0.5)};
    RngStream r(8);
    RngStream r_copy(8);
    double z = r_copy.next_normal();
    SampledAction s = sample_action(d, r);
    CHECK(s.action.vec[0] == doctest::Approx(2.0 + 0.5 * z));
}

TEST_CASE("sample_action: empirical frequencies match the distribution") {
    Distribution d;
    d.head = PolicyHead::Categorical;
    d.probs = {0.5, 0.3, 0.2};
    RngStream r(99);
    const int n = 100000;
    std::vector<int> counts(3, 0);
    for (int i = 0; i < n; ++i) counts[sample_action(d, r).action.index]++;
    for (int k = 0; k < 3; ++k) {
        double p = d.probs[k];
        double sigma = std::sqrt(n * p * (1 - p));
        CHECK(std::abs(counts[k] - n * p) < 3 * sigma);
    }
}

TEST_CASE("checkpoint round-trip is bit-identical") {
    PolicyParams p = init_policy("pong", PolicyHead::Categorical, 6, 3, 64, 1234);
    save_checkpoint("ckpt_test.json", p);
    PolicyParams q = load_checkpoint("ckpt_test.json");
    REQUIRE(q.theta.size() == p.theta.size());
    for (std::size_t i = 0; i < p.theta.size(); ++i) CHECK(q.theta[i] == p.theta[i]);

    RngStream r(2);
    std::vector<double> obs(6);
    for (auto& v : obs) v = 2.0 * r.next_double() - 1.0;
    ForwardResult a = policy_forward(p, obs);
    ForwardResult b = policy_forward(q, obs);
    CHECK(a.value == b.value);
    for (int i = 0; i < 3; ++i) CHECK(a.dist.probs[i] == b.dist.probs[i]);
    std::remove("ckpt_test.json");
}
