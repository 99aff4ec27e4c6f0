#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "ultra/gae.hpp"
#include "ultra/hopper.hpp"
#include "ultra/ppo.hpp"

using namespace ultra;

namespace {

// Independent double-sum evaluation: A_t = sum_k (gamma*lambda)^k delta_{t+k}.
GaeResult gae_brute_force(const std::vector<double>& rewards, const std::vector<double>& values,
                          double last_value, double gamma, double lambda) {
    std::size_t n = rewards.size();
    GaeResult out;
    out.advantages.assign(n, 0.0);
    out.returns.assign(n, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        double acc = 0.0;
        for (std::size_t k = 0; t + k < n; ++k) {
            double next_v = (t + k + 1 < n) ? values[t + k + 1] : last_value;
            double delta = rewards[t + k] + gamma * next_v - values[t + k];
            acc += std::pow(gamma * lambda, static_cast<double>(k)) * delta;
        }
        out.advantages[t] = acc;
        out.returns[t] = acc + values[t];
    }
    return out;
}

RolloutBatch random_batch(PolicyParams& params, RngStream& r, int n) {
    RolloutBatch batch;
    for (int i = 0; i < n; ++i) {
        std::vector<double> obs(params.obs_dim);
        for (auto& v : obs) v = 2.0 * r.next_double() - 1.0;
        ForwardResult fr = policy_forward(params, obs);
        SampledAction s = sample_action(fr.dist, r);
        batch.observations.push_back(obs);
        batch.actions.push_back(s.action);
        batch.log_probs.push_back(s.log_prob + 0.1 * (2.0 * r.next_double() - 1.0));
        batch.rewards.push_back(2.0 * r.next_double() - 1.0);
        batch.values.push_back(fr.value);
        batch.advantages.push_back(2.0 * r.next_double() - 1.0);
        batch.returns.push_back(2.0 * r.next_double() - 1.0);
    }
    return batch;
}

double fd_grad_check(PolicyParams params, const RolloutBatch& batch, const PpoConfig& cfg) {
    std::vector<std::size_t> idx(batch.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<double> adv(batch.advantages);
    std::vector<double> analytic;
    ppo_loss_grad(params, batch, idx, adv, cfg, analytic);
    const double step = 1e-5;
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        double saved = params.theta[i];
        params.theta[i] = saved + step;
        double up = ppo_loss(params, batch, idx, adv, cfg).total;
        params.theta[i] = saved - step;
        double down = ppo_loss(params, batch, idx, adv, cfg).total;
        params.theta[i] = saved;
        double fd = (up - down) / (2.0 * step);
        double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-6});
        worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
    }
    return worst;
}

} // namespace

TEST_CASE("gae: trivial examples") {
    auto g = gae({1.0, 0.0, 1.0}, {0.0, 0.0, 0.0}, 0.0, 1.0, 1.0);
    CHECK(g.advantages[0] == doctest::Approx(2.0));
    CHECK(g.advantages[1] == doctest::Approx(1.0));
    CHECK(g.advantages[2] == doctest::Approx(1.0));

    auto single = gae({1.0}, {0.0}, 0.0, 0.99, 0.95);
    CHECK(single.advantages[0] == doctest::Approx(1.0));

    CHECK_THROWS_AS(gae({1.0}, {0.0, 0.0}, 0.0, 0.9, 0.9), ShapeMismatchError);
}

TEST_CASE("gae: matches the brute-force double sum on random instances") {
    RngStream r(17);
    for (int rep = 0; rep < 100; ++rep) {
        std::size_t n = 1 + r.next_below(10);
        std::vector<double> rewards(n), values(n);
        for (auto& v : rewards) v = 4.0 * r.next_double() - 2.0;
        for (auto& v : values) v = 4.0 * r.next_double() - 2.0;
        double last = 4.0 * r.next_double() - 2.0;
        double gamma = r.next_double();
        double lambda = r.next_double();
        auto fast = gae(rewards, values, last, gamma, lambda);
        auto slow = gae_brute_force(rewards, values, last, gamma, lambda);
        for (std::size_t t = 0; t < n; ++t) {
            CHECK(std::abs(fast.advantages[t] - slow.advantages[t]) < 1e-10);
            CHECK(std::abs(fast.returns[t] - slow.returns[t]) < 1e-10);
        }
    }
}

TEST_CASE("ppo loss: zero advantages give zero policy gradient") {
    PolicyParams p = init_policy("pong", PolicyHead::Categorical, 3, 2, 4, 7);
    RngStream r(3);
    RolloutBatch batch = random_batch(p, r, 8);
    std::vector<std::size_t> idx(batch.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<double> zero_adv(batch.size(), 0.0);

    PpoConfig cfg;
    cfg.value_coef = 0.0;
    cfg.entropy_coef = 0.0;
    std::vector<double> grad;
    ppo_loss_grad(p, batch, idx, zero_adv, cfg, grad);
    for (double g : grad) CHECK(g == 0.0);
}

TEST_CASE("ppo loss: clip definition and monotonicity") {
    // ratio 1.5, eps 0.2, A > 0 -> clipped term uses ratio 1.2
    double ratio = 1.5, eps = 0.2, adv = 2.0;
    double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
    CHECK(clipped == doctest::Approx(1.2));
    RngStream r(11);
    for (int i = 0; i < 1000; ++i) {
        double rho = 3.0 * r.next_double();
        double a = 4.0 * r.next_double() - 2.0;
        double e = 0.05 + 0.3 * r.next_double();
        double s1 = rho * a;
        double s2 = std::clamp(rho, 1.0 - e, 1.0 + e) * a;
        CHECK(std::min(s1, s2) <= s1 + 1e-15);
    }
}

TEST_CASE("ppo gradients match central finite differences (categorical)") {
    RngStream seeds(100);
    for (int rep = 0; rep < 10; ++rep) {
        PolicyParams p =
            init_policy("toy", PolicyHead::Categorical, 3, 2, 4, seeds.next_u64());
        RngStream r(seeds.next_u64());
        RolloutBatch batch = random_batch(p, r, 6);
        PpoConfig cfg;
        CHECK(fd_grad_check(p, batch, cfg) < 1e-3);
    }
}

TEST_CASE("ppo gradients match central finite differences (gaussian)") {
    RngStream seeds(200);
    for (int rep = 0; rep < 10; ++rep) {
        PolicyParams p = init_policy("toy", PolicyHead::Gaussian, 3, 2, 4, seeds.next_u64());
        RngStream r(seeds.next_u64());
        RolloutBatch batch = random_batch(p, r, 6);
        PpoConfig cfg;
        CHECK(fd_grad_check(p, batch, cfg) < 1e-3);
    }
}

TEST_CASE("ppo_update keeps distributions valid") {
    PongEnv env;
    PpoConfig cfg;
    cfg.hidden = 16;
    cfg.learning_rate = 1e-3;
    TrainOptions options;
    options.iterations = 3;
    options.steps_per_iteration = 256;
    options.seed = 5;
    PolicyParams p = pretrain(env, cfg, options);
    RngStream r(6);
    for (int i = 0; i < 20; ++i) {
        std::vector<double> obs(6);
        for (auto& v : obs) v = 2.0 * r.next_double() - 1.0;
        ForwardResult fr = policy_forward(p, obs);
        double total = 0.0;
        for (double prob : fr.dist.probs) {
            CHECK(prob >= 0.0);
            total += prob;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("pretrain: budget 0 equals initialization; same seed reproduces bytes") {
    PongEnv env;
    PpoConfig cfg;
    cfg.hidden = 8;
    TrainOptions options;
    options.iterations = 0;
    options.seed = 42;
    PolicyParams p = pretrain(env, cfg, options);
    PolicyParams q = init_policy("pong", PolicyHead::Categorical, 6, 3, 8, 42);
    CHECK(p.theta == q.theta);

    options.iterations = 2;
    options.steps_per_iteration = 128;
    PongEnv env_a, env_b;
    PolicyParams a = pretrain(env_a, cfg, options);
    PolicyParams b = pretrain(env_b, cfg, options);
    save_checkpoint("pre_a.json", a);
    save_checkpoint("pre_b.json", b);
    std::ifstream fa("pre_a.json", std::ios::binary), fb("pre_b.json", std::ios::binary);
    std::ostringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    CHECK(sa.str() == sb.str());
    std::remove("pre_a.json");
    std::remove("pre_b.json");
}

TEST_CASE("hopper-lite training runs without numerical failures") {
    HopperLiteEnv env;
    PpoConfig cfg;
    cfg.hidden = 16;
    cfg.learning_rate = 3e-4;
    TrainOptions options;
    options.iterations = 2;
    options.steps_per_iteration = 256;
    options.seed = 9;
    CHECK_NOTHROW(pretrain(env, cfg, options));
}
