#include <doctest.h>

#include <cmath>

#include "classical.hpp"
#include "random_gen.hpp"

using namespace qme;
using classical::Constraint;
using classical::Distribution;
using classical::JointDistribution;

namespace {

Distribution dist(std::initializer_list<double> probs) {
    Eigen::VectorXd p(static_cast<Eigen::Index>(probs.size()));
    Eigen::Index i = 0;
    for (double x : probs) p(i++) = x;
    return Distribution::from_probs(std::move(p));
}

JointDistribution joint22() {
    Eigen::MatrixXd p(2, 2);
    p << 0.4, 0.1, 0.2, 0.3;
    return JointDistribution::from_probs(std::move(p));
}

}  // namespace

TEST_CASE("relative entropy values and support rule") {
    CHECK(classical::relative_entropy(dist({0.5, 0.5}), dist({0.5, 0.5})) == 0.0);

    // Scalar evaluation: -sum rho ln(rho/phi) = -(1 * ln(1/0.5)) = -ln 2.
    CHECK(classical::relative_entropy(dist({1.0, 0.0}), dist({0.5, 0.5})) ==
          doctest::Approx(-std::log(2.0)).epsilon(1e-12));

    CHECK_THROWS_AS(classical::relative_entropy(dist({0.5, 0.5}), dist({1.0, 0.0})),
                    SupportViolation);

    // Strictly negative whenever the distributions differ.
    CHECK(classical::relative_entropy(dist({0.7, 0.3}), dist({0.5, 0.5})) < 0.0);
}

TEST_CASE("maxent with no constraints returns the prior") {
    Distribution prior = dist({0.5, 0.5});
    classical::MaxEntResult r = classical::solve_maxent(prior, {});
    CHECK((r.posterior.probs - prior.probs).cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.alphas.size() == 0);
    CHECK(r.ln_z == 0.0);
}

TEST_CASE("maxent coin: tanh inversion closed form") {
    // <A> = tanh(alpha) for a uniform prior with A = (+1, -1), so target 0.6
    // gives alpha = atanh(0.6) and posterior ((1+0.6)/2, (1-0.6)/2).
    Constraint c;
    c.observable = Eigen::Vector2d(1.0, -1.0);
    c.target = 0.6;
    classical::MaxEntResult r = classical::solve_maxent(Distribution::uniform(2), {c});
    CHECK(r.posterior.probs(0) == doctest::Approx(0.8).epsilon(1e-10));
    CHECK(r.posterior.probs(1) == doctest::Approx(0.2).epsilon(1e-10));
    CHECK(r.alphas(0) == doctest::Approx(std::atanh(0.6)).epsilon(1e-9));
    // Z = cosh(alpha) for this instance.
    CHECK(r.ln_z == doctest::Approx(std::log(std::cosh(std::atanh(0.6)))).epsilon(1e-9));
}

TEST_CASE("biased priors reject incompatible targets") {
    Constraint c;
    c.observable = Eigen::Vector2d(1.0, -1.0);
    c.target = 0.5;  // A(x1) = 1 on the only supported outcome
    CHECK_THROWS_AS(classical::solve_maxent(dist({1.0, 0.0}), {c}), InfeasibleConstraint);

    // Already satisfied on the point support: accepted with zero multiplier.
    c.target = 1.0;
    classical::MaxEntResult r = classical::solve_maxent(dist({1.0, 0.0}), {c});
    CHECK(r.posterior.probs(0) == doctest::Approx(1.0));
    CHECK(r.alphas(0) == 0.0);
}

TEST_CASE("boundary targets are infeasible") {
    Constraint c;
    c.observable = Eigen::Vector2d(1.0, -1.0);
    c.target = 1.0;
    CHECK_THROWS_AS(classical::solve_maxent(Distribution::uniform(2), {c}),
                    InfeasibleConstraint);
    c.target = -1.0 + 1e-15;
    CHECK_THROWS_AS(classical::solve_maxent(Distribution::uniform(2), {c}),
                    InfeasibleConstraint);
}

TEST_CASE("jointly infeasible targets fail with NonConvergence") {
    // Outcomes sit on the diagonal of the (A1, A2) square: the target
    // (0.8, 0.2) is inside both one-dimensional hulls but off the diagonal.
    Constraint c1, c2;
    c1.observable = Eigen::Vector2d(0.0, 1.0);
    c1.target = 0.8;
    c2.observable = Eigen::Vector2d(0.0, 1.0);
    c2.target = 0.2;
    CHECK_THROWS_AS(classical::solve_maxent(Distribution::uniform(2), {c1, c2}),
                    NonConvergence);
}

TEST_CASE("bayes update") {
    // Independent joint: observing x teaches nothing about theta.
    Eigen::MatrixXd indep(2, 2);
    indep << 0.2 * 0.7, 0.2 * 0.3, 0.8 * 0.7, 0.8 * 0.3;
    JointDistribution ji = JointDistribution::from_probs(indep);
    for (Eigen::Index x : {0, 1}) {
        Distribution post = classical::bayes_update(ji, x);
        CHECK(post.probs(0) == doctest::Approx(0.7).epsilon(1e-12));
        CHECK(post.probs(1) == doctest::Approx(0.3).epsilon(1e-12));
    }

    // Hand conditional: row (0.4, 0.1) normalizes to (0.8, 0.2).
    Distribution post = classical::bayes_update(joint22(), 0);
    CHECK(post.probs(0) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(post.probs(1) == doctest::Approx(0.2).epsilon(1e-12));

    Eigen::MatrixXd zero_row(2, 2);
    zero_row << 0.0, 0.0, 0.5, 0.5;
    CHECK_THROWS_AS(classical::bayes_update(JointDistribution::from_probs(zero_row), 0),
                    ZeroEvidence);
}

TEST_CASE("maxent route equals the conditional formula on random joints") {
    for (int trial = 0; trial < 40; ++trial) {
        random_gen::Rng rng(random_gen::trial_seed(101, 6, trial));
        std::uniform_int_distribution<int> size(2, 6);
        const Eigen::Index nx = size(rng), nt = size(rng);
        JointDistribution joint = random_gen::random_joint(nx, nt, rng);
        const Eigen::Index observed = static_cast<Eigen::Index>(trial) % nx;
        const Eigen::VectorXd a = classical::bayes_update(joint, observed).probs;
        const Eigen::VectorXd b = classical::bayes_update_direct(joint, observed).probs;
        CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("jeffrey update") {
    // Point mass reduces to Bayes.
    Distribution point = dist({1.0, 0.0});
    Distribution via_jeffrey = classical::jeffrey_update(joint22(), point);
    Distribution via_bayes = classical::bayes_update(joint22(), 0);
    CHECK((via_jeffrey.probs - via_bayes.probs).cwiseAbs().maxCoeff() <= 1e-15);

    // Marginal data: no new information, posterior is the theta marginal.
    JointDistribution j = joint22();
    Distribution marginal_data = Distribution::from_probs(j.x_marginal());
    Distribution post = classical::jeffrey_update(j, marginal_data);
    CHECK((post.probs - j.theta_marginal()).cwiseAbs().maxCoeff() <= 1e-15);

    // Hand mixture: 0.5*(0.8,0.2) + 0.5*(0.4,0.6) = (0.6, 0.4).
    Distribution half = dist({0.5, 0.5});
    Distribution mixed = classical::jeffrey_update(j, half);
    CHECK(mixed.probs(0) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(mixed.probs(1) == doctest::Approx(0.4).epsilon(1e-12));

    // Data mass outside the prior's x support.
    Eigen::MatrixXd zero_row(2, 2);
    zero_row << 0.0, 0.0, 0.5, 0.5;
    CHECK_THROWS_AS(classical::jeffrey_update(JointDistribution::from_probs(zero_row),
                                              dist({0.5, 0.5})),
                    SupportViolation);
}

TEST_CASE("dual convexity along random segments") {
    for (int trial = 0; trial < 20; ++trial) {
        random_gen::Rng rng(random_gen::trial_seed(7, 5, trial));
        Distribution prior = random_gen::random_distribution(5, rng);
        std::uniform_real_distribution<double> uval(-1.5, 1.5);
        std::vector<Constraint> cs(2);
        for (auto& c : cs) {
            c.observable.resize(5);
            for (Eigen::Index i = 0; i < 5; ++i) c.observable(i) = uval(rng);
        }
        Eigen::Vector2d a(uval(rng), uval(rng)), b(uval(rng), uval(rng));
        const double ga = classical::ln_partition(prior, cs, a);
        const double gb = classical::ln_partition(prior, cs, b);
        const double gm = classical::ln_partition(prior, cs, 0.5 * (a + b));
        CHECK(gm <= 0.5 * (ga + gb) + 1e-12);
    }
}

TEST_CASE("multi-constraint solve reproduces targets") {
    for (int trial = 0; trial < 20; ++trial) {
        random_gen::Rng rng(random_gen::trial_seed(55, 6, trial));
        Distribution prior = random_gen::random_distribution(6, rng);
        Distribution witness = random_gen::random_distribution(6, rng);
        std::uniform_real_distribution<double> uval(-1.0, 1.0);
        std::vector<Constraint> cs(2);
        for (auto& c : cs) {
            c.observable.resize(6);
            for (Eigen::Index i = 0; i < 6; ++i) c.observable(i) = uval(rng);
            c.target = c.observable.dot(witness.probs);
        }
        classical::MaxEntResult r = classical::solve_maxent(prior, cs);
        for (const auto& c : cs) {
            CHECK(std::abs(c.observable.dot(r.posterior.probs) - c.target) <= 1e-9);
        }
        // Posterior keeps the prior's support exactly.
        CHECK(r.posterior.probs.minCoeff() > 0.0);
    }
}
