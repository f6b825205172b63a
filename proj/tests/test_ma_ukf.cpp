#include <cmath>

#include <gtest/gtest.h>

#include "maukf/dynamics.hpp"
#include "maukf/ma_ukf.hpp"
#include "maukf/rng.hpp"

using namespace maukf;

namespace {

NoiseModel train_model() {
    NoiseModel m;
    m.R = radar_noise(10.0, 0.01);
    m.Q = process_noise(0.5, 0.05, 0.1);
    return m;
}

MaUkfConfig ma_config() {
    MaUkfConfig c;
    c.Q = process_noise(0.5, 0.05, 0.1);
    c.R = radar_noise(10.0, 0.01);
    return c;
}

/// Small random heads so the weights actually move.
PolicyParams perturbed_heads(std::uint64_t seed, double s = 0.3) {
    Rng rng(seed);
    PolicyParams p = init_params(rng);
    for (Matrix* m : {&p.w_head_mean, &p.b_head_mean, &p.w_head_cov, &p.b_head_cov})
        for (double& v : m->data()) v = s * rng.normal();
    return p;
}

}  // namespace

TEST(MaUkf, ZeroHeadsEqualUniformWeightUkf) {
    Rng rng(1);
    const PolicyParams p = init_params(rng);
    const MaUkfConfig mc = ma_config();
    UkfConfig uc;
    uc.weights = uniform_weights(kStateDim, 3.0);
    uc.Q = mc.Q;
    uc.R = mc.R;
    uc.dt = mc.dt;
    uc.meas = mc.meas;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Episode ep = generate_episode(seed % 2 ? Regime::eval_weave : Regime::train_ct, seed, 60, 0.1,
                                            train_model());
        const GaussianBelief b0 = initial_belief(ep);
        Track a, b;
        try {
            a = run_ma_ukf(ep, p, b0, mc).track;
        } catch (const FilterFailure&) {
            EXPECT_THROW(run_ukf(ep, uc, b0), FilterFailure);
            continue;
        }
        b = run_ukf(ep, uc, b0);
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t k = 0; k < a.size(); ++k) {
            ASSERT_EQ(a.means[k], b.means[k]) << "seed " << seed << " step " << k;
            ASSERT_EQ(a.covs[k], b.covs[k]);
            ASSERT_EQ(a.innovations[k], b.innovations[k]);
        }
    }
}

TEST(MaUkf, DeterministicAcrossRuns) {
    const PolicyParams p = perturbed_heads(2);
    const Episode ep = generate_episode(Regime::eval_weave, 9, 60, 0.1, train_model());
    const MaLogOptions all{true, true, true};
    const MaTrack a = run_ma_ukf(ep, p, initial_belief(ep), ma_config(), all);
    const MaTrack b = run_ma_ukf(ep, p, initial_belief(ep), ma_config(), all);
    EXPECT_EQ(a.track.means, b.track.means);
    EXPECT_EQ(a.weights, b.weights);
    EXPECT_EQ(a.hidden_norms, b.hidden_norms);
}

TEST(MaUkf, WeightLogRowsAreConvex) {
    const PolicyParams p = perturbed_heads(3, 1.0);
    const Episode ep = generate_episode(Regime::train_ct, 4, 60, 0.1, train_model());
    const MaTrack t = run_ma_ukf(ep, p, initial_belief(ep), ma_config(), {true, true, true});
    ASSERT_EQ(t.weights.size(), ep.steps());
    ASSERT_EQ(t.hidden_norms.size(), ep.steps());
    ASSERT_EQ(t.proxies.size(), ep.steps());
    for (const auto& row : t.weights) {
        double sm = 0.0, sc = 0.0;
        for (std::size_t i = 0; i < kSigmaCount; ++i) {
            EXPECT_GT(row[i], 0.0);
            sm += row[i];
            sc += row[kSigmaCount + i];
        }
        EXPECT_NEAR(sm, 1.0, 1e-12);
        EXPECT_NEAR(sc, 1.0, 1e-12);
    }
}

TEST(MaUkf, LoggingIsOptIn) {
    Rng rng(4);
    const PolicyParams p = init_params(rng);
    const Episode ep = generate_episode(Regime::train_ct, 5, 20, 0.1, train_model());
    const MaTrack t = run_ma_ukf(ep, p, initial_belief(ep), ma_config());
    EXPECT_TRUE(t.weights.empty());
    EXPECT_TRUE(t.hidden_norms.empty());
    EXPECT_TRUE(t.proxies.empty());
    EXPECT_EQ(t.track.size(), 20u);
}

TEST(MaUkf, CenterWeightCollapsesPriorToProcessNoise) {
    Rng rng(5);
    PolicyParams p = init_params(rng);
    p.b_head_mean[0] = 50.0;
    p.b_head_cov[0] = 50.0;
    const UTWeights w = synthesize_weights(Matrix(p.dims.hidden, 1), p);
    const MaUkfConfig mc = ma_config();
    const Matrix mean = Matrix::column({100, 10, -200, 5, 0.2});
    const Matrix cov = Matrix::diagonal({400, 25, 400, 25, 0.01});
    const Matrix pts = sigma_points(mean, cov, 3.0);
    const Matrix prop = col_map(pts, transition_map(MotionModel::coordinated_turn, mc.dt));
    const PriorT<Matrix> prior = recombine_prior(prop, w.mean, w.cov, mc.Q);
    EXPECT_LT(max_abs_diff(prior.belief.cov, mc.Q), 1e-12);
    for (std::size_t i = 0; i < kStateDim; ++i) EXPECT_NEAR(prior.belief.mean[i], prop(i, 0), 1e-12);
}

TEST(MaUkf, TapedRunMatchesEagerRun) {
    const PolicyParams p = perturbed_heads(6);
    const MaUkfConfig mc = ma_config();
    const Episode ep = generate_episode(Regime::train_ct, 12, 60, 0.1, train_model());
    const GaussianBelief b0 = initial_belief(ep);
    const MaTrack eager = run_ma_ukf(ep, p, b0, mc);

    ad::Tape tape;
    const PolicyParamsT<ad::Var> v = to_tape(tape, p);
    const auto f = transition_map(MotionModel::coordinated_turn, mc.dt);
    const PolicyState ps0 = initial_policy_state(p.dims);
    BeliefT<ad::Var> belief{tape.constant(b0.mean), tape.constant(b0.cov)};
    PolicyStateT<ad::Var> ps{tape.constant(ps0.hidden), tape.constant(ps0.prev_mean), tape.constant(ps0.prev_cov)};
    for (std::size_t k = 0; k < ep.steps(); ++k) {
        MaStepT<ad::Var> s = ma_step(belief, ps, to_column(ep.measurements[k]), v, mc, f);
        belief = s.belief;
        ps = s.policy;
        const State x = state_from_column(belief.mean.value());
        for (std::size_t i = 0; i < kStateDim; ++i)
            EXPECT_NEAR(x[i], eager.track.means[k][i], 1e-12 * (1 + std::abs(x[i])));
        EXPECT_LT(max_abs_diff(belief.cov.value(), eager.track.covs[k]),
                  1e-12 * (1 + frobenius_norm(eager.track.covs[k])));
    }
}

TEST(MaUkf, RejectsMismatchedPolicy) {
    Rng rng(7);
    PolicyDims d;
    d.state = 4;
    const PolicyParams p = init_params(rng, d);
    const Episode ep = generate_episode(Regime::train_ct, 1, 5, 0.1, train_model());
    EXPECT_THROW(run_ma_ukf(ep, p, initial_belief(ep), ma_config()), ShapeError);
    Episode empty = ep;
    empty.measurements.clear();
    Rng r2(8);
    EXPECT_THROW(run_ma_ukf(empty, init_params(r2), initial_belief(ep), ma_config()), std::invalid_argument);
}
