#include "multibal/boab.hpp"
#include "multibal/datagen.hpp"
#include "multibal/errors.hpp"

#include "stub_dataset.hpp"
#include "stub_profile.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace multibal;

namespace {

ProfileFn parabola() {
    return [](double a) { return make_profile_point(a, (a - 0.5) * (a - 0.5) + 0.1, 0.0, 0.0); };
}

TrainConfig quick_config(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.epochs = 15;
    cfg.batch_size = 64;
    cfg.phi_hidden = {32};
    cfg.head_hidden = {16};
    cfg.rep_dim = 8;
    cfg.balance_subsample = 128;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST(Complexity, ConstantMethodByHand) {
    ComplexitySpec spec;
    spec.method = ComplexityMethod::constant;
    ComplexityInputs in;
    in.n = 200;
    in.loss_bound = 1.0;
    EXPECT_NEAR(complexity_term(spec, in), std::sqrt(std::log(40.0) / 400.0), 1e-15);
    EXPECT_NEAR(complexity_term(spec, in), 0.0960, 5e-5);
}

TEST(Complexity, ZeroLipschitzReducesToConstant) {
    ComplexitySpec lip, con;
    con.method = ComplexityMethod::constant;
    ComplexityInputs in;
    in.n = 500;
    in.loss_bound = 2.5;
    in.lipschitz = 0.0;
    EXPECT_EQ(complexity_term(lip, in), complexity_term(con, in));
}

TEST(Complexity, MonotoneInLipschitz) {
    ComplexitySpec lip;
    ComplexityInputs in;
    in.n = 300;
    in.loss_bound = 1.0;
    double prev = 1e300;
    for (double l : {3.0, 2.5, 2.5, 1.0, 0.2}) {
        in.lipschitz = l;
        const double c = complexity_term(lip, in);
        EXPECT_LE(c, prev);
        prev = c;
    }
}

TEST(Complexity, MissingArtifactsThrow) {
    ComplexitySpec lip;
    ComplexityInputs in;
    in.n = 300;
    in.loss_bound = 1.0;
    EXPECT_THROW(complexity_term(lip, in), Error);
    ComplexitySpec mc;
    mc.method = ComplexityMethod::rademacher_mc;
    EXPECT_THROW(complexity_term(mc, in), Error);
    in.n = 1;
    EXPECT_THROW(complexity_term(ComplexitySpec{ComplexityMethod::constant}, in), Error);
}

TEST(Complexity, RademacherIsDeterministicAndAboveConstant) {
    ComplexitySpec mc;
    mc.method = ComplexityMethod::rademacher_mc;
    ComplexityInputs in;
    in.n = 50;
    in.loss_bound = 1.0;
    in.per_sample_loss = Vector::LinSpaced(50, 0.0, 1.0);
    in.seed = 3;
    const double a = complexity_term(mc, in);
    EXPECT_EQ(a, complexity_term(mc, in));
    ComplexitySpec con;
    con.method = ComplexityMethod::constant;
    EXPECT_GT(a, complexity_term(con, in));
}

TEST(Complexity, SpecValidation) {
    ComplexitySpec s;
    s.delta = 1.0;
    EXPECT_THROW(s.validate(), Error);
    s.delta = 0.05;
    s.scale = 0.0;
    EXPECT_THROW(s.validate(), Error);
}

TEST(Profile, DecompositionIdentity) {
    const ProfilePoint p = make_profile_point(0.7, 0.31, 0.12, 0.05);
    EXPECT_NEAR(p.qhat, 0.31 + 0.7 * 0.12 + 0.05, 1e-12);
}

TEST(Search, SinglePointGrid) {
    const BoabResult r = boab_search({0.3}, parabola());
    EXPECT_EQ(r.alpha_hat, 0.3);
    EXPECT_EQ(r.points.size(), 1u);
}

TEST(Search, ParabolaArgmin) {
    EXPECT_EQ(boab_search({0.1, 0.3, 0.5, 0.7}, parabola()).alpha_hat, 0.5);
    EXPECT_EQ(boab_search({0.1, 0.3, 0.5, 0.7}, parabola(), 3).alpha_hat, 0.5);
}

TEST(Search, TiesGoToSmallerAlpha) {
    const ProfileFn flat = [](double a) { return make_profile_point(a, 1.0, 0.0, 0.0); };
    EXPECT_EQ(boab_search({0.0, 0.5, 1.0}, flat).alpha_hat, 0.0);
    const ProfileFn symmetric = [](double a) { return make_profile_point(a, (a - 0.5) * (a - 0.5), 0.0, 0.0); };
    EXPECT_EQ(boab_search({0.25, 0.75}, symmetric).alpha_hat, 0.25);
}

TEST(Search, GridValidation) {
    EXPECT_THROW(check_grid({}), Error);
    EXPECT_THROW(check_grid({0.5, 0.1}), Error);
    EXPECT_THROW(check_grid({0.1, 0.1}), Error);
    EXPECT_THROW(check_grid({-0.1, 0.1}), Error);
    EXPECT_NO_THROW(check_grid({0.0, 0.1, 5.0}));
}

TEST(Score, ConstantComplexityGivesImbalance) {
    std::vector<ProfilePoint> pts;
    for (double a : {0.0, 0.5, 1.0, 2.0}) { pts.push_back(make_profile_point(a, 1.0 - a * 0.1, 0.4 / (1 + a), 0.2)); }
    const ProfileScores s = profile_score(pts);
    ASSERT_EQ(s.envelope.size(), 2u);
    EXPECT_EQ(s.envelope[0], pts[1].imbalance);
    EXPECT_EQ(s.envelope[1], pts[2].imbalance);
}

TEST(Score, ConstantPiecesByHand) {
    const double r0 = 0.75, c = 0.25;
    std::vector<ProfilePoint> pts;
    for (double a : {0.0, 0.5, 1.0, 1.5, 2.0}) { pts.push_back(make_profile_point(a, 0.5, r0, 1.0 - c * a)); }
    for (double v : profile_score(pts).envelope) { EXPECT_NEAR(v, r0 - c, 1e-12); }
}

TEST(Score, SignChangeBracketsArgmin) {
    const stub::QuadraticStub q;
    const stub::ScoreNoise none;
    std::vector<ProfilePoint> pts;
    for (double a : stub::uniform_grid(0.0, 1.0, 21)) { pts.push_back(q.point(a, none)); }
    const ProfileScores s = profile_score(pts);
    const double best = pts[argmin_qhat(pts)].alpha;
    bool bracketed = false;
    for (std::size_t i = 0; i + 1 < s.envelope.size(); ++i) {
        if (s.envelope[i] <= 0.0 && s.envelope[i + 1] >= 0.0) {
            bracketed = s.alpha[i] <= best && best <= s.alpha[i + 1];
        }
    }
    EXPECT_TRUE(bracketed);
}

TEST(Score, TooFewPoints) {
    EXPECT_THROW(profile_score({make_profile_point(0, 1, 1, 1), make_profile_point(1, 1, 1, 1)}), Error);
}

TEST(Stub, ZeroNoiseFindsTrueArgmin) {
    const stub::QuadraticStub q;
    const auto grid = stub::uniform_grid(0.0, 1.0, 101);
    const stub::ScoreNoise none;
    const BoabResult r = boab_search(grid, [&](double a) { return q.point(a, none); });
    EXPECT_NEAR(r.alpha_hat, q.alpha_bd(), 1e-12);
}

TEST(Stub, ScoreNoiseDeviationBound) {
    const stub::QuadraticStub q;
    const double r = 0.2;
    const auto grid = stub::uniform_grid(0.0, 1.0, 2001);
    int within = 0;
    for (int trial = 0; trial < 100; ++trial) {
        RngStream rng(7000 + static_cast<std::uint64_t>(trial));
        const auto noise = stub::ScoreNoise::draw(r, rng);
        const double a = boab_search(grid, [&](double al) { return q.point(al, noise); }).alpha_hat;
        within += std::abs(a - q.alpha_bd()) <= r / q.kappa;
    }
    EXPECT_GE(within, 95);
}

TEST(Stub, OracleInequality) {
    const stub::QuadraticStub q;
    const double eta = 0.05;
    const auto grid = stub::uniform_grid(0.0, 1.0, 41);
    double min_q = 1e300;
    for (double a : grid) { min_q = std::min(min_q, q.population_q(a)); }
    for (int trial = 0; trial < 100; ++trial) {
        RngStream rng(8000 + static_cast<std::uint64_t>(trial));
        std::vector<double> u;
        for (std::size_t i = 0; i < grid.size(); ++i) { u.push_back(rng.uniform(-eta, eta)); }
        const stub::ScoreNoise none;
        std::size_t idx = 0;
        const BoabResult res = boab_search(grid, [&](double a) {
            const auto it = std::find(grid.begin(), grid.end(), a);
            idx = static_cast<std::size_t>(it - grid.begin());
            return q.point(a, none, u[idx]);
        });
        EXPECT_LE(q.population_q(res.alpha_hat), min_q + 2 * eta + 1e-12);
    }
}

TEST(Bootstrap, DegenerateGrid) {
    const Dataset ds = stub::gaussian_outcomes(200, 1);
    const AlphaEstimate e = bootstrap_alpha(ds, 20, {0.4}, stub::mean_shift_factory({}), 3);
    EXPECT_EQ(e.standard_error, 0.0);
    EXPECT_EQ(e.lo, 0.4);
    EXPECT_EQ(e.hi, 0.4);
    EXPECT_EQ(e.alpha_hat, 0.4);
}

TEST(Bootstrap, ReplicatesInGridRangeAndOrdered) {
    const Dataset ds = stub::gaussian_outcomes(300, 2);
    const auto grid = stub::uniform_grid(0.2, 0.8, 61);
    const AlphaEstimate e = bootstrap_alpha(ds, 25, grid, stub::mean_shift_factory({}), 4);
    ASSERT_EQ(e.replicates.size(), 25u);
    for (double a : e.replicates) {
        EXPECT_GE(a, 0.2);
        EXPECT_LE(a, 0.8);
    }
    EXPECT_LE(e.lo, e.median);
    EXPECT_LE(e.median, e.hi);
}

TEST(Bootstrap, TooFewReplicates) {
    const Dataset ds = stub::gaussian_outcomes(50, 3);
    EXPECT_THROW(bootstrap_alpha(ds, 10, {0.1, 0.2}, stub::mean_shift_factory({}), 1), Error);
}

TEST(Bootstrap, SpreadShrinksWithSampleSize) {
    const auto grid = stub::uniform_grid(0.0, 1.0, 1001);
    const stub::QuadraticStub q;
    const double small = bootstrap_alpha(stub::gaussian_outcomes(1000, 5), 30, grid, stub::mean_shift_factory(q), 6)
                             .standard_error;
    const double large = bootstrap_alpha(stub::gaussian_outcomes(4000, 5), 30, grid, stub::mean_shift_factory(q), 6)
                             .standard_error;
    EXPECT_GT(small, 0.0);
    EXPECT_LE(large, 0.7 * small);
}

TEST(Bootstrap, StratifiedResampleKeepsArmCounts) {
    GenHardParams p;
    p.n = 300;
    const Dataset ds = gen_hard(p);
    RngStream rng(1);
    EXPECT_EQ(stratified_resample(ds, rng).arm_counts(), ds.arm_counts());
}

TEST(ProfilePointTraining, IdentityDeterminismAndZeroAlpha) {
    GenHardParams gp;
    gp.n = 300;
    gp.seed = 2;
    const Dataset ds = gen_hard(gp);
    StrategySpec s;
    s.kind = StrategyKind::ova;
    const ComplexitySpec comp;
    const TrainConfig cfg = quick_config(3);
    const TrainedPoint a = profile_point(ds, 0.5, s, cfg, comp);
    const TrainedPoint b = profile_point(ds, 0.5, s, cfg, comp);
    EXPECT_NEAR(a.point.qhat, a.point.factual + 0.5 * a.point.imbalance + a.point.comp, 1e-12);
    EXPECT_EQ(a.point.qhat, b.point.qhat);
    EXPECT_EQ(a.point.lipschitz, b.point.lipschitz);
    const TrainedPoint z = profile_point(ds, 0.0, s, cfg, comp);
    EXPECT_NEAR(z.point.qhat, z.point.factual + z.point.comp, 1e-12);
    EXPECT_GT(z.point.comp, 0.0);
}

TEST(Search, TrainedGridReturnsCachedWinner) {
    GenHardParams gp;
    gp.n = 300;
    gp.seed = 4;
    const Dataset ds = gen_hard(gp);
    StrategySpec s;
    s.kind = StrategyKind::pair;
    const TrainConfig cfg = quick_config(5);
    const BoabResult r = boab_search(ds, {0.0, 0.5, 2.0}, s, cfg, ComplexitySpec{});
    ASSERT_EQ(r.points.size(), 3u);
    ASSERT_TRUE(r.best_model.has_value());
    EXPECT_EQ(r.alpha_hat, r.points[r.best_index].alpha);
    const TrainResult again = train(ds, r.alpha_hat, s, cfg);
    EXPECT_EQ(again.theta.pack(), r.best_model->theta.pack());
    for (const auto &p : r.points) { EXPECT_NEAR(p.qhat, p.factual + p.alpha * p.imbalance + p.comp, 1e-12); }
}

TEST(Search, OvaOnHardDataPicksSmallWeight) {
    GenHardParams gp;
    gp.seed = 1;
    const Dataset ds = gen_hard(gp);
    StrategySpec s;
    s.kind = StrategyKind::ova;
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.seed = 1;
    const BoabResult r = boab_search(ds, {0.1, 0.5, 1.0, 5.0}, s, cfg, ComplexitySpec{});
    EXPECT_LE(r.alpha_hat, 0.5);
}

TEST(ProfileCsv, CommentedHeaderAndRows) {
    const auto path = std::filesystem::temp_directory_path() / "multibal_profile.csv";
    write_profile_csv({make_profile_point(0.1, 1, 2, 3), make_profile_point(0.5, 1, 2, 3)}, path.string());
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "# columns: alpha,factual,imbalance,comp,qhat,lipschitz,seconds");
    int rows = 0;
    std::getline(in, line);
    while (std::getline(in, line)) { rows += !line.empty(); }
    EXPECT_EQ(rows, 2);
}
