#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "gradcheck.hpp"
#include "vecdenoise/denoise_net.hpp"

namespace {

using vecdenoise::Matrix;
using vecdenoise::Vector;
using namespace vecdenoise::net;
using vecdenoise::sparse::Dictionary;

Matrix gaussian(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = normal(rng);
  return m;
}

FilterParams simple_params(Matrix q, Matrix s, int depth) {
  FilterParams p;
  p.Q = std::move(q);
  p.S = std::move(s);
  p.depth = depth;
  return p;
}

TEST(Init, IdentityDictionaryGivesZeroInhibition) {
  const auto p = init_filter_params(Dictionary(Matrix::Identity(2, 2)), 1.01, 3);
  EXPECT_TRUE(p.Q.isApprox(Matrix::Identity(2, 2) / 1.01));
  EXPECT_EQ(p.S, Matrix::Zero(2, 2));
}

TEST(Init, ZeroAtomKeepsOffDiagonalZero) {
  const Matrix d{{1.0, 0.0}, {0.0, 0.0}};
  const auto p = init_filter_params(Dictionary(d), 1.01, 3);
  EXPECT_TRUE(p.Q.isApprox(d / 1.01));
  EXPECT_EQ(p.S(0, 1), 0.0);
  EXPECT_EQ(p.S(1, 0), 0.0);
}

TEST(Init, StructureHoldsForAnyDictionary) {
  Matrix d = gaussian(6, 9, 3);
  for (Eigen::Index j = 0; j < d.cols(); ++j) d.col(j).normalize();
  const auto p = init_filter_params(Dictionary(d), 5.0, 2, Mode::Overcomplete);
  EXPECT_EQ(p.S.diagonal().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((p.S - p.S.transpose()).cwiseAbs().maxCoeff(), 0.0);
  const Matrix expected = Matrix::Identity(9, 9) - d.transpose() * d / 5.0;
  EXPECT_NEAR(p.S(0, 3), expected(0, 3), 1e-15);
}

TEST(Forward, ZeroInhibitionIgnoresDepth) {
  const Matrix x{{1.0, 0.0}};
  const auto y = filter_forward(x, simple_params(Matrix::Identity(2, 2), Matrix::Zero(2, 2), 3));
  EXPECT_NEAR(y.output()(0, 0), 0.76159, 1e-5);
  EXPECT_EQ(y.output()(0, 1), 0.0);

  const Matrix xr = gaussian(4, 3, 7);
  const Matrix q = gaussian(3, 5, 8);
  const Matrix base = filter_forward(xr, simple_params(q, Matrix::Zero(5, 5), 0)).output();
  for (int t = 1; t <= 6; ++t) {
    EXPECT_EQ(filter_forward(xr, simple_params(q, Matrix::Zero(5, 5), t)).output(), base) << t;
  }
}

TEST(Forward, DepthZeroIsTanhOfProjection) {
  const Matrix x = gaussian(3, 4, 1);
  const Matrix q = gaussian(4, 4, 2);
  Matrix s = gaussian(4, 4, 3);
  enforce_inhibition_structure(s);
  const auto y = filter_forward(x, simple_params(q, s, 0));
  EXPECT_EQ(y.output(), Matrix((x * q).array().tanh()));
}

TEST(Forward, TwoStepHandEvaluation) {
  const auto y = filter_forward(Matrix{{1.0, 0.0}},
                                simple_params(Matrix::Identity(2, 2), Matrix{{0, 0.5}, {0.5, 0}}, 1));
  ASSERT_EQ(y.activations.size(), 2u);
  EXPECT_NEAR(y.activations[0](0, 0), 0.76159, 1e-5);
  EXPECT_EQ(y.activations[0](0, 1), 0.0);
  EXPECT_NEAR(y.output()(0, 0), 0.76159, 1e-5);
  // tanh(0.5 * tanh(1)) = 0.363399...
  EXPECT_NEAR(y.output()(0, 1), std::tanh(0.5 * std::tanh(1.0)), 1e-15);
  EXPECT_NEAR(y.output()(0, 1), 0.36340, 1e-5);
}

TEST(Cosine, Examples) {
  EXPECT_NEAR(cosine_similarity(Vector{{1, 2, 3}}, Vector{{1, 2, 3}}).value, 1.0, 1e-15);
  EXPECT_EQ(cosine_similarity(Vector{{1, 0}}, Vector{{0, 1}}).value, 0.0);
  EXPECT_NEAR(cosine_similarity(Vector{{1, 0}}, Vector{{1, 1}}).value, 0.70711, 1e-5);
  const auto z = cosine_similarity(Vector{{0, 0}}, Vector{{1, 1}});
  EXPECT_EQ(z.value, 0.0);
  EXPECT_TRUE(z.degenerate);
}

TEST(Loss, Examples) {
  const Matrix t = gaussian(3, 4, 5);
  EXPECT_NEAR(batch_loss(t, t, Matrix::Zero(4, 4), 0.5).total, 0.0, 1e-15);
  Matrix s = gaussian(4, 4, 6);
  enforce_inhibition_structure(s);
  const auto parts = batch_loss(t, t, s, 0.5);
  EXPECT_NEAR(parts.total, 0.5 * s.cwiseAbs().sum(), 1e-15);
  EXPECT_NEAR(batch_loss(Matrix{{1, 0}}, Matrix{{1, 1}}, Matrix::Zero(2, 2), 0.5).total, 0.29289,
              1e-5);
}

TEST(Loss, NeverNegative) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto parts = batch_loss(gaussian(5, 3, seed), gaussian(5, 3, seed + 100),
                                  Matrix::Zero(3, 3), 0.0);
    EXPECT_GE(parts.total, 0.0);
  }
}

TEST(Gradients, MatchFiniteDifferences) {
  std::uint64_t seed = 1;
  for (Mode mode : {Mode::Complete, Mode::Overcomplete}) {
    const Eigen::Index m = mode == Mode::Complete ? 5 : 10;
    for (int depth : {0, 1, 2, 3, 5}) {
      const auto inst = oracle::random_grad_instance(8, 5, m, depth, mode, seed++, depth % 2 == 1);
      const auto res = oracle::check_gradients(inst, 0.5);
      EXPECT_LT(res.max_rel_error, 1e-5) << "depth " << depth << " mode " << to_string(mode);
    }
  }
}

TEST(Gradients, DepthZeroInhibitionGradientIsPenaltyOnly) {
  auto inst = oracle::random_grad_instance(6, 4, 4, 0, Mode::Complete, 3, false);
  const auto g = compute_gradients(inst.x, inst.target, inst.params, 0.0);
  EXPECT_EQ(g.dS.cwiseAbs().maxCoeff(), 0.0);
  const auto ga = compute_gradients(inst.x, inst.target, inst.params, 0.5);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) {
      const double sign = inst.params.S(i, j) > 0 ? 1.0 : (inst.params.S(i, j) < 0 ? -1.0 : 0.0);
      EXPECT_DOUBLE_EQ(ga.dS(i, j), i == j ? 0.0 : 2 * 0.5 * sign);
    }
}

TEST(Gradients, AlignedOutputsAreStationary) {
  // Q = I, S = 0, T = 0: outputs tanh(x) are not aligned with x in general, so
  // choose the target as the output itself scaled by 2.
  const Matrix x = gaussian(4, 3, 9);
  const auto p = simple_params(Matrix::Identity(3, 3), Matrix::Zero(3, 3), 0);
  const Matrix target = 2.0 * filter_forward(x, p).output();
  const auto g = compute_gradients(x, target, p, 0.0);
  EXPECT_LT(g.dQ.cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT(g.dS.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Adadelta, HandEvaluatedStep) {
  Matrix p{{0.0}};
  auto st = AdadeltaState::zeros(1, 1);
  adadelta_update(p, Matrix{{1.0}}, st);
  EXPECT_NEAR(st.grad_sq_avg(0, 0), 0.05, 1e-15);
  EXPECT_NEAR(p(0, 0), -0.004472, 1e-6);

  Matrix n{{0.0}};
  auto sn = AdadeltaState::zeros(1, 1);
  adadelta_update(n, Matrix{{-1.0}}, sn);
  EXPECT_DOUBLE_EQ(n(0, 0), -p(0, 0));
}

TEST(Adadelta, ZeroGradientOnlyDecays) {
  Matrix p{{1.5, -2.0}};
  AdadeltaState st{Matrix{{0.4, 0.2}}, Matrix{{0.1, 0.3}}};
  adadelta_update(p, Matrix::Zero(1, 2), st);
  EXPECT_EQ(p, (Matrix{{1.5, -2.0}}));
  EXPECT_NEAR(st.grad_sq_avg(0, 0), 0.95 * 0.4, 1e-15);
  EXPECT_NEAR(st.update_sq_avg(0, 1), 0.95 * 0.3, 1e-15);
  EXPECT_GE(st.grad_sq_avg.minCoeff(), 0.0);
}

TEST(Train, DefaultsMatchPublishedSettings) {
  const TrainConfig cfg;
  EXPECT_EQ(cfg.depth, 3);
  EXPECT_EQ(cfg.batch_size, 100);
  EXPECT_EQ(cfg.dropout_in, 0.5);
  EXPECT_EQ(cfg.dropout_out, 0.2);
  EXPECT_EQ(cfg.alpha, 0.5);
}

TEST(Train, LossFallsOnSyntheticData) {
  Matrix x = gaussian(500, 20, 12);
  const Matrix basis = gaussian(4, 20, 13);
  x = gaussian(500, 4, 14) * basis + 0.2 * x;
  Matrix d = Matrix::Identity(20, 20);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.patience = 0;
  const auto r = train_denoiser(x, Dictionary(d), nullptr, cfg);
  ASSERT_EQ(r.trace.size(), 20u);
  EXPECT_LT(r.trace.back().mean_delta, r.trace.front().mean_delta);
  EXPECT_EQ(r.params.S.diagonal().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((r.params.S - r.params.S.transpose()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Train, SeededRunsAreBitIdentical) {
  const Matrix x = gaussian(150, 6, 15);
  TrainConfig cfg;
  cfg.epochs = 3;
  const Dictionary d(Matrix::Identity(6, 6));
  const auto a = train_denoiser(x, d, nullptr, cfg);
  const auto b = train_denoiser(x, d, nullptr, cfg);
  EXPECT_EQ(a.params.Q, b.params.Q);
  EXPECT_EQ(a.params.S, b.params.S);
}

TEST(Train, OvercompleteShapes) {
  const Matrix x = gaussian(60, 4, 16);
  Matrix d = gaussian(4, 40, 17);
  for (Eigen::Index j = 0; j < d.cols(); ++j) d.col(j).normalize();
  const Matrix codes = gaussian(60, 40, 18);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.mode = Mode::Overcomplete;
  const auto r = train_denoiser(x, Dictionary(d), &codes, cfg);
  EXPECT_EQ(r.params.Q.rows(), 4);
  EXPECT_EQ(r.params.Q.cols(), 40);
  EXPECT_EQ(r.params.S.rows(), 40);
}

TEST(Train, NonFiniteLossAborts) {
  Matrix x = gaussian(20, 3, 19);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.alpha = std::numeric_limits<double>::infinity();
  EXPECT_THROW(train_denoiser(x, Dictionary(Matrix::Identity(3, 3) * 0.5), nullptr, cfg),
               vecdenoise::Error);
}

TEST(Apply, TanhOfProjectionStrictlyInsideUnitInterval) {
  vecdenoise::io::EmbeddingMatrix emb(vecdenoise::io::Vocabulary({"a", "b"}),
                                      Matrix{{1.0, 0.0}, {100.0, -100.0}});
  const auto out = apply_denoising(emb, simple_params(Matrix::Identity(2, 2), Matrix::Zero(2, 2), 3));
  EXPECT_NEAR(out.data()(0, 0), 0.76159, 1e-5);
  EXPECT_EQ(out.data()(0, 1), 0.0);
  EXPECT_LT(out.data().cwiseAbs().maxCoeff(), 1.0);
  EXPECT_EQ(out.vocab(), emb.vocab());
}

TEST(Serialization, FilterParamsRoundTrip) {
  FilterParams p = simple_params(gaussian(3, 6, 20), gaussian(6, 6, 21), 4);
  enforce_inhibition_structure(p.S);
  p.E = 2.5;
  p.mode = Mode::Overcomplete;
  std::stringstream buf;
  write_filter_params(buf, p);
  EXPECT_NE(buf.str().find("M = 6"), std::string::npos);
  const auto back = read_filter_params(buf);
  EXPECT_EQ(back.Q, p.Q);
  EXPECT_EQ(back.S, p.S);
  EXPECT_EQ(back.E, p.E);
  EXPECT_EQ(back.depth, 4);
  EXPECT_EQ(back.mode, Mode::Overcomplete);
}

}  // namespace
