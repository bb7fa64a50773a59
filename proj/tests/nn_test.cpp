#include "salm/nn.hpp"

#include <doctest.h>

#include <fstream>

#include "salm/errors.hpp"
#include "salm/losses.hpp"
#include "test_support.hpp"

using namespace salm;
using namespace salm::nn;

namespace {

LossProbe sum_of_outputs(const Eigen::MatrixXd& emb) {
  LossProbe probe;
  probe.loss = emb.sum();
  probe.grad = Eigen::MatrixXd::Ones(emb.rows(), emb.cols());
  return probe;
}

LossProbe mse_to_target(const Eigen::MatrixXd& emb, const Eigen::MatrixXd& target) {
  LossProbe probe;
  const Eigen::MatrixXd diff = emb - target;
  probe.loss = diff.squaredNorm();
  probe.grad = 2.0 * diff;
  return probe;
}

}  // namespace

TEST_CASE("encode outputs unit-norm columns") {
  EncoderConfig cfg;
  cfg.input_dim = 50;
  cfg.hidden_dims = {16};
  cfg.embed_dim = 8;
  cfg.seed = 3;
  const Encoder enc = Encoder::init(cfg);
  const auto feats = testsupport::random_feature_batch(1, 10, cfg.input_dim, 6);
  const Eigen::MatrixXd out = enc.encode(feats);
  REQUIRE(out.cols() == 10);
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    CHECK(std::abs(out.col(j).norm() - 1.0) < 1e-6);
  }
}

TEST_CASE("identity-initialized square encoder maps e1 to e1") {
  EncoderConfig cfg;
  cfg.input_dim = 4;
  cfg.embed_dim = 4;
  cfg.seed = 0;
  Encoder enc = Encoder::init(cfg);
  enc.mutable_layers()[0].weights = Eigen::MatrixXd::Identity(4, 4);
  enc.mutable_layers()[0].bias.setZero();

  FeatureVector e1;
  e1.dim = 4;
  e1.entries = {{0, 1.0}};
  const std::vector<FeatureVector> batch{e1};
  const Eigen::MatrixXd out = enc.encode(batch);
  CHECK(out(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out.col(0).tail(3).norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("5-layer encoder matches the naive loop-based forward oracle") {
  EncoderConfig cfg;
  cfg.input_dim = 30;
  cfg.hidden_dims = {20, 17, 12, 9};
  cfg.embed_dim = 6;
  cfg.activation = Activation::Tanh;
  cfg.seed = 11;
  const Encoder enc = Encoder::init(cfg);
  const auto feats = testsupport::random_feature_batch(21, 10, cfg.input_dim, 8);
  const Eigen::MatrixXd out = enc.encode(feats);
  for (size_t i = 0; i < feats.size(); ++i) {
    const auto expected = testsupport::oracle_forward_one(enc, feats[i]);
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      CHECK(std::abs(out(r, static_cast<Eigen::Index>(i)) -
                     expected[static_cast<size_t>(r)]) < 1e-10);
    }
  }
}

TEST_CASE("degenerate pre-normalization norm raises NumericError") {
  EncoderConfig cfg;
  cfg.input_dim = 4;
  cfg.embed_dim = 3;
  cfg.seed = 2;
  Encoder enc = Encoder::init(cfg);
  enc.mutable_layers()[0].weights.setZero();
  enc.mutable_layers()[0].bias.setZero();
  FeatureVector x;
  x.dim = 4;
  x.entries = {{1, 1.0}};
  const std::vector<FeatureVector> batch{x};
  CHECK_THROWS_AS(enc.encode(batch), NumericError);
}

TEST_CASE("encode validates the feature dimension") {
  EncoderConfig cfg;
  cfg.input_dim = 4;
  cfg.embed_dim = 3;
  const Encoder enc = Encoder::init(cfg);
  FeatureVector x;
  x.dim = 5;
  x.entries = {{0, 1.0}};
  const std::vector<FeatureVector> batch{x};
  CHECK_THROWS_AS(enc.encode(batch), ValidationError);
}

TEST_CASE("backward: zero upstream gradient yields zero parameter gradients") {
  EncoderConfig cfg;
  cfg.input_dim = 12;
  cfg.hidden_dims = {7};
  cfg.embed_dim = 5;
  cfg.seed = 4;
  const Encoder enc = Encoder::init(cfg);
  const auto feats = testsupport::random_feature_batch(5, 4, cfg.input_dim, 4);
  const ForwardContext ctx = enc.forward(feats);
  const Gradients grads =
      enc.backward(ctx, Eigen::MatrixXd::Zero(cfg.embed_dim, 4), /*want_input_grads=*/true);
  for (const auto& layer : grads.layers) {
    CHECK(layer.weights.cwiseAbs().maxCoeff() == 0.0);
    CHECK(layer.bias.cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(grads.input->cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward: single linear layer matches the symbolic normalization Jacobian") {
  EncoderConfig cfg;
  cfg.input_dim = 5;
  cfg.embed_dim = 4;
  cfg.seed = 8;
  const Encoder enc = Encoder::init(cfg);
  const auto feats = testsupport::random_feature_batch(9, 1, cfg.input_dim, 5);

  const ForwardContext ctx = enc.forward(feats);
  const Gradients grads = enc.backward(ctx, Eigen::MatrixXd::Ones(4, 1));

  // symbolic oracle for L = 1^T (z / ||z||), z = Wx + b:
  //   dL/dz = (1 - y (y.1)) / ||z||, dL/dW = dL/dz x^T
  Eigen::VectorXd x = Eigen::VectorXd::Zero(5);
  for (const auto& [idx, w] : feats[0].entries) x(idx) = w;
  const Eigen::VectorXd y = ctx.output.col(0);
  const Eigen::VectorXd dz =
      (Eigen::VectorXd::Ones(4) - y * y.sum()) / ctx.norms(0);
  const Eigen::MatrixXd expected_w = dz * x.transpose();
  CHECK((grads.layers[0].weights - expected_w).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((grads.layers[0].bias - dz).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("analytic gradients match central finite differences on random configs") {
  for (uint64_t seed = 0; seed < 4; ++seed) {
    EncoderConfig cfg;
    cfg.input_dim = 14;
    cfg.hidden_dims = seed % 2 == 0 ? std::vector<uint32_t>{9} : std::vector<uint32_t>{8, 6};
    cfg.embed_dim = 5;
    cfg.activation = seed % 2 == 0 ? Activation::Tanh : Activation::ReLU;
    cfg.seed = 100 + seed;
    const Encoder enc = Encoder::init(cfg);
    const auto feats = testsupport::random_feature_batch(200 + seed, 6, cfg.input_dim, 5);
    const Eigen::MatrixXd target = testsupport::random_unit_columns(300 + seed, 5, 6);

    const auto result = grad_check(
        enc, [&](const Eigen::MatrixXd& e) { return mse_to_target(e, target); }, feats, 1e-4,
        400 + seed, 120);
    REQUIRE_FALSE(result.non_smooth_point);
    CHECK(result.coords_checked > 0);
    CHECK(result.max_rel_error <= 1e-4);
  }
}

TEST_CASE("adamw: first step is approximately -lr * sign(gradient)") {
  Eigen::MatrixXd p(1, 1);
  p(0, 0) = 0.7;
  Eigen::MatrixXd g(1, 1);
  g(0, 0) = 0.42;
  AdamW opt({1e-3, 0.9, 0.999, 1e-8, 0.0});
  opt.step({{p.data(), 1, "p"}}, {{g.data(), 1, "p"}});
  CHECK(std::abs(p(0, 0) - (0.7 - 1e-3)) < 1e-7 * 1e-3 + 1e-10);
  CHECK(opt.step_count() == 1);
}

TEST_CASE("adamw: zero gradient with zero decay leaves parameters unchanged") {
  Eigen::MatrixXd p(2, 2);
  p << 1.0, -2.0, 3.0, 0.5;
  const Eigen::MatrixXd before = p;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2, 2);
  AdamW opt({1e-2, 0.9, 0.999, 1e-8, 0.0});
  opt.step({{p.data(), 4, "p"}}, {{g.data(), 4, "p"}});
  CHECK((p - before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adamw: 5 steps on a quadratic bowl match a step-by-step reference") {
  // bowl f(p) = 0.5 p^2, gradient p; reference computed with scalar arithmetic
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8, wd = 0.01;
  double ref_p = 1.3, ref_m = 0.0, ref_v = 0.0;

  Eigen::MatrixXd p(1, 1);
  p(0, 0) = 1.3;
  AdamW opt({lr, b1, b2, eps, wd});

  for (int t = 1; t <= 5; ++t) {
    const double g = ref_p;
    ref_m = b1 * ref_m + (1 - b1) * g;
    ref_v = b2 * ref_v + (1 - b2) * g * g;
    const double m_hat = ref_m / (1 - std::pow(b1, t));
    const double v_hat = ref_v / (1 - std::pow(b2, t));
    const double ref_update = lr * (m_hat / (std::sqrt(v_hat) + eps) + wd * ref_p);

    Eigen::MatrixXd grad(1, 1);
    grad(0, 0) = p(0, 0);
    opt.step({{p.data(), 1, "p"}}, {{grad.data(), 1, "p"}});

    ref_p -= ref_update;
    CHECK(std::abs(p(0, 0) - ref_p) < 1e-12);
  }
}

TEST_CASE("adamw rejects non-finite gradients, naming the block") {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(1, 2);
  Eigen::MatrixXd g(1, 2);
  g << 1.0, std::numeric_limits<double>::quiet_NaN();
  AdamW opt({1e-3, 0.9, 0.999, 1e-8, 0.0});
  try {
    opt.step({{p.data(), 2, "layer7.bias"}}, {{g.data(), 2, "layer7.bias"}});
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("layer7.bias") != std::string::npos);
  }
}

TEST_CASE("grad_check: linear model with MSE loss is accurate to 1e-6") {
  EncoderConfig cfg;
  cfg.input_dim = 10;
  cfg.embed_dim = 6;
  cfg.seed = 17;
  const Encoder enc = Encoder::init(cfg);
  const auto feats = testsupport::random_feature_batch(33, 5, cfg.input_dim, 5);
  const Eigen::MatrixXd target = testsupport::random_unit_columns(34, 6, 5);
  const auto result = grad_check(
      enc, [&](const Eigen::MatrixXd& e) { return mse_to_target(e, target); }, feats, 1e-4, 35,
      200);
  REQUIRE_FALSE(result.non_smooth_point);
  CHECK(result.max_rel_error <= 1e-6);
}

TEST_CASE("grad_check: constant loss gives zero on both sides") {
  EncoderConfig cfg;
  cfg.input_dim = 8;
  cfg.embed_dim = 4;
  cfg.seed = 19;
  const Encoder enc = Encoder::init(cfg);
  const auto feats = testsupport::random_feature_batch(44, 3, cfg.input_dim, 4);
  const auto result = grad_check(
      enc,
      [](const Eigen::MatrixXd& e) {
        LossProbe probe;
        probe.loss = 42.0;
        probe.grad = Eigen::MatrixXd::Zero(e.rows(), e.cols());
        return probe;
      },
      feats, 1e-4, 45, 50);
  CHECK(result.coords_checked > 0);
  CHECK(result.max_rel_error == 0.0);
}

TEST_CASE("grad_check flags a triplet loss evaluated exactly at the margin kink") {
  EncoderConfig cfg;
  cfg.input_dim = 6;
  cfg.embed_dim = 4;
  cfg.seed = 23;
  const Encoder enc = Encoder::init(cfg);
  const auto feats = testsupport::random_feature_batch(55, 3, cfg.input_dim, 4);
  const auto result = grad_check(
      enc,
      [](const Eigen::MatrixXd& e) {
        LossProbe probe;
        probe.loss = 0.0;
        probe.grad = Eigen::MatrixXd::Zero(e.rows(), e.cols());
        probe.kink_distance = 0.0;  // d_ap - d_an + margin == 0 exactly
        return probe;
      },
      feats, 1e-4, 56, 50);
  CHECK(result.non_smooth_point);
  CHECK(result.coords_checked == 0);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  EncoderConfig cfg;
  cfg.input_dim = 20;
  cfg.hidden_dims = {11};
  cfg.embed_dim = 7;
  cfg.seed = 29;
  Checkpoint ckpt;
  ckpt.stage = 1;
  ckpt.encoder = Encoder::init(cfg);
  ckpt.featurizer_config = {{"kind", "text"}, {"dim", 20}};
  ckpt.metadata = {{"note", "fixture"}};
  ckpt.extra_blobs.emplace_back("head", Eigen::MatrixXd::Random(3, 7));

  testsupport::TempDir dir("ckpt");
  const auto path = dir.path() / "a.ckpt";
  save_checkpoint(ckpt, path);
  const Checkpoint loaded = load_checkpoint(path);

  CHECK(loaded.stage == 1);
  CHECK(loaded.encoder.parameter_hash() == ckpt.encoder.parameter_hash());
  CHECK(loaded.featurizer_config == ckpt.featurizer_config);
  CHECK(loaded.metadata == ckpt.metadata);
  REQUIRE(loaded.extra_blobs.size() == 1);
  CHECK((loaded.extra_blobs[0].second - ckpt.extra_blobs[0].second).cwiseAbs().maxCoeff() ==
        0.0);

  // a frozen teacher reloaded from disk encodes identically
  const auto feats = testsupport::random_feature_batch(66, 4, cfg.input_dim, 6);
  const Eigen::MatrixXd a = ckpt.encoder.encode(feats);
  const Eigen::MatrixXd b = loaded.encoder.encode(feats);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("truncated checkpoint files are rejected as corrupt") {
  EncoderConfig cfg;
  cfg.input_dim = 6;
  cfg.embed_dim = 4;
  cfg.seed = 31;
  Checkpoint ckpt;
  ckpt.stage = 2;
  ckpt.encoder = Encoder::init(cfg);
  ckpt.featurizer_config = nlohmann::json::object();
  ckpt.metadata = nlohmann::json::object();

  testsupport::TempDir dir("ckpt2");
  const auto path = dir.path() / "full.ckpt";
  save_checkpoint(ckpt, path);

  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto cut = dir.path() / "cut.ckpt";
  std::ofstream out(cut, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  out.close();
  CHECK_THROWS_AS(load_checkpoint(cut), ParseError);
}

TEST_CASE("unsupported checkpoint version is a distinct error") {
  EncoderConfig cfg;
  cfg.input_dim = 6;
  cfg.embed_dim = 4;
  cfg.seed = 37;
  Checkpoint ckpt;
  ckpt.format_version = 99;
  ckpt.stage = 1;
  ckpt.encoder = Encoder::init(cfg);
  ckpt.featurizer_config = nlohmann::json::object();
  ckpt.metadata = nlohmann::json::object();

  testsupport::TempDir dir("ckpt3");
  const auto path = dir.path() / "v99.ckpt";
  save_checkpoint(ckpt, path);
  try {
    load_checkpoint(path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }
}
