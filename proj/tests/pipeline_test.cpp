#include "salm/pipeline.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>

#include "salm/errors.hpp"
#include "salm/retrieve.hpp"
#include "salm/synthgen.hpp"
#include "test_support.hpp"

using namespace salm;
using namespace salm::pipeline;

namespace {

Corpus small_fixture(uint64_t seed = 1) {
  synthgen::GenSpec spec = synthgen::genspec_for_classes(
      synthgen::default_genspec(), {"Injection", "XSS", "Dir-traversal"});
  spec.samples_per_class = 40;
  spec.seed = seed;
  return synthgen::generate_template_corpus(spec);
}

TextFeaturizerConfig small_text_featurizer() {
  TextFeaturizerConfig cfg;
  cfg.dim = 1024;
  return cfg;
}

nn::EncoderConfig small_text_encoder() {
  nn::EncoderConfig cfg;
  cfg.input_dim = 1024;
  cfg.hidden_dims = {64};
  cfg.embed_dim = 32;
  cfg.seed = 5;
  return cfg;
}

StageConfig fast_stage1() {
  StageConfig cfg;
  cfg.epochs = 8;
  cfg.lr = 2e-3;
  cfg.effective_batch = 64;
  cfg.micro_batch = 16;
  cfg.validation_fraction = 0.1;
  cfg.early_stop.patience = 8;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("train_stage1 lowers the validation loss on the template fixture") {
  const Corpus corpus = small_fixture();
  const auto triplets = sample_triplets(corpus, 512, 2);
  TrainHistory history;
  const nn::Encoder trained =
      train_stage1(nn::Encoder::init(small_text_encoder()), corpus, triplets, fast_stage1(),
                   text_feature_fn(small_text_featurizer()), &history);

  REQUIRE(history.epochs.size() >= 2);
  CHECK(history.epochs.front().epoch == 0);
  CHECK(std::isnan(history.epochs.front().train_loss));
  CHECK(history.best_val_loss < history.epochs.front().val_loss);  // strictly lower
  CHECK(history.best_epoch >= 1);
  (void)trained;
}

TEST_CASE("train_stage1 with zero epochs returns the initialized encoder unchanged") {
  const Corpus corpus = small_fixture();
  const auto triplets = sample_triplets(corpus, 64, 2);
  StageConfig cfg = fast_stage1();
  cfg.epochs = 0;
  const nn::Encoder initial = nn::Encoder::init(small_text_encoder());
  const uint64_t before = initial.parameter_hash();
  const nn::Encoder out = train_stage1(initial, corpus, triplets, cfg,
                                       text_feature_fn(small_text_featurizer()));
  CHECK(out.parameter_hash() == before);
}

TEST_CASE("train_stage1 is deterministic for a fixed config and seed") {
  const Corpus corpus = small_fixture();
  const auto triplets = sample_triplets(corpus, 128, 2);
  StageConfig cfg = fast_stage1();
  cfg.epochs = 3;
  const auto a = train_stage1(nn::Encoder::init(small_text_encoder()), corpus, triplets, cfg,
                              text_feature_fn(small_text_featurizer()));
  const auto b = train_stage1(nn::Encoder::init(small_text_encoder()), corpus, triplets, cfg,
                              text_feature_fn(small_text_featurizer()));
  CHECK(a.parameter_hash() == b.parameter_hash());
}

TEST_CASE("train_stage1 supports the margin triplet objective") {
  const Corpus corpus = small_fixture();
  const auto triplets = sample_triplets(corpus, 256, 2);
  StageConfig cfg = fast_stage1();
  cfg.loss = Stage1Loss::Triplet;
  cfg.batch = 32;
  cfg.epochs = 6;
  TrainHistory history;
  train_stage1(nn::Encoder::init(small_text_encoder()), corpus, triplets, cfg,
               text_feature_fn(small_text_featurizer()), &history);
  CHECK(history.best_val_loss <= history.epochs.front().val_loss);
}

TEST_CASE("early stopping halts after patience epochs without improvement") {
  const Corpus corpus = small_fixture();
  const auto triplets = sample_triplets(corpus, 128, 2);
  StageConfig cfg = fast_stage1();
  cfg.epochs = 50;
  cfg.early_stop.patience = 2;
  cfg.early_stop.min_delta = 1e9;  // nothing ever counts as an improvement
  TrainHistory history;
  train_stage1(nn::Encoder::init(small_text_encoder()), corpus, triplets, cfg,
               text_feature_fn(small_text_featurizer()), &history);
  // epoch-0 row plus exactly `patience` training epochs
  CHECK(history.epochs.size() == 3);
}

TEST_CASE("train_stage2 leaves the teacher bitwise frozen and lowers alignment loss") {
  const Corpus corpus = small_fixture();
  const auto triplets = sample_triplets(corpus, 256, 2);
  const nn::Encoder teacher =
      train_stage1(nn::Encoder::init(small_text_encoder()), corpus, triplets, fast_stage1(),
                   text_feature_fn(small_text_featurizer()));
  const uint64_t teacher_hash = teacher.parameter_hash();

  PayloadFeaturizerConfig payload_feat;
  payload_feat.dim_per_half = 1024;
  nn::EncoderConfig student_cfg;
  student_cfg.input_dim = payload_feat.total_dim();
  student_cfg.hidden_dims = {64};
  student_cfg.embed_dim = 32;
  student_cfg.seed = 6;

  StageConfig cfg;
  cfg.epochs = 6;
  cfg.lr = 2e-3;
  cfg.batch = 16;
  cfg.seed = 4;
  cfg.early_stop.patience = 6;

  const auto pairs = build_pairs(corpus);
  TrainHistory history;
  const nn::Encoder student = train_stage2(
      nn::Encoder::init(student_cfg), corpus, pairs.pairs, teacher,
      text_feature_fn(small_text_featurizer()), cfg, payload_feature_fn(payload_feat), &history);

  CHECK(teacher.parameter_hash() == teacher_hash);  // frozen
  CHECK(history.best_val_loss < history.epochs.front().val_loss);
  (void)student;
}

TEST_CASE("stage 2 is a no-op when the student starts as the teacher on identical inputs") {
  // payloads byte-equal to descriptions, featurized identically on both sides
  Corpus corpus;
  corpus.classes = {{1, "Injection", "inject label"}, {2, "XSS", "script label"}};
  for (int i = 0; i < 12; ++i) {
    Sample d;
    d.id = "d" + std::to_string(i);
    d.kind = SampleKind::Description;
    d.text = "description text variant " + std::to_string(i);
    d.class_id = 1 + i % 2;
    d.threat_id = "T" + std::to_string(i);
    Sample p = d;
    p.id = "p" + std::to_string(i);
    p.kind = SampleKind::Payload;
    corpus.samples.push_back(d);
    corpus.samples.push_back(p);
  }

  const TextFeaturizerConfig feat = small_text_featurizer();
  nn::EncoderConfig enc_cfg = small_text_encoder();
  const nn::Encoder teacher = nn::Encoder::init(enc_cfg);
  const nn::Encoder student_init = teacher;  // copied weights

  StageConfig cfg;
  cfg.epochs = 3;
  cfg.batch = 8;
  cfg.seed = 9;
  cfg.validation_fraction = 0.25;

  const auto pairs = build_pairs(corpus);
  TrainHistory history;
  const nn::Encoder student =
      train_stage2(student_init, corpus, pairs.pairs, teacher, text_feature_fn(feat), cfg,
                   text_feature_fn(feat), &history);

  CHECK(history.epochs.front().val_loss == 0.0);  // exact fixed point
  CHECK(student.parameter_hash() == teacher.parameter_hash());
}

TEST_CASE("build_prototypes encodes every class label to a unit vector") {
  const TextFeaturizerConfig feat = small_text_featurizer();
  const nn::Encoder encoder = nn::Encoder::init(small_text_encoder());
  const PrototypeSet set = build_prototypes(encoder, feat, default_classes());
  REQUIRE(set.entries.size() == 15);
  for (const auto& p : set.entries) {
    CHECK(std::abs(p.embedding.norm() - 1.0) < 1e-6);
  }
  CHECK(set.warnings.empty());

  // re-encoding oracle: prototype equals a direct featurize+encode
  const auto& first = set.entries.front();
  const std::vector<FeatureVector> fv{featurize_text(first.label_text, feat)};
  const Eigen::VectorXd direct = encoder.encode(fv).col(0);
  CHECK((first.embedding - direct).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("duplicate label text is flagged and produces identical prototypes") {
  const TextFeaturizerConfig feat = small_text_featurizer();
  const nn::Encoder encoder = nn::Encoder::init(small_text_encoder());
  std::vector<VulnClass> classes = {{1, "A", "same text"}, {2, "B", "same text"}};
  const PrototypeSet set = build_prototypes(encoder, feat, classes);
  REQUIRE(set.entries.size() == 2);
  CHECK((set.entries[0].embedding - set.entries[1].embedding).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(set.warnings.size() == 1);
}

TEST_CASE("zero-shot class addition appends without touching existing prototypes") {
  const TextFeaturizerConfig feat = small_text_featurizer();
  const nn::Encoder encoder = nn::Encoder::init(small_text_encoder());
  PrototypeSet set = build_prototypes(encoder, feat, default_classes());
  std::vector<uint64_t> hashes;
  for (const auto& p : set.entries) {
    hashes.push_back(fnv1a64(std::string_view(
        reinterpret_cast<const char*>(p.embedding.data()),
        static_cast<size_t>(p.embedding.size()) * sizeof(double))));
  }

  const int id = add_zero_shot_class(set, encoder, feat, "Cryptojacking",
                                     "Unauthorized use of computing resources to mine currency.");
  CHECK(id == 16);
  REQUIRE(set.entries.size() == 16);
  for (size_t i = 0; i < 15; ++i) {
    const auto& p = set.entries[i];
    CHECK(fnv1a64(std::string_view(reinterpret_cast<const char*>(p.embedding.data()),
                                   static_cast<size_t>(p.embedding.size()) * sizeof(double))) ==
          hashes[i]);
  }

  // duplicate name rejected
  CHECK_THROWS_AS(
      add_zero_shot_class(set, encoder, feat, "cryptojacking", "another label"),
      ValidationError);

  // removing and re-adding the same label reproduces the same prototype
  const Eigen::VectorXd before = set.entries.back().embedding;
  set.entries.pop_back();
  add_zero_shot_class(set, encoder, feat, "Cryptojacking",
                      "Unauthorized use of computing resources to mine currency.");
  CHECK((set.entries.back().embedding - before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a payload embedding nearest the zero-shot prototype claims the new class") {
  const TextFeaturizerConfig feat = small_text_featurizer();
  const nn::Encoder encoder = nn::Encoder::init(small_text_encoder());
  PrototypeSet set = build_prototypes(encoder, feat,
                                      {{1, "Injection", "inject things"}, {2, "XSS", "scripts"}});
  const int id = add_zero_shot_class(set, encoder, feat, "Newcomer", "entirely new behavior");

  // nearest-distance scan oracle over random embeddings
  const Eigen::MatrixXd queries = testsupport::random_unit_columns(17, 32, 60);
  bool saw_new_class = false;
  for (Eigen::Index j = 0; j < queries.cols(); ++j) {
    const auto pred = retrieve::classify(queries.col(j), set);
    int best = 0;
    double best_d = 1e9;
    for (const auto& p : set.entries) {
      const double d = 1.0 - queries.col(j).dot(p.embedding);
      if (d < best_d) {
        best_d = d;
        best = p.class_id;
      }
    }
    CHECK(pred.class_id == best);
    saw_new_class |= pred.class_id == id;
  }
  // the new prototype's own embedding trivially classifies as the new class
  CHECK(retrieve::classify(set.by_class_id(id)->embedding, set).class_id == id);
  (void)saw_new_class;
}

TEST_CASE("stage config JSON round-trip and validation") {
  StageConfig cfg;
  cfg.epochs = 7;
  cfg.lr = 1e-3;
  cfg.loss = Stage1Loss::Triplet;
  cfg.effective_batch = 128;
  cfg.micro_batch = 32;
  cfg.seed = 77;
  const StageConfig back = StageConfig::from_json(cfg.to_json());
  CHECK(back.epochs == 7);
  CHECK(back.loss == Stage1Loss::Triplet);
  CHECK(back.seed == 77);

  StageConfig bad;
  bad.lr = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  StageConfig bad2;
  bad2.early_stop.patience = 0;
  CHECK_THROWS_AS(bad2.validate(), ConfigError);
}

TEST_CASE("history CSV carries the epoch-0 row with an empty train cell") {
  TrainHistory history;
  history.epochs = {{0, std::numeric_limits<double>::quiet_NaN(), 0.75}, {1, 0.5, 0.4}};
  testsupport::TempDir dir("hist");
  const auto path = dir.path() / "h.csv";
  write_history_csv(history, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,train_loss,val_loss");
  std::getline(in, line);
  CHECK(line.substr(0, 3) == "0,,");
  std::getline(in, line);
  CHECK(line.substr(0, 2) == "1,");
}
