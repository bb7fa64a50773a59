// salm: two-stage contrastive training and semantic-retrieval classification
// of HTTP payloads, with baselines, evaluation, projections and a synthetic
// benchmark generator. One experiment config file drives every subcommand.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "salm/baselines.hpp"
#include "salm/corpus.hpp"
#include "salm/errors.hpp"
#include "salm/evalviz.hpp"
#include "salm/experiment.hpp"
#include "salm/featurize.hpp"
#include "salm/nn.hpp"
#include "salm/pipeline.hpp"
#include "salm/retrieve.hpp"
#include "salm/rng.hpp"
#include "salm/synthgen.hpp"

namespace {

using namespace salm;
using nlohmann::json;
namespace fs = std::filesystem;

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

json classes_to_json(const std::vector<VulnClass>& classes) {
  json out = json::array();
  for (const auto& c : classes) {
    out.push_back({{"id", c.id}, {"name", c.name}, {"generic_label", c.generic_label}});
  }
  return out;
}

std::vector<VulnClass> classes_from_json(const json& j) {
  std::vector<VulnClass> out;
  for (const auto& c : j) {
    out.push_back({c.at("id").get<int>(), c.at("name").get<std::string>(),
                   c.at("generic_label").get<std::string>()});
  }
  return out;
}

Corpus load_dataset(const experiment::ExperimentConfig& cfg) {
  if (!fs::exists(cfg.dataset_path)) {
    throw IoError("dataset path '" + cfg.dataset_path.string() + "' does not exist");
  }
  LoadOptions options;
  options.max_payload_bytes = cfg.max_payload_bytes;
  LoadResult result = load_corpus(cfg.dataset_path, cfg.dataset_format, options);
  for (const auto& r : result.rejections) {
    std::cerr << "warning: rejected record " << r.record_index << ": " << r.reason << "\n";
  }
  return std::move(result.corpus);
}

experiment::RunManifest start_manifest(const std::string& command,
                                       const experiment::ExperimentConfig& cfg) {
  experiment::RunManifest m;
  m.command = command;
  m.config_hash = experiment::sha256_hex(cfg.raw.dump());
  if (fs::exists(cfg.dataset_path)) {
    m.input_digests[cfg.dataset_path.string()] = experiment::sha256_file(cfg.dataset_path);
  }
  return m;
}

void write_predictions(const std::vector<std::pair<std::string, retrieve::Prediction>>& preds,
                       const Corpus& corpus, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (const auto& [id, pred] : preds) {
    const VulnClass* c = corpus.class_by_id(pred.class_id);
    json ranking = json::array();
    for (const auto& [cls, dist] : pred.ranking) ranking.push_back({cls, dist});
    out << json{{"id", id},
                {"class_id", pred.class_id},
                {"class", c ? c->name : std::to_string(pred.class_id)},
                {"distance", pred.distance},
                {"ranking", ranking}}
               .dump()
        << "\n";
  }
}

std::map<std::string, int> read_prediction_labels(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open predictions '" + path.string() + "'");
  std::map<std::string, int> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json rec = json::parse(line);
      out[rec.at("id").get<std::string>()] = rec.at("class_id").get<int>();
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string split_name(const experiment::ExperimentConfig& cfg) {
  if (cfg.split.mode == experiment::SplitSpec::Mode::Temporal) {
    return "temporal@" + cfg.split.cutoff.to_string();
  }
  return "stratified@" + std::to_string(cfg.split.test_fraction) + "/seed" +
         std::to_string(cfg.split.seed);
}

// ---------------------------------------------------------------------------
// Subcommand bodies

int cmd_prepare(const experiment::ExperimentConfig& cfg) {
  experiment::DirLock lock(cfg.output_dir);
  Stopwatch watch;
  auto manifest = start_manifest("prepare", cfg);

  Corpus corpus = load_dataset(cfg);
  std::vector<std::string> warnings;
  auto [train, test] = experiment::apply_split(corpus, cfg.split, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

  auto ids_of = [](const Corpus& c) {
    std::vector<std::string> ids;
    ids.reserve(c.samples.size());
    for (const auto& s : c.samples) ids.push_back(s.id);
    return ids;
  };
  const fs::path train_path = cfg.output_dir / "train_manifest.jsonl";
  const fs::path test_path = cfg.output_dir / "test_manifest.jsonl";
  write_manifest(ids_of(train), train_path);
  write_manifest(ids_of(test), test_path);

  const fs::path hist_path = cfg.output_dir / "class_histogram.csv";
  {
    std::ofstream out(hist_path, std::ios::binary);
    out << "class_id,name,train_descriptions,train_payloads,test_descriptions,test_payloads\n";
    const auto train_desc = train.class_histogram(SampleKind::Description);
    const auto train_pay = train.class_histogram(SampleKind::Payload);
    const auto test_desc = test.class_histogram(SampleKind::Description);
    const auto test_pay = test.class_histogram(SampleKind::Payload);
    for (const auto& c : corpus.classes) {
      out << c.id << "," << c.name << "," << train_desc.at(c.id) << "," << train_pay.at(c.id)
          << "," << test_desc.at(c.id) << "," << test_pay.at(c.id) << "\n";
    }
  }

  manifest.seeds["split"] = cfg.split.seed;
  manifest.outputs = {train_path.string(), test_path.string(), hist_path.string()};
  manifest.timings_ms["total"] = watch.ms();
  write_run_manifest(manifest, cfg.output_dir / "prepare_manifest.json");
  std::cerr << "prepare: " << train.samples.size() << " train / " << test.samples.size()
            << " test samples\n";
  return 0;
}

int cmd_train(const experiment::ExperimentConfig& cfg, int stage, const std::string& teacher_path) {
  experiment::DirLock lock(cfg.output_dir);
  Stopwatch watch;
  auto manifest = start_manifest("train", cfg);

  Corpus corpus = load_dataset(cfg);
  auto [train, test] = experiment::apply_split(corpus, cfg.split);

  if (stage == 1) {
    const auto triplets = sample_triplets(train, cfg.triplet_count, cfg.stage1.seed);
    pipeline::TrainHistory history;
    nn::Encoder encoder = nn::Encoder::init(cfg.text_encoder);
    encoder = pipeline::train_stage1(std::move(encoder), train, triplets, cfg.stage1,
                                     pipeline::text_feature_fn(cfg.text_featurizer), &history);

    nn::Checkpoint ckpt;
    ckpt.stage = 1;
    ckpt.encoder = encoder;
    ckpt.featurizer_config = text_featurizer_to_json(cfg.text_featurizer);
    ckpt.metadata = {{"classes", classes_to_json(
                                     experiment::resolve_labels(corpus, cfg.labels_path))},
                     {"best_epoch", history.best_epoch},
                     {"best_val_loss", history.best_val_loss},
                     {"stage_config", cfg.stage1.to_json()},
                     {"triplet_count", cfg.triplet_count}};
    const fs::path ckpt_path = cfg.output_dir / "stage1.ckpt";
    nn::save_checkpoint(ckpt, ckpt_path);
    const fs::path hist_path = cfg.output_dir / "history_stage1.csv";
    pipeline::write_history_csv(history, hist_path);

    manifest.seeds["stage1"] = cfg.stage1.seed;
    manifest.seeds["encoder"] = cfg.text_encoder.seed;
    manifest.outputs = {ckpt_path.string(), hist_path.string()};
    manifest.timings_ms["total"] = watch.ms();
    write_run_manifest(manifest, cfg.output_dir / "train1_manifest.json");
    std::cerr << "stage 1 done: best epoch " << history.best_epoch << ", val loss "
              << history.best_val_loss << "\n";
    return 0;
  }

  // stage 2
  const fs::path teacher_file =
      teacher_path.empty() ? cfg.output_dir / "stage1.ckpt" : fs::path(teacher_path);
  if (!fs::exists(teacher_file)) {
    throw ConfigError("stage 2 requires a stage-1 checkpoint; '" + teacher_file.string() +
                      "' not found (run `salm train --stage 1` first)");
  }
  const nn::Checkpoint teacher_ckpt = nn::load_checkpoint(teacher_file);
  if (teacher_ckpt.stage != 1) {
    throw ConfigError("'" + teacher_file.string() + "' is not a stage-1 checkpoint");
  }
  manifest.input_digests[teacher_file.string()] = experiment::sha256_file(teacher_file);
  const TextFeaturizerConfig teacher_feat =
      text_featurizer_from_json(teacher_ckpt.featurizer_config);

  if (teacher_ckpt.encoder.config().embed_dim != cfg.payload_encoder.embed_dim) {
    throw ConfigError("teacher embed_dim " +
                      std::to_string(teacher_ckpt.encoder.config().embed_dim) +
                      " != payload encoder embed_dim " +
                      std::to_string(cfg.payload_encoder.embed_dim));
  }

  PairResult pairs = build_pairs(train);
  for (const auto& issue : pairs.report) {
    std::cerr << "note: payload '" << issue.payload_id << "' excluded from alignment: "
              << issue.reason << "\n";
  }

  nn::Encoder student = cfg.init_payload_from_teacher
                            ? teacher_ckpt.encoder
                            : nn::Encoder::init(cfg.payload_encoder);
  if (cfg.init_payload_from_teacher &&
      teacher_ckpt.encoder.config().input_dim != cfg.payload_featurizer.total_dim()) {
    throw ConfigError("cannot copy teacher weights: teacher input dim differs from the payload "
                      "featurizer dim");
  }

  const uint64_t teacher_hash_before = teacher_ckpt.encoder.parameter_hash();
  pipeline::TrainHistory history;
  student = pipeline::train_stage2(std::move(student), train, pairs.pairs, teacher_ckpt.encoder,
                                   pipeline::text_feature_fn(teacher_feat), cfg.stage2,
                                   pipeline::payload_feature_fn(cfg.payload_featurizer),
                                   &history);
  if (teacher_ckpt.encoder.parameter_hash() != teacher_hash_before) {
    throw NumericError("teacher parameters changed during stage 2");  // freeze contract
  }

  nn::Checkpoint ckpt;
  ckpt.stage = 2;
  ckpt.encoder = student;
  ckpt.featurizer_config = payload_featurizer_to_json(cfg.payload_featurizer);
  ckpt.metadata = {{"classes", teacher_ckpt.metadata.at("classes")},
                   {"teacher_hash", teacher_hash_before},
                   {"best_epoch", history.best_epoch},
                   {"best_val_loss", history.best_val_loss},
                   {"stage_config", cfg.stage2.to_json()},
                   {"alignment_pairs", pairs.pairs.size()},
                   {"orphan_payloads", pairs.report.size()}};
  const fs::path ckpt_path = cfg.output_dir / "stage2.ckpt";
  nn::save_checkpoint(ckpt, ckpt_path);
  const fs::path hist_path = cfg.output_dir / "history_stage2.csv";
  pipeline::write_history_csv(history, hist_path);

  manifest.seeds["stage2"] = cfg.stage2.seed;
  manifest.seeds["encoder"] = cfg.payload_encoder.seed;
  manifest.outputs = {ckpt_path.string(), hist_path.string()};
  manifest.timings_ms["total"] = watch.ms();
  write_run_manifest(manifest, cfg.output_dir / "train2_manifest.json");
  std::cerr << "stage 2 done: best epoch " << history.best_epoch << ", val loss "
            << history.best_val_loss << "\n";
  return 0;
}

struct ClassifyArgs {
  std::string teacher;
  std::string student;
  std::string input;
  std::string format = "jsonl";
  std::string output = "predictions.jsonl";
  std::string labels;
  std::vector<std::string> add_classes;  // "Name=label text"
};

int cmd_classify(const ClassifyArgs& args) {
  Stopwatch watch;
  const nn::Checkpoint teacher = nn::load_checkpoint(args.teacher);
  const nn::Checkpoint student = nn::load_checkpoint(args.student);
  if (teacher.stage != 1 || student.stage != 2) {
    throw ConfigError("classify expects --teacher stage-1 and --student stage-2 checkpoints");
  }
  if (teacher.encoder.config().embed_dim != student.encoder.config().embed_dim) {
    throw ConfigError("teacher/student embedding dimensions differ");
  }
  const TextFeaturizerConfig text_feat = text_featurizer_from_json(teacher.featurizer_config);
  const PayloadFeaturizerConfig payload_feat =
      payload_featurizer_from_json(student.featurizer_config);

  std::vector<VulnClass> classes = classes_from_json(teacher.metadata.at("classes"));
  if (!args.labels.empty()) {
    Corpus dummy;
    dummy.classes = classes;
    classes = experiment::resolve_labels(dummy, fs::path(args.labels));
  }
  pipeline::PrototypeSet prototypes =
      pipeline::build_prototypes(teacher.encoder, text_feat, classes);
  for (const auto& w : prototypes.warnings) std::cerr << "warning: " << w << "\n";

  Corpus proto_classes;  // class table for naming predictions
  proto_classes.classes = classes;
  for (const auto& spec : args.add_classes) {
    const size_t eq = spec.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--add-class expects Name=label text, got '" + spec + "'");
    }
    const std::string name = spec.substr(0, eq);
    const int id = pipeline::add_zero_shot_class(prototypes, teacher.encoder, text_feat, name,
                                                 spec.substr(eq + 1));
    proto_classes.classes.push_back({id, name, spec.substr(eq + 1)});
  }

  const CorpusFormat format =
      args.format == "json_array" ? CorpusFormat::JsonArray : CorpusFormat::Jsonl;
  LoadOptions options;
  options.classes = proto_classes.classes;
  const LoadResult loaded = load_corpus(args.input, format, options);
  for (const auto& r : loaded.rejections) {
    std::cerr << "warning: rejected record " << r.record_index << ": " << r.reason << "\n";
  }

  std::vector<std::pair<std::string, retrieve::Prediction>> predictions;
  for (const auto& s : loaded.corpus.samples) {
    if (s.kind != SampleKind::Payload) continue;
    predictions.emplace_back(
        s.id, retrieve::classify_payload(s.text, student.encoder, payload_feat, prototypes));
  }
  write_predictions(predictions, proto_classes, args.output);
  std::cerr << "classified " << predictions.size() << " payloads in " << watch.ms() << " ms\n";
  return 0;
}

int cmd_evaluate(const experiment::ExperimentConfig& cfg, const std::string& predictions_path,
                 const std::string& method_name) {
  experiment::DirLock lock(cfg.output_dir);
  Stopwatch watch;
  auto manifest = start_manifest("evaluate", cfg);
  manifest.input_digests[predictions_path] = experiment::sha256_file(predictions_path);

  Corpus corpus = load_dataset(cfg);
  auto [train, test] = experiment::apply_split(corpus, cfg.split);

  const auto predicted = read_prediction_labels(predictions_path);
  std::vector<int> truths, preds;
  for (const auto& s : test.samples) {
    if (s.kind != SampleKind::Payload) continue;
    auto it = predicted.find(s.id);
    if (it == predicted.end()) {
      throw ValidationError("no prediction for test payload '" + s.id +
                            "' (split/prediction mismatch)");
    }
    truths.push_back(s.class_id);
    preds.push_back(it->second);
  }
  if (truths.empty()) throw ValidationError("test split has no payload samples");

  evalviz::EvalReport report =
      evalviz::compute_metrics(truths, preds, static_cast<int>(corpus.classes.size()));
  report.method = method_name;
  report.split = split_name(cfg);

  const fs::path json_path = cfg.output_dir / ("report_" + method_name + ".json");
  const fs::path csv_path = cfg.output_dir / ("report_" + method_name + ".csv");
  evalviz::write_report_json(report, json_path);
  evalviz::write_report_csv(report, csv_path);

  manifest.outputs = {json_path.string(), csv_path.string()};
  manifest.timings_ms["total"] = watch.ms();
  write_run_manifest(manifest, cfg.output_dir / ("evaluate_" + method_name + "_manifest.json"));
  std::cerr << method_name << ": accuracy " << report.accuracy << ", macro F1 "
            << report.macro_f1 << " on " << report.sample_count << " samples\n";
  return 0;
}

int cmd_compare(const std::vector<std::string>& report_paths, const std::string& designated,
                const std::string& out_dir) {
  std::vector<evalviz::EvalReport> reports;
  std::map<int, std::string> class_names;
  for (const auto& p : report_paths) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open report '" + p + "'");
    json j;
    in >> j;
    reports.push_back(evalviz::EvalReport::from_json(j));
  }
  for (const auto& r : reports) {
    for (const auto& [id, f1] : r.per_class_f1) {
      class_names.emplace(id, "class-" + std::to_string(id));
    }
  }
  fs::create_directories(out_dir);
  evalviz::compare_methods(reports, designated, fs::path(out_dir) / "comparison.csv");
  evalviz::write_per_class_table(reports, class_names, fs::path(out_dir) / "per_class_f1.csv");
  std::cerr << "wrote comparison for " << reports.size() << " methods\n";
  return 0;
}

int cmd_baseline(const experiment::ExperimentConfig& cfg, const std::string& method) {
  experiment::DirLock lock(cfg.output_dir);
  Stopwatch watch;
  auto manifest = start_manifest("baseline", cfg);

  Corpus corpus = load_dataset(cfg);
  auto [train, test] = experiment::apply_split(corpus, cfg.split);
  const int num_classes = static_cast<int>(corpus.classes.size());

  std::vector<const Sample*> train_payloads, test_payloads;
  for (const auto& s : train.samples) {
    if (s.kind == SampleKind::Payload) train_payloads.push_back(&s);
  }
  for (const auto& s : test.samples) {
    if (s.kind == SampleKind::Payload) test_payloads.push_back(&s);
  }
  if (train_payloads.empty() || test_payloads.empty()) {
    throw ValidationError("baseline: need payload samples in both splits");
  }

  std::vector<int> truths;
  std::vector<int> preds;
  std::vector<std::string> outputs;
  truths.reserve(test_payloads.size());
  for (const Sample* s : test_payloads) truths.push_back(s->class_id);

  if (method == "tfidf-rf") {
    std::vector<std::string> docs;
    docs.reserve(train_payloads.size());
    std::vector<int> labels;
    for (const Sample* s : train_payloads) {
      docs.push_back(s->text);
      labels.push_back(s->class_id);
    }
    const auto tfidf = baselines::tfidf_fit(docs, cfg.tfidf);
    std::vector<FeatureVector> train_feats;
    train_feats.reserve(docs.size());
    for (const auto& d : docs) train_feats.push_back(baselines::tfidf_transform(tfidf, d));
    const auto forest = baselines::forest_train(train_feats, labels, num_classes, cfg.forest);
    for (const auto& w : forest.warnings) std::cerr << "warning: " << w << "\n";

    const fs::path model_path = cfg.output_dir / "tfidf_rf.model.json";
    {
      std::ofstream out(model_path, std::ios::binary);
      out << json{{"tfidf", tfidf.to_json()}, {"forest", forest.to_json()}}.dump() << "\n";
    }
    outputs.push_back(model_path.string());

    for (const Sample* s : test_payloads) {
      preds.push_back(baselines::forest_predict(forest, baselines::tfidf_transform(tfidf, s->text)));
    }
  } else if (method == "supervised") {
    std::vector<FeatureVector> train_feats;
    std::vector<int> labels;
    for (const Sample* s : train_payloads) {
      train_feats.push_back(featurize_payload(parse_http_sample(s->text), cfg.payload_featurizer));
      labels.push_back(s->class_id);
    }
    pipeline::TrainHistory history;
    const auto model =
        baselines::supervised_train(train_feats, labels, num_classes, cfg.supervised, &history);

    const fs::path model_path = cfg.output_dir / "supervised.ckpt";
    baselines::save_supervised(model, payload_featurizer_to_json(cfg.payload_featurizer),
                               model_path);
    const fs::path hist_path = cfg.output_dir / "history_supervised.csv";
    pipeline::write_history_csv(history, hist_path);
    outputs.push_back(model_path.string());
    outputs.push_back(hist_path.string());

    for (const Sample* s : test_payloads) {
      preds.push_back(baselines::supervised_predict(
          model, featurize_payload(parse_http_sample(s->text), cfg.payload_featurizer)));
    }
  } else if (method == "knn") {
    // untrained encoder = generic embedding space without contrastive refinement
    nn::EncoderConfig emb_cfg = cfg.payload_encoder;
    emb_cfg.seed = cfg.knn.encoder_seed;
    const nn::Encoder embedder = nn::Encoder::init(emb_cfg);
    const auto featurize = pipeline::payload_feature_fn(cfg.payload_featurizer);

    std::vector<FeatureVector> train_feats;
    std::vector<int> labels;
    for (const Sample* s : train_payloads) {
      train_feats.push_back(featurize(*s));
      labels.push_back(s->class_id);
    }
    Eigen::MatrixXd train_embs(emb_cfg.embed_dim, static_cast<Eigen::Index>(train_feats.size()));
    constexpr size_t kChunk = 512;
    for (size_t start = 0; start < train_feats.size(); start += kChunk) {
      const size_t len = std::min(kChunk, train_feats.size() - start);
      train_embs.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len)) =
          embedder.encode(std::span<const FeatureVector>(train_feats).subspan(start, len));
    }

    retrieve::AnnParams params = cfg.knn.ann;
    params.seed = cfg.knn.encoder_seed;
    const auto index = retrieve::AnnIndex::build(train_embs, labels, params);
    const fs::path index_path = cfg.output_dir / "knn.index";
    index.save(index_path);
    outputs.push_back(index_path.string());

    size_t k = static_cast<size_t>(cfg.knn.k);
    if (k > index.size()) {
      std::cerr << "warning: k=" << k << " exceeds stored count " << index.size()
                << "; clamped\n";
      k = index.size();
    }
    for (const Sample* s : test_payloads) {
      const std::vector<FeatureVector> fv{featurize(*s)};
      const Eigen::VectorXd q = embedder.encode(fv).col(0);
      std::vector<retrieve::Neighbor> neighbors;
      for (const auto& [id, dist] : index.query(q, k)) {
        neighbors.push_back({id, index.label(id), dist});
      }
      preds.push_back(retrieve::knn_majority(neighbors));
    }
    manifest.seeds["knn_encoder"] = cfg.knn.encoder_seed;
  } else {
    throw ConfigError("unknown baseline method '" + method +
                      "' (expected tfidf-rf, supervised or knn)");
  }

  evalviz::EvalReport report = evalviz::compute_metrics(truths, preds, num_classes);
  report.method = method;
  report.split = split_name(cfg);
  const fs::path json_path = cfg.output_dir / ("report_" + method + ".json");
  const fs::path csv_path = cfg.output_dir / ("report_" + method + ".csv");
  evalviz::write_report_json(report, json_path);
  evalviz::write_report_csv(report, csv_path);
  outputs.push_back(json_path.string());
  outputs.push_back(csv_path.string());

  manifest.outputs = outputs;
  manifest.timings_ms["total"] = watch.ms();
  write_run_manifest(manifest, cfg.output_dir / ("baseline_" + method + "_manifest.json"));
  std::cerr << method << ": accuracy " << report.accuracy << ", macro F1 " << report.macro_f1
            << "\n";
  return 0;
}

struct SynthgenArgs {
  std::string mode = "template";
  std::string spec;
  std::string output = "synthetic.json";
  std::string classes;
  std::string endpoint;
  std::string model;
  size_t samples = 0;
  uint64_t seed = 0;
  bool seed_set = false;
};

int cmd_synthgen(const SynthgenArgs& args) {
  synthgen::GenSpec spec =
      args.spec.empty() ? synthgen::default_genspec() : synthgen::load_genspec(args.spec);
  if (!args.classes.empty()) {
    std::vector<std::string> names;
    std::stringstream ss(args.classes);
    std::string name;
    while (std::getline(ss, name, ',')) names.push_back(name);
    spec = synthgen::genspec_for_classes(spec, names);
  }
  if (args.samples > 0) spec.samples_per_class = args.samples;
  if (args.seed_set) spec.seed = args.seed;

  if (args.mode == "template") {
    const Corpus corpus = synthgen::generate_template_corpus(spec);
    synthgen::write_synthetic_json(corpus, args.output);
    std::cerr << "wrote " << corpus.count_kind(SampleKind::Payload) << " template samples to "
              << args.output << "\n";
    return 0;
  }
  if (args.mode != "llm") throw ConfigError("synthgen mode must be 'template' or 'llm'");

  synthgen::LlmClientConfig client;
  client.endpoint = args.endpoint;
  client.model = args.model;
  const char* key = std::getenv("SALM_LLM_API_KEY");
  if (key == nullptr || *key == '\0') {
    throw ConfigError("llm mode needs the SALM_LLM_API_KEY environment variable");
  }
  client.api_key = key;
  if (client.endpoint.empty()) {
    throw ConfigError("llm mode needs --endpoint (chat-completion URL)");
  }
  if (client.model.empty()) throw ConfigError("llm mode needs --model");

  auto transport = synthgen::make_http_transport(client.timeout_seconds);
  std::vector<std::string> prompts;
  for (const auto& profile : spec.classes) {
    prompts.push_back(synthgen::render_prompt(profile.name, profile.ioc_fragments));
  }
  const auto results = synthgen::llm_generate_many(*transport, client, prompts);

  json all = json::array();
  size_t rejected = 0;
  for (const auto& r : results) {
    for (const auto& rec : r.accepted) all.push_back(rec);
    rejected += r.rejected.size();
    for (const auto& reason : r.rejected) std::cerr << "rejected: " << reason << "\n";
  }
  std::ofstream out(args.output, std::ios::binary);
  if (!out) throw IoError("cannot write '" + args.output + "'");
  out << all.dump(2) << "\n";
  std::cerr << "wrote " << all.size() << " validated samples (" << rejected << " rejected) to "
            << args.output << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SALM: semantic alignment for HTTP payload threat classification"};
  app.set_version_flag("--version", std::string("salm ") + experiment::kToolVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;

  auto load_cfg = [&]() {
    if (config_path.empty()) throw ConfigError("--config is required");
    auto cfg = experiment::load_experiment_config(config_path);
    if (!out_override.empty()) cfg.output_dir = out_override;
    return cfg;
  };

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Split a dataset and write manifests");
  prepare->add_option("--config", config_path, "experiment config JSON")->required();
  prepare->add_option("--out", out_override, "override output directory");

  // train
  int stage = 1;
  std::string teacher_path;
  auto* train = app.add_subcommand("train", "Run one training stage");
  train->add_option("--config", config_path, "experiment config JSON")->required();
  train->add_option("--stage", stage, "1 (text contrastive) or 2 (payload alignment)")
      ->required()
      ->check(CLI::Range(1, 2));
  train->add_option("--teacher", teacher_path, "stage-1 checkpoint (stage 2 only)");
  train->add_option("--out", out_override, "override output directory");

  // classify
  ClassifyArgs classify_args;
  auto* classify = app.add_subcommand("classify", "Classify payloads by semantic retrieval");
  classify->add_option("--teacher", classify_args.teacher, "stage-1 checkpoint")->required();
  classify->add_option("--student", classify_args.student, "stage-2 checkpoint")->required();
  classify->add_option("--input", classify_args.input, "payload file")->required();
  classify->add_option("--format", classify_args.format, "jsonl or json_array");
  classify->add_option("--out", classify_args.output, "predictions JSONL path");
  classify->add_option("--labels", classify_args.labels, "custom prototype label JSON");
  classify->add_option("--add-class", classify_args.add_classes,
                       "zero-shot class as Name=label text (repeatable)");

  // evaluate
  std::string predictions_path, method_name = "salm", designated = "salm";
  std::vector<std::string> compare_reports;
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions or compare methods");
  evaluate->add_option("--config", config_path, "experiment config JSON");
  evaluate->add_option("--predictions", predictions_path, "predictions JSONL");
  evaluate->add_option("--method-name", method_name, "method label for the report");
  evaluate->add_option("--compare", compare_reports, "report JSON files to compare");
  evaluate->add_option("--designated", designated, "method measured against the best other");
  evaluate->add_option("--out", out_override, "override output directory");

  // baseline
  std::string baseline_method;
  auto* baseline = app.add_subcommand("baseline", "Train and evaluate one baseline");
  baseline->add_option("--config", config_path, "experiment config JSON")->required();
  baseline->add_option("--method", baseline_method, "tfidf-rf, supervised or knn")->required();
  baseline->add_option("--out", out_override, "override output directory");

  // synthgen
  SynthgenArgs synth_args;
  auto* synth = app.add_subcommand("synthgen", "Generate a synthetic benchmark dataset");
  synth->add_option("--mode", synth_args.mode, "template (deterministic) or llm");
  synth->add_option("--spec", synth_args.spec, "generation spec JSON");
  synth->add_option("--out", synth_args.output, "output JSON array file");
  synth->add_option("--classes", synth_args.classes, "comma-separated class subset");
  synth->add_option("--samples", synth_args.samples, "samples per class");
  synth->add_option("--seed", synth_args.seed, "generation seed")
      ->each([&](const std::string&) { synth_args.seed_set = true; });
  synth->add_option("--endpoint", synth_args.endpoint, "chat-completion URL (llm mode)");
  synth->add_option("--model", synth_args.model, "model name (llm mode)");

  // project
  std::string embeddings_path, projection_out = "projection.csv";
  std::string project_teacher, project_student, project_input, project_format = "jsonl";
  auto* project = app.add_subcommand(
      "project", "Export embeddings and/or write their 2-D PCA projection");
  project->add_option("--embeddings", embeddings_path,
                      "embedding CSV (read, or written in export mode)")
      ->required();
  project->add_option("--out", projection_out, "projection CSV path");
  project->add_option("--teacher", project_teacher, "stage-1 checkpoint (export mode)");
  project->add_option("--student", project_student, "stage-2 checkpoint (export mode)");
  project->add_option("--input", project_input, "corpus to embed (export mode)");
  project->add_option("--format", project_format, "input format: jsonl or json_array");

  CLI11_PARSE(app, argc, argv);

  try {
    if (prepare->parsed()) return cmd_prepare(load_cfg());
    if (train->parsed()) return cmd_train(load_cfg(), stage, teacher_path);
    if (classify->parsed()) return cmd_classify(classify_args);
    if (evaluate->parsed()) {
      if (!compare_reports.empty()) {
        return cmd_compare(compare_reports, designated,
                           out_override.empty() ? "." : out_override);
      }
      if (predictions_path.empty()) {
        throw ConfigError("evaluate needs --predictions or --compare");
      }
      return cmd_evaluate(load_cfg(), predictions_path, method_name);
    }
    if (baseline->parsed()) return cmd_baseline(load_cfg(), baseline_method);
    if (synth->parsed()) return cmd_synthgen(synth_args);
    if (project->parsed()) {
      if (!project_input.empty()) {
        if (project_teacher.empty() || project_student.empty()) {
          throw ConfigError("export mode needs --teacher and --student checkpoints");
        }
        const nn::Checkpoint teacher = nn::load_checkpoint(project_teacher);
        const nn::Checkpoint student = nn::load_checkpoint(project_student);
        pipeline::TrainedPipeline pipe;
        pipe.text_encoder = teacher.encoder;
        pipe.payload_encoder = student.encoder;
        pipe.text_featurizer = text_featurizer_from_json(teacher.featurizer_config);
        pipe.payload_featurizer = payload_featurizer_from_json(student.featurizer_config);
        pipe.prototypes = pipeline::build_prototypes(
            teacher.encoder, pipe.text_featurizer,
            classes_from_json(teacher.metadata.at("classes")));

        const CorpusFormat format = project_format == "json_array" ? CorpusFormat::JsonArray
                                                                   : CorpusFormat::Jsonl;
        LoadOptions options;
        options.classes = classes_from_json(teacher.metadata.at("classes"));
        const LoadResult loaded = load_corpus(project_input, format, options);
        retrieve::export_embeddings(pipe, loaded.corpus, embeddings_path);
        std::cerr << "wrote embeddings to " << embeddings_path << "\n";
      }
      if (project_input.empty() || !projection_out.empty()) {
        evalviz::pca_project_file(embeddings_path, projection_out);
        std::cerr << "wrote projection to " << projection_out << "\n";
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
