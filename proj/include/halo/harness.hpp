#pragma once

/*
 * Benchmark harness: run configuration, dataset wiring, the per-benchmark
 * protocols (chair / pope / mme / probe / robustness), append-only JSONL
 * persistence with resume, parameter sweeps and report emission.
 *
 * Every record is persisted before aggregates are computed, per-sample seeds
 * derive from (master seed, image id), and no wall-clock state enters a
 * record unless explicitly requested, so reruns with the same seed are
 * byte-identical and an interrupted run resumes to the same aggregates.
 */

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "halo/io.hpp"
#include "halo/metrics.hpp"
#include "halo/mock.hpp"
#include "halo/pipeline.hpp"

namespace halo {

constexpr int kRecordSchemaVersion = 1;

enum class Benchmark { chair, pope, mme, probe, robustness };

inline const char* to_string(Benchmark b) {
  switch (b) {
    case Benchmark::chair: return "chair";
    case Benchmark::pope: return "pope";
    case Benchmark::mme: return "mme";
    case Benchmark::probe: return "probe";
    default: return "robustness";
  }
}

inline Benchmark benchmark_from_string(const std::string& s) {
  if (s == "chair") return Benchmark::chair;
  if (s == "pope") return Benchmark::pope;
  if (s == "mme") return Benchmark::mme;
  if (s == "probe") return Benchmark::probe;
  if (s == "robustness") return Benchmark::robustness;
  throw InvalidParameter("unknown benchmark: " + s);
}

enum class Ablation { both, positive_only, negative_only, off };

inline const char* to_string(Ablation a) {
  switch (a) {
    case Ablation::both: return "both";
    case Ablation::positive_only: return "pos";
    case Ablation::negative_only: return "neg";
    default: return "off";
  }
}

inline Ablation ablation_from_string(const std::string& s) {
  if (s == "both") return Ablation::both;
  if (s == "pos") return Ablation::positive_only;
  if (s == "neg") return Ablation::negative_only;
  if (s == "off") return Ablation::off;
  throw InvalidParameter("unknown ablation mode: " + s);
}

enum class ReconSource { caption, answer };

// Parameters of the generated mock dataset and world. The mock world's
// object vectors are unit norm, so useful edit coefficients sit around 1.0
// (roughly ten times the scale used with hosted models).
struct MockParams {
  int samples = 200;
  int vocab_size = 12;
  double noise_std = 0.0;
  double hallucination_rate = 0.5;
  double caption_threshold = 0.2;
  double injection_strength = -1.0;  // negative: caption_threshold + 0.1
  bool orthonormal = false;
  int dim = 32;
  int image_tokens = 8;
  int num_layers = 8;
  int scene_min = 1;
  int scene_max = 4;
};

struct RunConfig {
  Benchmark benchmark = Benchmark::chair;
  std::string backend = "mock";  // "mock" or "adapter:<name>"
  EditConfig edit;
  Ablation ablation = Ablation::both;
  std::string annotations_path;
  std::string synonyms_path;
  std::string questions_path;                              // POPE (single setting)
  std::vector<std::pair<MmeSubtask, std::string>> mme_questions;
  std::vector<PopeSetting> pope_settings = {PopeSetting::random, PopeSetting::popular,
                                            PopeSetting::adversarial};
  ReconSource recon_source = ReconSource::caption;
  std::string prompt = default_caption_prompt();
  std::string out_path;
  std::uint64_t seed = 0;
  MockParams mock;
  bool per_sentence = false;
  bool resume = false;
  bool wall_clock = false;     // real timestamps break byte-identical reruns
  bool baseline_only = false;  // `caption` subcommand: skip the edit pass
  int pope_yes_per_image = 3;
};

// positive-only forces beta = 0, negative-only forces alpha = 0, off forces
// both to 0; a non-fixed strategy is pinned to fixed so the forcing binds.
inline void apply_ablation(RunConfig& cfg) {
  if (cfg.ablation == Ablation::both) return;
  if (cfg.ablation == Ablation::positive_only) cfg.edit.beta = 0.0;
  if (cfg.ablation == Ablation::negative_only) cfg.edit.alpha = 0.0;
  if (cfg.ablation == Ablation::off) cfg.edit.alpha = cfg.edit.beta = 0.0;
  cfg.edit.strategy = CoefficientStrategy::fixed(cfg.edit.alpha);
}

// ---------------------------------------------------------------------------
// Result records
// ---------------------------------------------------------------------------

struct ResultRecord {
  int schema_version = kRecordSchemaVersion;
  long seq = 0;
  std::string benchmark;
  std::string image_id;
  std::string prompt;
  Caption baseline;
  Caption mitigated;
  EditConfig config;
  std::string ablation = "both";
  double alpha_used = 0.0;
  double beta_used = 0.0;
  std::string reconstructed_image_id;
  std::set<std::string> gt;
  std::set<std::string> baseline_mentioned, baseline_hallucinated;
  std::set<std::string> mitigated_mentioned, mitigated_hallucinated;
  // question answering (pope / mme)
  std::string question_id;
  std::string setting;
  std::string subtask;
  std::string prediction;
  std::string prediction_baseline;
  bool label_yes = false;
  // probe
  double sim_text = 0.0;
  double sim_roundtrip = 0.0;
  double gap = 0.0;
  // zero unless the run asked for wall-clock stamps
  long started_ms = 0;
  long finished_ms = 0;
};

inline void to_json(json& j, const ResultRecord& r) {
  j = json{{"schema_version", r.schema_version},
           {"seq", r.seq},
           {"benchmark", r.benchmark},
           {"image_id", r.image_id},
           {"prompt", r.prompt},
           {"baseline", r.baseline},
           {"mitigated", r.mitigated},
           {"config", r.config},
           {"ablation", r.ablation},
           {"alpha_used", r.alpha_used},
           {"beta_used", r.beta_used},
           {"reconstructed_image_id", r.reconstructed_image_id},
           {"gt", r.gt},
           {"baseline_mentioned", r.baseline_mentioned},
           {"baseline_hallucinated", r.baseline_hallucinated},
           {"mitigated_mentioned", r.mitigated_mentioned},
           {"mitigated_hallucinated", r.mitigated_hallucinated},
           {"question_id", r.question_id},
           {"setting", r.setting},
           {"subtask", r.subtask},
           {"prediction", r.prediction},
           {"prediction_baseline", r.prediction_baseline},
           {"label_yes", r.label_yes},
           {"sim_text", r.sim_text},
           {"sim_roundtrip", r.sim_roundtrip},
           {"gap", r.gap},
           {"started_ms", r.started_ms},
           {"finished_ms", r.finished_ms}};
}

inline void from_json(const json& j, ResultRecord& r) {
  int version = j.at("schema_version").get<int>();
  if (version != kRecordSchemaVersion)
    throw SchemaVersionMismatch("record schema_version " + std::to_string(version) +
                                " unsupported (expected " +
                                std::to_string(kRecordSchemaVersion) + ")");
  r.schema_version = version;
  j.at("seq").get_to(r.seq);
  j.at("benchmark").get_to(r.benchmark);
  j.at("image_id").get_to(r.image_id);
  j.at("prompt").get_to(r.prompt);
  j.at("baseline").get_to(r.baseline);
  j.at("mitigated").get_to(r.mitigated);
  j.at("config").get_to(r.config);
  j.at("ablation").get_to(r.ablation);
  j.at("alpha_used").get_to(r.alpha_used);
  j.at("beta_used").get_to(r.beta_used);
  j.at("reconstructed_image_id").get_to(r.reconstructed_image_id);
  j.at("gt").get_to(r.gt);
  j.at("baseline_mentioned").get_to(r.baseline_mentioned);
  j.at("baseline_hallucinated").get_to(r.baseline_hallucinated);
  j.at("mitigated_mentioned").get_to(r.mitigated_mentioned);
  j.at("mitigated_hallucinated").get_to(r.mitigated_hallucinated);
  j.at("question_id").get_to(r.question_id);
  j.at("setting").get_to(r.setting);
  j.at("subtask").get_to(r.subtask);
  j.at("prediction").get_to(r.prediction);
  j.at("prediction_baseline").get_to(r.prediction_baseline);
  j.at("label_yes").get_to(r.label_yes);
  j.at("sim_text").get_to(r.sim_text);
  j.at("sim_roundtrip").get_to(r.sim_roundtrip);
  j.at("gap").get_to(r.gap);
  j.at("started_ms").get_to(r.started_ms);
  j.at("finished_ms").get_to(r.finished_ms);
}

struct RunOutput {
  std::vector<ResultRecord> records;
  json report;
};

// ---------------------------------------------------------------------------
// Backend registry
// ---------------------------------------------------------------------------

using BackendFactory = std::function<std::unique_ptr<BackendSuite>(const RunConfig&)>;

inline std::map<std::string, BackendFactory>& backend_registry() {
  static std::map<std::string, BackendFactory> registry;
  return registry;
}

// Hosted-model adapters register here under "adapter:<name>" targets.
inline void register_backend(const std::string& name, BackendFactory factory) {
  backend_registry()[name] = std::move(factory);
}

// ---------------------------------------------------------------------------
// Run context
// ---------------------------------------------------------------------------

namespace detail {

inline long now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

struct RunContext {
  MockWorld world;  // populated for the mock backend
  std::unique_ptr<BackendSuite> backend;
  std::vector<ImageRef> images;
  AnnotationSet annotations;
  SynonymMap map;
  bool is_mock = false;
};

inline SynonymMap identity_map(const std::vector<std::string>& vocabulary) {
  SynonymMap map;
  for (const auto& name : vocabulary) map.add(name, name);
  return map;
}

inline RunContext make_run_context(const RunConfig& cfg) {
  RunContext ctx;
  ctx.is_mock = cfg.backend == "mock";

  // The mock vocabulary is always the pool prefix, independent of any
  // annotation file, so a world rebuilt from the same seed is identical
  // whether the corpus was generated or loaded (sharding and resume depend
  // on this). Annotation objects outside the pool are appended in sorted
  // order.
  int n = std::min<int>(cfg.mock.vocab_size, static_cast<int>(mock_object_pool().size()));
  if (n < 2) throw InvalidParameter("mock vocab_size must be >= 2");
  std::vector<std::string> vocabulary(mock_object_pool().begin(),
                                      mock_object_pool().begin() + n);

  if (!cfg.annotations_path.empty()) {
    ctx.annotations = load_annotations(cfg.annotations_path);
    if (ctx.annotations.empty())
      throw DatasetParseError(cfg.annotations_path, 0, "annotation set is empty");
    std::set<std::string> have(vocabulary.begin(), vocabulary.end());
    std::set<std::string> extras;
    for (const auto& [_, objects] : ctx.annotations)
      for (const auto& o : objects)
        if (!have.count(o)) extras.insert(o);
    vocabulary.insert(vocabulary.end(), extras.begin(), extras.end());
    for (const auto& [id, objects] : ctx.annotations) {
      MockScene scene;
      scene.objects = objects;
      for (const auto& o : objects) scene.salience[o] = 1.0;
      ctx.images.push_back(ImageRef{id, "", scene});
    }
  } else if (!ctx.is_mock) {
    throw InvalidParameter("adapter backends need --annotations (no generated dataset)");
  }

  if (ctx.is_mock) {
    MockWorldOptions opt;
    opt.dim = cfg.mock.dim;
    opt.image_tokens = cfg.mock.image_tokens;
    opt.num_layers = cfg.mock.num_layers;
    opt.caption_threshold = cfg.mock.caption_threshold;
    opt.injection_strength = cfg.mock.injection_strength;
    opt.orthonormal = cfg.mock.orthonormal;
    ctx.world = make_mock_world(cfg.seed, vocabulary, cfg.mock.noise_std,
                                cfg.mock.hallucination_rate, opt);
    ctx.backend = std::make_unique<MockBackend>(ctx.world);
    if (cfg.annotations_path.empty()) {
      ctx.images = generate_mock_dataset(ctx.world, cfg.mock.samples, cfg.seed,
                                         cfg.mock.scene_min, cfg.mock.scene_max);
      for (const auto& img : ctx.images) ctx.annotations[img.id] = img.scene->objects;
    }
  } else {
    auto it = backend_registry().find(cfg.backend);
    if (it == backend_registry().end())
      throw BackendFailure("no backend registered under '" + cfg.backend + "'");
    ctx.backend = it->second(cfg);
  }
  validate_backend(*ctx.backend);

  if (!cfg.synonyms_path.empty())
    ctx.map = load_synonym_map(cfg.synonyms_path);
  else
    ctx.map = identity_map(vocabulary);
  return ctx;
}

// Loads previously persisted records for resume; returns done-keys.
inline std::set<std::string> load_done(const std::string& path,
                                       std::vector<ResultRecord>& records) {
  std::set<std::string> done;
  for (const auto& j : read_jsonl(path)) {
    ResultRecord r = j.get<ResultRecord>();
    done.insert(r.benchmark + "/" + r.setting + "/" + r.subtask + "/" + r.image_id + "/" +
                r.question_id);
    records.push_back(std::move(r));
  }
  return done;
}

inline std::string record_key(const ResultRecord& r) {
  return r.benchmark + "/" + r.setting + "/" + r.subtask + "/" + r.image_id + "/" +
         r.question_id;
}

// Writes through to the JSONL file before anything aggregates the record.
class RecordSink {
public:
  RecordSink(const RunConfig& cfg, std::vector<ResultRecord>& records) : records_(records) {
    if (!cfg.out_path.empty()) {
      bool append = cfg.resume && std::filesystem::exists(cfg.out_path);
      if (append) done_ = load_done(cfg.out_path, records_);
      writer_.open(cfg.out_path, append);
    }
    seq_ = static_cast<long>(records_.size());
  }

  bool already_done(const ResultRecord& probe) const {
    return done_.count(record_key(probe)) > 0;
  }

  void commit(ResultRecord r) {
    r.seq = seq_++;
    if (writer_.is_open()) writer_.write(json(r));
    records_.push_back(std::move(r));
  }

  long persisted() const { return seq_; }

private:
  std::vector<ResultRecord>& records_;
  JsonlWriter writer_;
  std::set<std::string> done_;
  long seq_ = 0;
};

inline ChairReport chair_from_records(const std::vector<ResultRecord>& records,
                                      bool mitigated) {
  std::vector<PerImageChair> per_image;
  long s_num = 0;
  for (const auto& r : records) {
    PerImageChair p;
    p.id = r.image_id;
    p.gt = r.gt;
    p.mentioned = mitigated ? r.mitigated_mentioned : r.baseline_mentioned;
    p.hallucinated = mitigated ? r.mitigated_hallucinated : r.baseline_hallucinated;
    p.word_count = mitigated ? r.mitigated.word_count : r.baseline.word_count;
    if (!p.hallucinated.empty()) ++s_num;
    per_image.push_back(std::move(p));
  }
  return detail::aggregate_chair(std::move(per_image), s_num,
                                 static_cast<long>(per_image.size()));
}

inline json chair_side_json(const ChairReport& r) {
  json j = r;
  j["har"] = har(r.average, r.recall);
  j["hallucinated_mentions"] = r.total_hallucinated();
  j["mentions"] = r.total_mentions();
  return j;
}

// One-sided sign test: P(X >= positives) for X ~ Binomial(n, 1/2).
inline double sign_test_p(long positives, long negatives) {
  long n = positives + negatives;
  if (n == 0) return 1.0;
  double log_p = 0.0;
  double p = 0.0;
  for (long i = positives; i <= n; ++i) {
    log_p = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) -
            n * std::log(2.0);
    p += std::exp(log_p);
  }
  return std::min(p, 1.0);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Benchmark protocols
// ---------------------------------------------------------------------------

namespace detail {

inline CandidateRanker make_ranker(const std::set<std::string>& gt, const SynonymMap& map) {
  return [gt, &map](const Caption& c) {
    auto mentioned = map.extract(c.text);
    double hallucinated = 0.0, covered = 0.0;
    for (const auto& o : mentioned) {
      if (gt.count(o)) covered += 1.0;
      else hallucinated += 1.0;
    }
    return std::make_pair(hallucinated, -covered);
  };
}

inline EditConfig per_sample_config(const RunConfig& cfg, const std::string& image_id,
                                    int num_layers) {
  EditConfig e = cfg.edit;
  e.num_layers = num_layers;
  // stable per-sample seed from (run seed, sampling seed, image id)
  e.seed = derive_seed(hash_u64(cfg.edit.seed, hash_u64(cfg.seed)), image_id, "edit");
  return e;
}

inline ResultRecord base_record(const RunConfig& cfg, const std::string& image_id) {
  ResultRecord r;
  r.benchmark = to_string(cfg.benchmark);
  r.image_id = image_id;
  r.ablation = to_string(cfg.ablation);
  r.config = cfg.edit;
  return r;
}

inline void run_chair_like(const RunConfig& cfg, RunContext& ctx, RecordSink& sink,
                           bool robustness) {
  int num_layers = ctx.backend->meta().num_layers;
  for (const auto& image : ctx.images) {
    ResultRecord rec = base_record(cfg, image.id);
    rec.prompt = cfg.prompt;
    if (sink.already_done(rec)) continue;
    try {
      rec.started_ms = cfg.wall_clock ? now_ms() : 0;
      const std::set<std::string>& gt = ctx.annotations.at(image.id);
      rec.gt = gt;
      EditConfig edit = per_sample_config(cfg, image.id, num_layers);
      rec.config = edit;

      if (cfg.baseline_only) {
        Caption baseline = generate_baseline_caption(image, cfg.prompt, *ctx.backend);
        rec.baseline = baseline;
        rec.mitigated = baseline;  // no edit pass requested
        rec.mitigated.source = CaptionSource::baseline;
      } else {
        Caption baseline = generate_baseline_caption(image, cfg.prompt, *ctx.backend);
        auto baseline_mentioned = ctx.map.extract(baseline.text);
        bool hallucination_free = true;
        for (const auto& o : baseline_mentioned)
          if (!gt.count(o)) { hallucination_free = false; break; }
        if (robustness && !hallucination_free) continue;  // subset filter

        MitigationResult result =
            generate_with_mitigation(image, cfg.prompt, edit, *ctx.backend,
                                     make_ranker(gt, ctx.map));
        rec.baseline = result.baseline;
        rec.mitigated = result.mitigated;
        rec.alpha_used = result.alpha_used;
        rec.beta_used = result.beta_used;
        rec.reconstructed_image_id = result.reconstructed_image_id;
      }

      rec.baseline_mentioned = ctx.map.extract(rec.baseline.text);
      rec.mitigated_mentioned = ctx.map.extract(rec.mitigated.text);
      for (const auto& o : rec.baseline_mentioned)
        if (!rec.gt.count(o)) rec.baseline_hallucinated.insert(o);
      for (const auto& o : rec.mitigated_mentioned)
        if (!rec.gt.count(o)) rec.mitigated_hallucinated.insert(o);
      rec.finished_ms = cfg.wall_clock ? now_ms() : 0;
      sink.commit(std::move(rec));
    } catch (const Error& e) {
      if (sink.persisted() > 0) throw PartialRunResumable(sink.persisted(), e.what());
      throw;
    }
  }
}

// Answers one question with the dual-anchor edit active.
inline Caption mitigated_answer(const ImageRef& image, const std::string& question,
                                const AnchorPair& anchors, const EditConfig& edit,
                                BackendSuite& backend) {
  TokenSpan span = identify_image_span(backend.token_kinds(image, question));
  LayerEditHook hook;
  hook.layer = edit.layer;
  hook.apply = [&](const EmbeddingMatrix& hidden) {
    return apply_dual_anchor_edit(hidden, span, anchors, edit.alpha, edit.beta);
  };
  return backend.caption(image, question, &hook);
}

struct QaContext {
  std::map<std::string, const ImageRef*> images_by_id;
  std::map<std::string, AnchorPair> anchors_by_image;  // recon from descriptive caption
};

inline QaContext make_qa_context(const RunContext& ctx) {
  QaContext qa;
  for (const auto& image : ctx.images) qa.images_by_id[image.id] = &image;
  return qa;
}

inline const AnchorPair& anchors_for(QaContext& qa, const RunConfig& cfg, RunContext& ctx,
                                     const ImageRef& image) {
  auto it = qa.anchors_by_image.find(image.id);
  if (it != qa.anchors_by_image.end()) return it->second;
  Caption baseline = generate_baseline_caption(image, cfg.prompt, *ctx.backend);
  AnchorPair anchors = build_anchor_pair(image, baseline, *ctx.backend);
  return qa.anchors_by_image.emplace(image.id, std::move(anchors)).first->second;
}

// Shared by the POPE and MME protocols: one record per question with both
// the unedited and the edited answer.
inline void answer_question(const RunConfig& cfg, RunContext& ctx, QaContext& qa,
                            RecordSink& sink, ResultRecord rec, const std::string& image_id,
                            const std::string& question, bool label_yes) {
  auto img_it = qa.images_by_id.find(image_id);
  if (img_it == qa.images_by_id.end())
    throw DatasetParseError(cfg.questions_path.empty() ? "<generated>" : cfg.questions_path, 0,
                            "question references unknown image '" + image_id + "'");
  const ImageRef& image = *img_it->second;
  try {
    rec.started_ms = cfg.wall_clock ? now_ms() : 0;
    rec.prompt = question;
    rec.label_yes = label_yes;
    rec.gt = ctx.annotations.count(image_id) ? ctx.annotations.at(image_id)
                                             : std::set<std::string>{};
    EditConfig edit = per_sample_config(cfg, image_id, ctx.backend->meta().num_layers);
    rec.config = edit;

    Caption baseline = ctx.backend->caption(image, question, nullptr);
    rec.baseline = baseline;
    rec.prediction_baseline = to_string(parse_yes_no(baseline.text));

    if (cfg.baseline_only) {
      rec.mitigated = baseline;
      rec.prediction = rec.prediction_baseline;
    } else {
      const AnchorPair* anchors = nullptr;
      AnchorPair per_question;
      if (cfg.recon_source == ReconSource::answer) {
        // the answer itself drives the reconstruction for this question
        per_question = build_anchor_pair(image, baseline, *ctx.backend);
        anchors = &per_question;
      } else {
        anchors = &anchors_for(qa, cfg, ctx, image);
      }
      Caption answer = mitigated_answer(image, question, *anchors, edit, *ctx.backend);
      answer.source = CaptionSource::mitigated;
      rec.mitigated = answer;
      rec.prediction = to_string(parse_yes_no(answer.text));
    }
    rec.finished_ms = cfg.wall_clock ? now_ms() : 0;
    sink.commit(std::move(rec));
  } catch (const Error& e) {
    if (sink.persisted() > 0) throw PartialRunResumable(sink.persisted(), e.what());
    throw;
  }
}

}  // namespace detail

// Dataset-level object frequencies, the base of POPE's popular setting.
inline std::map<std::string, long> object_frequencies(const AnnotationSet& annotations) {
  std::map<std::string, long> freq;
  for (const auto& [_, objects] : annotations)
    for (const auto& o : objects) ++freq[o];
  return freq;
}

/// Synthesizes POPE questions for one setting: up to yes_per_image positive
/// questions per image plus one negative per positive, sampled per the
/// setting (random absent object; popular = top-half most frequent absent;
/// adversarial = most cooccurring absent).
inline std::vector<PopeQuestion> build_pope_questions(const MockWorld& world,
                                                      const std::vector<ImageRef>& images,
                                                      const AnnotationSet& annotations,
                                                      PopeSetting setting, std::uint64_t seed,
                                                      int yes_per_image = 3) {
  auto freq = object_frequencies(annotations);
  std::vector<std::pair<long, std::string>> by_freq;
  for (const auto& [name, n] : freq) by_freq.emplace_back(-n, name);
  std::sort(by_freq.begin(), by_freq.end());
  std::set<std::string> popular_half;
  for (std::size_t i = 0; i < (by_freq.size() + 1) / 2; ++i)
    popular_half.insert(by_freq[i].second);

  std::vector<PopeQuestion> questions;
  for (const auto& image : images) {
    const auto& gt = annotations.at(image.id);
    Rng rng(derive_seed(seed, image.id, std::string("pope-") + to_string(setting)));

    std::vector<std::string> present(gt.begin(), gt.end());
    std::vector<std::string> absent;
    for (const auto& name : world.vocabulary)
      if (!gt.count(name)) absent.push_back(name);

    int n_yes = std::min<int>(yes_per_image, static_cast<int>(present.size()));
    std::set<std::string> used_absent;
    int qi = 0;
    for (int k = 0; k < n_yes; ++k) {
      std::string obj = present[rng.index(present.size())];
      questions.push_back(PopeQuestion{image.id + "#q" + std::to_string(qi++), image.id,
                                       pope_question_text(obj), true});

      std::vector<std::string> pool;
      for (const auto& name : absent)
        if (!used_absent.count(name)) pool.push_back(name);
      if (pool.empty()) continue;
      std::string neg;
      switch (setting) {
        case PopeSetting::random:
          neg = pool[rng.index(pool.size())];
          break;
        case PopeSetting::popular: {
          std::vector<std::string> pop;
          for (const auto& name : pool)
            if (popular_half.count(name)) pop.push_back(name);
          const auto& source = pop.empty() ? pool : pop;
          neg = source[rng.index(source.size())];
          break;
        }
        case PopeSetting::adversarial: {
          // rank by cooccurrence with ground truth, sample among the top 3
          std::vector<std::pair<double, std::string>> ranked;
          for (const auto& name : pool) {
            double w = 0.0;
            for (const auto& g : gt)
              w += world.cooccurrence[world.index_of(g)][world.index_of(name)];
            ranked.emplace_back(-w, name);
          }
          std::sort(ranked.begin(), ranked.end());
          std::size_t top = std::min<std::size_t>(3, ranked.size());
          neg = ranked[rng.index(top)].second;
          break;
        }
      }
      used_absent.insert(neg);
      questions.push_back(PopeQuestion{image.id + "#q" + std::to_string(qi++), image.id,
                                       pope_question_text(neg), false});
    }
  }
  return questions;
}

/// Two existence questions per image (one present object, one absent) in the
/// MME pairing convention.
inline std::vector<MmeQuestion> build_mme_existence_questions(
    const MockWorld& world, const std::vector<ImageRef>& images,
    const AnnotationSet& annotations, std::uint64_t seed) {
  std::vector<MmeQuestion> questions;
  for (const auto& image : images) {
    const auto& gt = annotations.at(image.id);
    Rng rng(derive_seed(seed, image.id, "mme-existence"));
    std::vector<std::string> present(gt.begin(), gt.end());
    std::vector<std::string> absent;
    for (const auto& name : world.vocabulary)
      if (!gt.count(name)) absent.push_back(name);
    if (present.empty() || absent.empty()) continue;
    questions.push_back(
        MmeQuestion{image.id, pope_question_text(present[rng.index(present.size())]), true});
    questions.push_back(
        MmeQuestion{image.id, pope_question_text(absent[rng.index(absent.size())]), false});
  }
  return questions;
}

// ---------------------------------------------------------------------------
// run_benchmark
// ---------------------------------------------------------------------------

inline RunOutput run_benchmark(RunConfig cfg) {
  apply_ablation(cfg);
  cfg.edit.validate();
  detail::RunContext ctx = detail::make_run_context(cfg);
  cfg.edit.num_layers = ctx.backend->meta().num_layers;

  RunOutput out;
  detail::RecordSink sink(cfg, out.records);

  switch (cfg.benchmark) {
    case Benchmark::chair: {
      detail::run_chair_like(cfg, ctx, sink, /*robustness=*/false);
      if (out.records.empty()) throw EmptyCorpus("chair: no records produced");
      ChairReport baseline = detail::chair_from_records(out.records, false);
      ChairReport mitigated = detail::chair_from_records(out.records, true);
      out.report = json{{"benchmark", "chair"},
                        {"samples", out.records.size()},
                        {"ablation", to_string(cfg.ablation)},
                        {"baseline", detail::chair_side_json(baseline)},
                        {"mitigated", detail::chair_side_json(mitigated)}};
      if (cfg.per_sentence) {
        std::vector<CaptionRecord> caption_records;
        for (const auto& r : out.records)
          caption_records.push_back(CaptionRecord{r.image_id, r.prompt, r.mitigated, {}});
        AnnotationSet ann;
        for (const auto& r : out.records) ann[r.image_id] = r.gt;
        ChairReport ps = chair_report(caption_records, ann, ctx.map, true);
        out.report["mitigated_per_sentence"] = detail::chair_side_json(ps);
      }
      break;
    }
    case Benchmark::robustness: {
      detail::run_chair_like(cfg, ctx, sink, /*robustness=*/true);
      if (out.records.empty())
        throw EmptyCorpus("robustness: no hallucination-free baseline captions in corpus");
      ChairReport before = detail::chair_from_records(out.records, false);
      ChairReport after = detail::chair_from_records(out.records, true);
      RobustnessDelta delta = robustness_delta(before, after);
      out.report = json{{"benchmark", "robustness"},
                        {"subset_size", out.records.size()},
                        {"corpus_size", ctx.images.size()},
                        {"before", detail::chair_side_json(before)},
                        {"after", detail::chair_side_json(after)},
                        {"delta_chair", delta.delta_chair},
                        {"delta_recall", delta.delta_recall}};
      break;
    }
    case Benchmark::pope: {
      detail::QaContext qa = detail::make_qa_context(ctx);
      std::vector<std::pair<PopeSetting, std::vector<PopeQuestion>>> by_setting;
      if (!cfg.questions_path.empty()) {
        by_setting.emplace_back(cfg.pope_settings.empty() ? PopeSetting::random
                                                          : cfg.pope_settings.front(),
                                load_pope_questions(cfg.questions_path));
      } else {
        if (!ctx.is_mock)
          throw InvalidParameter("adapter POPE runs need --questions");
        for (PopeSetting s : cfg.pope_settings)
          by_setting.emplace_back(
              s, build_pope_questions(ctx.world, ctx.images, ctx.annotations, s, cfg.seed,
                                      cfg.pope_yes_per_image));
      }
      for (const auto& [setting, questions] : by_setting) {
        for (const auto& q : questions) {
          ResultRecord rec = detail::base_record(cfg, q.image_id);
          rec.setting = to_string(setting);
          rec.question_id = q.question_id;
          if (sink.already_done(rec)) continue;
          detail::answer_question(cfg, ctx, qa, sink, std::move(rec), q.image_id, q.text,
                                  q.label_yes);
        }
      }
      if (out.records.empty()) throw EmptyInput("pope: no questions answered");

      auto collect = [&](const std::string& setting, bool mitigated) {
        std::vector<std::pair<Verdict, bool>> pairs;
        for (const auto& r : out.records)
          if (r.setting == setting)
            pairs.emplace_back(parse_yes_no(mitigated ? r.mitigated.text : r.baseline.text),
                               r.label_yes);
        return pairs;
      };
      json settings = json::object();
      PopeReport mit_report, base_report;
      for (const auto& [setting, _] : by_setting) {
        std::string name = to_string(setting);
        auto mit = pope_report(collect(name, true));
        auto base = pope_report(collect(name, false));
        mit_report.settings[setting] = mit;
        base_report.settings[setting] = base;
        settings[name] = json{{"baseline", base}, {"mitigated", mit}};
      }
      out.report = json{{"benchmark", "pope"},
                        {"questions", out.records.size()},
                        {"ablation", to_string(cfg.ablation)},
                        {"settings", settings},
                        {"average",
                         json{{"baseline", json{{"accuracy", base_report.average_accuracy()},
                                                {"f1", base_report.average_f1()}}},
                              {"mitigated", json{{"accuracy", mit_report.average_accuracy()},
                                                 {"f1", mit_report.average_f1()}}}}}};
      break;
    }
    case Benchmark::mme: {
      detail::QaContext qa = detail::make_qa_context(ctx);
      std::vector<std::pair<MmeSubtask, std::vector<MmeQuestion>>> by_subtask;
      if (!cfg.mme_questions.empty()) {
        for (const auto& [subtask, path] : cfg.mme_questions)
          by_subtask.emplace_back(subtask, load_mme_questions(path));
      } else {
        if (!ctx.is_mock) throw InvalidParameter("adapter MME runs need --questions");
        by_subtask.emplace_back(
            MmeSubtask::existence,
            build_mme_existence_questions(ctx.world, ctx.images, ctx.annotations, cfg.seed));
      }
      for (const auto& [subtask, questions] : by_subtask) {
        std::map<std::string, int> per_image_index;
        for (const auto& q : questions) {
          ResultRecord rec = detail::base_record(cfg, q.image_id);
          rec.subtask = to_string(subtask);
          rec.question_id =
              q.image_id + "#m" + std::to_string(per_image_index[q.image_id]++);
          if (sink.already_done(rec)) continue;
          detail::answer_question(cfg, ctx, qa, sink, std::move(rec), q.image_id, q.text,
                                  q.label_yes);
        }
      }
      if (out.records.empty()) throw EmptyInput("mme: no questions answered");

      auto collect = [&](const std::string& subtask, bool mitigated) {
        std::vector<MmeAnswer> answers;
        for (const auto& r : out.records)
          if (r.subtask == subtask)
            answers.push_back(MmeAnswer{
                r.image_id, r.question_id,
                parse_yes_no(mitigated ? r.mitigated.text : r.baseline.text), r.label_yes});
        return answers;
      };
      json subtasks = json::object();
      MmeReport mit_report, base_report;
      for (const auto& [subtask, _] : by_subtask) {
        std::string name = to_string(subtask);
        auto mit = mme_report(collect(name, true));
        auto base = mme_report(collect(name, false));
        mit_report.subtasks[subtask] = mit;
        base_report.subtasks[subtask] = base;
        subtasks[name] = json{{"baseline", base}, {"mitigated", mit}};
      }
      out.report = json{{"benchmark", "mme"},
                        {"questions", out.records.size()},
                        {"ablation", to_string(cfg.ablation)},
                        {"subtasks", subtasks},
                        {"hall_total", json{{"baseline", base_report.hall_total()},
                                            {"mitigated", mit_report.hall_total()}}}};
      break;
    }
    case Benchmark::probe: {
      if (!ctx.is_mock)
        throw InvalidParameter("the amplification probe runs on the mock backend");
      SimilarityFn similarity = make_object_similarity(ctx.world);
      for (const auto& image : ctx.images) {
        ResultRecord rec = detail::base_record(cfg, image.id);
        rec.prompt = cfg.prompt;
        if (sink.already_done(rec)) continue;
        try {
          rec.started_ms = cfg.wall_clock ? detail::now_ms() : 0;
          const auto& gt = ctx.annotations.at(image.id);
          std::vector<std::string> objects;
          for (const auto& name : ctx.world.vocabulary)
            if (gt.count(name)) objects.push_back(name);
          Caption clean = Caption::make(render_caption_text(objects));

          Rng rng(derive_seed(cfg.seed, image.id, "probe-inject"));
          auto injected = sample_cooccurring(ctx.world, gt, rng);
          std::vector<std::string> halluc_objects;
          for (const auto& name : ctx.world.vocabulary)
            if (gt.count(name) || (injected && name == *injected))
              halluc_objects.push_back(name);
          Caption hallucinated = Caption::make(render_caption_text(halluc_objects));

          ProbeReport probe = amplification_probe(image, clean, hallucinated, *ctx.backend,
                                                  similarity, cfg.prompt);
          rec.baseline = clean;
          rec.mitigated = hallucinated;
          rec.gt = gt;
          rec.sim_text = probe.sim_text;
          rec.sim_roundtrip = probe.sim_roundtrip;
          rec.gap = probe.gap;
          rec.finished_ms = cfg.wall_clock ? detail::now_ms() : 0;
          sink.commit(std::move(rec));
        } catch (const Error& e) {
          if (sink.persisted() > 0) throw PartialRunResumable(sink.persisted(), e.what());
          throw;
        }
      }
      if (out.records.empty()) throw EmptyCorpus("probe: no records produced");

      double sum_text = 0.0, sum_rt = 0.0;
      long pos = 0, neg = 0, ties = 0;
      for (const auto& r : out.records) {
        sum_text += r.sim_text;
        sum_rt += r.sim_roundtrip;
        if (r.gap > 0) ++pos;
        else if (r.gap < 0) ++neg;
        else ++ties;
      }
      double n = static_cast<double>(out.records.size());
      out.report = json{{"benchmark", "probe"},
                        {"cases", out.records.size()},
                        {"mean_sim_text", sum_text / n},
                        {"mean_sim_roundtrip", sum_rt / n},
                        {"mean_gap", (sum_text - sum_rt) / n},
                        {"positives", pos},
                        {"negatives", neg},
                        {"ties", ties},
                        {"sign_test_p", detail::sign_test_p(pos, neg)}};
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

enum class SweepAxis { alpha_beta_grid, layer, strategy };

inline const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::alpha_beta_grid: return "grid";
    case SweepAxis::layer: return "layer";
    default: return "strategy";
  }
}

struct SweepSpec {
  SweepAxis axis = SweepAxis::alpha_beta_grid;
  std::vector<CoefficientPair> pairs;     // alpha_beta_grid
  std::vector<int> layers;                // layer
  std::vector<std::string> strategies;    // strategy names, e.g. "uniform-best5"
  double strategy_lo = 0.8;
  double strategy_hi = 1.2;
  int repetitions = 1;
  std::uint64_t seed_base = 0;
};

struct SweepRow {
  std::string label;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  json report;
};

// "fixed", "uniform", "gaussian", optionally with "-bestN" / "-avgN" suffixes.
inline CoefficientStrategy make_strategy(const std::string& name, double lo, double hi,
                                         double fixed_value) {
  std::string base = name;
  int best_of = 1, avg_of = 1;
  std::size_t dash;
  while ((dash = base.rfind('-')) != std::string::npos) {
    std::string suffix = base.substr(dash + 1);
    if (suffix.rfind("best", 0) == 0)
      best_of = std::stoi(suffix.substr(4));
    else if (suffix.rfind("avg", 0) == 0)
      avg_of = std::stoi(suffix.substr(3));
    else
      break;
    base = base.substr(0, dash);
  }
  CoefficientStrategy s;
  if (base == "fixed") s = CoefficientStrategy::fixed(fixed_value);
  else if (base == "uniform") s = CoefficientStrategy::uniform(lo, hi);
  else if (base == "gaussian") s = CoefficientStrategy::gaussian(lo, hi);
  else throw InvalidStrategy("unknown strategy name: " + name);
  return s.with_best_of(best_of).with_avg_of(avg_of);
}

/// One run_benchmark per grid point with derived seeds; failures are marked
/// and the sweep continues.
inline std::vector<SweepRow> sweep(const SweepSpec& spec, const RunConfig& base) {
  std::vector<std::pair<std::string, RunConfig>> points;
  char label[96];
  switch (spec.axis) {
    case SweepAxis::alpha_beta_grid: {
      if (spec.pairs.empty()) throw InvalidParameter("sweep: empty alpha/beta grid");
      for (const auto& p : spec.pairs) {
        RunConfig cfg = base;
        cfg.edit.alpha = p.alpha;
        cfg.edit.beta = p.beta;
        cfg.edit.strategy = CoefficientStrategy::fixed(p.alpha);
        std::snprintf(label, sizeof(label), "alpha=%.4g beta=%.4g", p.alpha, p.beta);
        points.emplace_back(label, cfg);
      }
      break;
    }
    case SweepAxis::layer: {
      if (spec.layers.empty()) throw InvalidParameter("sweep: empty layer list");
      for (int l : spec.layers) {
        if (l < 1 || l > base.edit.num_layers)
          throw InvalidParameter("sweep: layer " + std::to_string(l) +
                                 " outside [1, " + std::to_string(base.edit.num_layers) + "]");
        RunConfig cfg = base;
        cfg.edit.layer = l;
        std::snprintf(label, sizeof(label), "layer=%d", l);
        points.emplace_back(label, cfg);
      }
      break;
    }
    case SweepAxis::strategy: {
      if (spec.strategies.empty()) throw InvalidParameter("sweep: empty strategy list");
      for (const auto& name : spec.strategies) {
        RunConfig cfg = base;
        cfg.edit.strategy =
            make_strategy(name, spec.strategy_lo, spec.strategy_hi, base.edit.alpha);
        points.emplace_back(name, cfg);
      }
      break;
    }
  }

  std::vector<SweepRow> rows;
  for (const auto& [point_label, point_cfg] : points) {
    for (int rep = 0; rep < std::max(spec.repetitions, 1); ++rep) {
      SweepRow row;
      row.label = spec.repetitions > 1 ? point_label + " rep=" + std::to_string(rep)
                                       : point_label;
      row.seed = derive_seed(spec.seed_base, row.label, "sweep");
      RunConfig cfg = point_cfg;
      // the derived seed drives coefficient sampling only; the corpus stays
      // pinned to the base seed so rows are comparable
      cfg.edit.seed = row.seed;
      if (!base.out_path.empty()) {
        std::string safe = row.label;
        for (char& c : safe)
          if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-') c = '_';
        cfg.out_path = base.out_path + "." + safe + ".jsonl";
      }
      try {
        RunOutput result = run_benchmark(cfg);
        row.ok = true;
        row.report = std::move(result.report);
      } catch (const Error& e) {
        row.ok = false;
        row.error = e.what();
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt(double v, int decimals) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

inline std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

inline std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace detail

// Table-1-shaped row: CHAIR columns in percent, HAR at 4 decimals.
inline std::string render_chair_row(const std::string& name, const json& side) {
  std::ostringstream out;
  out << detail::pad_left(name, 14) << detail::pad(detail::fmt(side.at("chair_s").get<double>() * 100.0, 1), 9)
      << detail::pad(detail::fmt(side.at("chair_i").get<double>() * 100.0, 1), 9)
      << detail::pad(detail::fmt(side.at("average").get<double>() * 100.0, 2), 9)
      << detail::pad(detail::fmt(side.at("mean_length").get<double>(), 2), 9)
      << detail::pad(detail::fmt(side.at("recall").get<double>() * 100.0, 2), 9)
      << detail::pad(detail::fmt(side.at("har").get<double>(), 4), 9);
  return out.str();
}

inline std::string render_chair_header() {
  std::ostringstream out;
  out << detail::pad_left("setting", 14) << detail::pad("CHAIR_S", 9) << detail::pad("CHAIR_I", 9)
      << detail::pad("Average", 9) << detail::pad("Length", 9) << detail::pad("Recall", 9)
      << detail::pad("HAR@1", 9);
  return out.str();
}

inline std::string render_report_table(const json& report) {
  std::ostringstream out;
  std::string benchmark = report.value("benchmark", "");
  if (benchmark == "chair") {
    out << render_chair_header() << "\n";
    out << render_chair_row("baseline", report.at("baseline")) << "\n";
    out << render_chair_row("mitigated", report.at("mitigated")) << "\n";
  } else if (benchmark == "robustness") {
    out << render_chair_header() << "\n";
    out << render_chair_row("before", report.at("before")) << "\n";
    out << render_chair_row("after", report.at("after")) << "\n";
    out << "delta CHAIR (pp): " << detail::fmt(report.at("delta_chair").get<double>(), 3)
        << "   delta recall (pp): " << detail::fmt(report.at("delta_recall").get<double>(), 3)
        << "\n";
  } else if (benchmark == "pope") {
    out << detail::pad_left("setting", 14) << detail::pad("side", 12) << detail::pad("Accuracy", 10)
        << detail::pad("Precision", 11) << detail::pad("Recall", 9) << detail::pad("F1", 9) << "\n";
    for (const auto& [setting, sides] : report.at("settings").items()) {
      for (const char* side : {"baseline", "mitigated"}) {
        const json& s = sides.at(side);
        out << detail::pad_left(setting, 14) << detail::pad(side, 12)
            << detail::pad(detail::fmt(s.at("accuracy").get<double>() * 100.0, 2), 10)
            << detail::pad(detail::fmt(s.at("precision").get<double>() * 100.0, 2), 11)
            << detail::pad(detail::fmt(s.at("recall").get<double>() * 100.0, 2), 9)
            << detail::pad(detail::fmt(s.at("f1").get<double>() * 100.0, 2), 9) << "\n";
      }
    }
    out << "average accuracy baseline "
        << detail::fmt(report.at("average").at("baseline").at("accuracy").get<double>() * 100.0, 2)
        << " -> mitigated "
        << detail::fmt(report.at("average").at("mitigated").at("accuracy").get<double>() * 100.0, 2)
        << "\n";
  } else if (benchmark == "mme") {
    out << detail::pad_left("subtask", 14) << detail::pad("side", 12) << detail::pad("Accuracy", 10)
        << detail::pad("Accuracy+", 11) << detail::pad("Score", 9) << "\n";
    for (const auto& [subtask, sides] : report.at("subtasks").items()) {
      for (const char* side : {"baseline", "mitigated"}) {
        const json& s = sides.at(side);
        out << detail::pad_left(subtask, 14) << detail::pad(side, 12)
            << detail::pad(detail::fmt(s.at("accuracy").get<double>() * 100.0, 2), 10)
            << detail::pad(detail::fmt(s.at("accuracy_plus").get<double>() * 100.0, 2), 11)
            << detail::pad(detail::fmt(s.at("score").get<double>(), 1), 9) << "\n";
      }
    }
    out << "hall total baseline "
        << detail::fmt(report.at("hall_total").at("baseline").get<double>(), 1) << " -> mitigated "
        << detail::fmt(report.at("hall_total").at("mitigated").get<double>(), 1) << "\n";
  } else if (benchmark == "probe") {
    out << "cases: " << report.at("cases").get<long>() << "\n"
        << "mean sim(text):      " << detail::fmt(report.at("mean_sim_text").get<double>(), 4) << "\n"
        << "mean sim(roundtrip): " << detail::fmt(report.at("mean_sim_roundtrip").get<double>(), 4)
        << "\n"
        << "mean gap:            " << detail::fmt(report.at("mean_gap").get<double>(), 4) << "\n"
        << "sign test (one-sided) p = " << detail::fmt(report.at("sign_test_p").get<double>(), 6)
        << " over " << report.at("positives").get<long>() << "+/"
        << report.at("negatives").get<long>() << "- (" << report.at("ties").get<long>()
        << " ties)\n";
  } else {
    out << report.dump(2) << "\n";
  }
  return out.str();
}

inline std::string render_sweep_table(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << detail::pad_left("point", 28) << detail::pad("status", 8);
  bool chair_like = !rows.empty() && rows.front().ok &&
                    rows.front().report.value("benchmark", "") == "chair";
  if (chair_like)
    out << detail::pad("CHAIR_S", 9) << detail::pad("CHAIR_I", 9) << detail::pad("Average", 9)
        << detail::pad("Recall", 9) << detail::pad("HAR@1", 9);
  out << "\n";
  for (const auto& row : rows) {
    out << detail::pad_left(row.label, 28) << detail::pad(row.ok ? "ok" : "failed", 8);
    if (row.ok && row.report.value("benchmark", "") == "chair") {
      const json& side = row.report.at("mitigated");
      out << detail::pad(detail::fmt(side.at("chair_s").get<double>() * 100.0, 1), 9)
          << detail::pad(detail::fmt(side.at("chair_i").get<double>() * 100.0, 1), 9)
          << detail::pad(detail::fmt(side.at("average").get<double>() * 100.0, 2), 9)
          << detail::pad(detail::fmt(side.at("recall").get<double>() * 100.0, 2), 9)
          << detail::pad(detail::fmt(side.at("har").get<double>(), 4), 9);
    } else if (!row.ok) {
      out << "  " << row.error;
    }
    out << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// emit_report
// ---------------------------------------------------------------------------

enum class ReportFormat { text_table, delimited, figure_bundle };

inline ReportFormat report_format_from_string(const std::string& s) {
  if (s == "text-table") return ReportFormat::text_table;
  if (s == "delimited") return ReportFormat::delimited;
  if (s == "figure-bundle") return ReportFormat::figure_bundle;
  throw InvalidParameter("unknown report format: " + s);
}

namespace detail {

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

inline std::string join_set(const std::set<std::string>& s) {
  std::string out;
  for (const auto& v : s) {
    if (!out.empty()) out += '|';
    out += v;
  }
  return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << content;
}

// Minimal deterministic SVG scatter of the (alpha, beta) pairs actually used.
inline std::string scatter_svg(const std::vector<std::pair<double, double>>& points) {
  double lo = 0.0, hi = 1.0;
  if (!points.empty()) {
    lo = points.front().first;
    hi = points.front().first;
    for (const auto& [a, b] : points) {
      lo = std::min({lo, a, b});
      hi = std::max({hi, a, b});
    }
    double margin = (hi - lo) * 0.1 + 1e-6;
    lo -= margin;
    hi += margin;
  }
  const double size = 420.0, inset = 50.0;
  auto sx = [&](double v) { return inset + (v - lo) / (hi - lo) * (size - 2 * inset); };
  auto sy = [&](double v) { return size - inset - (v - lo) / (hi - lo) * (size - 2 * inset); };
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"420\" height=\"420\" "
         "viewBox=\"0 0 420 420\">\n";
  out << "<rect width=\"420\" height=\"420\" fill=\"white\"/>\n";
  out << "<line x1=\"50\" y1=\"370\" x2=\"370\" y2=\"370\" stroke=\"black\"/>\n";
  out << "<line x1=\"50\" y1=\"50\" x2=\"50\" y2=\"370\" stroke=\"black\"/>\n";
  out << "<text x=\"205\" y=\"405\" text-anchor=\"middle\" font-size=\"14\">alpha</text>\n";
  out << "<text x=\"16\" y=\"210\" text-anchor=\"middle\" font-size=\"14\" "
         "transform=\"rotate(-90 16 210)\">beta</text>\n";
  out << "<text x=\"50\" y=\"388\" font-size=\"11\">" << fmt(lo, 3) << "</text>\n";
  out << "<text x=\"370\" y=\"388\" text-anchor=\"end\" font-size=\"11\">" << fmt(hi, 3)
      << "</text>\n";
  for (const auto& [a, b] : points)
    out << "<circle cx=\"" << fmt(sx(a), 2) << "\" cy=\"" << fmt(sy(b), 2)
        << "\" r=\"3\" fill=\"steelblue\" fill-opacity=\"0.7\"/>\n";
  out << "</svg>\n";
  return out.str();
}

// Two-bar chart of mean caption similarity vs mean round-trip similarity.
inline std::string gap_chart_svg(double mean_text, double mean_roundtrip) {
  const double h = 300.0, base = 260.0, scale = 220.0;
  auto bar = [&](double x, double v, const char* color, const char* name) {
    double height = std::max(0.0, std::min(1.0, v)) * scale;
    std::ostringstream s;
    s << "<rect x=\"" << fmt(x, 1) << "\" y=\"" << fmt(base - height, 2)
      << "\" width=\"90\" height=\"" << fmt(height, 2) << "\" fill=\"" << color << "\"/>\n";
    s << "<text x=\"" << fmt(x + 45, 1) << "\" y=\"" << fmt(base - height - 6, 2)
      << "\" text-anchor=\"middle\" font-size=\"13\">" << fmt(v, 4) << "</text>\n";
    s << "<text x=\"" << fmt(x + 45, 1) << "\" y=\"" << fmt(base + 18, 1)
      << "\" text-anchor=\"middle\" font-size=\"13\">" << name << "</text>\n";
    return s.str();
  };
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"340\" height=\"" << fmt(h, 0)
      << "\" viewBox=\"0 0 340 " << fmt(h, 0) << "\">\n";
  out << "<rect width=\"340\" height=\"" << fmt(h, 0) << "\" fill=\"white\"/>\n";
  out << "<line x1=\"30\" y1=\"260\" x2=\"310\" y2=\"260\" stroke=\"black\"/>\n";
  out << bar(60, mean_text, "seagreen", "sim(text)");
  out << bar(190, mean_roundtrip, "indianred", "sim(roundtrip)");
  out << "</svg>\n";
  return out.str();
}

}  // namespace detail

/// Renders persisted records into a text table, a CSV file, or the figure
/// bundle (alpha/beta scatter + probe gap chart). Returns the written paths.
inline std::vector<std::string> emit_report(const std::string& records_path,
                                            ReportFormat format,
                                            const std::string& out_prefix) {
  std::vector<ResultRecord> records;
  for (const auto& j : read_jsonl(records_path)) records.push_back(j.get<ResultRecord>());

  std::vector<std::string> written;
  if (format == ReportFormat::text_table) {
    std::ostringstream out;
    bool chair_like = true;
    for (const auto& r : records)
      if (r.benchmark == "pope" || r.benchmark == "mme" || r.benchmark == "probe")
        chair_like = false;
    if (chair_like) {
      out << render_chair_header() << "\n";
      if (!records.empty()) {
        out << render_chair_row("baseline",
                                detail::chair_side_json(detail::chair_from_records(records, false)))
            << "\n";
        out << render_chair_row("mitigated",
                                detail::chair_side_json(detail::chair_from_records(records, true)))
            << "\n";
      }
    } else {
      long correct_base = 0, correct_mit = 0;
      double sum_text = 0, sum_rt = 0;
      long probe_n = 0;
      for (const auto& r : records) {
        if (r.benchmark == "probe") {
          sum_text += r.sim_text;
          sum_rt += r.sim_roundtrip;
          ++probe_n;
          continue;
        }
        Verdict vb = parse_yes_no(r.baseline.text);
        Verdict vm = parse_yes_no(r.mitigated.text);
        if ((vb == Verdict::yes) == r.label_yes && vb != Verdict::other) ++correct_base;
        if ((vm == Verdict::yes) == r.label_yes && vm != Verdict::other) ++correct_mit;
      }
      out << "records: " << records.size() << "\n";
      if (probe_n > 0)
        out << "mean sim(text) " << detail::fmt(sum_text / probe_n, 4) << "  mean sim(roundtrip) "
            << detail::fmt(sum_rt / probe_n, 4) << "\n";
      long qa_n = static_cast<long>(records.size()) - probe_n;
      if (qa_n > 0)
        out << "qa accuracy baseline " << detail::fmt(100.0 * correct_base / qa_n, 2)
            << " -> mitigated " << detail::fmt(100.0 * correct_mit / qa_n, 2) << "\n";
    }
    std::string path = out_prefix + "report.txt";
    detail::write_text_file(path, out.str());
    written.push_back(path);
  } else if (format == ReportFormat::delimited) {
    std::ostringstream out;
    out << "seq,benchmark,image_id,question_id,setting,subtask,alpha_used,beta_used,"
           "baseline,mitigated,prediction,prediction_baseline,label,gt,baseline_mentioned,"
           "baseline_hallucinated,mitigated_mentioned,mitigated_hallucinated,sim_text,"
           "sim_roundtrip,gap\n";
    for (const auto& r : records) {
      out << r.seq << ',' << r.benchmark << ',' << detail::csv_escape(r.image_id) << ','
          << detail::csv_escape(r.question_id) << ',' << r.setting << ',' << r.subtask << ','
          << detail::fmt(r.alpha_used, 6) << ',' << detail::fmt(r.beta_used, 6) << ','
          << detail::csv_escape(r.baseline.text) << ',' << detail::csv_escape(r.mitigated.text)
          << ',' << r.prediction << ',' << r.prediction_baseline << ','
          << (r.label_yes ? "yes" : "no") << ',' << detail::csv_escape(detail::join_set(r.gt))
          << ',' << detail::csv_escape(detail::join_set(r.baseline_mentioned)) << ','
          << detail::csv_escape(detail::join_set(r.baseline_hallucinated)) << ','
          << detail::csv_escape(detail::join_set(r.mitigated_mentioned)) << ','
          << detail::csv_escape(detail::join_set(r.mitigated_hallucinated)) << ','
          << detail::fmt(r.sim_text, 6) << ',' << detail::fmt(r.sim_roundtrip, 6) << ','
          << detail::fmt(r.gap, 6) << '\n';
    }
    std::string path = out_prefix + "records.csv";
    detail::write_text_file(path, out.str());
    written.push_back(path);
  } else {
    std::vector<std::pair<double, double>> points;
    double sum_text = 0, sum_rt = 0;
    long probe_n = 0;
    for (const auto& r : records) {
      if (r.benchmark == "probe") {
        sum_text += r.sim_text;
        sum_rt += r.sim_roundtrip;
        ++probe_n;
      } else if (r.alpha_used != 0.0 || r.beta_used != 0.0) {
        points.emplace_back(r.alpha_used, r.beta_used);
      }
    }
    std::string scatter_path = out_prefix + "alpha_beta_scatter.svg";
    detail::write_text_file(scatter_path, detail::scatter_svg(points));
    written.push_back(scatter_path);
    std::string gap_path = out_prefix + "probe_gap.svg";
    detail::write_text_file(gap_path,
                            detail::gap_chart_svg(probe_n ? sum_text / probe_n : 0.0,
                                                  probe_n ? sum_rt / probe_n : 0.0));
    written.push_back(gap_path);
  }
  return written;
}

}  // namespace halo
