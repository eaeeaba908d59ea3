#pragma once

/*
 * Two-pass mitigation pipeline over abstract backends.
 *
 * Pass 1 captions the image unedited. The caption is projected back to an
 * auxiliary image by the reconstructor, both images are run through the
 * vision projector to form the anchor pair, and pass 2 re-captions with a
 * layer hook that applies the dual-anchor edit on the image-token span.
 */

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "halo/editing.hpp"
#include "halo/error.hpp"
#include "halo/matrix.hpp"
#include "halo/mock.hpp"
#include "halo/rng.hpp"
#include "halo/types.hpp"

namespace halo {

inline const char* default_caption_prompt() { return "Please describe this image in detail."; }

struct ModelMeta {
  int num_layers = 0;
  int hidden_dim = 0;
  int image_token_count = 0;
};

// Intercept installed for one generation pass: the host passes the output
// hidden-state matrix of decoder layer `layer` (1-based) to `apply` and uses
// the returned matrix for the rest of the forward pass.
struct LayerEditHook {
  int layer = 1;
  std::function<EmbeddingMatrix(const EmbeddingMatrix&)> apply;
};

// Backend bundle the pipeline runs against. Hosts must expose tokenization
// metadata (token_kinds), a per-layer intercept point, the projected image
// embedding f(.), and model metadata; a host that cannot intercept layers is
// rejected at wiring time.
class BackendSuite {
public:
  virtual ~BackendSuite() = default;

  virtual Caption caption(const ImageRef& image, const std::string& prompt,
                          const LayerEditHook* hook) = 0;
  virtual ImageRef reconstruct(const Caption& caption) = 0;
  virtual EmbeddingMatrix project(const ImageRef& image) = 0;
  virtual std::vector<TokenKind> token_kinds(const ImageRef& image,
                                             const std::string& prompt) = 0;
  virtual ModelMeta meta() const = 0;
  virtual bool supports_layer_edit() const { return true; }
};

inline void validate_backend(const BackendSuite& backend) {
  if (!backend.supports_layer_edit())
    throw CapabilityError("backend does not expose a per-layer intercept point");
  ModelMeta m = backend.meta();
  if (m.num_layers < 1 || m.hidden_dim < 1 || m.image_token_count < 1)
    throw CapabilityError("backend reports invalid model metadata");
}

struct MitigationResult {
  Caption baseline;
  Caption mitigated;
  AnchorPair anchors;
  EditConfig config_used;   // the configuration as requested
  double alpha_used = 0.0;  // the candidate pair the mitigated caption used
  double beta_used = 0.0;
  std::string reconstructed_image_id;

  friend bool operator==(const MitigationResult& a, const MitigationResult& b) {
    return a.baseline == b.baseline && a.mitigated == b.mitigated && a.anchors == b.anchors &&
           a.config_used == b.config_used && a.alpha_used == b.alpha_used &&
           a.beta_used == b.beta_used && a.reconstructed_image_id == b.reconstructed_image_id;
  }
};

struct ProbeReport {
  double sim_text = 0.0;       // sim(clean caption, hallucinated caption)
  double sim_roundtrip = 0.0;  // sim(recaption of image, recaption of reconstruction)
  double gap = 0.0;            // sim_text - sim_roundtrip
};

using SimilarityFn = std::function<double(const Caption&, const Caption&)>;

// Ranks a mitigated candidate caption; lower compares better. The harness
// supplies (hallucinated-object count, -covered-object count).
using CandidateRanker = std::function<std::pair<double, double>(const Caption&)>;

inline Caption generate_baseline_caption(const ImageRef& image, const std::string& prompt,
                                         BackendSuite& backend) {
  if (prompt.empty()) throw InvalidParameter("baseline caption: empty prompt");
  Caption c;
  try {
    c = backend.caption(image, prompt, nullptr);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw BackendFailure(std::string("captioner failed: ") + e.what());
  }
  if (c.empty()) throw EmptyCaption("captioner returned an empty caption");
  c.source = CaptionSource::baseline;
  c.word_count = word_count(c.text);
  return c;
}

/// positive = f(original image), negative = f(reconstruct(baseline caption)).
/// recon_id, when non-null, receives the reconstructed image's id.
inline AnchorPair build_anchor_pair(const ImageRef& image, const Caption& baseline,
                                    BackendSuite& backend, std::string* recon_id = nullptr) {
  if (baseline.empty()) throw EmptyCaption("anchor pair: baseline caption is empty");
  ModelMeta meta = backend.meta();
  auto checked_project = [&](const ImageRef& ref) {
    EmbeddingMatrix m;
    try {
      m = backend.project(ref);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw BackendFailure(std::string("projector failed: ") + e.what());
    }
    if (m.cols != static_cast<std::size_t>(meta.hidden_dim) ||
        m.rows != static_cast<std::size_t>(meta.image_token_count))
      throw ShapeMismatch("projector output violates model metadata");
    return m;
  };

  EmbeddingMatrix positive = checked_project(image);
  ImageRef reconstructed;
  try {
    reconstructed = backend.reconstruct(baseline);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw BackendFailure(std::string("reconstructor failed: ") + e.what());
  }
  if (recon_id) *recon_id = reconstructed.id;
  EmbeddingMatrix negative = checked_project(reconstructed);
  return AnchorPair::make(std::move(positive), std::move(negative));
}

namespace detail {

inline TokenSpan resolve_span(const ImageRef& image, const std::string& prompt,
                              const EditConfig& cfg, BackendSuite& backend) {
  if (cfg.span_policy == SpanPolicy::fixed_span) return cfg.fixed_span;
  return identify_image_span(backend.token_kinds(image, prompt));
}

}  // namespace detail

/// The full two-pass protocol. With a multi-candidate strategy the ranker
/// picks the recorded candidate (required when more than one candidate is
/// sampled); ties keep the earliest candidate in seed order.
inline MitigationResult generate_with_mitigation(const ImageRef& image,
                                                 const std::string& prompt,
                                                 const EditConfig& cfg, BackendSuite& backend,
                                                 const CandidateRanker& ranker = nullptr) {
  cfg.validate();
  validate_backend(backend);
  ModelMeta meta = backend.meta();
  if (cfg.layer > meta.num_layers)
    throw InvalidParameter("edit config: layer exceeds backend layer count");

  MitigationResult result;
  result.config_used = cfg;
  result.baseline = generate_baseline_caption(image, prompt, backend);
  result.anchors =
      build_anchor_pair(image, result.baseline, backend, &result.reconstructed_image_id);
  TokenSpan span = detail::resolve_span(image, prompt, cfg, backend);

  std::vector<CoefficientPair> candidates;
  if (cfg.strategy.kind == CoefficientKind::fixed)
    candidates.push_back(CoefficientPair{cfg.alpha, cfg.beta});
  else
    candidates = sample_coefficients(cfg.strategy, cfg.tied, cfg.seed);
  if (candidates.size() > 1 && !ranker)
    throw InvalidParameter("multi-candidate strategy needs a candidate ranker");

  auto run_candidate = [&](const CoefficientPair& pair) {
    LayerEditHook hook;
    hook.layer = cfg.layer;
    hook.apply = [&, pair](const EmbeddingMatrix& hidden) {
      return apply_dual_anchor_edit(hidden, span, result.anchors, pair.alpha, pair.beta);
    };
    Caption c;
    try {
      c = backend.caption(image, prompt, &hook);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw BackendFailure(std::string("captioner failed during edit pass: ") + e.what());
    }
    if (c.empty()) throw EmptyCaption("edited captioner returned an empty caption");
    c.source = CaptionSource::mitigated;
    c.word_count = word_count(c.text);
    return c;
  };

  Caption best = run_candidate(candidates.front());
  CoefficientPair best_pair = candidates.front();
  if (candidates.size() > 1) {
    auto best_rank = ranker(best);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
      Caption c = run_candidate(candidates[i]);
      auto r = ranker(c);
      if (r < best_rank) {
        best_rank = r;
        best = std::move(c);
        best_pair = candidates[i];
      }
    }
  }
  result.mitigated = std::move(best);
  result.alpha_used = best_pair.alpha;
  result.beta_used = best_pair.beta;
  return result;
}

/// Fig-3-style probe: the similarity between a clean and a hallucinated
/// caption, versus the similarity between the recaptions of the original
/// image and of the reconstruction of the hallucinated caption.
inline ProbeReport amplification_probe(const ImageRef& image, const Caption& clean_caption,
                                       const Caption& hallucinated_caption,
                                       BackendSuite& backend, const SimilarityFn& similarity,
                                       const std::string& prompt = default_caption_prompt()) {
  if (clean_caption.empty() || hallucinated_caption.empty())
    throw EmptyCaption("probe: captions must be non-empty");
  if (!similarity) throw InvalidParameter("probe: similarity function required");

  ProbeReport report;
  report.sim_text = similarity(clean_caption, hallucinated_caption);
  try {
    Caption t = backend.caption(image, prompt, nullptr);
    ImageRef reconstructed = backend.reconstruct(hallucinated_caption);
    Caption t_prime = backend.caption(reconstructed, prompt, nullptr);
    report.sim_roundtrip = similarity(t, t_prime);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw BackendFailure(std::string("probe backend failed: ") + e.what());
  }
  report.gap = report.sim_text - report.sim_roundtrip;
  return report;
}

// ---------------------------------------------------------------------------
// Mock backend
// ---------------------------------------------------------------------------

// Closed-loop backend over a MockWorld. Captioning builds a hidden-state
// matrix (prompt rows, projected image rows, two suffix rows), lets the hook
// edit it, pools the image span and reads out mentions by threshold.
// Hallucination injection is drawn once per image id, so both passes of a
// two-pass run see the same draw and an all-zero edit reproduces the
// baseline byte for byte.
class MockBackend : public BackendSuite {
public:
  explicit MockBackend(MockWorld world) : world_(std::move(world)) {}

  const MockWorld& world() const { return world_; }

  Caption caption(const ImageRef& image, const std::string& prompt,
                  const LayerEditHook* hook) override {
    Vec state = edited_image_state(image, prompt, hook);
    std::string object = parse_pope_question(prompt);
    if (!object.empty()) {
      auto mentioned = readout_objects(world_, state);
      bool present = false;
      for (const auto& m : mentioned)
        if (m == object) { present = true; break; }
      return Caption::make(present ? "Yes." : "No.");
    }
    return Caption::make(render_caption_text(readout_objects(world_, state)));
  }

  ImageRef reconstruct(const Caption& caption) override {
    MockScene scene = mock_reconstruct(world_, caption);
    std::string id = "recon-" + std::to_string(hash_str(caption.text));
    return ImageRef{id, "", scene};
  }

  EmbeddingMatrix project(const ImageRef& image) override {
    return mock_project(world_, require_scene(image));
  }

  std::vector<TokenKind> token_kinds(const ImageRef&, const std::string& prompt) override {
    std::vector<TokenKind> kinds(static_cast<std::size_t>(word_count(prompt)),
                                 TokenKind::text);
    kinds.insert(kinds.end(), static_cast<std::size_t>(world_.image_tokens),
                 TokenKind::image);
    kinds.push_back(TokenKind::text);
    kinds.push_back(TokenKind::text);
    return kinds;
  }

  ModelMeta meta() const override {
    return ModelMeta{world_.num_layers, world_.dim, world_.image_tokens};
  }

private:
  const MockScene& require_scene(const ImageRef& image) const {
    if (!image.scene)
      throw BackendFailure("mock backend needs a scene payload on image '" + image.id + "'");
    return *image.scene;
  }

  Vec edited_image_state(const ImageRef& image, const std::string& prompt,
                         const LayerEditHook* hook) {
    const MockScene& scene = require_scene(image);
    EmbeddingMatrix proj = mock_project(world_, scene);
    std::vector<TokenKind> kinds = token_kinds(image, prompt);
    TokenSpan span = identify_image_span(kinds);

    EmbeddingMatrix hidden(kinds.size(), static_cast<std::size_t>(world_.dim));
    Rng trng(derive_seed(world_.seed, "text_rows", prompt));
    for (std::size_t r = 0; r < hidden.rows; ++r) {
      if (span.contains(r)) {
        const double* src = proj.row(r - span.start);
        std::copy(src, src + hidden.cols, hidden.row(r));
      } else {
        for (std::size_t c = 0; c < hidden.cols; ++c) hidden.at(r, c) = 0.01 * trng.normal();
      }
    }

    if (hook) {
      if (hook->layer < 1 || hook->layer > world_.num_layers)
        throw BackendFailure("edit hook targets a layer outside [1, num_layers]");
      // Mock decoder layers are identity maps, so intercepting the output of
      // layer l is the same matrix for every l; the index is still validated.
      EmbeddingMatrix edited = hook->apply(hidden);
      if (edited.rows != hidden.rows || edited.cols != hidden.cols)
        throw ShapeMismatch("edit hook changed the hidden-state shape");
      hidden = std::move(edited);
    }

    Vec pooled(static_cast<std::size_t>(world_.dim), 0.0);
    for (std::size_t r = span.start; r < span.end(); ++r)
      for (std::size_t c = 0; c < hidden.cols; ++c) pooled[c] += hidden.at(r, c);
    for (double& v : pooled) v /= static_cast<double>(span.length);

    // Per-image hallucination tendency, independent of the hook so that the
    // edit pass sees the same draw as the baseline pass.
    if (world_.hallucination_rate > 0.0) {
      Rng rng(derive_seed(world_.seed, "image_inject", image.id));
      if (rng.uniform() < world_.hallucination_rate) {
        if (auto injected = sample_cooccurring(world_, scene.objects, rng))
          add_scaled(pooled, world_.vector_of(*injected), world_.injection_strength);
      }
    }
    return pooled;
  }

  MockWorld world_;
};

// Similarity used for mock probe runs: cosine over canonical-object count
// vectors of the two captions.
inline SimilarityFn make_object_similarity(const MockWorld& world) {
  MockWorld copy = world;
  return [copy](const Caption& a, const Caption& b) {
    return object_count_similarity(copy, a, b);
  };
}

}  // namespace halo
