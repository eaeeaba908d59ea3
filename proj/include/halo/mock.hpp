#pragma once

/*
 * Deterministic toy backends: a vocabulary of objects with fixed unit
 * vectors, scenes projected to embeddings, a threshold readout captioner
 * with seeded hallucination injection, and a reconstructor that maps
 * caption mentions back to a full-salience scene.
 *
 * The point of the design is that a hidden-state edit has a provable causal
 * path to caption content: an object is mentioned iff its vector's dot
 * product with the (edited) pooled image state clears the threshold.
 */

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "halo/error.hpp"
#include "halo/matrix.hpp"
#include "halo/rng.hpp"
#include "halo/text.hpp"
#include "halo/types.hpp"

namespace halo {

struct MockWorldOptions {
  int dim = 32;
  int image_tokens = 8;
  int num_layers = 8;
  double caption_threshold = 0.5;
  double injection_strength = -1.0;  // negative means caption_threshold + 0.1
  bool orthonormal = false;          // requires dim >= vocabulary size
};

struct MockWorld {
  std::vector<std::string> vocabulary;
  std::vector<Vec> object_vectors;                 // one unit vector per object
  std::vector<std::vector<double>> cooccurrence;   // symmetric, zero diagonal
  double noise_std = 0.0;
  double caption_threshold = 0.5;
  double hallucination_rate = 0.0;
  double injection_strength = 0.6;
  std::uint64_t seed = 0;
  int dim = 32;
  int image_tokens = 8;
  int num_layers = 8;
  bool orthonormal = false;

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < vocabulary.size(); ++i)
      if (vocabulary[i] == name) return i;
    throw UnknownObject("unknown object: " + name);
  }

  const Vec& vector_of(const std::string& name) const {
    return object_vectors[index_of(name)];
  }
};

namespace detail {

inline Vec random_unit_vector(Rng& rng, int dim) {
  Vec v(static_cast<std::size_t>(dim));
  double norm = 0.0;
  while (norm < 1e-12) {
    for (double& x : v) x = rng.normal();
    norm = l2_norm(v);
  }
  for (double& x : v) x /= norm;
  return v;
}

inline double max_abs_cos(const Vec& v, const std::vector<Vec>& others) {
  double worst = 0.0;
  for (const auto& o : others) worst = std::max(worst, std::abs(dot(v, o)));
  return worst;
}

inline std::uint64_t scene_hash(const MockScene& scene) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& name : scene.objects) {
    h = hash_str(name, h);
    double s = scene.salience_of(name);
    h = hash_bytes(&s, sizeof(s), h);
  }
  return h;
}

}  // namespace detail

/// Builds a reproducible world: identical seed implies identical vectors and
/// cooccurrence table. Default object vectors are seeded random unit vectors
/// resampled until pairwise |cos| < 0.3; the orthonormal option produces an
/// exactly orthonormal basis for analytically checkable tests.
inline MockWorld make_mock_world(std::uint64_t seed,
                                 const std::vector<std::string>& vocabulary,
                                 double noise_std, double hallucination_rate,
                                 const MockWorldOptions& opt = {}) {
  if (vocabulary.size() < 2)
    throw InvalidParameter("mock world: vocabulary needs at least 2 objects");
  {
    std::set<std::string> unique(vocabulary.begin(), vocabulary.end());
    if (unique.size() != vocabulary.size())
      throw InvalidParameter("mock world: duplicate vocabulary entries");
  }
  if (!(noise_std >= 0.0)) throw InvalidParameter("mock world: noise_std must be >= 0");
  if (!(hallucination_rate >= 0.0 && hallucination_rate <= 1.0))
    throw InvalidParameter("mock world: hallucination_rate must lie in [0,1]");
  if (!(opt.caption_threshold > 0.0 && opt.caption_threshold < 1.0))
    throw InvalidParameter("mock world: caption_threshold must lie in (0,1)");
  if (opt.dim < 1 || opt.image_tokens < 1 || opt.num_layers < 1)
    throw InvalidParameter("mock world: dim, image_tokens, num_layers must be >= 1");
  if (opt.orthonormal && opt.dim < static_cast<int>(vocabulary.size()))
    throw InvalidParameter("mock world: orthonormal vectors need dim >= vocabulary size");

  MockWorld w;
  w.vocabulary = vocabulary;
  w.noise_std = noise_std;
  w.hallucination_rate = hallucination_rate;
  w.caption_threshold = opt.caption_threshold;
  w.injection_strength =
      opt.injection_strength < 0.0 ? opt.caption_threshold + 0.1 : opt.injection_strength;
  w.seed = seed;
  w.dim = opt.dim;
  w.image_tokens = opt.image_tokens;
  w.num_layers = opt.num_layers;
  w.orthonormal = opt.orthonormal;

  Rng rng(derive_seed(seed, "object_vectors"));
  w.object_vectors.reserve(vocabulary.size());
  for (std::size_t i = 0; i < vocabulary.size(); ++i) {
    if (opt.orthonormal) {
      // Gram-Schmidt against the vectors built so far.
      Vec v;
      double norm = 0.0;
      while (norm < 1e-6) {
        v = detail::random_unit_vector(rng, opt.dim);
        for (const auto& prev : w.object_vectors) add_scaled(v, prev, -dot(v, prev));
        norm = l2_norm(v);
      }
      for (double& x : v) x /= norm;
      w.object_vectors.push_back(std::move(v));
    } else {
      // Keep the best of up to 5000 attempts if none clears the cap.
      Vec best;
      double best_cos = 2.0;
      for (int attempt = 0; attempt < 5000; ++attempt) {
        Vec v = detail::random_unit_vector(rng, opt.dim);
        double c = detail::max_abs_cos(v, w.object_vectors);
        if (c < best_cos) {
          best_cos = c;
          best = std::move(v);
        }
        if (best_cos < 0.3) break;
      }
      w.object_vectors.push_back(std::move(best));
    }
  }

  Rng crng(derive_seed(seed, "cooccurrence"));
  std::size_t n = vocabulary.size();
  w.cooccurrence.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      w.cooccurrence[i][j] = w.cooccurrence[j][i] = crng.uniform(0.1, 1.0);

  return w;
}

// Noiseless pooled state of a scene: sum of salience-weighted object vectors
// divided by the object count; the zero vector for an empty scene.
inline Vec scene_state(const MockWorld& world, const MockScene& scene) {
  Vec state(static_cast<std::size_t>(world.dim), 0.0);
  if (scene.objects.empty()) return state;
  for (const auto& name : scene.objects)
    add_scaled(state, world.vector_of(name), scene.salience_of(name));
  for (double& x : state) x /= static_cast<double>(scene.objects.size());
  return state;
}

/// Projects a scene to an image_tokens x dim embedding: every row is the
/// scene state plus zero-mean per-row noise of std noise_std (seeded by the
/// world seed and the scene content, so identical inputs replay identically).
inline EmbeddingMatrix mock_project(const MockWorld& world, const MockScene& scene) {
  Vec state = scene_state(world, scene);  // throws UnknownObject for foreign names
  EmbeddingMatrix m(static_cast<std::size_t>(world.image_tokens),
                    static_cast<std::size_t>(world.dim));
  Rng rng(derive_seed(world.seed, "project", std::to_string(detail::scene_hash(scene))));
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) {
      double noise = world.noise_std > 0.0 ? rng.normal(0.0, world.noise_std) : 0.0;
      m.at(r, c) = state[c] + noise;
    }
  return m;
}

// Objects whose score against the state clears the threshold, in vocabulary
// order.
inline std::vector<std::string> readout_objects(const MockWorld& world, const Vec& state) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < world.vocabulary.size(); ++i)
    if (dot(state, world.object_vectors[i]) > world.caption_threshold)
      out.push_back(world.vocabulary[i]);
  return out;
}

/// Samples an object outside `anchor` with probability proportional to its
/// cooccurrence weight with the anchor set (uniform when the anchor is
/// empty). Returns nullopt when every object is already in the anchor.
inline std::optional<std::string> sample_cooccurring(const MockWorld& world,
                                                     const std::set<std::string>& anchor,
                                                     Rng& rng) {
  std::vector<std::size_t> candidates;
  std::vector<double> weights;
  for (std::size_t i = 0; i < world.vocabulary.size(); ++i) {
    if (anchor.count(world.vocabulary[i])) continue;
    double wsum = 0.0;
    for (const auto& a : anchor) wsum += world.cooccurrence[world.index_of(a)][i];
    candidates.push_back(i);
    weights.push_back(anchor.empty() ? 1.0 : wsum + 1e-9);
  }
  if (candidates.empty()) return std::nullopt;
  return world.vocabulary[candidates[rng.weighted_index(weights)]];
}

/// Threshold readout over state (+ edit_delta if given), rendered with the
/// fixed template. When edit_delta is absent a hallucinated object is
/// injected with probability hallucination_rate, seeded from the world seed
/// and the state bits. Pipeline backends always pass a delta (zero for the
/// unedited pass) and own their per-image injection, so both passes of a run
/// see the same draw.
inline Caption mock_caption(const MockWorld& world, const Vec& state,
                            const std::optional<Vec>& edit_delta = std::nullopt) {
  if (state.size() != static_cast<std::size_t>(world.dim))
    throw DimensionMismatch("mock_caption: state dimension differs from world dim");
  Vec effective = state;
  if (edit_delta) {
    if (edit_delta->size() != state.size())
      throw DimensionMismatch("mock_caption: edit_delta dimension differs");
    for (std::size_t i = 0; i < effective.size(); ++i) effective[i] += (*edit_delta)[i];
  } else if (world.hallucination_rate > 0.0) {
    std::uint64_t state_hash = hash_bytes(state.data(), state.size() * sizeof(double));
    Rng rng(derive_seed(world.seed, "inject", std::to_string(state_hash)));
    if (rng.uniform() < world.hallucination_rate) {
      auto base = readout_objects(world, effective);
      std::set<std::string> anchor(base.begin(), base.end());
      if (auto injected = sample_cooccurring(world, anchor, rng))
        add_scaled(effective, world.vector_of(*injected), world.injection_strength);
    }
  }
  return Caption::make(render_caption_text(readout_objects(world, effective)));
}

/// Inverse direction of the loop: every canonical object mentioned in the
/// caption comes back as a scene object at full salience 1.0 (hallucinated
/// mentions are amplified into fully rendered objects). Unknown words are
/// ignored; "an empty scene" maps to the empty scene.
inline MockScene mock_reconstruct(const MockWorld& world, const Caption& caption) {
  MockScene scene;
  scene.objects = match_vocabulary(tokenize_words(caption.text), world.vocabulary);
  for (const auto& name : scene.objects) scene.salience[name] = 1.0;
  return scene;
}

// Cosine similarity between the vocabulary mention-count vectors of two
// captions. Two empty vectors compare as identical (1.0); empty vs nonempty
// is 0.0.
inline double object_count_similarity(const MockWorld& world, const Caption& a,
                                      const Caption& b) {
  auto counts = [&](const Caption& c) {
    Vec v(world.vocabulary.size(), 0.0);
    auto matched = match_vocabulary(tokenize_words(c.text), world.vocabulary);
    for (const auto& name : matched) v[world.index_of(name)] = 1.0;
    return v;
  };
  Vec va = counts(a);
  Vec vb = counts(b);
  double na = l2_norm(va);
  double nb = l2_norm(vb);
  if (na == 0.0 && nb == 0.0) return 1.0;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(va, vb) / (na * nb);
}

// The stock object names used for generated datasets; a prefix of this list
// is taken when a smaller vocabulary is requested.
inline const std::vector<std::string>& mock_object_pool() {
  static const std::vector<std::string> pool = {
      "dog",  "cat",   "person", "car",   "bicycle", "chair", "sofa",   "tv",
      "bottle", "cup",  "boat",  "bird",  "horse",   "sheep", "pizza",  "laptop",
      "umbrella", "clock", "bench", "train", "vase",  "book",  "orange", "banana"};
  return pool;
}

/// Seeded scenes with object counts in [min_objects, max_objects], sampled
/// without replacement from the world vocabulary. Ids are stable, so
/// resuming or sharding a run never changes a sample.
inline std::vector<ImageRef> generate_mock_dataset(const MockWorld& world, int count,
                                                   std::uint64_t seed, int min_objects = 1,
                                                   int max_objects = 4) {
  if (count < 1) throw InvalidParameter("mock dataset: count must be >= 1");
  if (min_objects < 1 || max_objects < min_objects ||
      max_objects > static_cast<int>(world.vocabulary.size()))
    throw InvalidParameter("mock dataset: bad scene size bounds");
  std::vector<ImageRef> images;
  images.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "mock-%06d", i);
    Rng rng(derive_seed(seed, "scene", id));
    int k = min_objects + static_cast<int>(rng.index(
                              static_cast<std::size_t>(max_objects - min_objects + 1)));
    std::vector<std::size_t> pool(world.vocabulary.size());
    for (std::size_t j = 0; j < pool.size(); ++j) pool[j] = j;
    MockScene scene;
    for (int j = 0; j < k; ++j) {
      std::size_t pick = rng.index(pool.size());
      scene.objects.insert(world.vocabulary[pool[pick]]);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    for (const auto& name : scene.objects) scene.salience[name] = 1.0;
    images.push_back(ImageRef{id, "", scene});
  }
  return images;
}

}  // namespace halo
