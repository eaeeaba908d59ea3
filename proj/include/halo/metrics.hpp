#pragma once

/*
 * Caption-grounding metrics: object extraction against a synonym map,
 * CHAIR_S / CHAIR_I / recall, the F-beta style HAR score combining
 * non-hallucination rate and recall, POPE and MME yes-no scoring, and the
 * before/after robustness delta.
 *
 * All operations are pure and order-insensitive; aggregates are plain sums,
 * so permuting the input records never changes a report.
 */

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "halo/error.hpp"
#include "halo/text.hpp"
#include "halo/types.hpp"

namespace halo {

// Surface-form -> canonical-object lookup. Lookup is case-insensitive and
// multi-word surfaces win over shorter matches at the same position. Every
// canonical name is also registered as a surface of itself.
class SynonymMap {
public:
  void add(const std::string& surface, const std::string& canonical) {
    std::vector<std::string> surface_tokens = tokenize_words(surface);
    std::vector<std::string> canonical_tokens = tokenize_words(canonical);
    if (surface_tokens.empty() || canonical_tokens.empty())
      throw InvalidParameter("synonym map: empty surface or canonical form");
    std::string canon = join(canonical_tokens);
    canonicals_.insert(canon);
    surfaces_[surface_tokens] = canon;
    surfaces_[canonical_tokens] = canon;  // identity surface
    max_words_ = std::max({max_words_, surface_tokens.size(), canonical_tokens.size()});
  }

  const std::set<std::string>& canonicals() const { return canonicals_; }
  bool empty() const { return surfaces_.empty(); }

  // surface tokens -> canonical, for persistence and round-trip tests
  const std::map<std::vector<std::string>, std::string>& entries() const { return surfaces_; }

  std::set<std::string> extract(const std::string& text) const {
    std::vector<std::string> tokens = tokenize_words(text);
    std::set<std::string> found;
    std::size_t i = 0;
    while (i < tokens.size()) {
      std::size_t consumed = 0;
      std::size_t longest = std::min(max_words_, tokens.size() - i);
      for (std::size_t len = longest; len >= 1; --len) {
        key_.assign(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                    tokens.begin() + static_cast<std::ptrdiff_t>(i + len));
        auto it = surfaces_.find(key_);
        if (it != surfaces_.end()) {
          found.insert(it->second);
          consumed = len;
          break;
        }
      }
      i += consumed ? consumed : 1;
    }
    return found;
  }

private:
  static std::string join(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i) out += ' ';
      out += tokens[i];
    }
    return out;
  }

  std::map<std::vector<std::string>, std::string> surfaces_;
  std::set<std::string> canonicals_;
  std::size_t max_words_ = 1;
  mutable std::vector<std::string> key_;  // scratch for extract()
};

inline std::set<std::string> extract_objects(const Caption& caption, const SynonymMap& map) {
  return map.extract(caption.text);
}

// image id -> ground-truth canonical objects
using AnnotationSet = std::map<std::string, std::set<std::string>>;

struct CaptionRecord {
  std::string image_id;
  std::string prompt;
  Caption caption;
  std::set<std::string> objects;  // extracted canonical objects (filled by scoring)
};

struct PerImageChair {
  std::string id;
  std::set<std::string> mentioned;
  std::set<std::string> hallucinated;
  std::set<std::string> gt;
  int word_count = 0;
};

struct ChairReport {
  double chair_s = 0.0;       // fraction of captions with >= 1 hallucinated object
  double chair_i = 0.0;       // hallucinated mentions / all mentions (micro)
  double average = 0.0;       // (chair_s + chair_i) / 2
  double recall = 0.0;        // covered gt / total gt (micro)
  double recall_macro = 0.0;  // mean per-image recall
  double mean_length = 0.0;
  std::vector<PerImageChair> per_image;

  long total_mentions() const {
    long n = 0;
    for (const auto& p : per_image) n += static_cast<long>(p.mentioned.size());
    return n;
  }
  long total_hallucinated() const {
    long n = 0;
    for (const auto& p : per_image) n += static_cast<long>(p.hallucinated.size());
    return n;
  }
};

namespace detail {

inline std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    cur.push_back(ch);
    if (ch == '.' || ch == '!' || ch == '?') {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (cur.find_first_not_of(" \t\n\r") != std::string::npos) out.push_back(cur);
  return out;
}

// Shared aggregation over per-image set decompositions; chair_s_num/denom
// come from the caller since the per-sentence flag changes their meaning.
inline ChairReport aggregate_chair(std::vector<PerImageChair> per_image, long chair_s_num,
                                   long chair_s_denom) {
  ChairReport r;
  long mentions = 0, hallucinated = 0, covered = 0, gt_total = 0, words = 0;
  double macro_sum = 0.0;
  long macro_n = 0;
  for (const auto& p : per_image) {
    mentions += static_cast<long>(p.mentioned.size());
    hallucinated += static_cast<long>(p.hallucinated.size());
    long cov = static_cast<long>(p.mentioned.size() - p.hallucinated.size());
    covered += cov;
    gt_total += static_cast<long>(p.gt.size());
    words += p.word_count;
    if (!p.gt.empty()) {
      macro_sum += static_cast<double>(cov) / static_cast<double>(p.gt.size());
      ++macro_n;
    }
  }
  r.chair_i = mentions == 0 ? 0.0 : static_cast<double>(hallucinated) / mentions;
  r.chair_s = chair_s_denom == 0 ? 0.0 : static_cast<double>(chair_s_num) / chair_s_denom;
  r.average = (r.chair_s + r.chair_i) / 2.0;
  r.recall = gt_total == 0 ? 0.0 : static_cast<double>(covered) / gt_total;
  r.recall_macro = macro_n == 0 ? 0.0 : macro_sum / macro_n;
  r.mean_length =
      per_image.empty() ? 0.0 : static_cast<double>(words) / static_cast<double>(per_image.size());
  r.per_image = std::move(per_image);
  return r;
}

}  // namespace detail

/// CHAIR over a caption corpus. chair_s counts per caption by default; the
/// per_sentence flag switches to the literal per-sentence reading.
inline ChairReport chair_report(const std::vector<CaptionRecord>& records,
                                const AnnotationSet& annotations, const SynonymMap& map,
                                bool per_sentence = false) {
  if (records.empty()) throw EmptyCorpus("chair: no caption records");
  std::vector<PerImageChair> per_image;
  per_image.reserve(records.size());
  long s_num = 0, s_denom = 0;
  for (const auto& rec : records) {
    auto ann = annotations.find(rec.image_id);
    if (ann == annotations.end())
      throw MissingAnnotation("chair: no annotation for image '" + rec.image_id + "'");
    PerImageChair p;
    p.id = rec.image_id;
    p.mentioned = extract_objects(rec.caption, map);
    p.gt = ann->second;
    for (const auto& obj : p.mentioned)
      if (!p.gt.count(obj)) p.hallucinated.insert(obj);
    p.word_count = rec.caption.word_count;

    if (per_sentence) {
      for (const auto& sentence : detail::split_sentences(rec.caption.text)) {
        ++s_denom;
        auto mentioned = map.extract(sentence);
        for (const auto& obj : mentioned)
          if (!p.gt.count(obj)) { ++s_num; break; }
      }
    } else {
      ++s_denom;
      if (!p.hallucinated.empty()) ++s_num;
    }
    per_image.push_back(std::move(p));
  }
  return detail::aggregate_chair(std::move(per_image), s_num, s_denom);
}

// Inputs to the HAR score; beta_w is the F-beta trade-off weight, a distinct
// quantity from the edit coefficient beta.
struct HarParams {
  double h = 0.0;       // hallucination rate in [0,1]
  double r = 0.0;       // recall in [0,1]
  double beta_w = 1.0;  // > 0
};

/// HAR = (1 + b^2) * q * r / (b^2 * q + r) with q = 1 - h, and 0 when the
/// denominator vanishes (q = r = 0). High only when both the recall and the
/// non-hallucination rate are high.
inline double har(const HarParams& p) {
  if (!(p.h >= 0.0 && p.h <= 1.0)) throw OutOfRange("har: h must lie in [0,1]");
  if (!(p.r >= 0.0 && p.r <= 1.0)) throw OutOfRange("har: r must lie in [0,1]");
  if (!(p.beta_w > 0.0) || !std::isfinite(p.beta_w))
    throw OutOfRange("har: beta_w must be positive");
  double q = 1.0 - p.h;
  double b2 = p.beta_w * p.beta_w;
  double denom = b2 * q + p.r;
  if (denom == 0.0) return 0.0;
  return (1.0 + b2) * q * p.r / denom;
}

inline double har(double h, double r, double beta_w = 1.0) {
  return har(HarParams{h, r, beta_w});
}

enum class Verdict { yes, no, other };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::yes: return "yes";
    case Verdict::no: return "no";
    default: return "other";
  }
}

/// First standalone "yes" or "no" word wins, case-insensitively; neither
/// present means other.
inline Verdict parse_yes_no(const std::string& response) {
  for (const auto& tok : tokenize_words(response)) {
    if (tok == "yes") return Verdict::yes;
    if (tok == "no") return Verdict::no;
  }
  return Verdict::other;
}

struct PopeCounts {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  long other = 0;  // unparseable answers (always counted as wrong)
};

struct PopeSettingResult {
  PopeCounts counts;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Yes is the positive class. "other" answers are never correct: they count
/// as FN under a yes label and FP under a no label. Precision, recall and F1
/// fall back to 0 whenever their denominator is 0.
inline PopeSettingResult pope_report(const std::vector<std::pair<Verdict, bool>>& pairs) {
  if (pairs.empty()) throw EmptyInput("pope: no prediction/label pairs");
  PopeSettingResult r;
  for (const auto& [pred, label_yes] : pairs) {
    if (pred == Verdict::other) {
      ++r.counts.other;
      if (label_yes) ++r.counts.fn;
      else ++r.counts.fp;
      continue;
    }
    bool pred_yes = pred == Verdict::yes;
    if (pred_yes && label_yes) ++r.counts.tp;
    else if (pred_yes && !label_yes) ++r.counts.fp;
    else if (!pred_yes && label_yes) ++r.counts.fn;
    else ++r.counts.tn;
  }
  long total = static_cast<long>(pairs.size());
  r.accuracy = static_cast<double>(r.counts.tp + r.counts.tn) / total;
  long pd = r.counts.tp + r.counts.fp;
  long rd = r.counts.tp + r.counts.fn;
  r.precision = pd == 0 ? 0.0 : static_cast<double>(r.counts.tp) / pd;
  r.recall = rd == 0 ? 0.0 : static_cast<double>(r.counts.tp) / rd;
  r.f1 = (r.precision + r.recall) == 0.0
             ? 0.0
             : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

enum class PopeSetting { random, popular, adversarial };

inline const char* to_string(PopeSetting s) {
  switch (s) {
    case PopeSetting::random: return "random";
    case PopeSetting::popular: return "popular";
    default: return "adversarial";
  }
}

inline PopeSetting pope_setting_from_string(const std::string& s) {
  if (s == "random") return PopeSetting::random;
  if (s == "popular") return PopeSetting::popular;
  if (s == "adversarial") return PopeSetting::adversarial;
  throw InvalidParameter("unknown POPE setting: " + s);
}

struct PopeReport {
  std::map<PopeSetting, PopeSettingResult> settings;

  double average_accuracy() const { return average(&PopeSettingResult::accuracy); }
  double average_f1() const { return average(&PopeSettingResult::f1); }

private:
  double average(double PopeSettingResult::* field) const {
    if (settings.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [_, r] : settings) sum += r.*field;
    return sum / static_cast<double>(settings.size());
  }
};

enum class MmeSubtask { existence, count, position, color };

inline const char* to_string(MmeSubtask s) {
  switch (s) {
    case MmeSubtask::existence: return "existence";
    case MmeSubtask::count: return "count";
    case MmeSubtask::position: return "position";
    default: return "color";
  }
}

inline MmeSubtask mme_subtask_from_string(const std::string& s) {
  if (s == "existence") return MmeSubtask::existence;
  if (s == "count") return MmeSubtask::count;
  if (s == "position") return MmeSubtask::position;
  if (s == "color") return MmeSubtask::color;
  throw InvalidParameter("unknown MME subtask: " + s);
}

struct MmeAnswer {
  std::string image_id;
  std::string question_id;
  Verdict prediction = Verdict::other;
  bool label_yes = false;
};

struct MmeSubtaskResult {
  double accuracy = 0.0;       // correct / questions
  double accuracy_plus = 0.0;  // images with both questions correct / images
  double score = 0.0;          // 100 * (accuracy + accuracy_plus)
  long total_questions = 0;
  long total_images = 0;
};

/// MME convention: every image carries exactly two questions; the plus
/// accuracy only credits images with both answered correctly.
inline MmeSubtaskResult mme_report(const std::vector<MmeAnswer>& answers) {
  if (answers.empty()) throw EmptyInput("mme: no answers");
  std::map<std::string, std::pair<long, long>> by_image;  // correct, total
  for (const auto& a : answers) {
    bool correct = (a.prediction == Verdict::yes && a.label_yes) ||
                   (a.prediction == Verdict::no && !a.label_yes);
    auto& [ok, total] = by_image[a.image_id];
    if (correct) ++ok;
    ++total;
  }
  long correct = 0, plus = 0;
  for (const auto& [id, counts] : by_image) {
    if (counts.second != 2)
      throw MalformedPairing("mme: image '" + id + "' has " +
                             std::to_string(counts.second) + " questions, expected 2");
    correct += counts.first;
    if (counts.first == 2) ++plus;
  }
  MmeSubtaskResult r;
  r.total_questions = static_cast<long>(answers.size());
  r.total_images = static_cast<long>(by_image.size());
  r.accuracy = static_cast<double>(correct) / r.total_questions;
  r.accuracy_plus = static_cast<double>(plus) / r.total_images;
  r.score = 100.0 * (r.accuracy + r.accuracy_plus);
  return r;
}

struct MmeReport {
  std::map<MmeSubtask, MmeSubtaskResult> subtasks;

  double hall_total() const {
    double sum = 0.0;
    for (const auto& [_, r] : subtasks) sum += r.score;
    return sum;
  }
};

struct RobustnessDelta {
  double delta_chair = 0.0;   // percentage points
  double delta_recall = 0.0;  // percentage points
};

/// Average change of the CHAIR average and recall between two reports over
/// the same image set, in percentage points.
inline RobustnessDelta robustness_delta(const ChairReport& before, const ChairReport& after) {
  auto ids = [](const ChairReport& r) {
    std::set<std::string> s;
    for (const auto& p : r.per_image) s.insert(p.id);
    return s;
  };
  if (ids(before) != ids(after))
    throw CorpusMismatch("robustness: before/after reports cover different images");
  RobustnessDelta d;
  d.delta_chair = (after.average - before.average) * 100.0;
  d.delta_recall = (after.recall - before.recall) * 100.0;
  return d;
}

}  // namespace halo
