#pragma once

/*
 * File formats and serialization.
 *
 *  - synonym map:   two-column UTF-8 text, "surface<TAB>canonical", '#' comments
 *  - annotations:   one JSON document mapping image id -> [canonical objects]
 *  - POPE questions: JSONL, one object per line {question_id, image, text, label}
 *  - MME questions: tab-separated "image<TAB>question<TAB>label"
 *  - result records: JSONL with an explicit schema_version field
 */

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "halo/editing.hpp"
#include "halo/error.hpp"
#include "halo/matrix.hpp"
#include "halo/metrics.hpp"
#include "halo/pipeline.hpp"
#include "halo/types.hpp"

namespace halo {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// JSON serializers (ADL)
// ---------------------------------------------------------------------------

inline void to_json(json& j, const EmbeddingMatrix& m) {
  j = json{{"rows", m.rows}, {"cols", m.cols}, {"values", m.values}};
}
inline void from_json(const json& j, EmbeddingMatrix& m) {
  j.at("rows").get_to(m.rows);
  j.at("cols").get_to(m.cols);
  j.at("values").get_to(m.values);
  if (m.values.size() != m.rows * m.cols)
    throw DimensionMismatch("matrix json: values size does not match rows*cols");
}

inline void to_json(json& j, const Caption& c) {
  j = json{{"text", c.text}, {"word_count", c.word_count}, {"source", to_string(c.source)}};
}
inline void from_json(const json& j, Caption& c) {
  j.at("text").get_to(c.text);
  j.at("word_count").get_to(c.word_count);
  std::string source = j.at("source").get<std::string>();
  c.source = source == "baseline"    ? CaptionSource::baseline
             : source == "mitigated" ? CaptionSource::mitigated
                                     : CaptionSource::external;
}

inline void to_json(json& j, const TokenSpan& s) {
  j = json{{"start", s.start}, {"length", s.length}};
}
inline void from_json(const json& j, TokenSpan& s) {
  j.at("start").get_to(s.start);
  j.at("length").get_to(s.length);
}

inline void to_json(json& j, const CoefficientStrategy& s) {
  const char* kind = s.kind == CoefficientKind::fixed     ? "fixed"
                     : s.kind == CoefficientKind::uniform ? "uniform"
                                                          : "gaussian";
  j = json{{"kind", kind},       {"lo", s.lo},           {"hi", s.hi},
           {"mean", s.mean},     {"std", s.std},         {"best_of", s.best_of},
           {"avg_of", s.avg_of}};
}
inline void from_json(const json& j, CoefficientStrategy& s) {
  std::string kind = j.at("kind").get<std::string>();
  s.kind = kind == "fixed"     ? CoefficientKind::fixed
           : kind == "uniform" ? CoefficientKind::uniform
                               : CoefficientKind::gaussian;
  j.at("lo").get_to(s.lo);
  j.at("hi").get_to(s.hi);
  j.at("mean").get_to(s.mean);
  j.at("std").get_to(s.std);
  j.at("best_of").get_to(s.best_of);
  j.at("avg_of").get_to(s.avg_of);
}

inline void to_json(json& j, const EditConfig& c) {
  j = json{{"alpha", c.alpha},
           {"beta", c.beta},
           {"layer", c.layer},
           {"num_layers", c.num_layers},
           {"span_policy", c.span_policy == SpanPolicy::fixed_span ? "fixed-span"
                                                                   : "adapter-provided"},
           {"fixed_span", c.fixed_span},
           {"strategy", c.strategy},
           {"tied", c.tied},
           {"seed", c.seed}};
}
inline void from_json(const json& j, EditConfig& c) {
  j.at("alpha").get_to(c.alpha);
  j.at("beta").get_to(c.beta);
  j.at("layer").get_to(c.layer);
  j.at("num_layers").get_to(c.num_layers);
  c.span_policy = j.at("span_policy").get<std::string>() == "fixed-span"
                      ? SpanPolicy::fixed_span
                      : SpanPolicy::adapter_provided;
  j.at("fixed_span").get_to(c.fixed_span);
  j.at("strategy").get_to(c.strategy);
  j.at("tied").get_to(c.tied);
  j.at("seed").get_to(c.seed);
}

inline void to_json(json& j, const AnchorPair& a) {
  j = json{{"positive", a.positive},
           {"negative", a.negative},
           {"pooled_positive", a.pooled_positive},
           {"pooled_negative", a.pooled_negative}};
}
inline void from_json(const json& j, AnchorPair& a) {
  j.at("positive").get_to(a.positive);
  j.at("negative").get_to(a.negative);
  j.at("pooled_positive").get_to(a.pooled_positive);
  j.at("pooled_negative").get_to(a.pooled_negative);
}

inline void to_json(json& j, const MitigationResult& r) {
  j = json{{"baseline", r.baseline},
           {"mitigated", r.mitigated},
           {"anchors", r.anchors},
           {"config_used", r.config_used},
           {"alpha_used", r.alpha_used},
           {"beta_used", r.beta_used},
           {"reconstructed_image_id", r.reconstructed_image_id}};
}
inline void from_json(const json& j, MitigationResult& r) {
  j.at("baseline").get_to(r.baseline);
  j.at("mitigated").get_to(r.mitigated);
  j.at("anchors").get_to(r.anchors);
  j.at("config_used").get_to(r.config_used);
  j.at("alpha_used").get_to(r.alpha_used);
  j.at("beta_used").get_to(r.beta_used);
  j.at("reconstructed_image_id").get_to(r.reconstructed_image_id);
}

inline void to_json(json& j, const ProbeReport& p) {
  j = json{{"sim_text", p.sim_text}, {"sim_roundtrip", p.sim_roundtrip}, {"gap", p.gap}};
}
inline void from_json(const json& j, ProbeReport& p) {
  j.at("sim_text").get_to(p.sim_text);
  j.at("sim_roundtrip").get_to(p.sim_roundtrip);
  j.at("gap").get_to(p.gap);
}

inline void to_json(json& j, const PerImageChair& p) {
  j = json{{"id", p.id},
           {"mentioned", p.mentioned},
           {"hallucinated", p.hallucinated},
           {"gt", p.gt},
           {"word_count", p.word_count}};
}

inline void to_json(json& j, const ChairReport& r) {
  j = json{{"chair_s", r.chair_s},
           {"chair_i", r.chair_i},
           {"average", r.average},
           {"recall", r.recall},
           {"recall_macro", r.recall_macro},
           {"mean_length", r.mean_length},
           {"images", r.per_image.size()}};
}

inline void to_json(json& j, const PopeSettingResult& r) {
  j = json{{"accuracy", r.accuracy}, {"precision", r.precision}, {"recall", r.recall},
           {"f1", r.f1},             {"tp", r.counts.tp},        {"fp", r.counts.fp},
           {"tn", r.counts.tn},      {"fn", r.counts.fn},        {"other", r.counts.other}};
}

inline void to_json(json& j, const MmeSubtaskResult& r) {
  j = json{{"accuracy", r.accuracy},
           {"accuracy_plus", r.accuracy_plus},
           {"score", r.score},
           {"questions", r.total_questions},
           {"images", r.total_images}};
}

// ---------------------------------------------------------------------------
// Dataset files
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetParseError(path, 0, "cannot open file");
  return in;
}

}  // namespace detail

inline SynonymMap load_synonym_map(const std::string& path) {
  std::ifstream in = detail::open_input(path);
  SynonymMap map;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string text = detail::trim(line);
    if (text.empty() || text.front() == '#') continue;
    std::size_t tab = text.find('\t');
    if (tab == std::string::npos)
      throw DatasetParseError(path, lineno, "expected 'surface<TAB>canonical'");
    std::string surface = detail::trim(text.substr(0, tab));
    std::string canonical = detail::trim(text.substr(tab + 1));
    if (surface.empty() || canonical.empty())
      throw DatasetParseError(path, lineno, "empty surface or canonical form");
    map.add(surface, canonical);
  }
  return map;
}

inline void save_synonym_map(const SynonymMap& map, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write synonym map: " + path);
  out << "# surface<TAB>canonical\n";
  for (const auto& [surface_tokens, canonical] : map.entries()) {
    std::string surface;
    for (std::size_t i = 0; i < surface_tokens.size(); ++i) {
      if (i) surface += ' ';
      surface += surface_tokens[i];
    }
    out << surface << '\t' << canonical << '\n';
  }
}

inline AnnotationSet load_annotations(const std::string& path) {
  std::ifstream in = detail::open_input(path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DatasetParseError(path, 1, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw DatasetParseError(path, 1, "expected a JSON object of id -> [objects]");
  AnnotationSet ann;
  for (const auto& [id, objects] : doc.items()) {
    if (!objects.is_array()) throw DatasetParseError(path, 1, "objects for '" + id + "' must be an array");
    std::set<std::string> set;
    for (const auto& o : objects) set.insert(o.get<std::string>());
    ann[id] = std::move(set);
  }
  return ann;
}

inline void save_annotations(const AnnotationSet& ann, const std::string& path) {
  json doc = json::object();
  for (const auto& [id, objects] : ann) doc[id] = objects;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write annotations: " + path);
  out << doc.dump(2) << '\n';
}

struct PopeQuestion {
  std::string question_id;
  std::string image_id;
  std::string text;
  bool label_yes = false;
};

inline std::vector<PopeQuestion> load_pope_questions(const std::string& path) {
  std::ifstream in = detail::open_input(path);
  std::vector<PopeQuestion> out;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DatasetParseError(path, lineno, std::string("invalid JSON: ") + e.what());
    }
    PopeQuestion q;
    try {
      q.question_id = j.at("question_id").is_string() ? j.at("question_id").get<std::string>()
                                                      : j.at("question_id").dump();
      q.image_id = j.at("image").get<std::string>();
      q.text = j.at("text").get<std::string>();
      std::string label = j.at("label").get<std::string>();
      if (label != "yes" && label != "no")
        throw DatasetParseError(path, lineno, "label must be yes or no");
      q.label_yes = label == "yes";
    } catch (const json::exception& e) {
      throw DatasetParseError(path, lineno, std::string("missing field: ") + e.what());
    }
    out.push_back(std::move(q));
  }
  return out;
}

inline void save_pope_questions(const std::vector<PopeQuestion>& questions,
                                const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write POPE questions: " + path);
  for (const auto& q : questions) {
    json j{{"question_id", q.question_id},
           {"image", q.image_id},
           {"text", q.text},
           {"label", q.label_yes ? "yes" : "no"}};
    out << j.dump() << '\n';
  }
}

struct MmeQuestion {
  std::string image_id;
  std::string text;
  bool label_yes = false;
};

inline std::vector<MmeQuestion> load_mme_questions(const std::string& path) {
  std::ifstream in = detail::open_input(path);
  std::vector<MmeQuestion> out;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    std::size_t t1 = line.find('\t');
    std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw DatasetParseError(path, lineno, "expected 'image<TAB>question<TAB>label'");
    MmeQuestion q;
    q.image_id = detail::trim(line.substr(0, t1));
    q.text = detail::trim(line.substr(t1 + 1, t2 - t1 - 1));
    std::string label = detail::trim(line.substr(t2 + 1));
    if (label != "yes" && label != "no")
      throw DatasetParseError(path, lineno, "label must be yes or no");
    q.label_yes = label == "yes";
    out.push_back(std::move(q));
  }
  return out;
}

inline void save_mme_questions(const std::vector<MmeQuestion>& questions,
                               const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write MME questions: " + path);
  for (const auto& q : questions)
    out << q.image_id << '\t' << q.text << '\t' << (q.label_yes ? "yes" : "no") << '\n';
}

// ---------------------------------------------------------------------------
// JSONL records
// ---------------------------------------------------------------------------

inline std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in = detail::open_input(path);
  std::vector<json> out;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw DatasetParseError(path, lineno, std::string("invalid JSON: ") + e.what());
    }
  }
  return out;
}

// Append-only record writer; each record is flushed as one line so a killed
// run leaves a readable prefix behind.
class JsonlWriter {
public:
  JsonlWriter() = default;
  JsonlWriter(const std::string& path, bool append) {
    open(path, append);
  }

  void open(const std::string& path, bool append) {
    out_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!out_) throw Error("cannot open output file: " + path);
  }

  bool is_open() const { return out_.is_open(); }

  void write(const json& record) {
    out_ << record.dump() << '\n';
    out_.flush();
  }

private:
  std::ofstream out_;
};

}  // namespace halo
