#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>

#include "halo/text.hpp"

namespace halo {

enum class CaptionSource { baseline, mitigated, external };

inline const char* to_string(CaptionSource s) {
  switch (s) {
    case CaptionSource::baseline: return "baseline";
    case CaptionSource::mitigated: return "mitigated";
    default: return "external";
  }
}

struct Caption {
  std::string text;
  int word_count = 0;  // whitespace-token count of text
  CaptionSource source = CaptionSource::external;

  static Caption make(std::string text, CaptionSource source = CaptionSource::external) {
    Caption c;
    c.word_count = halo::word_count(text);
    c.text = std::move(text);
    c.source = source;
    return c;
  }

  bool empty() const { return word_count == 0; }

  friend bool operator==(const Caption& a, const Caption& b) {
    return a.text == b.text && a.word_count == b.word_count && a.source == b.source;
  }
};

// Toy scene payload used by the mock backends: which canonical objects are
// present and how salient each one is.
struct MockScene {
  std::set<std::string> objects;
  std::map<std::string, double> salience;  // absent key means 1.0

  double salience_of(const std::string& name) const {
    auto it = salience.find(name);
    return it == salience.end() ? 1.0 : it->second;
  }

  friend bool operator==(const MockScene& a, const MockScene& b) {
    return a.objects == b.objects && a.salience == b.salience;
  }
};

struct ImageRef {
  std::string id;
  std::string uri_or_path;
  std::optional<MockScene> scene;  // mock backends only
};

}  // namespace halo
