#pragma once

#include <cctype>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace halo {

// Lowercased alphanumeric word tokens; punctuation splits tokens.
inline std::vector<std::string> tokenize_words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    unsigned char u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// Whitespace-token count, the caption length convention everywhere.
inline int word_count(const std::string& text) {
  std::istringstream in(text);
  std::string tok;
  int n = 0;
  while (in >> tok) ++n;
  return n;
}

inline std::string article_for(const std::string& word) {
  if (word.empty()) return "a";
  switch (std::tolower(static_cast<unsigned char>(word.front()))) {
    case 'a': case 'e': case 'i': case 'o': case 'u': return "an";
    default: return "a";
  }
}

// Fixed caption template; object order is the caller's (vocabulary order),
// so rendering is fully deterministic.
inline std::string render_caption_text(const std::vector<std::string>& objects) {
  if (objects.empty()) return "an empty scene";
  std::string out = "The image shows ";
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (i > 0) out += ", ";
    out += article_for(objects[i]) + " " + objects[i];
  }
  out += ".";
  return out;
}

// "Is there a/an [object] in the image?" with the article chosen by the
// vowel rule.
inline std::string pope_question_text(const std::string& object) {
  return "Is there " + article_for(object) + " " + object + " in the image?";
}

// Inverse of pope_question_text (tolerant of case); empty when the prompt is
// not an object-existence question.
inline std::string parse_pope_question(const std::string& prompt) {
  std::vector<std::string> toks = tokenize_words(prompt);
  // is there a|an <obj...> in the image
  if (toks.size() < 7) return "";
  if (toks[0] != "is" || toks[1] != "there" || (toks[2] != "a" && toks[2] != "an"))
    return "";
  std::size_t n = toks.size();
  if (toks[n - 3] != "in" || toks[n - 2] != "the" || toks[n - 1] != "image") return "";
  std::string obj;
  for (std::size_t i = 3; i + 3 < n; ++i) {
    if (!obj.empty()) obj += " ";
    obj += toks[i];
  }
  return obj;
}

// Greedy longest-match scan of caption tokens against a vocabulary of
// (possibly multi-word) names. Unknown words are skipped.
inline std::set<std::string> match_vocabulary(const std::vector<std::string>& tokens,
                                              const std::vector<std::string>& vocabulary) {
  std::vector<std::vector<std::string>> vocab_tokens;
  vocab_tokens.reserve(vocabulary.size());
  std::size_t max_words = 1;
  for (const auto& name : vocabulary) {
    vocab_tokens.push_back(tokenize_words(name));
    max_words = std::max(max_words, vocab_tokens.back().size());
  }
  std::set<std::string> found;
  std::size_t i = 0;
  while (i < tokens.size()) {
    std::size_t consumed = 0;
    for (std::size_t len = std::min(max_words, tokens.size() - i); len >= 1 && !consumed; --len) {
      for (std::size_t v = 0; v < vocabulary.size(); ++v) {
        const auto& vt = vocab_tokens[v];
        if (vt.size() != len) continue;
        bool match = true;
        for (std::size_t k = 0; k < len; ++k)
          if (tokens[i + k] != vt[k]) { match = false; break; }
        if (match) {
          found.insert(vocabulary[v]);
          consumed = len;
          break;
        }
      }
    }
    i += consumed ? consumed : 1;
  }
  return found;
}

}  // namespace halo
