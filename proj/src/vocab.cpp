#include "splat/vocab.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace splat {

namespace {

bool is_word_char(unsigned char c) {
  return std::isalnum(c) || c == '_' || c >= 0x80;  // keep UTF-8 bytes inside words
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (is_word_char(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
      if (!std::isspace(c)) out.push_back(std::string(1, static_cast<char>(c)));
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string normalize_text(const std::string& text) {
  const std::vector<std::string> toks = tokenize(text);
  std::string out;
  for (size_t i = 0; i < toks.size(); ++i) {
    if (i) out.push_back(' ');
    out += toks[i];
  }
  return out;
}

const std::vector<std::string>& Vocabulary::specials() {
  static const std::vector<std::string> s = {"[CLS]",  "[SEP]",      "[UTT]", "[SLOT]", "[INTENT]",
                                             "[NONE]", "[DONTCARE]", "[PAD]", "[UNK]"};
  return s;
}

Vocabulary::Vocabulary() {
  for (const std::string& s : specials()) {
    to_id_.emplace(s, static_cast<int>(to_token_.size()));
    to_token_.push_back(s);
  }
}

Vocabulary Vocabulary::build(const std::vector<std::string>& documents, int min_count) {
  if (documents.empty()) throw std::runtime_error("vocabulary: empty corpus");
  std::unordered_map<std::string, int> counts;
  std::vector<std::string> order;  // first-occurrence order
  bool any_token = false;
  for (const std::string& doc : documents) {
    for (std::string& tok : tokenize(doc)) {
      any_token = true;
      if (++counts[tok] == 1) order.push_back(std::move(tok));
    }
  }
  if (!any_token) throw std::runtime_error("vocabulary: empty corpus");
  Vocabulary v;
  for (const std::string& tok : order) {
    if (counts[tok] >= min_count) {
      v.to_id_.emplace(tok, static_cast<int>(v.to_token_.size()));
      v.to_token_.push_back(tok);
    }
  }
  return v;
}

int Vocabulary::id(const std::string& token) const {
  auto it = to_id_.find(token);
  return it == to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size())
    throw std::runtime_error("vocabulary: id " + std::to_string(id) + " out of range");
  return to_token_[static_cast<size_t>(id)];
}

void Vocabulary::save(const std::string& file) const {
  nlohmann::json j = nlohmann::json::object();
  for (int i = 0; i < size(); ++i) j[to_token_[static_cast<size_t>(i)]] = i;
  std::ofstream os(file);
  if (!os) throw std::runtime_error("vocabulary: cannot open '" + file + "' for writing");
  os << j.dump(2) << "\n";
}

Vocabulary Vocabulary::load(const std::string& file) {
  std::ifstream is(file);
  if (!is) throw std::runtime_error("vocabulary: cannot open '" + file + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("vocabulary: malformed JSON in '" + file + "': " + e.what());
  }
  std::map<int, std::string> by_id;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!by_id.emplace(it.value().get<int>(), it.key()).second)
      throw std::runtime_error("vocabulary: duplicate id in '" + file + "'");
  }
  Vocabulary v;
  for (const auto& [id, tok] : by_id) {
    if (id < static_cast<int>(specials().size())) {
      if (v.to_token_[static_cast<size_t>(id)] != tok)
        throw std::runtime_error("vocabulary: special token mismatch at id " + std::to_string(id));
      continue;
    }
    if (id != v.size())
      throw std::runtime_error("vocabulary: ids in '" + file + "' are not contiguous");
    v.to_id_.emplace(tok, v.size());
    v.to_token_.push_back(tok);
  }
  return v;
}

std::string detokenize(const std::vector<int>& ids, const Vocabulary& vocab) {
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) out.push_back(' ');
    out += vocab.token(ids[i]);
  }
  return out;
}

}  // namespace splat
