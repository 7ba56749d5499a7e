#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace splat {

// Lowercases and splits on whitespace and punctuation; punctuation marks
// become single-character tokens. Underscores count as word characters so
// schema names like "to_location" stay intact.
std::vector<std::string> tokenize(const std::string& text);

// Normalized form of a string: its tokens joined by single spaces.
std::string normalize_text(const std::string& text);

// Word-level vocabulary with reserved special tokens at fixed low ids.
class Vocabulary {
 public:
  static constexpr int kCls = 0;
  static constexpr int kSep = 1;
  static constexpr int kUtt = 2;
  static constexpr int kSlot = 3;
  static constexpr int kIntent = 4;
  static constexpr int kNone = 5;
  static constexpr int kDontcare = 6;
  static constexpr int kPad = 7;
  static constexpr int kUnk = 8;

  static const std::vector<std::string>& specials();

  // Deterministic build over text documents: tokens below min_count map to
  // [UNK]; ids follow first occurrence order after the specials.
  static Vocabulary build(const std::vector<std::string>& documents, int min_count = 1);

  int id(const std::string& token) const;  // kUnk when absent
  bool contains(const std::string& token) const { return to_id_.count(token) > 0; }
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(to_token_.size()); }

  void save(const std::string& file) const;
  static Vocabulary load(const std::string& file);

 private:
  Vocabulary();
  std::unordered_map<std::string, int> to_id_;
  std::vector<std::string> to_token_;
};

// Token ids back to text, joined by single spaces.
std::string detokenize(const std::vector<int>& ids, const Vocabulary& vocab);

}  // namespace splat
