#include "msr2/text_tokenizer.hpp"

#include <cstdint>

namespace msr2 {

namespace {

enum class CharClass { Separator, Word, Cjk };

struct CodePoint {
  char32_t value;
  std::size_t length;
};

CodePoint decode_utf8(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> std::uint32_t {
    if (i + k >= s.size()) return 0x80000000u;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3Fu) : 0x80000000u;
  };
  std::uint32_t cp = 0;
  std::size_t len = 1;
  if (b0 < 0x80) {
    cp = b0;
  } else if ((b0 & 0xE0) == 0xC0) {
    cp = ((b0 & 0x1Fu) << 6) | cont(1);
    len = 2;
  } else if ((b0 & 0xF0) == 0xE0) {
    cp = ((b0 & 0x0Fu) << 12) | (cont(1) << 6) | cont(2);
    len = 3;
  } else if ((b0 & 0xF8) == 0xF0) {
    cp = ((b0 & 0x07u) << 18) | (cont(1) << 12) | (cont(2) << 6) | cont(3);
    len = 4;
  } else {
    cp = 0x80000000u;
  }
  if (cp & 0x80000000u) return {U'\uFFFD', 1};  // invalid byte: consume one
  return {static_cast<char32_t>(cp), len};
}

CharClass classify(char32_t c) {
  if (c < 0x80) {
    const bool alnum = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
    return alnum ? CharClass::Word : CharClass::Separator;
  }
  if ((c >= 0x4E00 && c <= 0x9FFF) || (c >= 0x3400 && c <= 0x4DBF) || (c >= 0xF900 && c <= 0xFAFF) ||
      (c >= 0x20000 && c <= 0x2A6DF) || (c >= 0x3040 && c <= 0x30FF) || (c >= 0xAC00 && c <= 0xD7AF)) {
    return CharClass::Cjk;
  }
  // General punctuation, CJK symbols and punctuation, fullwidth forms.
  if ((c >= 0x2000 && c <= 0x206F) || (c >= 0x3000 && c <= 0x303F) || (c >= 0xFF00 && c <= 0xFFEF) ||
      c == 0x00A0 || c == 0xFFFD) {
    return CharClass::Separator;
  }
  return CharClass::Word;
}

void flush_cjk(const std::vector<std::string_view>& run, std::vector<std::string>& out) {
  if (run.size() == 1) {
    out.emplace_back(run.front());
    return;
  }
  for (std::size_t i = 0; i + 1 < run.size(); ++i) {
    std::string bigram(run[i]);
    bigram.append(run[i + 1]);
    out.push_back(std::move(bigram));
  }
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> terms;
  std::string word;
  std::vector<std::string_view> cjk_run;

  auto flush_word = [&] {
    if (!word.empty()) terms.push_back(std::move(word));
    word.clear();
  };
  auto flush_run = [&] {
    if (!cjk_run.empty()) flush_cjk(cjk_run, terms);
    cjk_run.clear();
  };

  std::size_t i = 0;
  while (i < text.size()) {
    const auto cp = decode_utf8(text, i);
    switch (classify(cp.value)) {
      case CharClass::Separator:
        flush_word();
        flush_run();
        break;
      case CharClass::Word:
        flush_run();
        if (cp.value < 0x80) {
          char c = static_cast<char>(cp.value);
          if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
          word.push_back(c);
        } else {
          word.append(text.substr(i, cp.length));
        }
        break;
      case CharClass::Cjk:
        flush_word();
        cjk_run.push_back(text.substr(i, cp.length));
        break;
    }
    i += cp.length;
  }
  flush_word();
  flush_run();
  return terms;
}

}  // namespace msr2
