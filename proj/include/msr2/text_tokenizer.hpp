#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace msr2 {

/// Retrieval tokenizer. ASCII letters are lowercased; alphanumeric runs form
/// terms; runs of CJK ideographs/kana/hangul are emitted as overlapping
/// character bigrams (a lone character is kept as a unigram). Any other
/// non-ASCII code point is treated as part of a word.
std::vector<std::string> tokenize(std::string_view text);

}  // namespace msr2
