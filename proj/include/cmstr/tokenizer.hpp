// Copyright 2026 The cmstr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <vector>

#include "cmstr/tensor.hpp"

namespace cmstr {

// Character-level vocabulary for the recognition head.
//
// Id layout: end-of-word = 0, charset characters 1..n in charset order, then
// begin = n+1 and pad = n+2. Only {end, characters} are predictable classes;
// begin and pad exist for decoder context rows. With the default charset
// ordered digits, lowercase, uppercase, punctuation, the 36 evaluation
// characters occupy ids 1..36, so restricting to the evaluation subset is a
// contiguous truncation of the class range.
class CharVocab {
public:
    // charset: distinct characters, no specials. max_word_len: longest word
    // that can be represented (default 25 -> 26 sequence positions).
    explicit CharVocab(const std::string& charset, int max_word_len = 25);

    static std::string default_train_charset();  // 94 printable ASCII
    static std::string default_eval_charset();   // lowercase alphanumerics

    int eos_id() const { return 0; }
    int bos_id() const { return int(charset_.size()) + 1; }
    int pad_id() const { return int(charset_.size()) + 2; }
    int char_id(char c) const;            // 1-based; throws on unknown
    int num_classes() const { return int(charset_.size()) + 1; }  // eos + chars
    int table_size() const { return int(charset_.size()) + 3; }   // + bos, pad
    int seq_len() const { return max_word_len_ + 1; }
    int max_word_len() const { return max_word_len_; }
    const std::string& charset() const { return charset_; }

    // Target row per position: characters, then eos, then pad fill.
    std::vector<int> encode_target(const std::string& word) const;

    // Decoder context: begin, characters, pad fill. Same length as targets.
    std::vector<int> encode_context(const std::string& word) const;

    // Ids (class range) back to a string, stopping at the first eos.
    std::string decode(const std::vector<int>& ids) const;

    // Greedy argmax per row over class logits, stopping at the first eos.
    std::string decode_greedy(const MatF& logits) const;
    std::vector<int> argmax_ids(const MatF& logits) const;

private:
    std::string charset_;
    int max_word_len_;
    std::vector<int> ascii_to_id_;  // -1 where not in charset
};

// Token ids feeding the text encoder. Fixed-width sequences: start token,
// up to width-2 folded characters, end token, pad fill. Characters outside
// the lowercase alphanumeric set map to a single unknown id; longer inputs
// are truncated rather than rejected.
class TextVocab {
public:
    explicit TextVocab(int width = 16);

    int pad_id() const { return 0; }
    int sos_id() const { return 1; }
    int eos_id() const { return 2; }
    int unk_id() const { return 3; }
    int table_size() const { return 4 + 36; }
    int width() const { return width_; }
    int max_content() const { return width_ - 2; }

    std::vector<int> encode(const std::string& word) const;

private:
    int width_;
};

// Lowercase-folds and strips everything outside the evaluation charset.
// Applied to predictions and ground truth before accuracy comparison, never
// inside decoding.
std::string eval_filter(const std::string& s, const std::string& eval_charset);

}  // namespace cmstr
