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

#include "cmstr/tokenizer.hpp"

#include <algorithm>
#include <cctype>

#include "cmstr/errors.hpp"

namespace cmstr {

CharVocab::CharVocab(const std::string& charset, int max_word_len)
    : charset_(charset), max_word_len_(max_word_len), ascii_to_id_(256, -1) {
    if (charset_.empty()) throw ConfigError("charset must not be empty");
    if (max_word_len_ < 1) throw ConfigError("max word length must be positive");
    for (std::size_t i = 0; i < charset_.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(charset_[i]);
        if (ascii_to_id_[c] != -1) {
            throw ConfigError(std::string("charset has duplicate character '") +
                              charset_[i] + "'");
        }
        ascii_to_id_[c] = int(i) + 1;
    }
}

std::string CharVocab::default_train_charset() {
    // Digits and lowercase lead so the evaluation subset is ids 1..36; the
    // rest of printable ASCII follows in code-point order.
    std::string s = "0123456789abcdefghijklmnopqrstuvwxyz"
                    "ABCDEFGHIJKLMNOPQRSTUVWXYZ";
    for (char c = '!'; c <= '~'; ++c) {
        if (!std::isalnum(static_cast<unsigned char>(c))) s.push_back(c);
    }
    return s;
}

std::string CharVocab::default_eval_charset() {
    return "0123456789abcdefghijklmnopqrstuvwxyz";
}

int CharVocab::char_id(char c) const {
    int id = ascii_to_id_[static_cast<unsigned char>(c)];
    if (id < 0) {
        throw DataError(std::string("character '") + c + "' (0x" +
                        [&] {
                            char buf[3];
                            const char* hex = "0123456789abcdef";
                            unsigned char u = static_cast<unsigned char>(c);
                            buf[0] = hex[u >> 4];
                            buf[1] = hex[u & 0xf];
                            buf[2] = '\0';
                            return std::string(buf);
                        }() +
                        ") is not in the recognition charset");
    }
    return id;
}

std::vector<int> CharVocab::encode_target(const std::string& word) const {
    if (int(word.size()) > max_word_len_) {
        throw DataError("word '" + word + "' longer than " +
                        std::to_string(max_word_len_) + " characters");
    }
    std::vector<int> ids(std::size_t(seq_len()), pad_id());
    for (std::size_t i = 0; i < word.size(); ++i) ids[i] = char_id(word[i]);
    ids[word.size()] = eos_id();
    return ids;
}

std::vector<int> CharVocab::encode_context(const std::string& word) const {
    if (int(word.size()) > max_word_len_) {
        throw DataError("word '" + word + "' longer than " +
                        std::to_string(max_word_len_) + " characters");
    }
    std::vector<int> ids(std::size_t(seq_len()), pad_id());
    ids[0] = bos_id();
    for (std::size_t i = 0; i < word.size(); ++i) ids[i + 1] = char_id(word[i]);
    return ids;
}

std::string CharVocab::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        if (id == eos_id()) break;
        if (id < 1 || id > int(charset_.size())) {
            throw ContractError("id " + std::to_string(id) +
                                " is not a character class");
        }
        out.push_back(charset_[std::size_t(id - 1)]);
    }
    return out;
}

std::vector<int> CharVocab::argmax_ids(const MatF& logits) const {
    if (logits.cols() != num_classes()) {
        throw ContractError("logits have " + std::to_string(logits.cols()) +
                            " columns, vocabulary has " +
                            std::to_string(num_classes()) + " classes");
    }
    std::vector<int> ids(std::size_t(logits.rows()));
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::Index best = 0;
        logits.row(i).maxCoeff(&best);
        ids[std::size_t(i)] = int(best);
    }
    return ids;
}

std::string CharVocab::decode_greedy(const MatF& logits) const {
    return decode(argmax_ids(logits));
}

TextVocab::TextVocab(int width) : width_(width) {
    if (width_ < 3) throw ConfigError("text width must fit start and end tokens");
}

std::vector<int> TextVocab::encode(const std::string& word) const {
    std::vector<int> ids(std::size_t(width_), pad_id());
    ids[0] = sos_id();
    int n = std::min(int(word.size()), max_content());
    for (int i = 0; i < n; ++i) {
        char c = char(std::tolower(static_cast<unsigned char>(word[std::size_t(i)])));
        int id;
        if (c >= '0' && c <= '9') {
            id = 4 + (c - '0');
        } else if (c >= 'a' && c <= 'z') {
            id = 4 + 10 + (c - 'a');
        } else {
            id = unk_id();
        }
        ids[std::size_t(i + 1)] = id;
    }
    ids[std::size_t(n + 1)] = eos_id();
    return ids;
}

std::string eval_filter(const std::string& s, const std::string& eval_charset) {
    std::string out;
    for (char c : s) {
        char f = char(std::tolower(static_cast<unsigned char>(c)));
        if (eval_charset.find(f) != std::string::npos) out.push_back(f);
    }
    return out;
}

}  // namespace cmstr
