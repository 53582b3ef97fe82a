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

#include "cmstr/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "cmstr/errors.hpp"
#include "cmstr/tokenizer.hpp"

namespace cmstr {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

int parse_int(const std::string& v, const std::string& where) {
    int out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
        throw ConfigError(where + ": '" + v + "' is not an integer");
    }
    return out;
}

std::uint64_t parse_u64(const std::string& v, const std::string& where) {
    std::uint64_t out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
        throw ConfigError(where + ": '" + v + "' is not an unsigned integer");
    }
    return out;
}

double parse_double(const std::string& v, const std::string& where) {
    try {
        std::size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError(where + ": '" + v + "' is not a number");
    }
}

bool parse_bool(const std::string& v, const std::string& where) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(where + ": '" + v + "' is not a boolean");
}

std::vector<int> parse_int_list(const std::string& v, const std::string& where) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_int(item, where));
    }
    return out;
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

std::string double_str(double d) {
    std::ostringstream ss;
    ss.precision(17);
    ss << d;
    return ss.str();
}

}  // namespace

std::string Config::resolved_train_charset() const {
    return train_charset.empty() ? CharVocab::default_train_charset() : train_charset;
}

std::string Config::resolved_eval_charset() const {
    return eval_charset.empty() ? CharVocab::default_eval_charset() : eval_charset;
}

void Config::apply_text(const std::string& text, const std::string& origin) {
    using Setter = std::function<void(const std::string&, const std::string&)>;
    const std::map<std::string, Setter> setters = {
        {"image_h", [this](auto& v, auto& w) { image_h = parse_int(v, w); }},
        {"image_w", [this](auto& v, auto& w) { image_w = parse_int(v, w); }},
        {"patch", [this](auto& v, auto& w) { patch = parse_int(v, w); }},
        {"img_layers", [this](auto& v, auto& w) { img_layers = parse_int(v, w); }},
        {"img_dim", [this](auto& v, auto& w) { img_dim = parse_int(v, w); }},
        {"img_heads", [this](auto& v, auto& w) { img_heads = parse_int(v, w); }},
        {"txt_layers", [this](auto& v, auto& w) { txt_layers = parse_int(v, w); }},
        {"txt_dim", [this](auto& v, auto& w) { txt_dim = parse_int(v, w); }},
        {"txt_heads", [this](auto& v, auto& w) { txt_heads = parse_int(v, w); }},
        {"embed_dim", [this](auto& v, auto& w) { embed_dim = parse_int(v, w); }},
        {"dec_depth", [this](auto& v, auto& w) { dec_depth = parse_int(v, w); }},
        {"dec_heads", [this](auto& v, auto& w) { dec_heads = parse_int(v, w); }},
        {"dropout", [this](auto& v, auto& w) { dropout = parse_double(v, w); }},
        {"train_charset", [this](auto& v, auto&) { train_charset = v; }},
        {"eval_charset", [this](auto& v, auto&) { eval_charset = v; }},
        {"max_word_len", [this](auto& v, auto& w) { max_word_len = parse_int(v, w); }},
        {"text_len", [this](auto& v, auto& w) { text_len = parse_int(v, w); }},
        {"mask_k", [this](auto& v, auto& w) { mask_k = parse_int(v, w); }},
        {"mask_pairing", [this](auto& v, auto& w) { mask_pairing = parse_bool(v, w); }},
        {"per_sample_masks",
         [this](auto& v, auto& w) { per_sample_masks = parse_bool(v, w); }},
        {"freeze_image", [this](auto& v, auto& w) { freeze_image = parse_int(v, w); }},
        {"freeze_text", [this](auto& v, auto& w) { freeze_text = parse_int(v, w); }},
        {"text_token_only",
         [this](auto& v, auto& w) { text_token_only = parse_bool(v, w); }},
        {"adapter", [this](auto& v, auto&) { adapter = v; }},
        {"adapter_lambda",
         [this](auto& v, auto& w) { adapter_lambda = parse_double(v, w); }},
        {"adapter_r", [this](auto& v, auto& w) { adapter_r = parse_int(v, w); }},
        {"adapter_layers",
         [this](auto& v, auto& w) { adapter_layers = parse_int_list(v, w); }},
        {"base_lr", [this](auto& v, auto& w) { base_lr = parse_double(v, w); }},
        {"scratch_mult", [this](auto& v, auto& w) { scratch_mult = parse_double(v, w); }},
        {"weight_decay", [this](auto& v, auto& w) { weight_decay = parse_double(v, w); }},
        {"beta1", [this](auto& v, auto& w) { beta1 = parse_double(v, w); }},
        {"beta2", [this](auto& v, auto& w) { beta2 = parse_double(v, w); }},
        {"adam_eps", [this](auto& v, auto& w) { adam_eps = parse_double(v, w); }},
        {"warmup_frac", [this](auto& v, auto& w) { warmup_frac = parse_double(v, w); }},
        {"epochs", [this](auto& v, auto& w) { epochs = parse_int(v, w); }},
        {"batch", [this](auto& v, auto& w) { batch = parse_int(v, w); }},
        {"accum_steps", [this](auto& v, auto& w) { accum_steps = parse_int(v, w); }},
        {"seed", [this](auto& v, auto& w) { seed = parse_u64(v, w); }},
        {"augment", [this](auto& v, auto& w) { augment = parse_bool(v, w); }},
        {"teacher_force_text",
         [this](auto& v, auto& w) { teacher_force_text = parse_bool(v, w); }},
        {"refine_iters", [this](auto& v, auto& w) { refine_iters = parse_int(v, w); }},
        {"fast_cross", [this](auto& v, auto& w) { fast_cross = parse_bool(v, w); }},
        {"log_every", [this](auto& v, auto& w) { log_every = parse_int(v, w); }},
        {"eval_every", [this](auto& v, auto& w) { eval_every = parse_int(v, w); }},
        {"eval_limit", [this](auto& v, auto& w) { eval_limit = parse_int(v, w); }},
    };

    std::stringstream ss(text);
    std::string line;
    std::map<std::string, int> first_use;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        std::string where = origin + ":" + std::to_string(lineno);
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(where + ": expected 'key = value', got '" + line + "'");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        auto it = setters.find(key);
        if (it == setters.end()) {
            throw ConfigError(where + ": unknown key '" + key + "'");
        }
        auto [use, fresh] = first_use.emplace(key, lineno);
        if (!fresh) {
            throw ConfigError(where + ": key '" + key + "' already set on line " +
                              std::to_string(use->second));
        }
        it->second(value, where);
    }
}

void Config::apply_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    apply_text(buf.str(), path);
}

std::string Config::to_text() const {
    std::ostringstream ss;
    auto kv = [&ss](const char* k, const std::string& v) { ss << k << " = " << v << "\n"; };
    kv("image_h", std::to_string(image_h));
    kv("image_w", std::to_string(image_w));
    kv("patch", std::to_string(patch));
    kv("img_layers", std::to_string(img_layers));
    kv("img_dim", std::to_string(img_dim));
    kv("img_heads", std::to_string(img_heads));
    kv("txt_layers", std::to_string(txt_layers));
    kv("txt_dim", std::to_string(txt_dim));
    kv("txt_heads", std::to_string(txt_heads));
    kv("embed_dim", std::to_string(embed_dim));
    kv("dec_depth", std::to_string(dec_depth));
    kv("dec_heads", std::to_string(dec_heads));
    kv("dropout", double_str(dropout));
    kv("train_charset", train_charset);
    kv("eval_charset", eval_charset);
    kv("max_word_len", std::to_string(max_word_len));
    kv("text_len", std::to_string(text_len));
    kv("mask_k", std::to_string(mask_k));
    kv("mask_pairing", bool_str(mask_pairing));
    kv("per_sample_masks", bool_str(per_sample_masks));
    kv("freeze_image", std::to_string(freeze_image));
    kv("freeze_text", std::to_string(freeze_text));
    kv("text_token_only", bool_str(text_token_only));
    kv("adapter", adapter);
    kv("adapter_lambda", double_str(adapter_lambda));
    kv("adapter_r", std::to_string(adapter_r));
    {
        std::string list;
        for (std::size_t i = 0; i < adapter_layers.size(); ++i) {
            if (i) list += ",";
            list += std::to_string(adapter_layers[i]);
        }
        kv("adapter_layers", list);
    }
    kv("base_lr", double_str(base_lr));
    kv("scratch_mult", double_str(scratch_mult));
    kv("weight_decay", double_str(weight_decay));
    kv("beta1", double_str(beta1));
    kv("beta2", double_str(beta2));
    kv("adam_eps", double_str(adam_eps));
    kv("warmup_frac", double_str(warmup_frac));
    kv("epochs", std::to_string(epochs));
    kv("batch", std::to_string(batch));
    kv("accum_steps", std::to_string(accum_steps));
    kv("seed", std::to_string(seed));
    kv("augment", bool_str(augment));
    kv("teacher_force_text", bool_str(teacher_force_text));
    kv("refine_iters", std::to_string(refine_iters));
    kv("fast_cross", bool_str(fast_cross));
    kv("log_every", std::to_string(log_every));
    kv("eval_every", std::to_string(eval_every));
    kv("eval_limit", std::to_string(eval_limit));
    return ss.str();
}

void Config::validate() const {
    auto positive = [](int v, const char* name) {
        if (v <= 0) throw ConfigError(std::string(name) + " must be positive");
    };
    positive(image_h, "image_h");
    positive(image_w, "image_w");
    positive(patch, "patch");
    positive(img_layers, "img_layers");
    positive(img_dim, "img_dim");
    positive(img_heads, "img_heads");
    positive(txt_layers, "txt_layers");
    positive(txt_dim, "txt_dim");
    positive(txt_heads, "txt_heads");
    positive(embed_dim, "embed_dim");
    positive(dec_depth, "dec_depth");
    positive(max_word_len, "max_word_len");
    positive(mask_k, "mask_k");
    positive(epochs, "epochs");
    positive(batch, "batch");
    positive(accum_steps, "accum_steps");
    if (image_h % patch != 0 || image_w % patch != 0) {
        throw ConfigError("image dimensions " + std::to_string(image_h) + "x" +
                          std::to_string(image_w) + " are not a multiple of patch " +
                          std::to_string(patch));
    }
    if (img_dim % img_heads != 0) throw ConfigError("img_dim must divide into img_heads");
    if (txt_dim % txt_heads != 0) throw ConfigError("txt_dim must divide into txt_heads");
    int dh = resolved_dec_heads();
    if (dh <= 0 || embed_dim % dh != 0) {
        throw ConfigError("embed_dim " + std::to_string(embed_dim) +
                          " must divide into " + std::to_string(dh) +
                          " decoder heads");
    }
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
    if (mask_k < 2) throw ConfigError("mask_k must be at least 2");
    if (text_len < 3) throw ConfigError("text_len must be at least 3");
    if (freeze_image < 0 || freeze_image > img_layers) {
        throw ConfigError("freeze_image outside 0.." + std::to_string(img_layers));
    }
    if (freeze_text < 0 || freeze_text > txt_layers) {
        throw ConfigError("freeze_text outside 0.." + std::to_string(txt_layers));
    }
    if (adapter != "none" && adapter != "residual" && adapter != "ladder") {
        throw ConfigError("adapter must be none, residual or ladder, got '" +
                          adapter + "'");
    }
    if (adapter_lambda < 0.0 || adapter_lambda > 1.0) {
        throw ConfigError("adapter_lambda must be in [0, 1]");
    }
    if (adapter_r != 2 && adapter_r != 4 && adapter_r != 8) {
        throw ConfigError("adapter_r must be 2, 4 or 8");
    }
    for (int l : adapter_layers) {
        if (l < 1 || l > img_layers) {
            throw ConfigError("adapter_layers entry " + std::to_string(l) +
                              " outside 1.." + std::to_string(img_layers));
        }
    }
    if (!std::is_sorted(adapter_layers.begin(), adapter_layers.end()) ||
        std::adjacent_find(adapter_layers.begin(), adapter_layers.end()) !=
            adapter_layers.end()) {
        throw ConfigError("adapter_layers must be strictly increasing");
    }
    if (adapter == "ladder" && adapter_layers.empty()) {
        throw ConfigError("ladder mode needs at least one connected layer");
    }
    if (warmup_frac < 0.0 || warmup_frac >= 1.0) {
        throw ConfigError("warmup_frac must be in [0, 1)");
    }
    if (refine_iters < 0) throw ConfigError("refine_iters must be non-negative");
    if (batch % accum_steps != 0) {
        throw ConfigError("batch " + std::to_string(batch) +
                          " must split evenly into accum_steps " +
                          std::to_string(accum_steps));
    }
    // Constructing the vocabularies validates charset contents.
    CharVocab vocab(resolved_train_charset(), max_word_len);
    std::string evalset = resolved_eval_charset();
    for (char c : evalset) {
        std::string folded = eval_filter(resolved_train_charset(), evalset);
        if (folded.find(c) == std::string::npos) {
            throw ConfigError(std::string("eval charset character '") + c +
                              "' has no folded counterpart in the train charset");
        }
    }
}

}  // namespace cmstr
