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

#include <cstdint>
#include <string>
#include <vector>

namespace cmstr {

// Run configuration: line-oriented `key = value` files, '#' comments, every
// key defaulted, unknown keys rejected. The same struct round-trips through
// checkpoints as a text snapshot so a run can be reproduced from its
// artifacts alone.
struct Config {
    // model dims
    int image_h = 32;
    int image_w = 128;
    int patch = 8;
    int img_layers = 6;
    int img_dim = 128;
    int img_heads = 4;
    int txt_layers = 4;
    int txt_dim = 128;
    int txt_heads = 4;
    int embed_dim = 128;  // joint image-text width D
    int dec_depth = 1;
    int dec_heads = 0;  // 0: derive as embed_dim / 32
    double dropout = 0.1;

    // charsets and sequence lengths
    std::string train_charset;  // empty: 94 printable ASCII, digits first
    std::string eval_charset;   // empty: lowercase alphanumerics
    int max_word_len = 25;
    int text_len = 16;

    // permutation masks
    int mask_k = 6;
    bool mask_pairing = false;
    bool per_sample_masks = false;

    // encoder freezing
    int freeze_image = 0;
    int freeze_text = 2;
    bool text_token_only = false;

    // parameter-efficient adapters on the image tower
    std::string adapter = "none";  // none | residual | ladder
    double adapter_lambda = 0.2;
    int adapter_r = 4;
    std::vector<int> adapter_layers = {2, 4, 6};

    // optimizer
    double base_lr = 8.4e-5;  // encoder peak at batch 512
    double scratch_mult = 19.0;
    double weight_decay = 0.2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double warmup_frac = 0.075;
    int epochs = 10;
    int batch = 16;
    int accum_steps = 1;
    std::uint64_t seed = 42;
    bool augment = false;
    bool teacher_force_text = false;

    // decode policy
    int refine_iters = 1;
    bool fast_cross = false;

    // bookkeeping
    int log_every = 10;
    int eval_every = 0;  // steps between held-out accuracy probes; 0 disables
    int eval_limit = 256;

    int resolved_dec_heads() const { return dec_heads > 0 ? dec_heads : embed_dim / 32; }
    std::string resolved_train_charset() const;
    std::string resolved_eval_charset() const;

    // Parses and overlays key = value text; unknown keys, bad values and
    // duplicate keys are config errors that name the offending line.
    void apply_text(const std::string& text, const std::string& origin);
    void apply_file(const std::string& path);

    // Every key, one per line, in parse-compatible form.
    std::string to_text() const;

    // Cross-field checks (divisibility, ranges). Throws ConfigError.
    void validate() const;
};

}  // namespace cmstr
