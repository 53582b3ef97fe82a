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

#include "cmstr/masks.hpp"
#include "cmstr/model.hpp"

namespace cmstr {

// Inference: dual predict-and-refine.
//
// The visual branch decodes autoregressively, the cross-modal branch decodes
// autoregressively over the joint features, then both branches re-decode
// under the cloze mask for refine_iters rounds, each position re-reading the
// full previous prediction except itself. The cross-modal output is the
// final answer. fast_cross replaces the cross-modal AR loop with a single
// full-sequence decode whose context is the visual prediction.

struct DecodePolicy {
    int refine_iters = 1;
    bool fast_cross = false;
};

struct Prediction {
    std::string visual;
    std::string cross;
    std::string final;
};

template <typename Scalar>
struct ArResult {
    Mat<Scalar> logits;  // seq_len x num_classes
    std::string text;
};

// Argmax ids of the logit rows, as context tokens: [B] first, then one id per
// row 0..seq_len-2. Rows past the word end contribute whatever they argmax
// to; the embedding table covers every class id.
template <typename Scalar>
std::vector<int> context_from_logits(const Mat<Scalar>& logits, const CharVocab& vocab) {
    std::vector<int> ids;
    ids.reserve(std::size_t(vocab.seq_len()));
    ids.push_back(vocab.bos_id());
    for (Eigen::Index r = 0; r + 1 < logits.rows(); ++r) {
        Eigen::Index best = 0;
        logits.row(r).maxCoeff(&best);
        ids.push_back(int(best));
    }
    return ids;
}

// Greedy string over the content rows. Row seq_len-1 predicts the position
// after a maximum-length word, which is never a character, so it is excluded;
// emitted strings stay within max_word_len.
template <typename Scalar>
std::string greedy_text(const Mat<Scalar>& logits, const CharVocab& vocab) {
    std::vector<int> ids = greedy_ids<Scalar>(logits.topRows(logits.rows() - 1));
    return vocab.decode(ids);
}

template <typename Scalar>
ArResult<Scalar> ar_decode(const DecoderT<Scalar>& dec, const CharVocab& vocab,
                           const TensorPtr<Scalar>& feat) {
    const int n = vocab.seq_len();
    RngCtx ctx{0, 0, 0};
    ArResult<Scalar> out;
    out.logits = Mat<Scalar>::Zero(n, vocab.num_classes());

    std::vector<int> ctx_ids{vocab.bos_id()};
    int stop_step = 0;  // rows filled so far; 0 means no early stop yet
    for (int k = 1; k <= n - 1; ++k) {
        // The first step has a single context row, below the mask factory's
        // minimum side; its causal mask is the 1x1 zero matrix.
        Mat<Scalar> mask = k == 1 ? Mat<Scalar>::Zero(1, 1)
                                  : cast_mask<Scalar>(ar_mask(k));
        auto y = dec.decode(nullptr, ctx_ids, mask, feat, false, ctx);
        out.logits.row(k - 1) = y->value.row(k - 1);
        Eigen::Index best = 0;
        out.logits.row(k - 1).maxCoeff(&best);
        if (int(best) == vocab.eos_id()) {
            stop_step = k;
            break;
        }
        ctx_ids.push_back(int(best));
    }

    // Refinement reads logit rows 0..n-2. A stop at step k <= n-2 leaves some
    // of those empty; one full-length pass fills them. The incremental rows
    // are kept as decoded (the fill pass reproduces them anyway, since each
    // row sees only its mask-visible context prefix).
    if (stop_step >= 1 && stop_step <= n - 2) {
        while (int(ctx_ids.size()) < n) ctx_ids.push_back(vocab.pad_id());
        Mat<Scalar> mask = cast_mask<Scalar>(ar_mask(n));
        auto y = dec.decode(nullptr, ctx_ids, mask, feat, false, ctx);
        for (int r = stop_step; r < n; ++r) out.logits.row(r) = y->value.row(r);
    }
    out.text = greedy_text(out.logits, vocab);
    return out;
}

template <typename Scalar>
Prediction predict(const ModelT<Scalar>& model, const Image& img,
                   const DecodePolicy& policy) {
    if (policy.refine_iters < 0) throw ContractError("refine_iters must be >= 0");
    const CharVocab& vocab = model.vocab();
    const int n = vocab.seq_len();
    RngCtx ctx{0, 0, 0};

    auto feat_img = model.image_encoder().encode(nullptr, img, false, ctx);
    ArResult<Scalar> vis = ar_decode(model.visual_decoder(), vocab, feat_img);

    auto joint = [&](const std::string& text) {
        auto feat_txt = model.text_encoder().encode(
            nullptr, model.text_vocab().encode(text), false, ctx);
        return concat_rows<Scalar>(nullptr, feat_img, feat_txt);
    };

    auto feat_joint = joint(vis.text);
    Mat<Scalar> cross_logits;
    if (policy.fast_cross) {
        auto ctx_ids = context_from_logits(vis.logits, vocab);
        Mat<Scalar> mask = cast_mask<Scalar>(ar_mask(n));
        cross_logits = model.cross_decoder()
                           .decode(nullptr, ctx_ids, mask, feat_joint, false, ctx)
                           ->value;
    } else {
        cross_logits = ar_decode(model.cross_decoder(), vocab, feat_joint).logits;
    }
    std::string cross_text = greedy_text(cross_logits, vocab);

    Mat<Scalar> cloze = cast_mask<Scalar>(cloze_mask(n));
    for (int t = 0; t < policy.refine_iters; ++t) {
        auto vis_ctx = context_from_logits(vis.logits, vocab);
        vis.logits = model.visual_decoder()
                         .decode(nullptr, vis_ctx, cloze, feat_img, false, ctx)
                         ->value;
        vis.text = greedy_text(vis.logits, vocab);
        feat_joint = joint(vis.text);
        auto cross_ctx = context_from_logits(cross_logits, vocab);
        cross_logits = model.cross_decoder()
                           .decode(nullptr, cross_ctx, cloze, feat_joint, false, ctx)
                           ->value;
        cross_text = greedy_text(cross_logits, vocab);
    }

    Prediction out;
    out.visual = vis.text;
    out.cross = cross_text;
    out.final = cross_text;
    return out;
}

}  // namespace cmstr
