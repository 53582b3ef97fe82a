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

#include <atomic>
#include <string>
#include <vector>

#include "cmstr/nn.hpp"

namespace cmstr {

// Two-stage attention decoder.
//
// Stage one attends position queries over context token embeddings under a
// permutation mask; stage two attends the result over encoder features with
// no mask; a feed-forward residual and a linear head produce per-position
// class logits. All residual streams are pre-normed, with dropout on the
// attention and feed-forward outputs.
//
// Rows of the output correspond to character positions 1..n; the context ids
// are the begin token followed by characters 1..n-1. Decoding a prefix of
// length n < seq_len is the same computation on fewer rows, which is what
// makes incremental left-to-right decoding agree with a full pass row for
// row: queries never attend to each other.

struct DecoderCfg {
    int embed_dim = 128;
    int heads = 4;  // embed_dim / 32 at desk scale
    int depth = 1;
    int num_classes = 95;  // end-of-word + characters
    int table_size = 97;   // + begin and pad context tokens
    int seq_len = 26;
    double dropout = 0.0;
};

template <typename Scalar>
class DecoderT {
public:
    DecoderT(ParamStore<Scalar>& store, const DecoderCfg& cfg, const std::string& prefix)
        : cfg_(cfg) {
        const ParamMeta w{ParamGroup::kScratch, false};
        const ParamMeta b{ParamGroup::kScratch, true};
        // Learned per-position queries; exempt from weight decay like biases.
        pos_query_ = store.make(prefix + ".posq", cfg_.seq_len, cfg_.embed_dim,
                                Init::kNormal, b);
        ctx_tok_ = store.make(prefix + ".ctx.tok", cfg_.table_size, cfg_.embed_dim,
                              Init::kNormal, w);
        ctx_pos_ = store.make(prefix + ".ctx.pos", cfg_.seq_len, cfg_.embed_dim,
                              Init::kNormal, w);
        for (int d = 0; d < cfg_.depth; ++d) {
            std::string p = prefix + ".blk" + std::to_string(d);
            Block blk;
            blk.ln_q = LayerNormParams<Scalar>(store, p + ".lnq", cfg_.embed_dim,
                                               ParamGroup::kScratch);
            blk.ln_c = LayerNormParams<Scalar>(store, p + ".lnc", cfg_.embed_dim,
                                               ParamGroup::kScratch);
            blk.ln_m = LayerNormParams<Scalar>(store, p + ".lnm", cfg_.embed_dim,
                                               ParamGroup::kScratch);
            blk.ln_mlp = LayerNormParams<Scalar>(store, p + ".lnmlp", cfg_.embed_dim,
                                                 ParamGroup::kScratch);
            blk.ctx_attn = AttnWeights<Scalar>(store, p + ".ctxattn", cfg_.embed_dim,
                                               cfg_.heads, ParamGroup::kScratch);
            blk.feat_attn = AttnWeights<Scalar>(store, p + ".featattn", cfg_.embed_dim,
                                                cfg_.heads, ParamGroup::kScratch);
            blk.mlp = MlpParams<Scalar>(store, p + ".mlp", cfg_.embed_dim,
                                        ParamGroup::kScratch);
            blk.ctx_drop = {store.alloc_dropout_site(), cfg_.dropout};
            blk.feat_drop = {store.alloc_dropout_site(), cfg_.dropout};
            blk.mlp_drop = {store.alloc_dropout_site(), cfg_.dropout};
            blocks_.push_back(std::move(blk));
        }
        head_w_ = store.make(prefix + ".head.w", cfg_.num_classes, cfg_.embed_dim,
                             Init::kNormal, w);
        head_b_ = store.make(prefix + ".head.b", 1, cfg_.num_classes, Init::kZero, b);
    }

    // Context embeddings for ids (token plus position), reusable across the
    // mask set of a training step.
    TensorPtr<Scalar> context(TapeT<Scalar>* tape, const std::vector<int>& ids) const {
        if (int(ids.size()) > cfg_.seq_len) {
            throw ContractError("context of " + std::to_string(ids.size()) +
                                " ids exceeds " + std::to_string(cfg_.seq_len) +
                                " positions");
        }
        return add(tape, embedding_rows(tape, ctx_tok_, ids),
                   embedding_rows(tape, ctx_pos_, iota_ids(int(ids.size()))));
    }

    TensorPtr<Scalar> decode(TapeT<Scalar>* tape, const std::vector<int>& ctx_ids,
                             const Mat<Scalar>& mask, const TensorPtr<Scalar>& feat,
                             bool train = false, const RngCtx& ctx = {}) const {
        return decode_embedded(tape, context(tape, ctx_ids), mask, feat, train, ctx);
    }

    TensorPtr<Scalar> decode_embedded(TapeT<Scalar>* tape, const TensorPtr<Scalar>& c,
                                      const Mat<Scalar>& mask,
                                      const TensorPtr<Scalar>& feat, bool train = false,
                                      const RngCtx& ctx = {}) const {
        const Eigen::Index n = c->rows();
        if (mask.rows() != n || mask.cols() != n) {
            throw ContractError("mask " + std::to_string(mask.rows()) + "x" +
                                std::to_string(mask.cols()) + " does not cover " +
                                std::to_string(n) + " positions");
        }
        if (feat->cols() != cfg_.embed_dim) {
            throw ContractError("features are " + std::to_string(feat->cols()) +
                                " wide, decoder expects " +
                                std::to_string(cfg_.embed_dim));
        }
        ++invocations_;
        auto q = embedding_rows(tape, pos_query_, iota_ids(int(n)));
        for (const auto& blk : blocks_) {
            auto a1 = multihead_attention(tape, blk.ctx_attn, blk.ln_q(tape, q),
                                          blk.ln_c(tape, c), &mask);
            q = add(tape, q, blk.ctx_drop(tape, a1, train, ctx));
            auto a2 = multihead_attention(tape, blk.feat_attn, blk.ln_m(tape, q), feat);
            q = add(tape, q, blk.feat_drop(tape, a2, train, ctx));
            q = add(tape, q, blk.mlp_drop(tape, blk.mlp(tape, blk.ln_mlp(tape, q)),
                                          train, ctx));
        }
        return linear(tape, q, head_w_, head_b_);
    }

    const DecoderCfg& cfg() const { return cfg_; }

    // Forward-pass counter; the inference paths are compared by it.
    std::int64_t invocations() const { return invocations_; }
    void reset_invocations() const { invocations_ = 0; }

private:
    struct Block {
        LayerNormParams<Scalar> ln_q, ln_c, ln_m, ln_mlp;
        AttnWeights<Scalar> ctx_attn, feat_attn;
        MlpParams<Scalar> mlp;
        DropoutSite ctx_drop, feat_drop, mlp_drop;
    };

    DecoderCfg cfg_;
    TensorPtr<Scalar> pos_query_, ctx_tok_, ctx_pos_, head_w_, head_b_;
    std::vector<Block> blocks_;
    mutable std::atomic<std::int64_t> invocations_{0};
};

}  // namespace cmstr
