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

#include "cmstr/image.hpp"
#include "cmstr/nn.hpp"

namespace cmstr {

// The two feature towers. Both map their input into a shared embedding width
// so the decoders can attend over image rows alone or image and text rows
// concatenated.
//
// Freezing semantics per tower: blocks [0, freeze_layers) stop receiving
// gradients; the text tower also freezes its token/position embeddings as
// soon as any layer is frozen; freezing every layer freezes the whole tower
// including its final norm. The joint projection on top is scratch-trained
// and only freezes in adapter modes that freeze the full base.

enum class AdapterMode { kNone, kResidual, kLadder };

struct ImageEncoderCfg {
    int image_h = 32;
    int image_w = 128;
    int patch = 8;
    int layers = 6;
    int dim = 128;
    int heads = 4;
    int embed_dim = 128;
    double dropout = 0.0;
    AdapterMode adapter = AdapterMode::kNone;
    double adapter_lambda = 0.2;
    int adapter_r = 4;
    std::vector<int> connected_layers;  // ladder fusion points, 1-based

    int tokens_per_row() const { return image_w / patch; }
    int token_rows() const { return image_h / patch; }
    int seq_len() const { return token_rows() * tokens_per_row() + 1; }
};

template <typename Scalar>
class ImageEncoderT {
public:
    ImageEncoderT(ParamStore<Scalar>& store, const ImageEncoderCfg& cfg,
                  const std::string& prefix = "img")
        : cfg_(cfg) {
        const ParamMeta enc_w{ParamGroup::kEncoder, false};
        const ParamMeta enc_b{ParamGroup::kEncoder, true};
        const int pp = cfg_.patch * cfg_.patch * 3;
        patch_w_ = store.make(prefix + ".patch.w", cfg_.dim, pp, Init::kNormal, enc_w);
        patch_b_ = store.make(prefix + ".patch.b", 1, cfg_.dim, Init::kZero, enc_b);
        cls_ = store.make(prefix + ".cls", 1, cfg_.dim, Init::kNormal, enc_w);
        pos_ = store.make(prefix + ".pos", cfg_.seq_len(), cfg_.dim, Init::kNormal, enc_w);
        for (int l = 0; l < cfg_.layers; ++l) {
            blocks_.emplace_back(store, prefix + ".blk" + std::to_string(l), cfg_.dim,
                                 cfg_.heads, cfg_.dropout, ParamGroup::kEncoder);
        }
        ln_f_ = LayerNormParams<Scalar>(store, prefix + ".lnf", cfg_.dim,
                                        ParamGroup::kEncoder);
        proj_w_ = store.make(prefix + ".proj.w", cfg_.embed_dim, cfg_.dim, Init::kNormal,
                             {ParamGroup::kScratch, false});
        proj_b_ = store.make(prefix + ".proj.b", 1, cfg_.embed_dim, Init::kZero,
                             {ParamGroup::kScratch, true});

        if (cfg_.adapter == AdapterMode::kResidual) {
            const int bott = std::max(1, cfg_.embed_dim / 4);
            const ParamMeta sw{ParamGroup::kScratch, false};
            const ParamMeta sb{ParamGroup::kScratch, true};
            ad_w1_ = store.make(prefix + ".ad.w1", bott, cfg_.embed_dim, Init::kNormal, sw);
            ad_b1_ = store.make(prefix + ".ad.b1", 1, bott, Init::kZero, sb);
            // The second layer starts at zero so the adapter is initially the
            // (1 - lambda)-scaled identity.
            ad_w2_ = store.make(prefix + ".ad.w2", cfg_.embed_dim, bott, Init::kZero, sw);
            ad_b2_ = store.make(prefix + ".ad.b2", 1, cfg_.embed_dim, Init::kZero, sb);
        }
        if (cfg_.adapter == AdapterMode::kLadder) {
            const int w = cfg_.dim / cfg_.adapter_r;
            if (w < 1 || cfg_.dim % cfg_.adapter_r != 0) {
                throw ContractError("side width " + std::to_string(cfg_.dim) + "/" +
                                    std::to_string(cfg_.adapter_r) + " is not integral");
            }
            const int side_heads = std::max(1, w / 32);
            const ParamMeta sw{ParamGroup::kScratch, false};
            const ParamMeta sb{ParamGroup::kScratch, true};
            lst_down_in_w_ = store.make(prefix + ".lst.in.w", w, cfg_.dim, Init::kNormal, sw);
            lst_down_in_b_ = store.make(prefix + ".lst.in.b", 1, w, Init::kZero, sb);
            for (std::size_t i = 0; i < cfg_.connected_layers.size(); ++i) {
                std::string p = prefix + ".lst.c" + std::to_string(i);
                lst_down_w_.push_back(store.make(p + ".down.w", w, cfg_.dim, Init::kNormal, sw));
                lst_down_b_.push_back(store.make(p + ".down.b", 1, w, Init::kZero, sb));
                lst_gate_.push_back(store.make(p + ".gate", 1, 1, Init::kZero, sb));
                lst_blocks_.emplace_back(store, p + ".blk", w, side_heads, cfg_.dropout,
                                         ParamGroup::kScratch);
            }
            lst_up_w_ = store.make(prefix + ".lst.up.w", cfg_.dim, w, Init::kNormal, sw);
            lst_up_b_ = store.make(prefix + ".lst.up.b", 1, cfg_.dim, Init::kZero, sb);
        }
        // Adapter modes train only what sits beside or on top of the tower.
        if (cfg_.adapter == AdapterMode::kResidual) {
            freeze_tensors(base_tensors());
            freeze_tensors({ln_f_.gain, ln_f_.bias, proj_w_, proj_b_});
        } else if (cfg_.adapter == AdapterMode::kLadder) {
            freeze_tensors(base_tensors());
        }
    }

    // Pixels to joint-space features, one row per patch plus the leading
    // class token row.
    TensorPtr<Scalar> encode(TapeT<Scalar>* tape, const Image& img, bool train,
                             const RngCtx& ctx) const {
        if (img.h != cfg_.image_h || img.w != cfg_.image_w) {
            throw ContractError("encoder expects " + std::to_string(cfg_.image_h) + "x" +
                                std::to_string(cfg_.image_w) + " images, got " +
                                std::to_string(img.h) + "x" + std::to_string(img.w));
        }
        auto patches = tensor<Scalar>(patch_matrix(img));
        auto tokens = linear(tape, patches, patch_w_, patch_b_);
        auto x = concat_rows(tape, cls_, tokens);
        x = add(tape, x, embedding_rows(tape, pos_, iota_ids(cfg_.seq_len())));

        if (cfg_.adapter == AdapterMode::kLadder) {
            auto s = linear(tape, x, lst_down_in_w_, lst_down_in_b_);
            std::size_t c = 0;
            for (int l = 0; l < cfg_.layers; ++l) {
                x = blocks_[std::size_t(l)](tape, x, train, ctx);
                if (c < cfg_.connected_layers.size() &&
                    cfg_.connected_layers[c] == l + 1) {
                    auto down = linear(tape, x, lst_down_w_[c], lst_down_b_[c]);
                    s = gated_add(tape, lst_gate_[c], down, s);
                    s = lst_blocks_[c](tape, s, train, ctx);
                    ++c;
                }
            }
            auto u = linear(tape, s, lst_up_w_, lst_up_b_);
            return linear(tape, ln_f_(tape, u), proj_w_, proj_b_);
        }

        for (const auto& blk : blocks_) x = blk(tape, x, train, ctx);
        auto f = linear(tape, ln_f_(tape, x), proj_w_, proj_b_);
        if (cfg_.adapter == AdapterMode::kResidual) {
            auto mid = relu(tape, linear(tape, f, ad_w1_, ad_b1_));
            auto a = linear(tape, mid, ad_w2_, ad_b2_);
            Scalar lam = Scalar(cfg_.adapter_lambda);
            f = add(tape, scale(tape, a, lam), scale(tape, f, Scalar(1) - lam));
        }
        return f;
    }

    void apply_freezing(int freeze_layers) {
        if (freeze_layers < 0 || freeze_layers > cfg_.layers) {
            throw ContractError("freeze_layers " + std::to_string(freeze_layers) +
                                " outside 0.." + std::to_string(cfg_.layers));
        }
        for (int l = 0; l < freeze_layers; ++l) {
            freeze_tensors(blocks_[std::size_t(l)].tensors());
        }
        if (freeze_layers == cfg_.layers) {
            freeze_tensors({patch_w_, patch_b_, cls_, pos_, ln_f_.gain, ln_f_.bias});
        }
    }

    const ImageEncoderCfg& cfg() const { return cfg_; }

    // Everything below the joint projection, minus adapter additions.
    std::vector<TensorPtr<Scalar>> base_tensors() const {
        std::vector<TensorPtr<Scalar>> out = {patch_w_, patch_b_, cls_, pos_};
        for (const auto& blk : blocks_) {
            auto t = blk.tensors();
            out.insert(out.end(), t.begin(), t.end());
        }
        return out;
    }

    std::vector<TensorPtr<Scalar>> adapter_tensors() const {
        if (cfg_.adapter == AdapterMode::kResidual) {
            return {ad_w1_, ad_b1_, ad_w2_, ad_b2_};
        }
        if (cfg_.adapter == AdapterMode::kLadder) {
            std::vector<TensorPtr<Scalar>> out = side_linear_tensors();
            auto blocks = side_block_tensors();
            out.insert(out.end(), blocks.begin(), blocks.end());
            return out;
        }
        return {};
    }

    // The width-quadratic part of the ladder: the side transformer blocks.
    std::vector<TensorPtr<Scalar>> side_block_tensors() const {
        std::vector<TensorPtr<Scalar>> out;
        for (const auto& blk : lst_blocks_) {
            auto t = blk.tensors();
            out.insert(out.end(), t.begin(), t.end());
        }
        return out;
    }

    // The width-linear rest: fusion downsamplers, gates, in/out resamplers.
    std::vector<TensorPtr<Scalar>> side_linear_tensors() const {
        if (cfg_.adapter != AdapterMode::kLadder) return {};
        std::vector<TensorPtr<Scalar>> out = {lst_down_in_w_, lst_down_in_b_,
                                              lst_up_w_, lst_up_b_};
        for (std::size_t i = 0; i < lst_down_w_.size(); ++i) {
            out.push_back(lst_down_w_[i]);
            out.push_back(lst_down_b_[i]);
            out.push_back(lst_gate_[i]);
        }
        return out;
    }

private:
    Mat<Scalar> patch_matrix(const Image& img) const {
        const int p = cfg_.patch;
        const int rows = cfg_.token_rows(), cols = cfg_.tokens_per_row();
        Mat<Scalar> m(rows * cols, p * p * 3);
        for (int pr = 0; pr < rows; ++pr) {
            for (int pc = 0; pc < cols; ++pc) {
                Eigen::Index row = Eigen::Index(pr) * cols + pc;
                Eigen::Index k = 0;
                for (int y = 0; y < p; ++y) {
                    const std::uint8_t* line = img.px(pr * p + y, pc * p);
                    for (int x = 0; x < p * 3; ++x) {
                        m(row, k++) = Scalar(float(line[x]) / 127.5f - 1.0f);
                    }
                }
            }
        }
        return m;
    }

    ImageEncoderCfg cfg_;
    TensorPtr<Scalar> patch_w_, patch_b_, cls_, pos_;
    std::vector<TransformerBlock<Scalar>> blocks_;
    LayerNormParams<Scalar> ln_f_;
    TensorPtr<Scalar> proj_w_, proj_b_;
    // residual adapter
    TensorPtr<Scalar> ad_w1_, ad_b1_, ad_w2_, ad_b2_;
    // ladder side network
    TensorPtr<Scalar> lst_down_in_w_, lst_down_in_b_, lst_up_w_, lst_up_b_;
    std::vector<TensorPtr<Scalar>> lst_down_w_, lst_down_b_, lst_gate_;
    std::vector<TransformerBlock<Scalar>> lst_blocks_;
};

struct TextEncoderCfg {
    int vocab = 40;
    int width = 16;  // token positions per input
    int layers = 4;
    int dim = 128;
    int heads = 4;
    int embed_dim = 128;
    double dropout = 0.0;
    bool token_only = false;
};

template <typename Scalar>
class TextEncoderT {
public:
    TextEncoderT(ParamStore<Scalar>& store, const TextEncoderCfg& cfg,
                 const std::string& prefix = "txt")
        : cfg_(cfg) {
        const ParamMeta enc_w{ParamGroup::kEncoder, false};
        tok_ = store.make(prefix + ".tok", cfg_.vocab, cfg_.dim, Init::kNormal, enc_w);
        pos_ = store.make(prefix + ".pos", cfg_.width, cfg_.dim, Init::kNormal, enc_w);
        for (int l = 0; l < cfg_.layers; ++l) {
            blocks_.emplace_back(store, prefix + ".blk" + std::to_string(l), cfg_.dim,
                                 cfg_.heads, cfg_.dropout, ParamGroup::kEncoder);
        }
        ln_f_ = LayerNormParams<Scalar>(store, prefix + ".lnf", cfg_.dim,
                                        ParamGroup::kEncoder);
        proj_w_ = store.make(prefix + ".proj.w", cfg_.embed_dim, cfg_.dim, Init::kNormal,
                             {ParamGroup::kScratch, false});
        proj_b_ = store.make(prefix + ".proj.b", 1, cfg_.embed_dim, Init::kZero,
                             {ParamGroup::kScratch, true});
        if (cfg_.token_only) {
            // Features are projected embeddings alone; the unused blocks and
            // the embeddings themselves stay fixed, mirroring a tower whose
            // pretrained token table is the only contribution.
            freeze_tensors({tok_, pos_, ln_f_.gain, ln_f_.bias});
            for (auto& blk : blocks_) freeze_tensors(blk.tensors());
        }
    }

    TensorPtr<Scalar> encode(TapeT<Scalar>* tape, const std::vector<int>& ids,
                             bool train, const RngCtx& ctx) const {
        if (int(ids.size()) != cfg_.width) {
            throw ContractError("text encoder expects " + std::to_string(cfg_.width) +
                                " ids, got " + std::to_string(ids.size()));
        }
        auto x = add(tape, embedding_rows(tape, tok_, ids),
                     embedding_rows(tape, pos_, iota_ids(cfg_.width)));
        if (!cfg_.token_only) {
            for (const auto& blk : blocks_) x = blk(tape, x, train, ctx);
        }
        return linear(tape, ln_f_(tape, x), proj_w_, proj_b_);
    }

    void apply_freezing(int freeze_layers) {
        if (freeze_layers < 0 || freeze_layers > cfg_.layers) {
            throw ContractError("freeze_layers " + std::to_string(freeze_layers) +
                                " outside 0.." + std::to_string(cfg_.layers));
        }
        for (int l = 0; l < freeze_layers; ++l) {
            freeze_tensors(blocks_[std::size_t(l)].tensors());
        }
        if (freeze_layers > 0) freeze_tensors({tok_, pos_});
        if (freeze_layers == cfg_.layers) freeze_tensors({ln_f_.gain, ln_f_.bias});
    }

    const TextEncoderCfg& cfg() const { return cfg_; }

    std::vector<TensorPtr<Scalar>> base_tensors() const {
        std::vector<TensorPtr<Scalar>> out = {tok_, pos_};
        for (const auto& blk : blocks_) {
            auto t = blk.tensors();
            out.insert(out.end(), t.begin(), t.end());
        }
        return out;
    }

private:
    TextEncoderCfg cfg_;
    TensorPtr<Scalar> tok_, pos_;
    std::vector<TransformerBlock<Scalar>> blocks_;
    LayerNormParams<Scalar> ln_f_;
    TensorPtr<Scalar> proj_w_, proj_b_;
};

}  // namespace cmstr
