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

#include "cmstr/config.hpp"
#include "cmstr/decoder.hpp"
#include "cmstr/encoders.hpp"
#include "cmstr/tokenizer.hpp"

namespace cmstr {

// The full two-branch recognizer.
//
// The visual branch decodes over image features alone. The cross-modal branch
// re-reads the visual branch's greedy prediction through the text encoder and
// decodes over image and text features concatenated. Image features are
// detached before the concatenation, so the cross-modal loss reaches the text
// encoder but never the image tower; the image tower trains through the
// visual loss alone. Both decoders share the per-step mask draw but no
// parameters.

template <typename Scalar>
Mat<Scalar> cast_mask(const MatF& m) {
    return m.template cast<Scalar>();
}

template <typename Scalar>
std::vector<int> greedy_ids(const Mat<Scalar>& logits) {
    std::vector<int> ids(std::size_t(logits.rows()));
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::Index best = 0;
        logits.row(i).maxCoeff(&best);
        ids[std::size_t(i)] = int(best);
    }
    return ids;
}

template <typename Scalar>
struct TrainStepOutput {
    TensorPtr<Scalar> loss;  // (sum over samples of both branch losses) * loss_scale
    double vis_ce = 0.0;     // per-sample means, each averaged over the mask set
    double cross_ce = 0.0;
    std::vector<Mat<Scalar>> vis_logits;  // left-to-right teacher-forced logits
};

template <typename Scalar>
class ModelT {
public:
    explicit ModelT(const Config& cfg)
        : cfg_(cfg),
          char_vocab_(cfg.resolved_train_charset(), cfg.max_word_len),
          text_vocab_(cfg.text_len),
          store_(cfg.seed),
          img_(store_, image_cfg(cfg), "img"),
          txt_(store_, text_cfg(cfg, text_vocab_), "txt"),
          dec_vis_(store_, decoder_cfg(cfg, char_vocab_), "dvis"),
          dec_cross_(store_, decoder_cfg(cfg, char_vocab_), "dcross") {
        if (cfg_.adapter == "none") img_.apply_freezing(cfg_.freeze_image);
        txt_.apply_freezing(cfg_.freeze_text);
    }

    // Teacher-forced pass over one micro-batch, all samples on one tape.
    //
    // mask_sets holds one mask list shared by the whole micro-batch, or one
    // list per sample. sample_ids are the positions within the full logical
    // batch; they key per-sample dropout streams, which keeps a batch split
    // into accumulation chunks on the same draws as the unsplit batch.
    TrainStepOutput<Scalar> forward_train(TapeT<Scalar>* tape,
                                          const std::vector<const Image*>& images,
                                          const std::vector<std::string>& labels,
                                          const std::vector<std::vector<MatF>>& mask_sets,
                                          std::uint64_t step,
                                          const std::vector<std::uint64_t>& sample_ids,
                                          Scalar loss_scale = Scalar(1),
                                          bool train = true) const {
        const std::size_t batch = images.size();
        if (labels.size() != batch || sample_ids.size() != batch || batch == 0) {
            throw ContractError("forward_train: batch lists disagree or are empty");
        }
        if (mask_sets.size() != 1 && mask_sets.size() != batch) {
            throw ContractError("forward_train: need one mask set, or one per sample");
        }

        TrainStepOutput<Scalar> out;
        TensorPtr<Scalar> total;
        for (std::size_t i = 0; i < batch; ++i) {
            const auto& mask_set = mask_sets[mask_sets.size() == 1 ? 0 : i];
            if (mask_set.size() < 1) throw ContractError("empty mask set");
            RngCtx ctx{cfg_.seed, step, sample_ids[i]};

            auto feat_img = img_.encode(tape, *images[i], train, ctx);
            auto targets = char_vocab_.encode_target(labels[i]);
            auto ctx_ids = char_vocab_.encode_context(labels[i]);

            auto c_vis = dec_vis_.context(tape, ctx_ids);
            TensorPtr<Scalar> vis_sum;
            Mat<Scalar> l2r_logits;
            for (std::size_t m = 0; m < mask_set.size(); ++m) {
                Mat<Scalar> mask = cast_mask<Scalar>(mask_set[m]);
                auto logits = dec_vis_.decode_embedded(tape, c_vis, mask, feat_img,
                                                       train, ctx);
                if (m == 0) l2r_logits = logits->value;
                auto ce = cross_entropy(tape, logits, targets, char_vocab_.pad_id());
                vis_sum = m == 0 ? ce : add(tape, vis_sum, ce);
            }
            auto vis_loss = scale(tape, vis_sum, Scalar(1) / Scalar(mask_set.size()));

            // The text branch reads the visual prediction (or the label under
            // teacher forcing); either way it is data, not a gradient path.
            std::string text_in = cfg_.teacher_force_text
                                      ? labels[i]
                                      : char_vocab_.decode(greedy_ids<Scalar>(l2r_logits));
            auto feat_txt = txt_.encode(tape, text_vocab_.encode(text_in), train, ctx);
            auto feat_joint = concat_rows(tape, stop_gradient(feat_img), feat_txt);

            auto c_cross = dec_cross_.context(tape, ctx_ids);
            TensorPtr<Scalar> cross_sum;
            for (std::size_t m = 0; m < mask_set.size(); ++m) {
                Mat<Scalar> mask = cast_mask<Scalar>(mask_set[m]);
                auto logits = dec_cross_.decode_embedded(tape, c_cross, mask, feat_joint,
                                                         train, ctx);
                auto ce = cross_entropy(tape, logits, targets, char_vocab_.pad_id());
                cross_sum = m == 0 ? ce : add(tape, cross_sum, ce);
            }
            auto cross_loss = scale(tape, cross_sum, Scalar(1) / Scalar(mask_set.size()));

            out.vis_ce += double(vis_loss->value(0, 0));
            out.cross_ce += double(cross_loss->value(0, 0));
            out.vis_logits.push_back(std::move(l2r_logits));
            auto sample_loss = add(tape, vis_loss, cross_loss);
            total = i == 0 ? sample_loss : add(tape, total, sample_loss);
        }
        out.vis_ce /= double(batch);
        out.cross_ce /= double(batch);
        out.loss = scale(tape, total, loss_scale);
        return out;
    }

    // Trainable tensors split into their optimizer groups. Frozen tensors
    // appear in neither.
    struct Groups {
        std::vector<TensorPtr<Scalar>> encoder;
        std::vector<TensorPtr<Scalar>> scratch;
        std::vector<bool> encoder_decay_exempt;
        std::vector<bool> scratch_decay_exempt;
    };

    Groups parameter_groups() const {
        Groups g;
        for (std::size_t i = 0; i < store_.size(); ++i) {
            const auto& p = store_.params()[i];
            if (!p->requires_grad) continue;
            const auto& meta = store_.meta(i);
            if (meta.group == ParamGroup::kEncoder) {
                g.encoder.push_back(p);
                g.encoder_decay_exempt.push_back(meta.decay_exempt);
            } else {
                g.scratch.push_back(p);
                g.scratch_decay_exempt.push_back(meta.decay_exempt);
            }
        }
        return g;
    }

    struct ParamAudit {
        std::int64_t total = 0;
        std::int64_t trainable = 0;
        std::int64_t encoder_trainable = 0;
        std::int64_t scratch_trainable = 0;
        std::int64_t adapter = 0;      // residual adapter or full ladder additions
        std::int64_t lst_blocks = 0;   // width-quadratic side transformer blocks
        std::int64_t lst_linears = 0;  // width-linear resamplers, fused gates
    };

    ParamAudit parameter_audit() const {
        ParamAudit a;
        for (std::size_t i = 0; i < store_.size(); ++i) {
            const auto& p = store_.params()[i];
            a.total += p->size();
            if (!p->requires_grad) continue;
            a.trainable += p->size();
            (store_.meta(i).group == ParamGroup::kEncoder ? a.encoder_trainable
                                                          : a.scratch_trainable) +=
                p->size();
        }
        a.adapter = count_params(img_.adapter_tensors());
        a.lst_blocks = count_params(img_.side_block_tensors());
        a.lst_linears = count_params(img_.side_linear_tensors());
        return a;
    }

    const Config& cfg() const { return cfg_; }
    const CharVocab& vocab() const { return char_vocab_; }
    const TextVocab& text_vocab() const { return text_vocab_; }
    ParamStore<Scalar>& store() { return store_; }
    const ParamStore<Scalar>& store() const { return store_; }
    ImageEncoderT<Scalar>& image_encoder() { return img_; }
    const ImageEncoderT<Scalar>& image_encoder() const { return img_; }
    TextEncoderT<Scalar>& text_encoder() { return txt_; }
    const TextEncoderT<Scalar>& text_encoder() const { return txt_; }
    const DecoderT<Scalar>& visual_decoder() const { return dec_vis_; }
    const DecoderT<Scalar>& cross_decoder() const { return dec_cross_; }

private:
    static ImageEncoderCfg image_cfg(const Config& c) {
        ImageEncoderCfg ic;
        ic.image_h = c.image_h;
        ic.image_w = c.image_w;
        ic.patch = c.patch;
        ic.layers = c.img_layers;
        ic.dim = c.img_dim;
        ic.heads = c.img_heads;
        ic.embed_dim = c.embed_dim;
        ic.dropout = c.dropout;
        ic.adapter = c.adapter == "residual" ? AdapterMode::kResidual
                     : c.adapter == "ladder" ? AdapterMode::kLadder
                                             : AdapterMode::kNone;
        ic.adapter_lambda = c.adapter_lambda;
        ic.adapter_r = c.adapter_r;
        ic.connected_layers = c.adapter_layers;
        return ic;
    }

    static TextEncoderCfg text_cfg(const Config& c, const TextVocab& tv) {
        TextEncoderCfg tc;
        tc.vocab = tv.table_size();
        tc.width = c.text_len;
        tc.layers = c.txt_layers;
        tc.dim = c.txt_dim;
        tc.heads = c.txt_heads;
        tc.embed_dim = c.embed_dim;
        tc.dropout = c.dropout;
        tc.token_only = c.text_token_only;
        return tc;
    }

    static DecoderCfg decoder_cfg(const Config& c, const CharVocab& cv) {
        DecoderCfg dc;
        dc.embed_dim = c.embed_dim;
        dc.heads = c.resolved_dec_heads();
        dc.depth = c.dec_depth;
        dc.num_classes = cv.num_classes();
        dc.table_size = cv.table_size();
        dc.seq_len = cv.seq_len();
        dc.dropout = c.dropout;
        return dc;
    }

    Config cfg_;
    CharVocab char_vocab_;
    TextVocab text_vocab_;
    ParamStore<Scalar> store_;
    ImageEncoderT<Scalar> img_;
    TextEncoderT<Scalar> txt_;
    DecoderT<Scalar> dec_vis_;
    DecoderT<Scalar> dec_cross_;
};

using Model = ModelT<float>;

}  // namespace cmstr
