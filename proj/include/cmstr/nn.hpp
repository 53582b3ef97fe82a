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
#include <memory>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "cmstr/tensor.hpp"

namespace cmstr {

// Shared building blocks: the parameter registry, multi-head attention and
// the pre-norm transformer block used by both encoders and the decoders.

// Optimizer group of a parameter. Encoder covers the image/text towers;
// Scratch is everything trained from zero on top (decoders, position queries,
// adapters, joint projections) and runs at a higher learning rate.
enum class ParamGroup { kEncoder, kScratch };

enum class Init { kZero, kOne, kNormal };  // kNormal: Gaussian, sigma 0.02

struct ParamMeta {
    ParamGroup group = ParamGroup::kScratch;
    bool decay_exempt = false;  // layer-norm params, biases, position queries
};

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Ordered, named registry of trainable tensors. Initial values are drawn
// from a stream keyed by (seed, name), so construction order never changes
// the weights, and draws are rounded to f32 before conversion so the float
// and double instantiations of a model start bit-equivalent.
template <typename Scalar>
class ParamStore {
public:
    explicit ParamStore(std::uint64_t seed) : seed_(seed) {}

    TensorPtr<Scalar> make(const std::string& name, Eigen::Index rows,
                           Eigen::Index cols, Init init, ParamMeta meta) {
        if (index_.count(name)) {
            throw ContractError("parameter '" + name + "' registered twice");
        }
        Mat<Scalar> v(rows, cols);
        switch (init) {
            case Init::kZero:
                v.setZero();
                break;
            case Init::kOne:
                v.setOnes();
                break;
            case Init::kNormal: {
                Rng rng = Rng::derive(seed_, 0x1217, fnv1a(name));
                for (Eigen::Index i = 0; i < v.size(); ++i) {
                    v.data()[i] = Scalar(rng.normal_f32(0.0f, 0.02f));
                }
                break;
            }
        }
        auto t = tensor<Scalar>(std::move(v), true, name);
        index_[name] = params_.size();
        params_.push_back(t);
        meta_.push_back(meta);
        return t;
    }

    int alloc_dropout_site() { return next_dropout_site_++; }

    std::size_t size() const { return params_.size(); }
    const std::vector<TensorPtr<Scalar>>& params() const { return params_; }
    const ParamMeta& meta(std::size_t i) const { return meta_[i]; }

    TensorPtr<Scalar> find(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? nullptr : params_[it->second];
    }

    std::vector<TensorPtr<Scalar>> trainable() const {
        std::vector<TensorPtr<Scalar>> out;
        for (const auto& p : params_) {
            if (p->requires_grad) out.push_back(p);
        }
        return out;
    }

    void zero_grads() {
        for (auto& p : params_) p->zero_grad();
    }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::vector<TensorPtr<Scalar>> params_;
    std::vector<ParamMeta> meta_;
    std::unordered_map<std::string, std::size_t> index_;
    int next_dropout_site_ = 0;
};

// Coordinates that key every stochastic draw inside a forward pass.
struct RngCtx {
    std::uint64_t seed = 0;
    std::uint64_t step = 0;
    std::uint64_t sample = 0;

    Rng stream(int site) const {
        return Rng(Rng::hash(seed, 0xd0 + std::uint64_t(site) * 2654435761ull, step,
                             sample));
    }
};

// One dropout application point with a stable site id.
struct DropoutSite {
    int site = 0;
    double rate = 0.0;

    template <typename Scalar>
    TensorPtr<Scalar> operator()(TapeT<Scalar>* tape, const TensorPtr<Scalar>& x,
                                 bool train, const RngCtx& ctx) const {
        return dropout(tape, x, rate, train, ctx.stream(site));
    }
};

template <typename Scalar>
struct AttnHead {
    TensorPtr<Scalar> wq, bq, wk, bk, wv, bv, wo;
};

// Per-head query/key/value/output projections. The output projection is
// split per head (summing head outputs through per-head slices is the same
// linear map as concatenating heads first), with a single shared bias.
template <typename Scalar>
struct AttnWeights {
    std::vector<AttnHead<Scalar>> heads;
    TensorPtr<Scalar> bo;
    Eigen::Index head_dim = 0;

    AttnWeights() = default;
    AttnWeights(ParamStore<Scalar>& store, const std::string& prefix,
                Eigen::Index dim, int num_heads, ParamGroup group) {
        if (num_heads <= 0 || dim % num_heads != 0) {
            throw ContractError(prefix + ": " + std::to_string(dim) +
                                " wide attention cannot split into " +
                                std::to_string(num_heads) + " heads");
        }
        head_dim = dim / num_heads;
        ParamMeta w{group, false}, b{group, true};
        for (int h = 0; h < num_heads; ++h) {
            std::string p = prefix + ".h" + std::to_string(h);
            AttnHead<Scalar> head;
            head.wq = store.make(p + ".wq", head_dim, dim, Init::kNormal, w);
            head.bq = store.make(p + ".bq", 1, head_dim, Init::kZero, b);
            head.wk = store.make(p + ".wk", head_dim, dim, Init::kNormal, w);
            head.bk = store.make(p + ".bk", 1, head_dim, Init::kZero, b);
            head.wv = store.make(p + ".wv", head_dim, dim, Init::kNormal, w);
            head.bv = store.make(p + ".bv", 1, head_dim, Init::kZero, b);
            head.wo = store.make(p + ".wo", dim, head_dim, Init::kNormal, w);
            heads.push_back(std::move(head));
        }
        bo = store.make(prefix + ".bo", 1, dim, Init::kZero, b);
    }
};

// Scaled dot-product attention, queries from q_in, keys/values from kv_in,
// optional additive {0,-inf} mask shared across heads.
template <typename Scalar>
TensorPtr<Scalar> multihead_attention(TapeT<Scalar>* tape,
                                      const AttnWeights<Scalar>& w,
                                      const TensorPtr<Scalar>& q_in,
                                      const TensorPtr<Scalar>& kv_in,
                                      const Mat<Scalar>* mask = nullptr) {
    Scalar inv_sqrt = Scalar(1.0 / std::sqrt(double(w.head_dim)));
    TensorPtr<Scalar> out;
    for (std::size_t h = 0; h < w.heads.size(); ++h) {
        const auto& head = w.heads[h];
        auto q = linear(tape, q_in, head.wq, head.bq);
        auto k = linear(tape, kv_in, head.wk, head.bk);
        auto v = linear(tape, kv_in, head.wv, head.bv);
        auto scores = scale(tape, matmul_nt(tape, q, k), inv_sqrt);
        auto probs = softmax_masked(tape, scores, mask);
        auto ctx = matmul(tape, probs, v);
        auto proj = linear(tape, ctx, head.wo, h == 0 ? w.bo : nullptr);
        out = h == 0 ? proj : add(tape, out, proj);
    }
    return out;
}

template <typename Scalar>
struct LayerNormParams {
    TensorPtr<Scalar> gain, bias;

    LayerNormParams() = default;
    LayerNormParams(ParamStore<Scalar>& store, const std::string& prefix,
                    Eigen::Index dim, ParamGroup group) {
        gain = store.make(prefix + ".g", 1, dim, Init::kOne, {group, true});
        bias = store.make(prefix + ".b", 1, dim, Init::kZero, {group, true});
    }

    TensorPtr<Scalar> operator()(TapeT<Scalar>* tape, const TensorPtr<Scalar>& x) const {
        return layer_norm(tape, x, gain, bias);
    }
};

// Two-layer feed-forward with GELU and 4x expansion.
template <typename Scalar>
struct MlpParams {
    TensorPtr<Scalar> w1, b1, w2, b2;

    MlpParams() = default;
    MlpParams(ParamStore<Scalar>& store, const std::string& prefix,
              Eigen::Index dim, ParamGroup group) {
        ParamMeta w{group, false}, b{group, true};
        w1 = store.make(prefix + ".w1", dim * 4, dim, Init::kNormal, w);
        b1 = store.make(prefix + ".b1", 1, dim * 4, Init::kZero, b);
        w2 = store.make(prefix + ".w2", dim, dim * 4, Init::kNormal, w);
        b2 = store.make(prefix + ".b2", 1, dim, Init::kZero, b);
    }

    TensorPtr<Scalar> operator()(TapeT<Scalar>* tape, const TensorPtr<Scalar>& x) const {
        return linear(tape, gelu(tape, linear(tape, x, w1, b1)), w2, b2);
    }
};

// Pre-norm encoder block: x + drop(attn(ln(x))), then x + drop(mlp(ln(x))).
template <typename Scalar>
struct TransformerBlock {
    LayerNormParams<Scalar> ln1, ln2;
    AttnWeights<Scalar> attn;
    MlpParams<Scalar> mlp;
    DropoutSite attn_drop, mlp_drop;

    TransformerBlock() = default;
    TransformerBlock(ParamStore<Scalar>& store, const std::string& prefix,
                     Eigen::Index dim, int heads, double dropout_rate,
                     ParamGroup group)
        : ln1(store, prefix + ".ln1", dim, group),
          ln2(store, prefix + ".ln2", dim, group),
          attn(store, prefix + ".attn", dim, heads, group),
          mlp(store, prefix + ".mlp", dim, group) {
        attn_drop = {store.alloc_dropout_site(), dropout_rate};
        mlp_drop = {store.alloc_dropout_site(), dropout_rate};
    }

    TensorPtr<Scalar> operator()(TapeT<Scalar>* tape, const TensorPtr<Scalar>& x,
                                 bool train, const RngCtx& ctx) const {
        auto normed = ln1(tape, x);
        auto h = add(tape, x, attn_drop(tape, multihead_attention(tape, attn, normed, normed),
                                        train, ctx));
        auto out = add(tape, h, mlp_drop(tape, mlp(tape, ln2(tape, h)), train, ctx));
        return out;
    }

    // Every tensor of this block, for freezing and parameter counts.
    std::vector<TensorPtr<Scalar>> tensors() const {
        std::vector<TensorPtr<Scalar>> out = {ln1.gain, ln1.bias, ln2.gain, ln2.bias,
                                              mlp.w1, mlp.b1, mlp.w2, mlp.b2, attn.bo};
        for (const auto& h : attn.heads) {
            out.insert(out.end(), {h.wq, h.bq, h.wk, h.bk, h.wv, h.bv, h.wo});
        }
        return out;
    }
};

template <typename Scalar>
void freeze_tensors(const std::vector<TensorPtr<Scalar>>& ts) {
    for (const auto& t : ts) t->requires_grad = false;
}

template <typename Scalar>
void freeze_tensors(std::initializer_list<TensorPtr<Scalar>> ts) {
    for (const auto& t : ts) t->requires_grad = false;
}

template <typename Scalar>
std::int64_t count_params(const std::vector<TensorPtr<Scalar>>& ts) {
    std::int64_t n = 0;
    for (const auto& t : ts) n += std::int64_t(t->size());
    return n;
}

inline std::vector<int> iota_ids(int n) {
    std::vector<int> ids(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), 0);
    return ids;
}

}  // namespace cmstr
