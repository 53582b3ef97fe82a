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

#include "cmstr/errors.hpp"
#include "cmstr/nn.hpp"

namespace cmstr {

// Checkpoint file layout, all integers little-endian:
//   bytes 0..3   magic "C4ST"
//   bytes 4..7   format version (u32)
//   bytes 8..15  header length in bytes (u64)
//   UTF-8 text header:
//     [config]   config snapshot, one "key = value" line each
//     [state]    seed / step / total_steps lines
//     [tensors]  "<name> <rows> <cols> <offset> <trainable>" per tensor,
//                offset in floats from payload start, strictly increasing
//   payload      raw f32 values, row-major per tensor
//
// Optimizer moments ride along as ordinary tensors named "opt.m.<param>" and
// "opt.v.<param>". Round trips are bit-exact; floats are moved as their raw
// 32-bit patterns.

struct CheckpointData {
    struct Entry {
        std::string name;
        int rows = 0;
        int cols = 0;
        std::uint64_t offset = 0;  // in floats, assigned by write_checkpoint
        bool trainable = false;
    };

    std::uint32_t version = 1;
    std::string config_text;
    std::uint64_t seed = 0;
    std::uint64_t step = 0;
    std::uint64_t total_steps = 0;
    std::vector<Entry> entries;
    std::vector<float> payload;

    const Entry* find(const std::string& name) const;
    MatF tensor(const Entry& e) const;
    void append(const std::string& name, const MatF& value, bool trainable);
};

void write_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData read_checkpoint(const std::string& path);

template <typename Scalar>
void append_store(CheckpointData& data, const ParamStore<Scalar>& store) {
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& p = store.params()[i];
        data.append(p->name, p->value.template cast<float>(), p->requires_grad);
    }
}

// Restores every store tensor from the checkpoint by name. Name and shape
// mismatches are errors in either direction; extra checkpoint tensors are
// allowed only under the optimizer prefix, which the trainer restores itself.
template <typename Scalar>
void restore_store(const CheckpointData& data, ParamStore<Scalar>& store) {
    for (std::size_t i = 0; i < store.size(); ++i) {
        auto& p = store.params()[i];
        const auto* e = data.find(p->name);
        if (!e) throw CheckpointError("checkpoint missing tensor: " + p->name);
        if (e->rows != p->value.rows() || e->cols != p->value.cols()) {
            throw CheckpointError("checkpoint shape mismatch for " + p->name);
        }
        if (e->trainable != p->requires_grad) {
            throw CheckpointError("checkpoint trainable flag mismatch for " + p->name +
                                  " (freezing config differs?)");
        }
        p->value = data.tensor(*e).template cast<Scalar>();
    }
    std::size_t known = 0;
    for (const auto& e : data.entries) {
        if (e.name.rfind("opt.", 0) == 0 || store.find(e.name)) ++known;
    }
    if (known != data.entries.size()) {
        throw CheckpointError("checkpoint holds tensors unknown to this model");
    }
}

}  // namespace cmstr
