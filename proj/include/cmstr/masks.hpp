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

#include "cmstr/rng.hpp"
#include "cmstr/tensor.hpp"

namespace cmstr {

// Additive attention masks realizing permuted decode orders.
//
// A mask is n x n over {0, -inf}. Row r is the query for character position
// r+1 (the last row is the closing end-of-word query); column 0 is the begin
// token and column j > 0 is character position j. Entry 0 means visible,
// -inf means hidden. Column 0 is visible to every row, the diagonal pairing
// a character query with its own context column is hidden except on the last
// row, and the last row sees everything.

// Decode order over character positions 1..n-1: order[k] is the position
// decoded at step k+1. Values are 1-based to match mask columns.
struct Permutation {
    std::vector<int> order;

    static Permutation identity(int n);
    static Permutation reversed(int n);
    static Permutation random(int n, Rng& rng);
    Permutation reverse() const;
};

constexpr float kMasked = -std::numeric_limits<float>::infinity();

// Position order[k] sees the begin column plus exactly {order[0..k-1]}.
MatF mask_from_permutation(const Permutation& perm, int n);

// Left-to-right order: strictly earlier positions visible.
MatF ar_mask(int n);

// Every position sees everything except its own column.
MatF cloze_mask(int n);

// k masks for one optimizer step: left-to-right, right-to-left, then random
// permutations. With pairing, random draws come in (perm, reversed perm)
// couples. Requires k >= 2.
std::vector<MatF> sample_training_masks(int k, int n, Rng& rng,
                                        bool pairing = false);

// '.' for visible, '#' for hidden; one line per query row.
std::string render_mask(const MatF& mask);

// True when some decode order explains the mask (used by tests and the mask
// inspection path as a structural self-check). If order_out is non-null and
// the mask is valid, the reconstructed order is stored there.
bool mask_is_valid(const MatF& mask, std::vector<int>* order_out = nullptr);

}  // namespace cmstr
