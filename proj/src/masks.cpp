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

#include "cmstr/masks.hpp"

#include <algorithm>
#include <numeric>

#include "cmstr/errors.hpp"

namespace cmstr {

namespace {

void check_n(int n) {
    if (n < 2) throw ContractError("mask side must be at least 2");
}

}  // namespace

Permutation Permutation::identity(int n) {
    check_n(n);
    Permutation p;
    p.order.resize(std::size_t(n - 1));
    std::iota(p.order.begin(), p.order.end(), 1);
    return p;
}

Permutation Permutation::reversed(int n) {
    Permutation p = identity(n);
    std::reverse(p.order.begin(), p.order.end());
    return p;
}

Permutation Permutation::random(int n, Rng& rng) {
    Permutation p = identity(n);
    rng.shuffle(p.order);
    return p;
}

Permutation Permutation::reverse() const {
    Permutation p = *this;
    std::reverse(p.order.begin(), p.order.end());
    return p;
}

MatF mask_from_permutation(const Permutation& perm, int n) {
    check_n(n);
    if (int(perm.order.size()) != n - 1) {
        throw ContractError("permutation covers " +
                            std::to_string(perm.order.size()) +
                            " positions, mask side " + std::to_string(n) +
                            " needs " + std::to_string(n - 1));
    }
    std::vector<bool> seen(std::size_t(n), false);
    for (int pos : perm.order) {
        if (pos < 1 || pos > n - 1 || seen[std::size_t(pos)]) {
            throw ContractError("order is not a bijection over 1.." +
                                std::to_string(n - 1));
        }
        seen[std::size_t(pos)] = true;
    }

    MatF m = MatF::Constant(n, n, kMasked);
    m.col(0).setZero();  // begin token visible everywhere
    for (std::size_t k = 0; k < perm.order.size(); ++k) {
        int pos = perm.order[k];
        for (std::size_t e = 0; e < k; ++e) {
            m(pos - 1, perm.order[e]) = 0.0f;  // earlier positions visible
        }
    }
    m.row(n - 1).setZero();  // closing query decodes last, sees everything
    return m;
}

MatF ar_mask(int n) { return mask_from_permutation(Permutation::identity(n), n); }

MatF cloze_mask(int n) {
    check_n(n);
    MatF m = MatF::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) m(i, i + 1) = kMasked;
    return m;
}

std::vector<MatF> sample_training_masks(int k, int n, Rng& rng, bool pairing) {
    if (k < 2) throw ContractError("mask sets start with both reading orders");
    std::vector<MatF> masks;
    masks.reserve(std::size_t(k));
    masks.push_back(mask_from_permutation(Permutation::identity(n), n));
    masks.push_back(mask_from_permutation(Permutation::reversed(n), n));
    while (int(masks.size()) < k) {
        Permutation p = Permutation::random(n, rng);
        masks.push_back(mask_from_permutation(p, n));
        if (pairing && int(masks.size()) < k) {
            masks.push_back(mask_from_permutation(p.reverse(), n));
        }
    }
    return masks;
}

std::string render_mask(const MatF& mask) {
    std::string out;
    out.reserve(std::size_t(mask.rows() * (mask.cols() + 1)));
    for (Eigen::Index i = 0; i < mask.rows(); ++i) {
        for (Eigen::Index j = 0; j < mask.cols(); ++j) {
            out.push_back(mask(i, j) == 0.0f ? '.' : '#');
        }
        out.push_back('\n');
    }
    return out;
}

bool mask_is_valid(const MatF& mask, std::vector<int>* order_out) {
    const int n = int(mask.rows());
    if (mask.cols() != n || n < 2) return false;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            float v = mask(i, j);
            if (v != 0.0f && v != kMasked) return false;
        }
        if (mask(i, 0) != 0.0f) return false;           // begin always visible
        if (i + 1 < n && mask(i, i + 1) != kMasked) return false;  // own column
    }
    if ((mask.row(n - 1).array() != 0.0f).any()) return false;

    // A decode order exists iff sorting character rows by how much they see
    // gives visible-set sizes 0, 1, ..., n-2 and each row sees exactly the
    // positions of the rows before it.
    std::vector<int> rows(std::size_t(n - 1));
    std::iota(rows.begin(), rows.end(), 0);
    auto count_visible = [&](int r) {
        int c = 0;
        for (int j = 1; j < n; ++j) c += mask(r, j) == 0.0f ? 1 : 0;
        return c;
    };
    std::stable_sort(rows.begin(), rows.end(), [&](int a, int b) {
        return count_visible(a) < count_visible(b);
    });
    std::vector<bool> decoded(std::size_t(n), false);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        int r = rows[k];
        if (count_visible(r) != int(k)) return false;
        for (int j = 1; j < n; ++j) {
            bool visible = mask(r, j) == 0.0f;
            if (visible != decoded[std::size_t(j)]) return false;
        }
        decoded[std::size_t(r + 1)] = true;
    }
    if (order_out) {
        order_out->clear();
        for (int r : rows) order_out->push_back(r + 1);
    }
    return true;
}

}  // namespace cmstr
