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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cmstr/image.hpp"
#include "cmstr/rng.hpp"

namespace cmstr {

// Synthetic word-image data: an embedded bitmap font, deterministic
// irregular-text corruptions, PPM storage, and the word-accuracy metric.
// Everything is a pure function of (inputs, seed); two machines generate
// byte-identical datasets.

// One 5x7 glyph as five column bytes, bit 0 the top row. Covers the 94
// printable ASCII characters '!'..'~'.
const std::array<std::uint8_t, 5>& glyph_columns(char c);

struct Sample {
    Image image;
    std::string label;
    std::vector<std::string> tags;
};

// Corruption category names. A sample carries exactly one.
inline const std::vector<std::string>& corruption_categories() {
    static const std::vector<std::string> kAll = {"clean", "perspective", "rotated",
                                                  "blurred", "occluded"};
    return kAll;
}

// Renders the word on a natural-size canvas (height 32, glyph scale 3,
// random spacing and vertical jitter), then applies the tagged corruptions
// in fixed order: perspective shear, rotation, blur, occlusion, noise.
// Noise rides along with every non-clean tag. Occluding rectangles are
// re-drawn until they cover at most 30% of the glyph pixels.
Sample render_word(const std::string& word, Rng& rng,
                   const std::vector<std::string>& tags);

// Three ops drawn independently from {rotate, shear-x, shear-y, translate,
// contrast, brightness, posterize} at a fixed mid-tier magnitude. Identity
// when training is false.
Image augment(const Image& img, Rng& rng, bool training = true);

Image resize_nearest(const Image& img, int out_h, int out_w);

// PPM, binary flavor: header "P6\n{w} {h}\n255\n" then raw RGB rows.
void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

struct ManifestEntry {
    std::string relpath;
    std::string label;
    std::vector<std::string> tags;
};

void write_manifest(const std::string& dir, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::string& dir);

struct GenOptions {
    int count = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> categories;  // empty means all
    std::vector<std::string> vocab;
};

// Writes images/NNNNNN.ppm plus labels.tsv. Per-sample randomness is keyed
// by hash(seed, index); categories are assigned by cycling so their counts
// stay balanced.
void generate_dataset(const std::string& dir, const GenOptions& opts);

std::vector<Sample> load_dataset(const std::string& dir);

// Deterministic word list over the charset, all words distinct, lengths
// uniform in [len_lo, len_hi].
std::vector<std::string> make_vocabulary(int count, int len_lo, int len_hi,
                                         std::uint64_t seed, const std::string& charset);

std::vector<std::string> read_word_list(const std::string& path);
void write_word_list(const std::string& path, const std::vector<std::string>& words);

// Fraction of pairs matching after eval_filter on both sides.
double word_accuracy(const std::vector<std::string>& preds,
                     const std::vector<std::string>& gts,
                     const std::string& eval_charset);

}  // namespace cmstr
