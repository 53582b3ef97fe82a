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
#include <vector>

namespace cmstr {

// Interleaved 8-bit RGB, row-major from the top-left corner.
struct Image {
    int h = 0;
    int w = 0;
    std::vector<std::uint8_t> rgb;

    static Image filled(int h, int w, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        Image img;
        img.h = h;
        img.w = w;
        img.rgb.resize(std::size_t(h) * std::size_t(w) * 3);
        for (std::size_t i = 0; i < img.rgb.size(); i += 3) {
            img.rgb[i] = r;
            img.rgb[i + 1] = g;
            img.rgb[i + 2] = b;
        }
        return img;
    }

    std::uint8_t* px(int y, int x) {
        return rgb.data() + (std::size_t(y) * std::size_t(w) + std::size_t(x)) * 3;
    }
    const std::uint8_t* px(int y, int x) const {
        return rgb.data() + (std::size_t(y) * std::size_t(w) + std::size_t(x)) * 3;
    }
    std::uint8_t& px(int y, int x, int c) { return px(y, x)[c]; }
    const std::uint8_t& px(int y, int x, int c) const { return px(y, x)[c]; }
};

}  // namespace cmstr
