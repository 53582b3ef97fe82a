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

#include "cmstr/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cmstr/errors.hpp"
#include "cmstr/tokenizer.hpp"

namespace cmstr {
namespace {

constexpr int kCanvasH = 32;
constexpr int kGlyphScale = 3;
constexpr int kGlyphW = 5 * kGlyphScale;
constexpr int kGlyphH = 7 * kGlyphScale;

struct Rgb {
    std::uint8_t r, g, b;
};

// Image plus a one-byte-per-pixel glyph mask that rides through the
// geometric corruptions, so occlusion can meter its glyph-pixel coverage.
struct Canvas {
    Image img;
    std::vector<std::uint8_t> mask;

    static Canvas blank(int h, int w, Rgb bg) {
        Canvas c;
        c.img.h = h;
        c.img.w = w;
        c.img.rgb.resize(std::size_t(h) * std::size_t(w) * 3);
        c.mask.assign(std::size_t(h) * std::size_t(w), 0);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                c.img.px(y, x, 0) = bg.r;
                c.img.px(y, x, 1) = bg.g;
                c.img.px(y, x, 2) = bg.b;
            }
        }
        return c;
    }
};

Rgb draw_color(Rng& rng, int lo, int hi) {
    return {std::uint8_t(rng.uniform_int(lo, hi)), std::uint8_t(rng.uniform_int(lo, hi)),
            std::uint8_t(rng.uniform_int(lo, hi))};
}

// Horizontal shear, rows displaced proportionally to their distance from the
// vertical center. widen grows the canvas to keep every source pixel; the
// augment path keeps the frame instead.
Canvas shear_x(const Canvas& in, double s, bool widen, Rgb bg) {
    const int h = in.img.h;
    const double mid = (h - 1) / 2.0;
    const double shift = std::abs(s) * mid;
    const int out_w = widen ? in.img.w + int(std::ceil(2 * shift)) : in.img.w;
    Canvas out = Canvas::blank(h, out_w, bg);
    for (int y = 0; y < h; ++y) {
        const double dx = s * (y - mid) + (widen ? shift : 0.0);
        for (int x = 0; x < out_w; ++x) {
            const int sx = int(std::lround(x - dx));
            if (sx < 0 || sx >= in.img.w) continue;
            for (int ch = 0; ch < 3; ++ch) out.img.px(y, x, ch) = in.img.px(y, sx, ch);
            out.mask[std::size_t(y) * out_w + x] = in.mask[std::size_t(y) * in.img.w + sx];
        }
    }
    return out;
}

Canvas shear_y(const Canvas& in, double s, Rgb bg) {
    const int w = in.img.w;
    const double mid = (w - 1) / 2.0;
    Canvas out = Canvas::blank(in.img.h, w, bg);
    for (int y = 0; y < in.img.h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int sy = int(std::lround(y - s * (x - mid)));
            if (sy < 0 || sy >= in.img.h) continue;
            for (int ch = 0; ch < 3; ++ch) out.img.px(y, x, ch) = in.img.px(sy, x, ch);
            out.mask[std::size_t(y) * w + x] = in.mask[std::size_t(sy) * w + x];
        }
    }
    return out;
}

Canvas rotate(const Canvas& in, double degrees, Rgb bg) {
    const double rad = degrees * 3.14159265358979323846 / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    const double cy = (in.img.h - 1) / 2.0, cx = (in.img.w - 1) / 2.0;
    Canvas out = Canvas::blank(in.img.h, in.img.w, bg);
    for (int y = 0; y < in.img.h; ++y) {
        for (int x = 0; x < in.img.w; ++x) {
            const double dy = y - cy, dx = x - cx;
            const int sy = int(std::lround(cy + c * dy - s * dx));
            const int sx = int(std::lround(cx + s * dy + c * dx));
            if (sy < 0 || sy >= in.img.h || sx < 0 || sx >= in.img.w) continue;
            for (int ch = 0; ch < 3; ++ch) out.img.px(y, x, ch) = in.img.px(sy, sx, ch);
            out.mask[std::size_t(y) * in.img.w + x] =
                in.mask[std::size_t(sy) * in.img.w + sx];
        }
    }
    return out;
}

Canvas translate(const Canvas& in, int dy, int dx, Rgb bg) {
    Canvas out = Canvas::blank(in.img.h, in.img.w, bg);
    for (int y = 0; y < in.img.h; ++y) {
        for (int x = 0; x < in.img.w; ++x) {
            const int sy = y - dy, sx = x - dx;
            if (sy < 0 || sy >= in.img.h || sx < 0 || sx >= in.img.w) continue;
            for (int ch = 0; ch < 3; ++ch) out.img.px(y, x, ch) = in.img.px(sy, sx, ch);
            out.mask[std::size_t(y) * in.img.w + x] =
                in.mask[std::size_t(sy) * in.img.w + sx];
        }
    }
    return out;
}

// Separable binomial blur, 3x3 or 5x5, replicated edges. The mask is left
// alone; blur moves no pixels.
void blur(Canvas& c, int ksize) {
    const bool wide = ksize == 5;
    const int taps = wide ? 5 : 3;
    const int w3[3] = {1, 2, 1};
    const int w5[5] = {1, 4, 6, 4, 1};
    const int* wt = wide ? w5 : w3;
    const int norm = wide ? 16 : 4;
    const int half = taps / 2;

    Image tmp = c.img;
    for (int y = 0; y < c.img.h; ++y) {
        for (int x = 0; x < c.img.w; ++x) {
            for (int ch = 0; ch < 3; ++ch) {
                int acc = 0;
                for (int t = 0; t < taps; ++t) {
                    int sx = std::clamp(x + t - half, 0, c.img.w - 1);
                    acc += wt[t] * c.img.px(y, sx, ch);
                }
                tmp.px(y, x, ch) = std::uint8_t((acc + norm / 2) / norm);
            }
        }
    }
    for (int y = 0; y < c.img.h; ++y) {
        for (int x = 0; x < c.img.w; ++x) {
            for (int ch = 0; ch < 3; ++ch) {
                int acc = 0;
                for (int t = 0; t < taps; ++t) {
                    int sy = std::clamp(y + t - half, 0, c.img.h - 1);
                    acc += wt[t] * tmp.px(sy, x, ch);
                }
                c.img.px(y, x, ch) = std::uint8_t((acc + norm / 2) / norm);
            }
        }
    }
}

struct OcclusionRect {
    int y0, x0, h, w;
};

// Draws 1 or 2 rectangles and accepts the draw only if together they cover
// at most 30% of the glyph pixels; a bounded number of retries, then no
// occlusion at all. The bound keeps the coverage invariant unconditional.
void occlude(Canvas& c, Rng& rng) {
    std::size_t glyph_area = 0;
    for (auto m : c.mask) glyph_area += m ? 1 : 0;
    if (glyph_area == 0) return;

    for (int attempt = 0; attempt < 40; ++attempt) {
        const int nrects = int(rng.uniform_int(1, 2));
        std::vector<OcclusionRect> rects;
        for (int i = 0; i < nrects; ++i) {
            OcclusionRect r;
            r.h = int(rng.uniform_int(3, 12));
            r.w = int(rng.uniform_int(3, std::max(4, c.img.w / 4)));
            r.y0 = int(rng.uniform_int(0, c.img.h - r.h));
            r.x0 = int(rng.uniform_int(0, c.img.w - r.w));
            rects.push_back(r);
        }
        std::vector<std::uint8_t> covered(c.mask.size(), 0);
        std::size_t hit = 0;
        for (const auto& r : rects) {
            for (int y = r.y0; y < r.y0 + r.h; ++y) {
                for (int x = r.x0; x < r.x0 + r.w; ++x) {
                    std::size_t at = std::size_t(y) * c.img.w + x;
                    if (c.mask[at] && !covered[at]) {
                        covered[at] = 1;
                        ++hit;
                    }
                }
            }
        }
        if (double(hit) > 0.30 * double(glyph_area)) continue;
        for (const auto& r : rects) {
            Rgb fill = draw_color(rng, 0, 255);
            for (int y = r.y0; y < r.y0 + r.h; ++y) {
                for (int x = r.x0; x < r.x0 + r.w; ++x) {
                    c.img.px(y, x, 0) = fill.r;
                    c.img.px(y, x, 1) = fill.g;
                    c.img.px(y, x, 2) = fill.b;
                }
            }
        }
        return;
    }
}

void add_noise(Canvas& c, Rng& rng, double sigma) {
    for (std::size_t i = 0; i < c.img.rgb.size(); ++i) {
        const int v = int(c.img.rgb[i]) + int(std::lround(sigma * rng.normal_f32()));
        c.img.rgb[i] = std::uint8_t(std::clamp(v, 0, 255));
    }
}

bool has_tag(const std::vector<std::string>& tags, const char* t) {
    return std::find(tags.begin(), tags.end(), t) != tags.end();
}

Rgb corner(const Image& img) {
    return {img.px(0, 0, 0), img.px(0, 0, 1), img.px(0, 0, 2)};
}

std::string sample_relpath(int index) {
    std::ostringstream s;
    s << "images/";
    std::string n = std::to_string(index);
    s << std::string(n.size() < 6 ? 6 - n.size() : 0, '0') << n << ".ppm";
    return s.str();
}

std::string join_tags(const std::vector<std::string>& tags) {
    std::string out;
    for (std::size_t i = 0; i < tags.size(); ++i) {
        if (i) out += ',';
        out += tags[i];
    }
    return out;
}

}  // namespace

Sample render_word(const std::string& word, Rng& rng,
                   const std::vector<std::string>& tags) {
    if (word.empty() || word.size() > 25) {
        throw DataError("render_word: word length must be 1..25");
    }
    for (const auto& t : tags) {
        if (std::find(corruption_categories().begin(), corruption_categories().end(), t) ==
            corruption_categories().end()) {
            throw DataError("unknown corruption tag: " + t);
        }
    }

    const Rgb bg = draw_color(rng, 0, 60);
    const Rgb fg = draw_color(rng, 195, 255);

    // Natural-size canvas: fixed height, width follows the word. Spacing and
    // vertical jitter are drawn per glyph before any pixel goes down, so the
    // layout is one contiguous block of the rng stream.
    std::vector<int> gaps(word.size() + 1);
    std::vector<int> tops(word.size());
    for (auto& g : gaps) g = int(rng.uniform_int(2, 5));
    for (auto& t : tops) t = 4 + int(rng.uniform_int(0, 3));
    int width = 0;
    for (int g : gaps) width += g;
    width += int(word.size()) * kGlyphW;

    Canvas canvas = Canvas::blank(kCanvasH, width, bg);
    int pen = gaps[0];
    for (std::size_t i = 0; i < word.size(); ++i) {
        const auto& cols = glyph_columns(word[i]);
        for (int cx = 0; cx < 5; ++cx) {
            for (int cy = 0; cy < 7; ++cy) {
                if (!((cols[std::size_t(cx)] >> cy) & 1)) continue;
                for (int sy = 0; sy < kGlyphScale; ++sy) {
                    for (int sx = 0; sx < kGlyphScale; ++sx) {
                        const int y = tops[i] + cy * kGlyphScale + sy;
                        const int x = pen + cx * kGlyphScale + sx;
                        canvas.img.px(y, x, 0) = fg.r;
                        canvas.img.px(y, x, 1) = fg.g;
                        canvas.img.px(y, x, 2) = fg.b;
                        canvas.mask[std::size_t(y) * width + x] = 1;
                    }
                }
            }
        }
        pen += kGlyphW + gaps[i + 1];
    }

    if (has_tag(tags, "perspective")) {
        canvas = shear_x(canvas, rng.uniform(-0.25, 0.25), true, bg);
    }
    if (has_tag(tags, "rotated")) {
        canvas = rotate(canvas, rng.uniform(-25.0, 25.0), bg);
    }
    if (has_tag(tags, "blurred")) {
        blur(canvas, rng.uniform_int(0, 1) ? 5 : 3);
    }
    if (has_tag(tags, "occluded")) {
        occlude(canvas, rng);
    }
    if (!tags.empty() && !(tags.size() == 1 && tags[0] == "clean")) {
        add_noise(canvas, rng, 8.0);
    }

    Sample s;
    s.image = std::move(canvas.img);
    s.label = word;
    s.tags = tags;
    return s;
}

Image augment(const Image& img, Rng& rng, bool training) {
    if (!training) return img;
    Canvas c;
    c.img = img;
    c.mask.assign(std::size_t(img.h) * std::size_t(img.w), 0);
    const Rgb bg = corner(img);

    // Three draws from the seven-op pool, independently, fixed mid-tier
    // magnitude with a random sign where a direction exists.
    for (int slot = 0; slot < 3; ++slot) {
        const int op = int(rng.uniform_int(0, 6));
        const double sign = rng.uniform_int(0, 1) ? 1.0 : -1.0;
        switch (op) {
            case 0:
                c = rotate(c, sign * 15.0, bg);
                break;
            case 1:
                c = shear_x(c, sign * 0.15, false, bg);
                break;
            case 2:
                c = shear_y(c, sign * 0.15, bg);
                break;
            case 3:
                c = translate(c, 0, int(sign * std::lround(0.15 * img.w)), bg);
                break;
            case 4: {
                const double f = sign > 0 ? 1.25 : 0.75;
                for (auto& v : c.img.rgb) {
                    v = std::uint8_t(std::clamp(int(std::lround(128 + f * (int(v) - 128))),
                                                0, 255));
                }
                break;
            }
            case 5: {
                const int d = int(sign) * 32;
                for (auto& v : c.img.rgb) v = std::uint8_t(std::clamp(int(v) + d, 0, 255));
                break;
            }
            case 6:
                for (auto& v : c.img.rgb) v = std::uint8_t(v & 0xfc);
                break;
        }
    }
    return c.img;
}

Image resize_nearest(const Image& img, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw DataError("resize target must be positive");
    Image out;
    out.h = out_h;
    out.w = out_w;
    out.rgb.resize(std::size_t(out_h) * std::size_t(out_w) * 3);
    for (int y = 0; y < out_h; ++y) {
        int sy = std::min(img.h - 1, int((std::int64_t(y) * img.h) / out_h));
        for (int x = 0; x < out_w; ++x) {
            int sx = std::min(img.w - 1, int((std::int64_t(x) * img.w) / out_w));
            for (int ch = 0; ch < 3; ++ch) out.px(y, x, ch) = img.px(sy, sx, ch);
        }
    }
    return out;
}

void write_ppm(const std::string& path, const Image& img) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open for writing: " + path);
    f << "P6\n" << img.w << ' ' << img.h << "\n255\n";
    f.write(reinterpret_cast<const char*>(img.rgb.data()), std::streamsize(img.rgb.size()));
    if (!f) throw DataError("write failed: " + path);
}

Image read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open image: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    std::size_t at = 0;
    auto fail = [&](const std::string& what) {
        throw DataError(path + ": offset " + std::to_string(at) + ": " + what);
    };
    auto skip_ws = [&] {
        std::size_t before = at;
        while (at < buf.size() && (buf[at] == ' ' || buf[at] == '\t' || buf[at] == '\n' ||
                                   buf[at] == '\r')) {
            ++at;
        }
        if (at == before) fail("expected whitespace");
    };
    auto read_int = [&]() -> int {
        if (at >= buf.size() || buf[at] < '0' || buf[at] > '9') fail("expected digit");
        long v = 0;
        while (at < buf.size() && buf[at] >= '0' && buf[at] <= '9') {
            v = v * 10 + (buf[at] - '0');
            if (v > 1 << 20) fail("dimension out of range");
            ++at;
        }
        return int(v);
    };

    if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '6') fail("not a P6 file");
    at = 2;
    skip_ws();
    const int w = read_int();
    skip_ws();
    const int h = read_int();
    skip_ws();
    const int maxval = read_int();
    if (maxval != 255) fail("maxval must be 255");
    if (at >= buf.size()) fail("missing pixel data");
    ++at;  // the single whitespace byte after maxval
    if (w <= 0 || h <= 0) fail("degenerate dimensions");

    const std::size_t need = std::size_t(h) * std::size_t(w) * 3;
    if (buf.size() - at < need) fail("pixel data truncated");
    Image img;
    img.h = h;
    img.w = w;
    img.rgb.assign(buf.begin() + std::ptrdiff_t(at), buf.begin() + std::ptrdiff_t(at + need));
    return img;
}

void write_manifest(const std::string& dir, const std::vector<ManifestEntry>& entries) {
    const std::string path = dir + "/labels.tsv";
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open for writing: " + path);
    for (const auto& e : entries) {
        f << e.relpath << '\t' << e.label << '\t' << join_tags(e.tags) << '\n';
    }
    if (!f) throw DataError("write failed: " + path);
}

std::vector<ManifestEntry> read_manifest(const std::string& dir) {
    const std::string path = dir + "/labels.tsv";
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open manifest: " + path);
    std::vector<ManifestEntry> out;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": expected 3 tab-separated fields");
        }
        ManifestEntry e;
        e.relpath = line.substr(0, t1);
        e.label = line.substr(t1 + 1, t2 - t1 - 1);
        std::string tags = line.substr(t2 + 1);
        std::size_t start = 0;
        while (start <= tags.size() && !tags.empty()) {
            auto comma = tags.find(',', start);
            if (comma == std::string::npos) {
                e.tags.push_back(tags.substr(start));
                break;
            }
            e.tags.push_back(tags.substr(start, comma - start));
            start = comma + 1;
        }
        if (e.relpath.empty() || e.label.empty()) {
            throw DataError(path + ":" + std::to_string(lineno) + ": empty field");
        }
        out.push_back(std::move(e));
    }
    return out;
}

void generate_dataset(const std::string& dir, const GenOptions& opts) {
    if (opts.count <= 0) throw DataError("gen: count must be positive");
    if (opts.vocab.empty()) throw DataError("gen: vocabulary is empty");
    const std::vector<std::string>& cats =
        opts.categories.empty() ? corruption_categories() : opts.categories;
    for (const auto& c : cats) {
        if (std::find(corruption_categories().begin(), corruption_categories().end(), c) ==
            corruption_categories().end()) {
            throw DataError("unknown corruption category: " + c);
        }
    }

    std::filesystem::create_directories(dir + "/images");
    std::vector<ManifestEntry> manifest;
    for (int i = 0; i < opts.count; ++i) {
        Rng rng = Rng::derive(opts.seed, 0x67656e, std::uint64_t(i));
        const std::string& word =
            opts.vocab[std::size_t(rng.uniform_int(0, int(opts.vocab.size()) - 1))];
        const std::string& cat = cats[std::size_t(i) % cats.size()];
        Sample s = render_word(word, rng, {cat});
        ManifestEntry e;
        e.relpath = sample_relpath(i);
        e.label = s.label;
        e.tags = s.tags;
        write_ppm(dir + "/" + e.relpath, s.image);
        manifest.push_back(std::move(e));
    }
    write_manifest(dir, manifest);
}

std::vector<Sample> load_dataset(const std::string& dir) {
    std::vector<Sample> out;
    for (const auto& e : read_manifest(dir)) {
        Sample s;
        s.image = read_ppm(dir + "/" + e.relpath);
        s.label = e.label;
        s.tags = e.tags;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<std::string> make_vocabulary(int count, int len_lo, int len_hi,
                                         std::uint64_t seed, const std::string& charset) {
    if (count <= 0 || len_lo < 1 || len_hi < len_lo || len_hi > 25 || charset.empty()) {
        throw DataError("make_vocabulary: bad arguments");
    }
    Rng rng = Rng::derive(seed, 0x766f63, 0);
    std::set<std::string> seen;
    std::vector<std::string> out;
    std::int64_t attempts = 0;
    const std::int64_t cap = std::int64_t(count) * 1000 + 1000;
    while (int(out.size()) < count) {
        if (++attempts > cap) throw DataError("make_vocabulary: word space exhausted");
        const int len = int(rng.uniform_int(len_lo, len_hi));
        std::string w;
        for (int i = 0; i < len; ++i) {
            w += charset[std::size_t(rng.uniform_int(0, int(charset.size()) - 1))];
        }
        if (seen.insert(w).second) out.push_back(std::move(w));
    }
    return out;
}

std::vector<std::string> read_word_list(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open word list: " + path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

void write_word_list(const std::string& path, const std::vector<std::string>& words) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open for writing: " + path);
    for (const auto& w : words) f << w << '\n';
    if (!f) throw DataError("write failed: " + path);
}

double word_accuracy(const std::vector<std::string>& preds,
                     const std::vector<std::string>& gts,
                     const std::string& eval_charset) {
    if (preds.size() != gts.size()) throw ContractError("word_accuracy: length mismatch");
    if (preds.empty()) throw ContractError("word_accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (eval_filter(preds[i], eval_charset) == eval_filter(gts[i], eval_charset)) ++hits;
    }
    return double(hits) / double(preds.size());
}

}  // namespace cmstr
