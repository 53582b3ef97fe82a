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

#include "cmstr/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace cmstr {
namespace {

constexpr char kMagic[4] = {'C', '4', 'S', 'T'};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

std::uint64_t get_uint(const std::string& buf, std::size_t at, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
        v |= std::uint64_t(std::uint8_t(buf[at + std::size_t(i)])) << (8 * i);
    }
    return v;
}

std::uint64_t parse_u64(const std::string& s, const char* what) {
    try {
        std::size_t used = 0;
        std::uint64_t v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw CheckpointError(std::string("bad ") + what + " value: " + s);
    }
}

}  // namespace

const CheckpointData::Entry* CheckpointData::find(const std::string& name) const {
    for (const auto& e : entries) {
        if (e.name == name) return &e;
    }
    return nullptr;
}

MatF CheckpointData::tensor(const Entry& e) const {
    const std::uint64_t count = std::uint64_t(e.rows) * std::uint64_t(e.cols);
    if (e.offset + count > payload.size()) {
        throw CheckpointError("tensor " + e.name + " extends past payload end");
    }
    MatF m(e.rows, e.cols);
    std::memcpy(m.data(), payload.data() + e.offset, count * sizeof(float));
    return m;
}

void CheckpointData::append(const std::string& name, const MatF& value, bool trainable) {
    Entry e;
    e.name = name;
    e.rows = int(value.rows());
    e.cols = int(value.cols());
    e.offset = payload.size();
    e.trainable = trainable;
    entries.push_back(e);
    payload.insert(payload.end(), value.data(), value.data() + value.size());
}

void write_checkpoint(const std::string& path, const CheckpointData& data) {
    std::ostringstream header;
    header << "[config]\n" << data.config_text;
    if (!data.config_text.empty() && data.config_text.back() != '\n') header << '\n';
    header << "[state]\n";
    header << "seed = " << data.seed << '\n';
    header << "step = " << data.step << '\n';
    header << "total_steps = " << data.total_steps << '\n';
    header << "[tensors]\n";
    std::uint64_t expect = 0;
    for (const auto& e : data.entries) {
        if (e.name.find(' ') != std::string::npos || e.name.find('\n') != std::string::npos) {
            throw CheckpointError("tensor name not serializable: " + e.name);
        }
        if (e.offset != expect) {
            throw CheckpointError("tensor offsets not contiguous at " + e.name);
        }
        expect += std::uint64_t(e.rows) * std::uint64_t(e.cols);
        header << e.name << ' ' << e.rows << ' ' << e.cols << ' ' << e.offset << ' '
               << (e.trainable ? 1 : 0) << '\n';
    }
    if (expect != data.payload.size()) {
        throw CheckpointError("payload size disagrees with tensor table");
    }
    const std::string htext = header.str();

    std::string out;
    out.append(kMagic, 4);
    put_u32(out, data.version);
    put_u64(out, htext.size());
    out += htext;
    for (float f : data.payload) {
        std::uint32_t bits = 0;
        std::memcpy(&bits, &f, 4);
        put_u32(out, bits);
    }

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw CheckpointError("cannot open for writing: " + path);
    file.write(out.data(), std::streamsize(out.size()));
    if (!file) throw CheckpointError("write failed: " + path);
}

CheckpointData read_checkpoint(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw CheckpointError("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
    if (buf.size() < 16) throw CheckpointError("checkpoint truncated: " + path);
    if (std::memcmp(buf.data(), kMagic, 4) != 0) {
        throw CheckpointError("bad magic (not a checkpoint): " + path);
    }

    CheckpointData data;
    data.version = std::uint32_t(get_uint(buf, 4, 4));
    if (data.version != 1) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(data.version));
    }
    const std::uint64_t hlen = get_uint(buf, 8, 8);
    if (16 + hlen > buf.size()) throw CheckpointError("header extends past file end");
    const std::string htext = buf.substr(16, hlen);

    const std::size_t payload_at = 16 + std::size_t(hlen);
    if ((buf.size() - payload_at) % 4 != 0) {
        throw CheckpointError("payload length not a multiple of 4");
    }
    data.payload.resize((buf.size() - payload_at) / 4);
    for (std::size_t i = 0; i < data.payload.size(); ++i) {
        std::uint32_t bits = std::uint32_t(get_uint(buf, payload_at + i * 4, 4));
        std::memcpy(&data.payload[i], &bits, 4);
    }

    enum class Section { kNone, kConfig, kState, kTensors };
    Section section = Section::kNone;
    std::istringstream lines(htext);
    std::string line;
    std::uint64_t expect = 0;
    while (std::getline(lines, line)) {
        if (line == "[config]") { section = Section::kConfig; continue; }
        if (line == "[state]") { section = Section::kState; continue; }
        if (line == "[tensors]") { section = Section::kTensors; continue; }
        switch (section) {
            case Section::kNone:
                throw CheckpointError("header line before any section: " + line);
            case Section::kConfig:
                data.config_text += line;
                data.config_text += '\n';
                break;
            case Section::kState: {
                auto eq = line.find('=');
                if (eq == std::string::npos) throw CheckpointError("bad state line: " + line);
                std::string key = line.substr(0, eq);
                std::string val = line.substr(eq + 1);
                while (!key.empty() && key.back() == ' ') key.pop_back();
                while (!val.empty() && val.front() == ' ') val.erase(val.begin());
                if (key == "seed") data.seed = parse_u64(val, "seed");
                else if (key == "step") data.step = parse_u64(val, "step");
                else if (key == "total_steps") data.total_steps = parse_u64(val, "total_steps");
                else throw CheckpointError("unknown state key: " + key);
                break;
            }
            case Section::kTensors: {
                std::istringstream f(line);
                CheckpointData::Entry e;
                int trainable = 0;
                if (!(f >> e.name >> e.rows >> e.cols >> e.offset >> trainable)) {
                    throw CheckpointError("bad tensor line: " + line);
                }
                if (e.rows <= 0 || e.cols <= 0) {
                    throw CheckpointError("bad tensor shape: " + line);
                }
                e.trainable = trainable != 0;
                if (e.offset != expect) {
                    throw CheckpointError("tensor offsets not strictly increasing at " + e.name);
                }
                expect += std::uint64_t(e.rows) * std::uint64_t(e.cols);
                data.entries.push_back(std::move(e));
                break;
            }
        }
    }
    if (expect != data.payload.size()) {
        throw CheckpointError("payload size disagrees with tensor table");
    }
    return data;
}

}  // namespace cmstr
