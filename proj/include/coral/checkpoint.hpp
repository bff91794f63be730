#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "coral/model.hpp"

namespace coral {

inline constexpr char kCheckpointMagic[8] = {'C', 'O', 'R', 'A', 'L', 'C', 'K', 'P'};
inline constexpr uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<uint64_t>(v)); }

class ByteReader {
public:
    ByteReader(const std::string& bytes, const std::string& what)
        : bytes_(bytes), what_(what) {}

    uint32_t u32() { return static_cast<uint32_t>(raw(4)); }
    uint64_t u64() { return raw(8); }
    double f64() { return std::bit_cast<double>(raw(8)); }

    std::string str(size_t len) {
        need(len);
        std::string s = bytes_.substr(pos_, len);
        pos_ += len;
        return s;
    }

    bool exhausted() const { return pos_ == bytes_.size(); }

private:
    uint64_t raw(size_t n) {
        need(n);
        uint64_t v = 0;
        for (size_t i = 0; i < n; ++i) {
            v |= static_cast<uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += n;
        return v;
    }

    void need(size_t n) {
        if (pos_ + n > bytes_.size()) throw IoError("truncated checkpoint: " + what_);
    }

    const std::string& bytes_;
    std::string what_;
    size_t pos_ = 0;
};

}  // namespace detail

// Single-file container: magic, version, ModelConfig, vocabulary hash, step
// counter, then named tensors as little-endian 64-bit floats. No timestamps,
// so save→load→save is byte-identical.
template <typename S>
void save_checkpoint(const std::string& path, const ModelParams<S>& params, uint64_t vocab_hash,
                     uint64_t step) {
    std::string out;
    out.append(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::put_u32(out, kCheckpointVersion);
    const ModelConfig& c = params.config;
    for (size_t dim : {c.d_model, c.heads, c.layers, c.d_k, c.d_v, c.topics, c.max_nodes,
                       c.n_stages}) {
        detail::put_u32(out, static_cast<uint32_t>(dim));
    }
    detail::put_u64(out, vocab_hash);
    detail::put_u64(out, step);
    auto tensors = params.all();
    detail::put_u32(out, static_cast<uint32_t>(tensors.size()));
    for (auto& t : tensors) {
        detail::put_u32(out, static_cast<uint32_t>(t.name().size()));
        out += t.name();
        detail::put_u64(out, t.value().rows());
        detail::put_u64(out, t.value().cols());
        for (S v : t.value().data()) detail::put_f64(out, static_cast<double>(v));
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write checkpoint: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("short write on checkpoint: " + path);
}

template <typename S>
struct LoadedCheckpoint {
    ModelParams<S> params;
    uint64_t vocab_hash = 0;
    uint64_t step = 0;
};

template <typename S>
LoadedCheckpoint<S> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read checkpoint: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    detail::ByteReader r(bytes, path);
    if (r.str(sizeof(kCheckpointMagic)) != std::string(kCheckpointMagic, sizeof(kCheckpointMagic))) {
        throw SchemaError("not a checkpoint file: " + path);
    }
    uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw SchemaError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
    }
    ModelConfig cfg;
    cfg.d_model = r.u32();
    cfg.heads = r.u32();
    cfg.layers = r.u32();
    cfg.d_k = r.u32();
    cfg.d_v = r.u32();
    cfg.topics = r.u32();
    cfg.max_nodes = r.u32();
    cfg.n_stages = r.u32();
    cfg.validate();

    LoadedCheckpoint<S> out{ModelParams<S>(), r.u64(), 0};
    out.step = r.u64();

    uint32_t count = r.u32();
    std::unordered_map<std::string, Tensor<S>> tensors;
    for (uint32_t i = 0; i < count; ++i) {
        std::string name = r.str(r.u32());
        size_t rows = r.u64();
        size_t cols = r.u64();
        Tensor<S> t(rows, cols);
        for (S& v : t.data()) v = static_cast<S>(r.f64());
        tensors.emplace(std::move(name), std::move(t));
    }
    if (!r.exhausted()) throw SchemaError("trailing bytes in checkpoint: " + path);

    auto emb = tensors.find("embedding");
    if (emb == tensors.end()) throw SchemaError("checkpoint missing tensor 'embedding'");
    out.params = ModelParams<S>::with_shapes(cfg, emb->second.rows());
    for (auto& p : out.params.all()) {
        auto it = tensors.find(p.name());
        if (it == tensors.end()) throw SchemaError("checkpoint missing tensor '" + p.name() + "'");
        if (!it->second.same_shape(p.value())) {
            throw SchemaError("checkpoint tensor '" + p.name() + "' has shape " +
                              shape_str(it->second) + ", expected " + shape_str(p.value()));
        }
        p.mutable_value() = std::move(it->second);
    }
    return out;
}

// Predict-time guard: the checkpoint must have been trained with the same
// vocabulary it is now paired with.
template <typename S>
void verify_vocab_hash(const LoadedCheckpoint<S>& ckpt, uint64_t vocab_hash) {
    if (ckpt.vocab_hash != vocab_hash) {
        throw SchemaError("checkpoint vocabulary hash " + hex64(ckpt.vocab_hash) +
                          " does not match vocabulary " + hex64(vocab_hash));
    }
}

}  // namespace coral
