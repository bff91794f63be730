#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "coral/cell_graph.hpp"
#include "coral/common.hpp"

namespace coral {

inline constexpr int kClsId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kPadId = 2;

class Vocabulary {
public:
    Vocabulary() = default;
    Vocabulary(std::vector<std::string> tokens, int min_count)
        : tokens_(std::move(tokens)), min_count_(min_count) {
        for (size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<int>(i));
    }

    static const std::vector<std::string>& reserved() {
        static const std::vector<std::string> r = {"[CLS]", "[UNK]", "[PAD]"};
        return r;
    }

    int id_of(const std::string& label) const {
        auto it = index_.find(label);
        return it == index_.end() ? kUnkId : it->second;
    }
    const std::string& token(int id) const { return tokens_.at(static_cast<size_t>(id)); }
    size_t size() const { return tokens_.size(); }
    int min_count() const { return min_count_; }

    // Stable fingerprint of the full id order; checkpoints embed it so a
    // model is never applied across a mismatched vocabulary.
    uint64_t content_hash() const {
        uint64_t h = fnv1a64("coral-vocab");
        for (const std::string& t : tokens_) {
            h = fnv1a64(t, h);
            h = fnv1a64("\n", h);
        }
        h = fnv1a64(std::to_string(min_count_), h);
        return h;
    }

    void save(const std::string& path) const {
        nlohmann::json doc;
        doc["tokens"] = tokens_;
        doc["min_count"] = min_count_;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write vocabulary file: " + path);
        out << doc.dump(2) << "\n";
    }

    static Vocabulary load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open vocabulary file: " + path);
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError("malformed vocabulary JSON at byte " + std::to_string(e.byte));
        }
        if (!doc.is_object() || !doc.contains("tokens") || !doc.contains("min_count"))
            throw SchemaError("vocabulary file missing tokens or min_count");
        std::vector<std::string> tokens = doc["tokens"].get<std::vector<std::string>>();
        if (tokens.size() < reserved().size() ||
            !std::equal(reserved().begin(), reserved().end(), tokens.begin()))
            throw SchemaError("vocabulary file does not start with the reserved tokens");
        return Vocabulary(std::move(tokens), doc["min_count"].get<int>());
    }

private:
    std::vector<std::string> tokens_;
    std::map<std::string, int> index_;
    int min_count_ = 1;
};

// Two passes: count labels over the corpus, then freeze ids as the reserved
// tokens followed by survivors ordered by descending frequency (ties broken
// by token text) so the id assignment is deterministic.
inline Vocabulary build_vocabulary(const std::vector<CellGraph>& corpus, int min_count) {
    if (min_count < 1) throw ConfigError("vocabulary min_count must be at least 1");
    std::map<std::string, long> counts;
    for (const CellGraph& g : corpus)
        for (const GraphNode& node : g.nodes)
            if (node.kind != NodeKind::CLS) ++counts[node.label];

    std::vector<std::pair<std::string, long>> kept;
    for (const auto& [token, count] : counts)
        if (count >= min_count &&
            std::find(Vocabulary::reserved().begin(), Vocabulary::reserved().end(), token) ==
                Vocabulary::reserved().end())
            kept.emplace_back(token, count);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    std::vector<std::string> tokens = Vocabulary::reserved();
    tokens.reserve(tokens.size() + kept.size());
    for (auto& [token, count] : kept) tokens.push_back(std::move(token));
    return Vocabulary(std::move(tokens), min_count);
}

struct EncodedGraph {
    std::string cell_id;
    std::vector<int> token_ids;
    std::vector<uint8_t> adj_self;  // flattened n×n Ã, diagonal set

    size_t n() const { return token_ids.size(); }
    bool a_tilde(size_t i, size_t j) const { return adj_self[i * n() + j] != 0; }
};

inline EncodedGraph encode_graph(const CellGraph& graph, const Vocabulary& vocab) {
    EncodedGraph out;
    out.cell_id = graph.cell_id;
    size_t n = graph.n();
    out.token_ids.reserve(n);
    for (const GraphNode& node : graph.nodes)
        out.token_ids.push_back(node.kind == NodeKind::CLS ? kClsId : vocab.id_of(node.label));
    out.adj_self.assign(n * n, 0);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) out.adj_self[i * n + j] = graph.a_tilde(i, j) ? 1 : 0;
    return out;
}

}  // namespace coral
