#pragma once

// Whitespace/punctuation tokenizer and a newline-delimited vocabulary with
// fixed reserved entries at the front.

#include <algorithm>
#include <cctype>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "bmgf/error.hpp"

namespace bmgf {

namespace tok {
inline constexpr int kPad = 0;
inline constexpr int kUnk = 1;
inline constexpr int kCls = 2;
inline constexpr int kSep = 3;
inline constexpr int kEos = 4;
inline constexpr int kReserved = 5;
}  // namespace tok

// Lowercases and splits on whitespace; ASCII punctuation becomes its own
// token; multi-byte UTF-8 sequences stay inside words.
inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string word;
    auto flush = [&]() {
        if (!word.empty()) {
            out.push_back(word);
            word.clear();
        }
    };
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            flush();
        } else if (c < 0x80 && !std::isalnum(c)) {
            flush();
            out.emplace_back(1, static_cast<char>(c));
        } else {
            word.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    flush();
    return out;
}

class Vocabulary {
public:
    static const std::vector<std::string>& reserved() {
        static const std::vector<std::string> r = {"<pad>", "<unk>", "<cls>", "<sep>", "<eos>"};
        return r;
    }

    Vocabulary() {
        for (const auto& t : reserved()) push(t);
    }

    int add(const std::string& token) {
        auto it = index_.find(token);
        if (it != index_.end()) return it->second;
        return push(token);
    }

    // Lookup; unknown tokens map to <unk>.
    int id_of(const std::string& token) const {
        auto it = index_.find(token);
        return it == index_.end() ? tok::kUnk : it->second;
    }

    bool contains(const std::string& token) const { return index_.count(token) > 0; }
    int size() const { return static_cast<int>(tokens_.size()); }
    const std::string& token(int id) const {
        if (id < 0 || id >= size()) throw ContractError("Vocabulary: id " + std::to_string(id) + " out of range");
        return tokens_[id];
    }

    std::vector<int> encode(const std::string& text) const {
        std::vector<int> ids;
        for (const auto& t : tokenize(text)) ids.push_back(id_of(t));
        return ids;
    }

    // Builds from tokenized texts: tokens ranked by frequency (ties broken
    // by first appearance), truncated to max_size total entries when
    // max_size > 0.
    static Vocabulary build(const std::vector<std::string>& texts, int max_size = 0) {
        std::unordered_map<std::string, int64_t> freq;
        std::vector<std::string> order;
        for (const auto& text : texts) {
            for (auto& t : tokenize(text)) {
                auto [it, fresh] = freq.try_emplace(t, 0);
                if (fresh) order.push_back(t);
                it->second += 1;
            }
        }
        std::vector<int> rank(order.size());
        for (size_t i = 0; i < rank.size(); ++i) rank[i] = static_cast<int>(i);
        std::stable_sort(rank.begin(), rank.end(),
                         [&](int a, int b) { return freq[order[a]] > freq[order[b]]; });
        Vocabulary v;
        for (int r : rank) {
            if (max_size > 0 && v.size() >= max_size) break;
            v.add(order[r]);
        }
        return v;
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw DataError("cannot write vocabulary to " + path);
        for (const auto& t : tokens_) out << t << '\n';
    }

    static Vocabulary load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot read vocabulary from " + path);
        std::vector<std::string> lines;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            lines.push_back(line);
        }
        return from_lines(lines);
    }

    static Vocabulary from_lines(const std::vector<std::string>& lines) {
        if (lines.size() < reserved().size()) {
            throw DataError("vocabulary is missing the reserved tokens");
        }
        for (size_t i = 0; i < reserved().size(); ++i) {
            if (lines[i] != reserved()[i]) {
                throw DataError("vocabulary line " + std::to_string(i) + " must be " + reserved()[i] +
                                ", got " + lines[i]);
            }
        }
        Vocabulary v;
        for (size_t i = reserved().size(); i < lines.size(); ++i) {
            if (lines[i].empty()) throw DataError("vocabulary has an empty entry at line " + std::to_string(i));
            if (v.contains(lines[i])) throw DataError("vocabulary has a duplicate entry: " + lines[i]);
            v.push(lines[i]);
        }
        return v;
    }

    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    int push(const std::string& token) {
        int id = static_cast<int>(tokens_.size());
        tokens_.push_back(token);
        index_[token] = id;
        return id;
    }

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

}  // namespace bmgf
