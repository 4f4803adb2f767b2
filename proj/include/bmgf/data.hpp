#pragma once

// Tab-separated dataset files. Four named header columns in any order:
//   split    train | valid | test | ...
//   label    gold labels, pipe-joined when an example has several
//   arg1     first argument text
//   arg2     second argument text

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bmgf/error.hpp"
#include "bmgf/schema.hpp"

namespace bmgf {

struct Example {
    std::string split;
    std::vector<std::string> raw_labels;
    std::string arg1, arg2;
};

struct Dataset {
    std::vector<Example> rows;

    std::vector<Example> of_split(const std::string& split) const {
        std::vector<Example> out;
        for (const auto& r : rows)
            if (r.split == split) out.push_back(r);
        return out;
    }

    size_t count_split(const std::string& split) const {
        size_t n = 0;
        for (const auto& r : rows) n += r.split == split ? 1 : 0;
        return n;
    }
};

namespace detail {

inline std::vector<std::string> split_on(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.push_back("");
    return out;
}

}  // namespace detail

inline Dataset load_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("dataset " + path + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = detail::split_on(line, '\t');
    int c_split = -1, c_label = -1, c_arg1 = -1, c_arg2 = -1;
    for (size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "split") c_split = static_cast<int>(i);
        else if (header[i] == "label") c_label = static_cast<int>(i);
        else if (header[i] == "arg1") c_arg1 = static_cast<int>(i);
        else if (header[i] == "arg2") c_arg2 = static_cast<int>(i);
        else throw DataError("dataset " + path + ": unexpected column " + header[i]);
    }
    if (c_split < 0 || c_label < 0 || c_arg1 < 0 || c_arg2 < 0) {
        throw DataError("dataset " + path + ": header must name split, label, arg1, arg2");
    }
    Dataset ds;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = detail::split_on(line, '\t');
        if (cells.size() != header.size()) {
            throw DataError("dataset " + path + " line " + std::to_string(lineno) + ": expected " +
                            std::to_string(header.size()) + " columns, got " + std::to_string(cells.size()));
        }
        Example ex;
        ex.split = cells[c_split];
        ex.arg1 = cells[c_arg1];
        ex.arg2 = cells[c_arg2];
        for (auto& lab : detail::split_on(cells[c_label], '|')) {
            if (!lab.empty()) ex.raw_labels.push_back(lab);
        }
        if (ex.raw_labels.empty()) {
            throw DataError("dataset " + path + " line " + std::to_string(lineno) + ": empty label");
        }
        if (ex.split.empty()) {
            throw DataError("dataset " + path + " line " + std::to_string(lineno) + ": empty split");
        }
        ds.rows.push_back(std::move(ex));
    }
    return ds;
}

inline void save_tsv(const std::string& path, const Dataset& ds) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write dataset " + path);
    auto clean = [](std::string s) {
        for (char& c : s) {
            if (c == '\t' || c == '\n' || c == '\r') c = ' ';
        }
        return s;
    };
    out << "split\tlabel\targ1\targ2\n";
    for (const auto& r : ds.rows) {
        std::string labels;
        for (size_t i = 0; i < r.raw_labels.size(); ++i) {
            if (i) labels += '|';
            labels += r.raw_labels[i];
        }
        out << clean(r.split) << '\t' << clean(labels) << '\t' << clean(r.arg1) << '\t' << clean(r.arg2)
            << '\n';
    }
}

}  // namespace bmgf
