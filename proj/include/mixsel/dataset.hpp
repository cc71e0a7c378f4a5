#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "model.hpp"

namespace mixsel {

// Categorical observations, one row per individual, stored column-major.
// Haploid cells are single states (a1); diploid cells are unordered
// state pairs held in canonical order a1 <= a2. States are dense
// 0-based indices into the per-variable label table.
struct Dataset {
    CaseKind case_kind = CaseKind::Haploid;
    int n = 0;
    int L = 0;
    std::vector<int> states_per_variable;
    std::vector<std::vector<std::uint16_t>> a1;      // [L][n]
    std::vector<std::vector<std::uint16_t>> a2;      // [L][n], diploid only
    std::vector<std::vector<std::string>> labels;    // [L][A_l], sorted

    const std::string& label_of(int var, int state) const { return labels[var][state]; }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    if (line.find(',') != std::string::npos) {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    } else {
        std::stringstream ss(line);
        std::string cell;
        while (ss >> cell) cells.push_back(cell);
    }
    return cells;
}

} // namespace detail

// Raw parsed table: haploid cells carry one label, diploid cells two.
struct RawTable {
    std::vector<std::vector<std::pair<std::string, std::string>>> rows;
};

// Splits delimiter-separated text (comma if present, else whitespace)
// into label cells. Diploid cells use the "a/b" syntax.
inline RawTable parse_table(const std::string& text, CaseKind case_kind, bool has_header = false) {
    RawTable table;
    std::stringstream ss(text);
    std::string line;
    int line_no = 0;
    bool header_skipped = !has_header;
    while (std::getline(ss, line)) {
        ++line_no;
        const std::string trimmed = detail::trim(line);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        if (!header_skipped) {
            header_skipped = true;
            continue;
        }
        auto cells = detail::split_row(trimmed);
        std::vector<std::pair<std::string, std::string>> row;
        row.reserve(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const std::string& cell = cells[c];
            if (cell.empty() || cell == "?" || cell == "NA")
                throw ParseError("missing value at row " + std::to_string(line_no) + ", column " +
                                 std::to_string(c + 1) + " (missing data is not supported)");
            if (case_kind == CaseKind::Diploid) {
                const std::size_t slash = cell.find('/');
                if (slash == std::string::npos || slash == 0 || slash + 1 == cell.size() ||
                    cell.find('/', slash + 1) != std::string::npos)
                    throw ParseError("cell '" + cell + "' at row " + std::to_string(line_no) + ", column " +
                                     std::to_string(c + 1) + " is not an 'a/b' genotype");
                row.emplace_back(detail::trim(cell.substr(0, slash)), detail::trim(cell.substr(slash + 1)));
                if (row.back().first.empty() || row.back().second.empty())
                    throw ParseError("empty allele in cell '" + cell + "' at row " + std::to_string(line_no) +
                                     ", column " + std::to_string(c + 1));
            } else {
                if (cell.find('/') != std::string::npos)
                    throw ParseError("cell '" + cell + "' at row " + std::to_string(line_no) + ", column " +
                                     std::to_string(c + 1) + " looks diploid but case is haploid");
                row.emplace_back(cell, std::string{});
            }
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

// Builds a Dataset from parsed labels: per-variable label tables are the
// observed states sorted lexicographically and re-indexed densely. Any
// variable with a single observed state is rejected.
inline Dataset validate_dataset(const RawTable& raw, CaseKind case_kind) {
    if (raw.rows.empty()) throw ParseError("dataset has no rows");
    const int n = static_cast<int>(raw.rows.size());
    const int L = static_cast<int>(raw.rows.front().size());
    if (L < 1) throw ParseError("dataset has no variables");
    for (int i = 0; i < n; ++i)
        if (static_cast<int>(raw.rows[i].size()) != L)
            throw ParseError("ragged table: row " + std::to_string(i + 1) + " has " +
                             std::to_string(raw.rows[i].size()) + " cells, expected " + std::to_string(L));

    Dataset ds;
    ds.case_kind = case_kind;
    ds.n = n;
    ds.L = L;
    ds.states_per_variable.resize(L);
    ds.a1.assign(L, std::vector<std::uint16_t>(n));
    if (case_kind == CaseKind::Diploid) ds.a2.assign(L, std::vector<std::uint16_t>(n));
    ds.labels.resize(L);

    for (int l = 0; l < L; ++l) {
        std::map<std::string, int> index_of;
        for (int i = 0; i < n; ++i) {
            index_of.emplace(raw.rows[i][l].first, 0);
            if (case_kind == CaseKind::Diploid) index_of.emplace(raw.rows[i][l].second, 0);
        }
        if (index_of.size() < 2)
            throw DegenerateVariable("variable " + std::to_string(l + 1) +
                                     " has a single observed state; it cannot enter the model");
        if (index_of.size() > 65535) throw ParseError("variable " + std::to_string(l + 1) + " has too many states");
        int next = 0;
        for (auto& [label, idx] : index_of) {
            idx = next++;
            ds.labels[l].push_back(label);
        }
        ds.states_per_variable[l] = next;
        for (int i = 0; i < n; ++i) {
            int a = index_of.at(raw.rows[i][l].first);
            if (case_kind == CaseKind::Diploid) {
                int b = index_of.at(raw.rows[i][l].second);
                if (a > b) std::swap(a, b);  // canonical unordered pair
                ds.a1[l][i] = static_cast<std::uint16_t>(a);
                ds.a2[l][i] = static_cast<std::uint16_t>(b);
            } else {
                ds.a1[l][i] = static_cast<std::uint16_t>(a);
            }
        }
    }
    return ds;
}

inline Dataset load_dataset_text(const std::string& text, CaseKind case_kind, bool has_header = false) {
    return validate_dataset(parse_table(text, case_kind, has_header), case_kind);
}

inline std::string dataset_to_text(const Dataset& ds, char delimiter = '\t') {
    auto label = [&](int l, int state) -> std::string {
        if (!ds.labels.empty() && !ds.labels[l].empty()) return ds.labels[l][state];
        return std::to_string(state + 1);
    };
    std::string out;
    for (int i = 0; i < ds.n; ++i) {
        for (int l = 0; l < ds.L; ++l) {
            if (l) out += delimiter;
            out += label(l, ds.a1[l][i]);
            if (ds.case_kind == CaseKind::Diploid) {
                out += '/';
                out += label(l, ds.a2[l][i]);
            }
        }
        out += '\n';
    }
    return out;
}

} // namespace mixsel
