#pragma once

// Reference fold over the journal, written apart from the ledger so a bug in
// one does not hide in the other. Accounts are plain strings here.

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ewallet/ledger/types.hpp"

namespace oracle {

struct Fold {
    std::map<std::string, std::int64_t> balances;
    std::size_t entries = 0;
    std::optional<std::string> violation;

    std::int64_t at(const std::string& account) const {
        auto it = balances.find(account);
        return it == balances.end() ? 0 : it->second;
    }
    std::int64_t total() const {
        std::int64_t sum = 0;
        for (const auto& [_, v] : balances) sum += v;
        return sum;
    }
};

inline bool is_protected(const std::string& account) {
    return account.rfind("WALLET:", 0) == 0 || account.rfind("SUSPENSE:", 0) == 0;
}

// Applies one entry given as (seq, [(account, delta)]).
inline void step(Fold& f, std::uint64_t seq, const std::vector<std::pair<std::string, std::int64_t>>& postings) {
    if (f.violation) return;
    if (seq != f.entries + 1) {
        f.violation = "seq " + std::to_string(seq) + " after " + std::to_string(f.entries);
        return;
    }
    std::int64_t sum = 0;
    for (const auto& [account, delta] : postings) {
        sum += delta;
        f.balances[account] += delta;
    }
    ++f.entries;
    if (sum != 0) {
        f.violation = "entry " + std::to_string(seq) + " sums to " + std::to_string(sum);
        return;
    }
    for (const auto& [account, delta] : postings) {
        if (is_protected(account) && f.balances[account] < 0) {
            f.violation = "entry " + std::to_string(seq) + " overdraws " + account;
            return;
        }
    }
}

inline Fold fold(const std::vector<ewallet::JournalEntry>& entries) {
    Fold f;
    for (const auto& e : entries) {
        std::vector<std::pair<std::string, std::int64_t>> postings;
        for (const auto& p : e.postings) postings.emplace_back(p.account.str(), p.delta_minor);
        step(f, e.seq, postings);
    }
    return f;
}

// Reads the journal file straight off disk with a plain JSON parser.
inline Fold fold_file(const std::string& path) {
    Fold f;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            f.violation = "unparseable line " + std::to_string(f.entries + 1);
            return f;
        }
        std::vector<std::pair<std::string, std::int64_t>> postings;
        for (const auto& p : j.at("postings")) {
            postings.emplace_back(p.at("account").get<std::string>(), p.at("delta_minor").get<std::int64_t>());
        }
        step(f, j.at("seq").get<std::uint64_t>(), postings);
    }
    return f;
}

}  // namespace oracle
