#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ewallet/ledger/types.hpp"

namespace ewallet {

// One journal line: {"seq","ts","txn_id","type","postings":[{"account","delta_minor","currency"}],"meta"}
std::string encode_entry(const JournalEntry& entry);

// Strict schema check; throws Error(CORRUPT_JOURNAL) on any deviation.
JournalEntry decode_entry(std::string_view line);

// Reads every line, validating schema, seq continuity and per-entry
// conservation. Errors name the 1-based line number. A missing file is an
// empty journal.
std::vector<JournalEntry> read_journal(const std::filesystem::path& path);

// Append-only newline-delimited writer. Each append is a single write(2)
// followed by fsync(2) when durable.
class JournalWriter {
public:
    JournalWriter(const std::filesystem::path& path, bool fsync_on_append);
    ~JournalWriter();
    JournalWriter(const JournalWriter&) = delete;
    JournalWriter& operator=(const JournalWriter&) = delete;

    void append_line(std::string_view line);
    void append(const JournalEntry& entry) { append_line(encode_entry(entry)); }

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    int fd_ = -1;
    bool fsync_;
};

}  // namespace ewallet
