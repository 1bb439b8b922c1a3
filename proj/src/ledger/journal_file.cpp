#include "ewallet/ledger/journal_file.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

#include "ewallet/error.hpp"

namespace ewallet {

using ordered_json = nlohmann::ordered_json;

std::string encode_entry(const JournalEntry& entry) {
    ordered_json j;
    j["seq"] = entry.seq;
    j["ts"] = format_timestamp(entry.ts);
    j["txn_id"] = entry.txn_id;
    j["type"] = to_string(entry.type);
    auto postings = ordered_json::array();
    for (const auto& p : entry.postings) {
        ordered_json pj;
        pj["account"] = p.account.str();
        pj["delta_minor"] = p.delta_minor;
        pj["currency"] = p.currency;
        postings.push_back(std::move(pj));
    }
    j["postings"] = std::move(postings);
    auto meta = ordered_json::object();
    for (const auto& [k, v] : entry.meta) meta[k] = v;
    j["meta"] = std::move(meta);
    return j.dump();
}

namespace {

[[noreturn]] void corrupt(const std::string& why) { throw Error(ErrorCode::CorruptJournal, why); }

void expect_keys(const ordered_json& j, std::initializer_list<const char*> keys, const char* what) {
    if (!j.is_object() || j.size() != keys.size()) corrupt(std::string(what) + " has unexpected fields");
    for (const char* k : keys) {
        if (!j.contains(k)) corrupt(std::string(what) + " is missing \"" + k + "\"");
    }
}

}  // namespace

JournalEntry decode_entry(std::string_view line) {
    ordered_json j;
    try {
        j = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        corrupt(std::string("invalid JSON: ") + e.what());
    }
    expect_keys(j, {"seq", "ts", "txn_id", "type", "postings", "meta"}, "entry");
    if (!j["seq"].is_number_unsigned()) corrupt("seq must be a positive integer");
    if (!j["ts"].is_string() || !j["txn_id"].is_string() || !j["type"].is_string()) {
        corrupt("ts, txn_id and type must be strings");
    }
    JournalEntry e;
    e.seq = j["seq"].get<std::uint64_t>();
    const auto ts = parse_timestamp(j["ts"].get<std::string>());
    if (!ts) corrupt("bad timestamp");
    e.ts = *ts;
    e.txn_id = j["txn_id"].get<std::string>();
    const auto type = parse_entry_type(j["type"].get<std::string>());
    if (!type) corrupt("unknown entry type " + j["type"].get<std::string>());
    e.type = *type;
    if (!j["postings"].is_array()) corrupt("postings must be an array");
    for (const auto& pj : j["postings"]) {
        expect_keys(pj, {"account", "delta_minor", "currency"}, "posting");
        if (!pj["account"].is_string() || !pj["delta_minor"].is_number_integer() || !pj["currency"].is_string()) {
            corrupt("posting field types");
        }
        const auto account = AccountId::parse(pj["account"].get<std::string>());
        if (!account) corrupt("bad account " + pj["account"].get<std::string>());
        e.postings.push_back({*account, pj["delta_minor"].get<std::int64_t>(), pj["currency"].get<std::string>()});
    }
    if (!j["meta"].is_object()) corrupt("meta must be an object");
    for (const auto& [k, v] : j["meta"].items()) {
        if (!v.is_string()) corrupt("meta values must be strings");
        e.meta.emplace(k, v.get<std::string>());
    }
    return e;
}

std::vector<JournalEntry> read_journal(const std::filesystem::path& path) {
    std::vector<JournalEntry> out;
    std::ifstream in(path);
    if (!in) {
        if (std::filesystem::exists(path)) corrupt("cannot read " + path.string());
        return out;
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto where = "line " + std::to_string(line_no) + ": ";
        if (line.empty()) corrupt(where + "empty line");
        JournalEntry e;
        try {
            e = decode_entry(line);
        } catch (const Error& err) {
            corrupt(where + err.what());
        }
        if (e.seq != out.size() + 1) corrupt(where + "seq " + std::to_string(e.seq) + " breaks the sequence");
        std::int64_t sum = 0;
        for (const auto& p : e.postings) {
            if (p.delta_minor == 0) corrupt(where + "zero posting");
            sum += p.delta_minor;
        }
        if (sum != 0) corrupt(where + "postings do not balance");
        if (e.type == EntryType::RegistrationMarker ? !e.postings.empty() : e.postings.size() < 2) {
            corrupt(where + "wrong number of postings for " + std::string(to_string(e.type)));
        }
        out.push_back(std::move(e));
    }
    return out;
}

JournalWriter::JournalWriter(const std::filesystem::path& path, bool fsync_on_append)
    : path_(path), fsync_(fsync_on_append) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) {
        throw Error(ErrorCode::Internal, "cannot open " + path.string() + ": " + std::strerror(errno));
    }
}

JournalWriter::~JournalWriter() {
    if (fd_ >= 0) ::close(fd_);
}

void JournalWriter::append_line(std::string_view line) {
    std::string buf(line);
    buf += '\n';
    std::size_t written = 0;
    while (written < buf.size()) {
        const auto n = ::write(fd_, buf.data() + written, buf.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(ErrorCode::Internal, "journal write failed: " + std::string(std::strerror(errno)));
        }
        written += static_cast<std::size_t>(n);
    }
    if (fsync_ && ::fsync(fd_) != 0) {
        throw Error(ErrorCode::Internal, "journal fsync failed: " + std::string(std::strerror(errno)));
    }
}

}  // namespace ewallet
