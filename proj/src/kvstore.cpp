#include "hntt/kvstore.hpp"

#include <sqlite3.h>

#include "hntt/error.hpp"

namespace hntt {
namespace {

class Stmt {
 public:
  Stmt(sqlite3* db, const char* sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql, -1, &s_, nullptr) != SQLITE_OK) {
      throw Error("storage", std::string("sqlite prepare: ") + sqlite3_errmsg(db));
    }
  }
  ~Stmt() { sqlite3_finalize(s_); }
  void bind(int i, const std::string& v) { sqlite3_bind_text(s_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT); }
  int step() {
    const int rc = sqlite3_step(s_);
    if (rc != SQLITE_ROW && rc != SQLITE_DONE && rc != SQLITE_CONSTRAINT) {
      throw Error("storage", std::string("sqlite step: ") + sqlite3_errmsg(db_));
    }
    return rc;
  }
  std::string column(int i) {
    const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(s_, i));
    return std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(s_, i)));
  }

 private:
  sqlite3* db_;
  sqlite3_stmt* s_ = nullptr;
};

}  // namespace

KvStore::KvStore(const std::string& path) {
  if (sqlite3_open(path.c_str(), &db_) != SQLITE_OK) {
    const std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
    sqlite3_close(db_);
    throw ConfigError("cannot open store " + path + ": " + msg);
  }
  sqlite3_busy_timeout(db_, 5000);
  exec("PRAGMA journal_mode=WAL");
  exec("CREATE TABLE IF NOT EXISTS kv (k TEXT PRIMARY KEY, v TEXT NOT NULL)");
}

KvStore::~KvStore() { sqlite3_close(db_); }

void KvStore::exec(const char* sql) {
  char* err = nullptr;
  if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
    const std::string msg = err ? err : "unknown";
    sqlite3_free(err);
    throw Error("storage", "sqlite: " + msg);
  }
}

std::optional<std::string> KvStore::Txn::get(const std::string& key) const {
  Stmt s(db_, "SELECT v FROM kv WHERE k = ?1");
  s.bind(1, key);
  if (s.step() == SQLITE_ROW) return s.column(0);
  return std::nullopt;
}

void KvStore::Txn::put(const std::string& key, const std::string& value) {
  Stmt s(db_, "INSERT INTO kv (k, v) VALUES (?1, ?2) ON CONFLICT(k) DO UPDATE SET v = excluded.v");
  s.bind(1, key);
  s.bind(2, value);
  s.step();
}

bool KvStore::Txn::insert_new(const std::string& key, const std::string& value) {
  Stmt s(db_, "INSERT OR IGNORE INTO kv (k, v) VALUES (?1, ?2)");
  s.bind(1, key);
  s.bind(2, value);
  s.step();
  return sqlite3_changes(db_) == 1;
}

std::vector<std::pair<std::string, std::string>> KvStore::Txn::scan(const std::string& prefix) const {
  // Keys are ASCII; every key with the prefix sorts in [prefix, prefix + 0x7f).
  Stmt s(db_, "SELECT k, v FROM kv WHERE k >= ?1 AND k < ?2 ORDER BY k");
  s.bind(1, prefix);
  s.bind(2, prefix + "\x7f");
  std::vector<std::pair<std::string, std::string>> out;
  while (s.step() == SQLITE_ROW) out.emplace_back(s.column(0), s.column(1));
  return out;
}

void KvStore::transact(const std::function<void(Txn&)>& body) {
  std::lock_guard lock(mu_);
  exec("BEGIN IMMEDIATE");
  Txn txn(db_);
  try {
    body(txn);
  } catch (...) {
    exec("ROLLBACK");
    throw;
  }
  exec("COMMIT");
}

std::optional<std::string> KvStore::get(const std::string& key) {
  std::optional<std::string> out;
  transact([&](Txn& t) { out = t.get(key); });
  return out;
}

void KvStore::put(const std::string& key, const std::string& value) {
  transact([&](Txn& t) { t.put(key, value); });
}

std::vector<std::pair<std::string, std::string>> KvStore::scan(const std::string& prefix) {
  std::vector<std::pair<std::string, std::string>> out;
  transact([&](Txn& t) { out = t.scan(prefix); });
  return out;
}

}  // namespace hntt
