#pragma once

#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

struct sqlite3;

namespace hntt {

// Embedded transactional key-value store over a single SQLite table.
// Thread-safe: every call holds an internal mutex, and `transact` runs its
// body inside one IMMEDIATE transaction that rolls back on exception.
class KvStore {
 public:
  // ":memory:" gives a private in-memory database.
  explicit KvStore(const std::string& path);
  ~KvStore();
  KvStore(const KvStore&) = delete;
  KvStore& operator=(const KvStore&) = delete;

  class Txn {
   public:
    std::optional<std::string> get(const std::string& key) const;
    void put(const std::string& key, const std::string& value);
    bool insert_new(const std::string& key, const std::string& value);  // false if key exists
    std::vector<std::pair<std::string, std::string>> scan(const std::string& prefix) const;

   private:
    friend class KvStore;
    explicit Txn(sqlite3* db) : db_(db) {}
    sqlite3* db_;
  };

  void transact(const std::function<void(Txn&)>& body);
  std::optional<std::string> get(const std::string& key);
  void put(const std::string& key, const std::string& value);
  std::vector<std::pair<std::string, std::string>> scan(const std::string& prefix);

 private:
  void exec(const char* sql);
  sqlite3* db_ = nullptr;
  std::recursive_mutex mu_;
};

}  // namespace hntt
