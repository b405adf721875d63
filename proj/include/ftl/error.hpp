#pragma once

#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ftl {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
  ParseError(const std::string& msg, int line, int column)
      : Error(msg + " at " + std::to_string(line) + ":" + std::to_string(column)),
        line_(line), column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

private:
  int line_;
  int column_;
};

// Raised by anything that consumes a Budget past its limit.
class BudgetExceeded : public Error {
public:
  BudgetExceeded() : Error("search budget exhausted") {}
};

// Cooperative work counter shared by searches. Thread safe.
class Budget {
public:
  static constexpr std::uint64_t kDefault = std::uint64_t{1} << 40;

  explicit Budget(std::uint64_t limit = kDefault) : limit_(limit) {}
  Budget(const Budget&) = delete;
  Budget& operator=(const Budget&) = delete;

  void charge(std::uint64_t n = 1) {
    if (used_.fetch_add(n, std::memory_order_relaxed) + n > limit_)
      throw BudgetExceeded();
  }
  std::uint64_t used() const { return used_.load(std::memory_order_relaxed); }
  std::uint64_t limit() const { return limit_; }

  static Budget& unlimited() {
    static Budget b(~std::uint64_t{0});
    return b;
  }

private:
  std::uint64_t limit_;
  std::atomic<std::uint64_t> used_{0};
};

} // namespace ftl
