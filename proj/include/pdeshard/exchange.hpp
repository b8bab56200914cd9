#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <vector>

#include "pdeshard/partition.hpp"
#include "pdeshard/tensor.hpp"

namespace pdeshard {

// One directed halo transfer: `receiver` sits in direction `direction` of
// `sender`.
struct LedgerEntry {
  std::uint64_t step = 0;
  int sender = 0;
  int receiver = 0;
  Direction direction = Direction::N;
  std::size_t cells = 0;   // grid cells in the strip (h * w)
  std::size_t values = 0;  // doubles on the wire (c * h * w)
};

struct HaloMessage {
  std::uint64_t step = 0;
  int sender = 0;
  Direction direction = Direction::N;
  Tensor3 strip;
};

/// Point-to-point mailboxes, one per rank. Messages are addressed to a
/// single receiver; there is no broadcast or reduction. Every send is
/// counted and logged in the ledger.
class ExchangeFabric {
 public:
  explicit ExchangeFabric(int ranks, std::chrono::milliseconds timeout = std::chrono::seconds(30));

  ExchangeFabric(const ExchangeFabric&) = delete;
  ExchangeFabric& operator=(const ExchangeFabric&) = delete;

  void send(int sender, int receiver, Direction direction, std::uint64_t step, Tensor3 strip);

  /// Blocks until `sender`'s message for `step` reaches `receiver`.
  /// Throws ExchangeTimeout naming the edge after the configured wait, or
  /// Error if the fabric was aborted.
  HaloMessage receive(int receiver, int sender, std::uint64_t step);

  /// Wakes every blocked receiver with an error; used when a rank fails.
  void abort();

  std::uint64_t message_count() const noexcept { return messages_.load(); }
  std::vector<LedgerEntry> ledger() const;
  int ranks() const noexcept { return static_cast<int>(boxes_.size()); }

 private:
  struct Mailbox {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<HaloMessage> queue;
  };

  std::vector<std::unique_ptr<Mailbox>> boxes_;
  std::chrono::milliseconds timeout_;
  std::atomic<std::uint64_t> messages_{0};
  std::atomic<bool> aborted_{false};
  mutable std::mutex ledger_mu_;
  std::vector<LedgerEntry> ledger_;
};

}  // namespace pdeshard
