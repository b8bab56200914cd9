#include "pdeshard/exchange.hpp"

#include <algorithm>
#include <string>

#include "pdeshard/error.hpp"

namespace pdeshard {

ExchangeFabric::ExchangeFabric(int ranks, std::chrono::milliseconds timeout) : timeout_(timeout) {
  if (ranks < 1) throw ConfigError("ExchangeFabric: need at least one rank");
  boxes_.reserve(static_cast<std::size_t>(ranks));
  for (int r = 0; r < ranks; ++r) boxes_.push_back(std::make_unique<Mailbox>());
}

void ExchangeFabric::send(int sender, int receiver, Direction direction, std::uint64_t step, Tensor3 strip) {
  if (receiver < 0 || receiver >= ranks() || sender < 0 || sender >= ranks())
    throw ConfigError("ExchangeFabric::send: rank out of range");
  {
    std::lock_guard lock(ledger_mu_);
    ledger_.push_back({step, sender, receiver, direction, strip.plane_size(), strip.size()});
  }
  messages_.fetch_add(1);
  Mailbox& box = *boxes_[receiver];
  {
    std::lock_guard lock(box.mu);
    box.queue.push_back({step, sender, direction, std::move(strip)});
  }
  box.cv.notify_all();
}

HaloMessage ExchangeFabric::receive(int receiver, int sender, std::uint64_t step) {
  Mailbox& box = *boxes_.at(receiver);
  std::unique_lock lock(box.mu);
  auto match = [&] {
    return std::find_if(box.queue.begin(), box.queue.end(),
                        [&](const HaloMessage& m) { return m.sender == sender && m.step == step; });
  };
  auto it = box.queue.end();
  const bool ready = box.cv.wait_for(lock, timeout_, [&] {
    it = match();
    return it != box.queue.end() || aborted_.load();
  });
  if (aborted_.load() && it == box.queue.end())
    throw ExchangeAborted("exchange aborted while rank " + std::to_string(receiver) + " waited for rank " +
                std::to_string(sender));
  if (!ready)
    throw ExchangeTimeout("no halo from rank " + std::to_string(sender) + " to rank " + std::to_string(receiver) +
                          " at step " + std::to_string(step) + " within " + std::to_string(timeout_.count()) +
                          " ms");
  HaloMessage msg = std::move(*it);
  box.queue.erase(it);
  return msg;
}

void ExchangeFabric::abort() {
  aborted_.store(true);
  for (auto& b : boxes_) {
    std::lock_guard lock(b->mu);
    b->cv.notify_all();
  }
}

std::vector<LedgerEntry> ExchangeFabric::ledger() const {
  std::lock_guard lock(ledger_mu_);
  return ledger_;
}

}  // namespace pdeshard
