#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tdg/types.hpp"

namespace tdg {

using Digest = std::array<std::uint8_t, 32>;

inline constexpr std::string_view kHashFunction = "sha256";

inline Digest sha256(std::span<const std::uint8_t> bytes) {
  Digest out{};
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), out.data(), &len) != 1 || len != out.size()) {
    throw std::runtime_error("sha256 digest failed");
  }
  return out;
}

inline std::string to_hex(const Digest& d) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (auto b : d) {
    s.push_back(kHex[b >> 4]);
    s.push_back(kHex[b & 0xf]);
  }
  return s;
}

inline std::optional<Digest> digest_from_hex(std::string_view hex) {
  if (hex.size() != 64) return std::nullopt;
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
  };
  Digest d{};
  for (std::size_t i = 0; i < 32; ++i) {
    const int hi = nibble(hex[2 * i]);
    const int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    d[i] = static_cast<std::uint8_t>(hi << 4 | lo);
  }
  return d;
}

struct Allocation {
  AgentId agent;
  Millicredits amount = 0;

  friend bool operator==(const Allocation&, const Allocation&) = default;
};

// Even split; the remainder goes one millicredit each to the lowest ids.
inline std::vector<Allocation> split_credits(Millicredits total, std::span<const AgentId> participants) {
  if (participants.empty()) throw ValidationError("credit split needs at least one participant");
  if (total < 0) throw ValidationError("credit total must be non-negative");
  std::vector<AgentId> ids(participants.begin(), participants.end());
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw ValidationError("credit split participants must be distinct");
  }
  const auto n = static_cast<Millicredits>(ids.size());
  const Millicredits base = total / n;
  const Millicredits remainder = total % n;
  std::vector<Allocation> out;
  out.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out.push_back(Allocation{ids[i], base + (static_cast<Millicredits>(i) < remainder ? 1 : 0)});
  }
  return out;
}

struct CreditBlock {
  std::uint64_t index = 0;
  Digest prev_hash{};
  WorkUnitId wu{};
  std::vector<Allocation> allocations;
  Tick tick = 0;
  Digest hash{};

  Millicredits total() const {
    return std::accumulate(allocations.begin(), allocations.end(), Millicredits{0},
                           [](Millicredits s, const Allocation& a) { return s + a.amount; });
  }

  friend bool operator==(const CreditBlock&, const CreditBlock&) = default;
};

namespace detail {

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

}  // namespace detail

// H(index || prev_hash || wu || allocations || tick), big-endian fixed width.
inline Digest compute_block_hash(const CreditBlock& b) {
  std::vector<std::uint8_t> buf;
  buf.reserve(8 + 32 + 8 + 8 + b.allocations.size() * 16 + 8);
  detail::put_u64(buf, b.index);
  buf.insert(buf.end(), b.prev_hash.begin(), b.prev_hash.end());
  detail::put_u64(buf, b.wu.value);
  detail::put_u64(buf, b.allocations.size());
  for (const auto& a : b.allocations) {
    detail::put_u64(buf, a.agent.value);
    detail::put_u64(buf, static_cast<std::uint64_t>(a.amount));
  }
  detail::put_u64(buf, static_cast<std::uint64_t>(b.tick));
  return sha256(buf);
}

// Append-only hash chain of per-WU credit allocations.
class Ledger {
 public:
  Ledger() = default;

  // Takes blocks as-is, e.g. from an exported file; call verify_chain before trusting them.
  static Ledger from_blocks(std::vector<CreditBlock> blocks) {
    Ledger l;
    l.blocks_ = std::move(blocks);
    return l;
  }

  const std::vector<CreditBlock>& blocks() const noexcept { return blocks_; }
  std::size_t size() const noexcept { return blocks_.size(); }
  bool empty() const noexcept { return blocks_.empty(); }

  Digest head() const { return blocks_.empty() ? Digest{} : blocks_.back().hash; }

  const CreditBlock& append(WorkUnitId wu, std::vector<Allocation> allocations, Millicredits declared_total, Tick tick) {
    CreditBlock b;
    b.index = blocks_.size();
    b.prev_hash = head();
    b.wu = wu;
    b.allocations = std::move(allocations);
    b.tick = tick;
    if (b.total() != declared_total) {
      throw ValidationError("allocations sum to " + std::to_string(b.total()) + " but WU " +
                            std::to_string(wu.value) + " is worth " + std::to_string(declared_total));
    }
    b.hash = compute_block_hash(b);
    blocks_.push_back(std::move(b));
    return blocks_.back();
  }

 private:
  std::vector<CreditBlock> blocks_;
};

inline Ledger append_block(Ledger ledger, WorkUnitId wu, std::vector<Allocation> allocations, Millicredits declared_total,
                           Tick tick) {
  ledger.append(wu, std::move(allocations), declared_total, tick);
  return ledger;
}

// Lowest index whose stored index, hash or back-link is wrong; nullopt when intact.
inline std::optional<std::uint64_t> verify_chain(const Ledger& ledger) {
  Digest prev{};
  const auto& blocks = ledger.blocks();
  for (std::uint64_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    if (b.index != i || b.prev_hash != prev || compute_block_hash(b) != b.hash) return i;
    prev = b.hash;
  }
  return std::nullopt;
}

inline std::map<AgentId, Millicredits> balances(const Ledger& ledger) {
  if (auto bad = verify_chain(ledger)) {
    throw AuditError("ledger fails verification at block " + std::to_string(*bad));
  }
  std::map<AgentId, Millicredits> out;
  for (const auto& b : ledger.blocks()) {
    for (const auto& a : b.allocations) out[a.agent] += a.amount;
  }
  return out;
}

inline Millicredits balance(const Ledger& ledger, AgentId agent) {
  const auto all = balances(ledger);
  auto it = all.find(agent);
  return it == all.end() ? 0 : it->second;
}

// One block per line: index prev_hash wu agent:mc,agent:mc tick hash
inline void export_ledger(const Ledger& ledger, std::ostream& out) {
  for (const auto& b : ledger.blocks()) {
    out << b.index << ' ' << to_hex(b.prev_hash) << ' ' << b.wu.value << ' ';
    for (std::size_t i = 0; i < b.allocations.size(); ++i) {
      if (i) out << ',';
      out << b.allocations[i].agent.value << ':' << b.allocations[i].amount;
    }
    if (b.allocations.empty()) out << '-';
    out << ' ' << b.tick << ' ' << to_hex(b.hash) << '\n';
  }
}

inline Ledger import_ledger(std::istream& in) {
  std::vector<CreditBlock> blocks;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) {
    throw AuditError("ledger line " + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    CreditBlock b;
    std::string prev, allocs, hash;
    std::uint64_t wu = 0;
    if (!(ls >> b.index >> prev >> wu >> allocs >> b.tick >> hash)) fail("expected 6 fields");
    std::string extra;
    if (ls >> extra) fail("trailing data");
    auto p = digest_from_hex(prev);
    auto h = digest_from_hex(hash);
    if (!p || !h) fail("bad digest");
    b.prev_hash = *p;
    b.hash = *h;
    b.wu = WorkUnitId{wu};
    if (allocs != "-") {
      std::istringstream as(allocs);
      std::string item;
      while (std::getline(as, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) fail("allocation without ':'");
        try {
          std::size_t used = 0;
          const auto agent = std::stoul(item.substr(0, colon), &used);
          if (used != colon) fail("bad agent id");
          const std::string amount_text = item.substr(colon + 1);
          const auto amount = std::stoll(amount_text, &used);
          if (used != amount_text.size()) fail("bad amount");
          b.allocations.push_back(Allocation{AgentId{static_cast<std::uint32_t>(agent)}, amount});
        } catch (const std::logic_error&) {
          fail("bad allocation '" + item + "'");
        }
      }
    }
    blocks.push_back(std::move(b));
  }
  return Ledger::from_blocks(std::move(blocks));
}

}  // namespace tdg
