/*
   Copyright 2026 the ntxsim authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/
#include "ntxsim/cluster.hpp"

#include <algorithm>
#include <cstring>
#include <deque>
#include <map>
#include <ostream>
#include <set>

namespace ntx {
namespace {

constexpr std::int64_t kWord = 4;

void check_descriptor(const DmaDescriptor& d, std::int64_t dram_size,
                      std::int64_t tcdm_size) {
  if (d.rows <= 0) throw ConfigError("transfer needs at least one row");
  if (d.row_bytes <= 0) throw ConfigError("transfer rows must carry bytes");
  if (d.row_bytes % kWord || d.dram_base % kWord || d.tcdm_base % kWord ||
      d.dram_stride % kWord || d.tcdm_stride % kWord)
    throw ConfigError("transfers must be 4-byte aligned");
  for (int r = 0; r < d.rows; ++r) {
    const std::int64_t db = d.dram_base + r * d.dram_stride;
    const std::int64_t tb = d.tcdm_base + r * d.tcdm_stride;
    if (db < 0 || db + d.row_bytes > dram_size)
      throw AddressFault(db, {static_cast<std::uint32_t>(r), 0, 0, 0, 0});
    if (tb < 0 || tb + d.row_bytes > tcdm_size)
      throw AddressFault(tb, {static_cast<std::uint32_t>(r), 0, 0, 0, 0});
  }
}

struct Interval {
  std::int64_t lo = 0, hi = 0;  // [lo, hi) bytes
  bool overlaps(const Interval& o) const { return lo < o.hi && o.lo < hi; }
};

Interval dma_tcdm_interval(const DmaDescriptor& d) {
  const std::int64_t last = d.tcdm_base + std::int64_t(d.rows - 1) * d.tcdm_stride;
  return {std::min(d.tcdm_base, last),
          std::max(d.tcdm_base, last) + d.row_bytes};
}

// Conservative command footprints: per-stream [min, max] byte hulls, kept
// separate so disjoint buffers (weights vs. activations) never bridge.
struct CommandFootprint {
  std::array<Interval, 2> read{};
  Interval write;
  int n_read = 0;
  bool has_write = false;

  bool reads_overlap(const Interval& iv) const {
    for (int i = 0; i < n_read; ++i)
      if (read[i].overlaps(iv)) return true;
    return false;
  }
};

CommandFootprint command_footprint(const NtxCommand& cmd) {
  CommandFootprint f;
  NestWalker walk(cmd.hwl, cmd.agu);
  NestWalker::Step st;
  const int nr = read_streams(cmd.opcode);
  bool first_w = true;
  bool first_r[2] = {true, true};
  while (walk.next(st)) {
    for (int s = 0; s < nr; ++s) {
      if (first_r[s]) {
        f.read[s] = {st.addr[s], st.addr[s] + kWord};
        first_r[s] = false;
      } else {
        f.read[s].lo = std::min(f.read[s].lo, st.addr[s]);
        f.read[s].hi = std::max(f.read[s].hi, st.addr[s] + kWord);
      }
    }
    if (st.store) {
      if (first_w) {
        f.write = {st.addr[2], st.addr[2] + kWord};
        first_w = false;
      } else {
        f.write.lo = std::min(f.write.lo, st.addr[2]);
        f.write.hi = std::max(f.write.hi, st.addr[2] + kWord);
      }
    }
  }
  f.n_read = (nr >= 1 && !first_r[0] ? 1 : 0) + (nr >= 2 && !first_r[1] ? 1 : 0);
  f.has_write = !first_w;
  return f;
}

std::vector<std::int64_t> pad_addresses(const PadSpec& p) {
  if (p.interior_h < 0 || p.interior_w < 0 || p.top < 0 || p.bottom < 0 ||
      p.left < 0 || p.right < 0 || p.base % kWord)
    throw ConfigError("malformed padding region");
  const int h = p.interior_h + p.top + p.bottom;
  const int w = p.interior_w + p.left + p.right;
  std::vector<std::int64_t> out;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const bool interior = r >= p.top && r < p.top + p.interior_h &&
                            c >= p.left && c < p.left + p.interior_w;
      if (!interior) out.push_back(p.base + (std::int64_t(r) * w + c) * kWord);
    }
  return out;
}

void validate_schedule(const TileSchedule& ts, std::int64_t dram_size,
                       int n_ntx) {
  for (const auto& ph : ts.phases) {
    for (const auto& group : {&ph.head, &ph.parallel, &ph.tail})
      for (const auto& d : *group)
        check_descriptor(d, dram_size, kTcdmCapacityBytes);
    std::vector<CommandFootprint> fps;
    for (const auto& l : ph.commands) {
      if (l.unit < 0 || l.unit >= n_ntx)
        throw ScheduleError("command assigned to a co-processor out of range");
      fps.push_back(command_footprint(l.cmd));
    }
    for (const auto& d : ph.parallel) {
      const Interval iv = dma_tcdm_interval(d);
      for (const auto& f : fps) {
        if (d.to_tcdm && (f.reads_overlap(iv) ||
                          (f.has_write && iv.overlaps(f.write))))
          throw ScheduleError(
              "parallel transfer writes a region the phase computes from");
        if (!d.to_tcdm && f.has_write && iv.overlaps(f.write))
          throw ScheduleError(
              "parallel transfer reads a result still being produced");
      }
    }
    // pads touch individual ring cells, so the comparison against incoming
    // transfer rows has to be cell-exact (hulls would span the interior)
    std::vector<Interval> landing_rows;
    for (const auto& d : ph.parallel)
      if (d.to_tcdm)
        for (int r = 0; r < d.rows; ++r) {
          const std::int64_t b = d.tcdm_base + r * d.tcdm_stride;
          landing_rows.push_back({b, b + d.row_bytes});
        }
    for (const auto& p : ph.pads) {
      const auto addrs = pad_addresses(p);
      if (addrs.empty()) continue;
      for (std::int64_t a : addrs)
        if (a < 0 || a + kWord > kTcdmCapacityBytes)
          throw AddressFault(a, {});
      const Interval iv{addrs.front(), addrs.back() + kWord};
      for (const auto& f : fps)
        if (f.has_write && iv.overlaps(f.write))
          throw ScheduleError("padding overlaps a live output buffer");
      for (std::int64_t a : addrs)
        for (const auto& row : landing_rows)
          if (row.overlaps({a, a + kWord}))
            throw ScheduleError("padding overlaps a live transfer destination");
    }
  }
}

// ---------------------------------------------------------------------------
// timing simulation

// Per-step TCDM traffic of one command, precomputed from the nest walk.
struct Step {
  int n = 0;
  std::array<std::pair<int, bool>, 3> req;  // (bank, is_write)
};

std::vector<Step> steps_of(const NtxCommand& cmd) {
  std::vector<Step> steps;
  NestWalker walk(cmd.hwl, cmd.agu);
  steps.reserve(walk.total_steps());
  NestWalker::Step st;
  const int nr = read_streams(cmd.opcode);
  while (walk.next(st)) {
    Step s;
    for (int i = 0; i < nr; ++i) s.req[s.n++] = {tcdm_bank(st.addr[i]), false};
    if (st.store) s.req[s.n++] = {tcdm_bank(st.addr[2]), true};
    steps.push_back(s);
  }
  return steps;
}

class DmaEngine {
 public:
  void push(const DmaDescriptor& d, std::int64_t now) {
    q_.push_back({d, q_.size() < 2 ? now + kDramLatencyCycles : -1});
  }
  bool idle() const { return q_.empty(); }

  // One simulation cycle. Returns the bank to request, or -1 when waiting.
  int want(std::int64_t now) const {
    if (q_.empty() || q_.front().ready < 0 || now < q_.front().ready) return -1;
    const auto& d = q_.front().d;
    return tcdm_bank(d.tcdm_base + row_ * d.tcdm_stride + off_);
  }
  bool writes() const { return q_.front().d.to_tcdm; }

  void granted(std::int64_t now) {
    auto& d = q_.front().d;
    off_ += kWord;
    if (off_ >= d.row_bytes) {
      off_ = 0;
      ++row_;
    }
    if (row_ >= d.rows) {
      row_ = 0;
      q_.pop_front();
      if (q_.size() >= 2 && q_[1].ready < 0)
        q_[1].ready = now + kDramLatencyCycles;
      // front already had its latency overlapped while the previous
      // transfer streamed
      if (!q_.empty() && q_.front().ready < 0)
        q_.front().ready = now + kDramLatencyCycles;
    }
  }

 private:
  struct Entry {
    DmaDescriptor d;
    std::int64_t ready;
  };
  std::deque<Entry> q_;
  int row_ = 0;
  std::int64_t off_ = 0;
};

// The driver core's work list for one stage.
struct CoreAction {
  enum Kind { kBusy, kPushDma, kPadWrite } kind = kBusy;
  std::int64_t cycles = 0;    // kBusy
  DmaDescriptor desc;         // kPushDma
  int bank = 0;               // kPadWrite
};

// Each operand stream prefetches through a shallow FIFO whose slots carry
// valid bits, and the two read ports of a unit serve the oldest ungranted
// slots of either stream, so a denied bank access delays one slot instead
// of wasting the port. Operands are consumed in order; stores post after
// their step completes and the next accumulation block waits for them. The
// data path retires at most one step per cycle.
constexpr int kNtxPrefetchDepth = 4;

struct Lane {
  std::deque<std::pair<int, bool>> pending;  // (bank, granted)
  int buffered = 0;  // operands delivered, not yet consumed
  int fill() const { return static_cast<int>(pending.size()) + buffered; }
};

struct NtxUnit {
  std::vector<Step> steps;
  std::size_t issue_idx = 0;   // next step whose addresses enter the lanes
  std::size_t retire_idx = 0;  // next step the data path completes
  Lane rd[2];
  std::deque<std::pair<int, std::size_t>> wq;  // (store bank, step index)
  std::int64_t drain = 0;                 // end-of-command drain cycles left
  std::vector<std::int64_t> drain_marks;  // step index where a command ends

  bool boundary(std::size_t at) const {
    return !drain_marks.empty() && at == std::size_t(drain_marks.front());
  }
  bool done() const {
    return retire_idx >= steps.size() && wq.empty() && drain == 0;
  }
};

struct SimState {
  std::vector<CoreAction> core;
  std::size_t core_idx = 0;
  std::int64_t core_busy_left = 0;
  DmaEngine dma;
  std::vector<NtxUnit> ntx;
};

}  // namespace

Arbitration tcdm_arbitrate(std::span<const TcdmRequest> requests,
                           int rotation) {
  Arbitration out;
  std::map<int, std::size_t> winner;  // bank -> request index
  const auto prio = [rotation](int unit) {
    return ((unit - rotation) % 4096 + 4096) % 4096;
  };
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const auto it = winner.find(requests[i].bank);
    if (it == winner.end()) {
      winner.emplace(requests[i].bank, i);
    } else if (prio(requests[i].unit) < prio(requests[it->second].unit)) {
      it->second = i;
    }
  }
  for (std::size_t i = 0; i < requests.size(); ++i) {
    if (winner.at(requests[i].bank) == i)
      out.granted.push_back(i);
    else
      out.stalled.push_back(i);
  }
  return out;
}

DmaResult dma_execute(const DmaDescriptor& d, std::span<std::byte> dram,
                      std::span<std::byte> tcdm) {
  check_descriptor(d, static_cast<std::int64_t>(dram.size()),
                   static_cast<std::int64_t>(tcdm.size()));
  DmaResult res;
  for (int r = 0; r < d.rows; ++r) {
    std::byte* dst = d.to_tcdm ? tcdm.data() + d.tcdm_base + r * d.tcdm_stride
                               : dram.data() + d.dram_base + r * d.dram_stride;
    const std::byte* src = d.to_tcdm
                               ? dram.data() + d.dram_base + r * d.dram_stride
                               : tcdm.data() + d.tcdm_base + r * d.tcdm_stride;
    std::memcpy(dst, src, static_cast<std::size_t>(d.row_bytes));
    res.bursts.push_back(d.row_bytes);
  }
  res.transfer_cycles = std::int64_t(d.rows) * d.row_bytes / kDmaBytesPerCycle;
  return res;
}

std::vector<std::int64_t> zero_pad_rows(const PadSpec& p,
                                        std::span<std::byte> tcdm) {
  const auto addrs = pad_addresses(p);
  const float zero = 0.0f;
  for (std::int64_t a : addrs) {
    if (a < 0 || a + kWord > static_cast<std::int64_t>(tcdm.size()))
      throw AddressFault(a, {});
    std::memcpy(tcdm.data() + a, &zero, sizeof zero);
  }
  return addrs;
}

void run_schedule_sequential(const TileSchedule& ts, std::span<std::byte> dram) {
  std::vector<std::byte> tcdm(kTcdmCapacityBytes);
  for (const auto& ph : ts.phases) {
    for (const auto& d : ph.head) dma_execute(d, dram, tcdm);
    for (const auto& p : ph.pads) zero_pad_rows(p, tcdm);
    for (const auto& d : ph.parallel)
      if (!d.to_tcdm) dma_execute(d, dram, tcdm);  // stores of prior results
    for (const auto& l : ph.commands) execute_command(l.cmd, tcdm);
    for (const auto& d : ph.parallel)
      if (d.to_tcdm) dma_execute(d, dram, tcdm);  // loads for the next phase
    for (const auto& d : ph.tail) dma_execute(d, dram, tcdm);
  }
}

ClusterTrace run_tile_schedule(const TileSchedule& ts, std::span<std::byte> dram,
                               const ClusterOptions& opt) {
  if (opt.n_ntx < 1 || opt.n_ntx > 8)
    throw ConfigError("a cluster drives between 1 and 8 co-processors");
  validate_schedule(ts, static_cast<std::int64_t>(dram.size()), opt.n_ntx);

  ClusterTrace trace;
  trace.unit_names.push_back("core");
  trace.unit_names.push_back("dma");
  for (int i = 0; i < opt.n_ntx; ++i)
    trace.unit_names.push_back("ntx" + std::to_string(i));
  trace.busy_cycles.assign(trace.unit_names.size(), 0);

  // Values first: scheduling affects time, never contents.
  for (const auto& ph : ts.phases)
    for (const auto* group : {&ph.head, &ph.parallel, &ph.tail})
      for (const auto& d : *group)
        for (int r = 0; r < d.rows; ++r) trace.bursts.push_back(d.row_bytes);
  run_schedule_sequential(ts, dram);

  const int n_units = 2 + opt.n_ntx;
  std::int64_t now = 0;

  const auto step_cycle = [&](SimState& s, bool ntx_active) {
    std::vector<TcdmRequest> reqs;
    std::vector<int> req_owner;  // unit index per request
    bool core_wants_pad = false;

    // core
    std::uint8_t core_state = 0;
    if (s.core_busy_left > 0) {
      core_state = 1;
    } else if (s.core_idx < s.core.size()) {
      auto& a = s.core[s.core_idx];
      switch (a.kind) {
        case CoreAction::kBusy:
          s.core_busy_left = a.cycles;
          core_state = 1;
          break;
        case CoreAction::kPushDma:
          s.dma.push(a.desc, now);
          ++s.core_idx;
          core_state = 1;  // hand-off cycle counted in the descriptor cost
          break;
        case CoreAction::kPadWrite:
          core_wants_pad = true;
          reqs.push_back({0, a.bank, true});
          req_owner.push_back(0);
          break;
      }
    }

    // co-processors
    std::vector<std::pair<int, int>> ntx_slot(reqs.size(), {0, 0});
    if (ntx_active)
      for (int u = 0; u < opt.n_ntx; ++u) {
        auto& n = s.ntx[u];
        if (n.drain > 0) continue;  // draining, no traffic
        if (n.issue_idx < n.steps.size() && !n.boundary(n.issue_idx)) {
          const Step& st = n.steps[n.issue_idx];
          bool room = true;
          int lane = 0;
          for (int i = 0; i < st.n; ++i)
            if (!st.req[i].second && n.rd[lane++].fill() >= kNtxPrefetchDepth)
              room = false;
          if (room && static_cast<int>(n.wq.size()) >= kNtxPrefetchDepth)
            room = false;
          if (room) {
            lane = 0;
            for (int i = 0; i < st.n; ++i) {
              if (st.req[i].second)
                n.wq.emplace_back(st.req[i].first, n.issue_idx);
              else
                n.rd[lane++].pending.emplace_back(st.req[i].first, false);
            }
            ++n.issue_idx;
          }
        }
        // two read ports pick the oldest ungranted slots, hungriest
        // stream first so neither lane starves the other
        int held[2];
        for (int l = 0; l < 2; ++l) {
          held[l] = n.rd[l].buffered;
          for (const auto& p : n.rd[l].pending) held[l] += p.second;
        }
        const int first = held[1] < held[0];
        int ports = 2;
        for (std::size_t depth = 0; ports > 0; ++depth) {
          bool any = false;
          for (int pass = 0; pass < 2 && ports > 0; ++pass) {
            const int l = pass ? 1 - first : first;
            if (depth >= n.rd[l].pending.size()) continue;
            any = true;
            if (n.rd[l].pending[depth].second) continue;
            --ports;
            reqs.push_back({2 + u, n.rd[l].pending[depth].first, false});
            req_owner.push_back(2 + u);
            ntx_slot.emplace_back(l, static_cast<int>(depth));
          }
          if (!any) break;
        }
        if (!n.wq.empty() && n.wq.front().second < n.retire_idx) {
          reqs.push_back({2 + u, n.wq.front().first, true});
          req_owner.push_back(2 + u);
          ntx_slot.emplace_back(2, 0);
        }
      }

    const auto arb = tcdm_arbitrate(reqs, static_cast<int>(now % n_units));
    trace.requests_serviced += static_cast<std::int64_t>(arb.granted.size());
    trace.requests_stalled += static_cast<std::int64_t>(arb.stalled.size());

    std::vector<std::uint8_t> granted(reqs.size(), 0);
    for (std::size_t i : arb.granted) granted[i] = 1;

    // The latency-tolerant DMA sits below the compute lanes: it takes its
    // bank only on cycles where nobody else asked for it.
    const int dma_bank = s.dma.want(now);
    bool dma_granted = false;
    if (dma_bank >= 0) {
      dma_granted = std::none_of(reqs.begin(), reqs.end(), [&](const auto& r) {
        return r.bank == dma_bank;
      });
      if (dma_granted) {
        ++trace.requests_serviced;
      } else {
        ++trace.requests_stalled;
      }
    }

    // apply grants
    std::vector<std::uint8_t> state(n_units, 0);
    if (core_wants_pad) {
      const bool ok = granted[0];  // core request is always first when present
      state[0] = ok ? 1 : 2;
      if (ok) ++s.core_idx;
    } else if (core_state == 1) {
      state[0] = 1;
      if (s.core_busy_left > 0 && --s.core_busy_left == 0) ++s.core_idx;
    }

    if (dma_bank >= 0) {
      state[1] = dma_granted ? 1 : 2;
      if (dma_granted) s.dma.granted(now);
    }

    if (ntx_active)
      for (int u = 0; u < opt.n_ntx; ++u) {
        auto& n = s.ntx[u];
        if (n.drain > 0) {
          --n.drain;
          state[2 + u] = 1;
          continue;
        }
        if (n.done()) continue;
        bool acted = false;
        for (std::size_t i = 0; i < reqs.size(); ++i) {
          if (req_owner[i] != 2 + u || !granted[i]) continue;
          if (ntx_slot[i].first < 2) {
            n.rd[ntx_slot[i].first].pending[ntx_slot[i].second].second = true;
          } else {
            n.wq.pop_front();
            acted = true;
          }
        }
        for (auto& lane : n.rd)
          while (!lane.pending.empty() && lane.pending.front().second) {
            lane.pending.pop_front();
            ++lane.buffered;
          }
        bool ready = n.retire_idx < n.issue_idx;
        if (ready && !n.wq.empty() && n.wq.front().second < n.retire_idx)
          ready = false;  // previous block's store still in flight
        if (ready) {
          const Step& sr = n.steps[n.retire_idx];
          int lane = 0;
          for (int i = 0; i < sr.n && ready; ++i)
            if (!sr.req[i].second && n.rd[lane++].buffered == 0) ready = false;
        }
        if (ready) {
          const Step& sr = n.steps[n.retire_idx];
          int lane = 0;
          for (int i = 0; i < sr.n; ++i)
            if (!sr.req[i].second) --n.rd[lane++].buffered;
          ++n.retire_idx;
          acted = true;
        }
        if (n.boundary(n.retire_idx) && n.wq.empty()) {
          n.drain_marks.erase(n.drain_marks.begin());
          n.drain = kDrainCycles;
        }
        state[2 + u] = acted ? 1 : 2;
      }

    for (int u = 0; u < n_units; ++u)
      if (state[u] == 1) ++trace.busy_cycles[u];
    if (opt.keep_timeline) trace.timeline.push_back(state);
    ++now;
  };

  for (const auto& ph : ts.phases) {
    SimState s;
    s.ntx.assign(opt.n_ntx, {});

    // stage A: head transfers, padding, command staging
    for (const auto& d : ph.head) {
      s.core.push_back({CoreAction::kBusy, kDescriptorProgramCycles - 1, {}, 0});
      s.core.push_back({CoreAction::kPushDma, 0, d, 0});
    }
    for (const auto& p : ph.pads)
      for (std::int64_t a : pad_addresses(p))
        s.core.push_back({CoreAction::kPadWrite, 0, {}, tcdm_bank(a)});
    // Only the first command of each unit must be resident at launch; the
    // rest stream into the engines' shadow slots while they run.
    std::set<int> launch_units;
    for (const auto& l : ph.commands) launch_units.insert(l.unit);
    if (!launch_units.empty())
      s.core.push_back({CoreAction::kBusy,
                        kCommandProgramCycles *
                            static_cast<std::int64_t>(launch_units.size()),
                        {},
                        0});
    while (s.core_idx < s.core.size() || s.core_busy_left > 0 || !s.dma.idle())
      step_cycle(s, false);

    // stage B: compute with parallel transfers and background staging
    s.core.clear();
    s.core_idx = 0;
    for (const auto& d : ph.parallel) {
      s.core.push_back({CoreAction::kBusy, kDescriptorProgramCycles - 1, {}, 0});
      s.core.push_back({CoreAction::kPushDma, 0, d, 0});
    }
    if (ph.commands.size() > launch_units.size())
      s.core.push_back(
          {CoreAction::kBusy,
           kCommandProgramCycles * static_cast<std::int64_t>(
                                       ph.commands.size() - launch_units.size()),
           {},
           0});
    for (const auto& l : ph.commands) {
      auto& u = s.ntx[l.unit];
      auto st = steps_of(l.cmd);
      u.steps.insert(u.steps.end(), st.begin(), st.end());
      u.drain_marks.push_back(static_cast<std::int64_t>(u.steps.size()));
    }
    const auto ntx_done = [&] {
      for (const auto& n : s.ntx)
        if (!n.done()) return false;
      return true;
    };
    while (s.core_idx < s.core.size() || s.core_busy_left > 0 ||
           !s.dma.idle() || !ntx_done())
      step_cycle(s, true);

    // stage C: tail transfers
    s.core.clear();
    s.core_idx = 0;
    for (const auto& d : ph.tail) {
      s.core.push_back({CoreAction::kBusy, kDescriptorProgramCycles - 1, {}, 0});
      s.core.push_back({CoreAction::kPushDma, 0, d, 0});
    }
    while (s.core_idx < s.core.size() || s.core_busy_left > 0 || !s.dma.idle())
      step_cycle(s, false);
  }

  trace.cycles = now;
  return trace;
}

void write_trace_csv(const ClusterTrace& t, std::ostream& os) {
  static const char* kNames[] = {"idle", "busy", "stall"};
  os << "cycle,unit,state\n";
  for (std::size_t c = 0; c < t.timeline.size(); ++c)
    for (std::size_t u = 0; u < t.unit_names.size(); ++u)
      os << c << ',' << t.unit_names[u] << ',' << kNames[t.timeline[c][u]]
         << '\n';
}

void write_burst_histogram_csv(const ClusterTrace& t, std::ostream& os) {
  std::map<std::int64_t, std::pair<std::int64_t, std::int64_t>> h;
  for (std::int64_t b : t.bursts) {
    auto& e = h[b];
    e.first += 1;
    e.second += b;
  }
  os << "length_bytes,count,bytes_total\n";
  for (const auto& [len, e] : h)
    os << len << ',' << e.first << ',' << e.second << '\n';
}

ReferenceConvTiling make_reference_conv_tiling(int tiles) {
  if (tiles < 1) throw ConfigError("need at least one tile");
  constexpr int kC = 8;        // input and output channels
  constexpr int kT = 16;       // output tile edge
  constexpr int kPadded = kT + 2;
  // every stride is padded to an odd word count so no two streams share a
  // bank subring; without the skew the eight units interfere persistently
  constexpr std::int64_t kXPlane = kPadded * kPadded + 1;    // words, odd
  constexpr std::int64_t kXHalf = kC * kXPlane;
  constexpr std::int64_t kWCoStride = kC * 9 + 1;            // 73
  constexpr std::int64_t kYCoStride = kT * kT + 1;           // 257
  constexpr std::int64_t kYHalf = kC * kYCoStride;
  const std::int64_t xbuf[2] = {0, kXHalf};
  const std::int64_t wbuf = 2 * kXHalf;
  const std::int64_t ybuf[2] = {wbuf + kC * kWCoStride,
                                wbuf + kC * kWCoStride + kYHalf};

  ReferenceConvTiling out;
  out.x_bytes_per_tile = kC * kT * kT * kWord;
  out.y_bytes_per_tile = kC * kT * kT * kWord;
  out.w_bytes = kC * kC * 9 * kWord;
  out.macs_per_tile = std::int64_t(kC) * kC * 9 * kT * kT;
  // 8 commands per unit (one per output channel), two output rows each
  out.ntx_cycles_per_tile =
      kC * (std::int64_t(kC) * 9 * kT * 2 + std::int64_t(kDrainCycles));
  const std::int64_t dram_x = 0;
  const std::int64_t dram_w = std::int64_t(tiles) * out.x_bytes_per_tile;
  const std::int64_t dram_y = dram_w + out.w_bytes;
  out.dram_bytes = dram_y + std::int64_t(tiles) * out.y_bytes_per_tile;

  const auto x_load = [&](int tile, int half) {
    std::vector<DmaDescriptor> ds;
    for (int ch = 0; ch < kC; ++ch) {
      DmaDescriptor d;
      d.dram_base = dram_x + (std::int64_t(tile) * kC + ch) * kT * kT * kWord;
      d.dram_stride = kT * kWord;
      d.tcdm_base = (xbuf[half] + ch * kXPlane + kPadded + 1) * kWord;
      d.tcdm_stride = kPadded * kWord;
      d.row_bytes = kT * kWord;
      d.rows = kT;
      d.to_tcdm = true;
      ds.push_back(d);
    }
    return ds;
  };
  const auto y_store = [&](int tile, int half) {
    std::vector<DmaDescriptor> ds;
    for (int co = 0; co < kC; ++co) {
      DmaDescriptor d;
      d.dram_base = dram_y + (std::int64_t(tile) * kC + co) * kT * kT * kWord;
      d.dram_stride = kT * kWord;
      d.tcdm_base = (ybuf[half] + co * kYCoStride) * kWord;
      d.tcdm_stride = kT * kWord;
      d.row_bytes = kT * kWord;
      d.rows = kT;
      d.to_tcdm = false;
      ds.push_back(d);
    }
    return ds;
  };
  const auto commands = [&](int half) {
    std::vector<TilePhase::Launch> ls;
    for (int u = 0; u < kC; ++u)
      for (int k = 0; k < kC; ++k) {
        // staggered channel order keeps the weight reads on distinct banks
        const int co = (u + k) % kC;
        NtxCommand c;
        c.opcode = Opcode::kMac;
        c.hwl.bounds = {kC, 3, 3, kT, 2};
        c.hwl.outer_level = 4;
        c.hwl.init_level = 3;
        c.hwl.store_level = 3;
        const std::array<std::int64_t, kMaxLoops> sx = {kXPlane, 1, kPadded, 1,
                                                        kPadded};
        const std::array<std::int64_t, kMaxLoops> sw = {3 * 3, 1, 3, 0, 0};
        const std::array<std::int64_t, kMaxLoops> sy = {0, 0, 0, 1, kT};
        c.agu[0] = agu_from_word_strides(
            (xbuf[half] + std::int64_t(2 * u) * kPadded) * kWord, sx,
            c.hwl.bounds);
        c.agu[1] = agu_from_word_strides((wbuf + co * kWCoStride) * kWord, sw,
                                         c.hwl.bounds);
        c.agu[2] = agu_from_word_strides(
            (ybuf[half] + co * kYCoStride + std::int64_t(2 * u) * kT) * kWord,
            sy, c.hwl.bounds);
        ls.push_back({u, c});
      }
    return ls;
  };

  TileSchedule ts;
  for (int t = 0; t < tiles; ++t) {
    TilePhase ph;
    const int half = t % 2;
    if (t == 0) {
      DmaDescriptor w;
      w.dram_base = dram_w;
      w.dram_stride = kC * 9 * kWord;
      w.tcdm_base = wbuf * kWord;
      w.tcdm_stride = kWCoStride * kWord;
      w.row_bytes = kC * 9 * kWord;
      w.rows = kC;
      w.to_tcdm = true;
      ph.head = x_load(0, 0);
      ph.head.push_back(w);
      for (int h = 0; h < 2; ++h)
        for (int ch = 0; ch < kC; ++ch)
          ph.pads.push_back({(xbuf[h] + ch * kXPlane) * kWord, kT, kT, 1, 1, 1,
                             1});
    }
    ph.commands = commands(half);
    if (t + 1 < tiles) {
      const auto next = x_load(t + 1, 1 - half);
      ph.parallel.insert(ph.parallel.end(), next.begin(), next.end());
    }
    if (t > 0) {
      const auto prev = y_store(t - 1, 1 - half);
      ph.parallel.insert(ph.parallel.end(), prev.begin(), prev.end());
    }
    if (t + 1 == tiles) ph.tail = y_store(t, half);
    ts.phases.push_back(std::move(ph));
  }
  out.schedule = std::move(ts);
  return out;
}

}  // namespace ntx
