#include "crlmesh/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <queue>
#include <stdexcept>
#include <unordered_map>

#include "crlmesh/log.hpp"
#include "crlmesh/mobility.hpp"
#include "crlmesh/node.hpp"
#include "crlmesh/rng.hpp"

namespace crlmesh::sim {

namespace {

using node::PieceHandle;
using node::PieceLedger;
using node::Verdict;

constexpr std::uint32_t kNone = UINT32_MAX;
constexpr std::uint32_t kOverheadWindowS = 30;

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t ms_ceil(double ms) { return static_cast<std::uint64_t>(std::ceil(ms - 1e-9)); }

enum class Ev : std::uint8_t { Sample, Depart, Spawn, Beacon, RsuBeacon, Query, TxPiece, Fake, Deliver };

struct Event {
  std::uint64_t t;
  std::uint64_t seq;
  Ev type;
  std::uint32_t a;  // slot, rsu index or broadcast index
  std::uint64_t b;  // vehicle id or generation
  std::uint32_t c;  // piece index
};

struct Later {
  bool operator()(const Event& x, const Event& y) const { return x.t != y.t ? x.t > y.t : x.seq > y.seq; }
};

/// Pieces of one CRL (a window, or the day in baseline mode).
struct CrlData {
  std::uint32_t gamma = 0;
  std::vector<PieceHandle> pieces;
  std::shared_ptr<const vpki::SignedFingerprint> fingerprint;
  std::unique_ptr<PieceLedger> full;  // what every RSU holds
  std::vector<PieceHandle> fakes;     // one forged piece per index
  std::size_t max_wire = 0;
};

struct Vehicle {
  std::uint64_t id = 0;
  bool present = false;
  bool attacker = false;
  std::uint64_t enter_ms = 0;
  std::optional<GridWalker> walker;
  std::uint64_t trace_id = 0;
  Rng rng{0};
  std::uint64_t carrier_seed = 0;

  std::unique_ptr<PieceLedger> ledger;
  std::uint32_t ledger_gamma = kNone;
  std::uint32_t entry_gamma = kNone;
  std::shared_ptr<const vpki::SignedFingerprint> next_fp;

  node::RateLimiter tx{1};
  node::RateLimiter inbound{1};
  std::optional<std::uint64_t> last_piece_decision_ms;
  node::QueryBackoff backoff{1000, 8000};
  std::uint64_t query_gen = 0;
  std::uint64_t cpu_free_us = 0;
  std::uint32_t record = kNone;

  std::uint32_t acc_second = kNone;
  std::uint32_t acc_bytes = 0;

  // Senders caught with a rejected piece, keyed by (vehicle id, pseudonym
  // index); a pseudonym change gives the sender a fresh identity.
  std::vector<std::pair<std::uint64_t, std::uint64_t>> blocked;
};

struct Rsu {
  Point p;
  node::RateLimiter tx{1};
  std::optional<std::uint64_t> last_piece_decision_ms;
  std::uint32_t acc_second = kNone;
  std::uint32_t acc_bytes = 0;
};

struct Broadcast {
  PieceHandle handle;
  std::uint64_t sender = 0;  // vehicle id, or kRsuIdBase + index
  std::uint64_t sender_pseudonym = 0;
  std::vector<std::pair<std::uint32_t, std::uint64_t>> receivers;  // (slot, vehicle id)
};

class Simulator {
 public:
  explicit Simulator(const ScenarioConfig& cfg)
      : cfg_(cfg),
        tgrid_(cfg.grid()),
        grid_{cfg.grid_cols, cfg.grid_rows, cfg.cell_length_m},
        rng_(cfg.seed),
        rsu_rng_(mix(cfg.seed, 4)),
        pca_(KeyPair::from_seed(mix(cfg.seed, 1)), KeyPair::from_seed(mix(cfg.seed, 2)).public_key(),
             vpki::PcaConfig{tgrid_, cfg.bandwidth_bytes_per_s, cfg.fingerprint_fpr, cfg.carrier_fraction},
             mix(cfg.seed, 3)) {
    policy_.alpha = cfg.alpha;
    policy_.beta = cfg.beta;
    policy_.rate_hz = cfg.beacon_hz;
    index_cell_ = cfg.radio_range_m + 2.0 * cfg.speed_max_mps;
    query_ms_ = ms_ceil(cfg.verify_ms);
    build_beacon_table();
  }

  SimResult run() {
    result_.config = cfg_;
    setup_population();
    pieces_at_start_ = static_cast<std::uint32_t>(crl(gamma_at(0)).pieces.size());
    for (std::uint32_t s = 0; s <= cfg_.sim_duration_s; ++s) push(s * 1000ull, Ev::Sample, s, 0);
    for (std::uint32_t r = 0; r < rsus_.size(); ++r)
      push(rng_.below(ms_ceil(cfg_.fingerprint_tx_s * 1000)), Ev::RsuBeacon, r, 0);

    const std::uint64_t end = cfg_.sim_duration_s * 1000ull;
    while (!queue_.empty()) {
      Event e = queue_.top();
      if (e.t > end) break;
      queue_.pop();
      now_ = e.t;
      dispatch(e);
    }
    finish();
    return std::move(result_);
  }

 private:
  // ---- plumbing ----

  void push(std::uint64_t t, Ev type, std::uint32_t a, std::uint64_t b, std::uint32_t c = 0) {
    queue_.push(Event{t, seq_++, type, a, b, c});
  }

  void count(const char* name, std::uint64_t n = 1) { result_.counters[name] += n; }

  std::uint64_t abs_s(std::uint64_t t_ms) const { return cfg_.start_time_s + t_ms / 1000; }
  std::uint64_t pseudonym_index() const { return abs_s(now_) / cfg_.pseudonym_lifetime_s; }

  std::uint32_t gamma_at(std::uint64_t t_ms) const {
    auto s = abs_s(t_ms);
    if (cfg_.scheme == Scheme::Baseline) return static_cast<std::uint32_t>(s / 86'400);
    return static_cast<std::uint32_t>(s / cfg_.crl_window_s);
  }

  void add_overhead(std::uint64_t t_ms, std::uint64_t sig, std::uint64_t fp) {
    auto w = static_cast<std::size_t>(t_ms / 1000 / kOverheadWindowS);
    if (overhead_.size() <= w) overhead_.resize(w + 1);
    overhead_[w].first += sig;
    overhead_[w].second += fp;
  }

  template <typename Node>
  void log_tx(Node& n, std::uint64_t node_id, std::size_t bytes) {
    auto sec = static_cast<std::uint32_t>(now_ / 1000);
    if (n.acc_second != sec) {
      flush_tx(n, node_id);
      n.acc_second = sec;
    }
    n.acc_bytes += static_cast<std::uint32_t>(bytes);
  }

  template <typename Node>
  void flush_tx(Node& n, std::uint64_t node_id) {
    if (n.acc_second != kNone && n.acc_bytes > 0) result_.crl_tx.push_back({node_id, n.acc_second, n.acc_bytes});
    n.acc_second = kNone;
    n.acc_bytes = 0;
  }

  // ---- CRL material ----

  CrlData& crl(std::uint32_t gamma) {
    auto it = crls_.find(gamma);
    if (it != crls_.end()) return *it->second;
    auto d = std::make_unique<CrlData>();
    d->gamma = gamma;
    Rng r(mix(cfg_.seed, 0xC0FFEE + gamma));
    const double per_window =
        static_cast<double>(cfg_.total_pseudonyms_per_day) * cfg_.revocation_rate / cfg_.windows_per_day();
    const bool baseline = cfg_.scheme == Scheme::Baseline;
    const auto n_entries = static_cast<std::size_t>(std::llround(per_window)) * (baseline ? cfg_.windows_per_day() : 1);
    const std::uint32_t batch = tgrid_.batch_size();
    std::vector<vpki::CrlEntry> entries(n_entries);
    for (auto& e : entries) {
      for (auto& b : e.anchor_sn.bytes) b = static_cast<std::uint8_t>(r.next());
      for (auto& b : e.chain_seed.bytes) b = static_cast<std::uint8_t>(r.next());
      e.remaining = static_cast<std::uint8_t>(r.below(batch));
    }
    const std::size_t sig_bytes = baseline ? node::kWireSignatureOverhead : 0;
    std::vector<vpki::CrlPiece> pieces;
    if (baseline) {
      if (!entries.empty()) pieces = vpki::split_entries(gamma, entries, cfg_.bandwidth_bytes_per_s - sig_bytes);
      d->fingerprint = nullptr;
    } else {
      for (const auto& e : entries) pca_.add_entry(gamma, e, {});
      const auto& pub = pca_.published(gamma);
      pieces = pub.pieces;
      d->fingerprint = std::make_shared<vpki::SignedFingerprint>(pub.fingerprint);
    }
    d->full = std::make_unique<PieceLedger>(gamma, baseline ? PieceLedger::Mode::Signed : PieceLedger::Mode::Fingerprint);
    if (d->fingerprint) d->full->install_fingerprint(d->fingerprint);
    for (auto& p : pieces) {
      auto h = PieceHandle::make(std::make_shared<vpki::CrlPiece>(std::move(p)), sig_bytes);
      d->max_wire = std::max(d->max_wire, h.wire_size);
      d->full->offer(h);
      d->pieces.push_back(std::move(h));
    }
    if (baseline && d->pieces.empty()) d->full->set_total(0);
    // Forgeries reuse the shape of the genuine pieces with random entry bytes.
    if (cfg_.attacker_fraction > 0) {
      for (const auto& g : d->pieces) {
        auto f = std::make_shared<vpki::CrlPiece>(*g.piece);
        for (auto& e : f->entries) {
          for (auto& b : e.anchor_sn.bytes) b = static_cast<std::uint8_t>(r.next());
          for (auto& b : e.chain_seed.bytes) b = static_cast<std::uint8_t>(r.next());
        }
        d->fakes.push_back(PieceHandle::make(f, sig_bytes, false));
      }
    }
    auto& ref = *d;
    crls_.emplace(gamma, std::move(d));
    return ref;
  }

  void build_beacon_table() {
    vpki::Pseudonym plain;
    plain.valid_from = 0;
    plain.valid_to = UINT32_MAX;
    const std::uint32_t hz = cfg_.beacon_hz;
    sig_per_second_.assign(cfg_.pseudonym_lifetime_s, 0);
    attach_per_second_.assign(cfg_.pseudonym_lifetime_s, 0);
    for (std::uint32_t s = 0; s < cfg_.pseudonym_lifetime_s; ++s)
      for (std::uint32_t i = 0; i < hz; ++i) {
        auto cam = node::beacon(std::uint64_t{s} * hz + i, &plain, 0, policy_);
        sig_per_second_[s] += cam->security_bytes;
        attach_per_second_[s] += cam->pseudonym_attached ? 1 : 0;
      }
    plain_pseudonym_bytes_ = plain.encoded_size();
  }

  // ---- population ----

  void setup_population() {
    auto placed = place_rsus(grid_, cfg_.n_rsus, cfg_.radio_range_m);
    for (auto p : placed) {
      Rsu r;
      r.p = p;
      r.tx = node::RateLimiter(cfg_.bandwidth_bytes_per_s);
      rsus_.push_back(std::move(r));
    }

    if (!cfg_.trace_file.empty()) {
      std::ifstream in(cfg_.trace_file);
      if (!in) throw ConfigError("trace_file", "cannot open " + cfg_.trace_file);
      trace_ = std::make_unique<Trace>(Trace::read_csv(in));
      auto ids = trace_->vehicles();
      vehicles_.resize(ids.size());
      for (std::uint32_t slot = 0; slot < ids.size(); ++slot) {
        attacker_slot_.push_back(rng_.bernoulli(cfg_.attacker_fraction));
        auto from = trace_->span(ids[slot]).first;
        if (from <= cfg_.sim_duration_s * 1000ull) push(from, Ev::Spawn, slot, ids[slot]);
      }
      return;
    }

    vehicles_.resize(cfg_.n_vehicles);
    attacker_slot_.assign(cfg_.n_vehicles, false);
    auto n_att = static_cast<std::uint32_t>(std::llround(cfg_.attacker_fraction * cfg_.n_vehicles));
    for (std::uint32_t i = 0; i < n_att; ++i) {
      std::uint32_t s;
      do s = static_cast<std::uint32_t>(rng_.below(cfg_.n_vehicles));
      while (attacker_slot_[s]);
      attacker_slot_[s] = true;
    }
    for (std::uint32_t slot = 0; slot < cfg_.n_vehicles; ++slot) spawn(slot, next_id_++);
  }

  void spawn(std::uint32_t slot, std::uint64_t id) {
    Vehicle& v = vehicles_[slot];
    v = Vehicle{};
    v.id = id;
    v.present = true;
    v.attacker = attacker_slot_[slot];
    v.enter_ms = now_;
    v.rng = Rng(mix(cfg_.seed, 0x5EED0000 + id));
    v.carrier_seed = v.rng.next();
    v.tx = node::RateLimiter(cfg_.bandwidth_bytes_per_s);
    v.inbound = node::RateLimiter(cfg_.bandwidth_bytes_per_s);
    v.backoff = node::QueryBackoff(ms_ceil(cfg_.query_timeout_s * 1000), ms_ceil(cfg_.query_backoff_max_s * 1000));

    std::uint64_t depart;
    if (trace_) {
      v.trace_id = id;
      depart = trace_->span(id).second;
    } else {
      v.walker.emplace(grid_, Rng(v.rng.next()), cfg_.speed_min_mps, cfg_.speed_max_mps, now_);
      depart = now_ + std::max<std::uint64_t>(1, static_cast<std::uint64_t>(v.rng.exponential(cfg_.trip_mean_s) * 1000));
    }
    push(depart, Ev::Depart, slot, id);
    index_insert(slot, position(v));
    count("vehicles_spawned");

    if (v.attacker) {
      push(now_ + v.rng.below(ms_ceil(cfg_.fake_piece_tx_s * 1000)), Ev::Fake, slot, id);
      return;
    }
    v.record = static_cast<std::uint32_t>(result_.vehicles.size());
    result_.vehicles.push_back({id, now_ / 1000.0, std::nullopt, std::nullopt});
    ensure_window(v);
    v.entry_gamma = v.ledger_gamma;
    note_completion(v);
    push(now_ + v.rng.below(1000), Ev::Beacon, slot, id);
    schedule_query(slot, now_);
  }

  Point position(Vehicle& v) {
    if (trace_) return trace_->position(v.trace_id, now_);
    return v.walker->position(now_);
  }

  bool carrier_now(const Vehicle& v) const {
    if (v.attacker || cfg_.carrier_fraction <= 0) return false;
    std::uint64_t batch = abs_s(now_) / cfg_.issue_interval_s;
    Rng r(mix(v.carrier_seed, batch));
    return r.bernoulli(cfg_.carrier_fraction);
  }

  /// Moves the vehicle's ledger to the CRL current at `now_`.
  void ensure_window(Vehicle& v) {
    std::uint32_t g = gamma_at(now_);
    if (v.ledger_gamma != g) {
      auto& d = crl(g);
      const bool baseline = cfg_.scheme == Scheme::Baseline;
      v.ledger = std::make_unique<PieceLedger>(g, baseline ? PieceLedger::Mode::Signed : PieceLedger::Mode::Fingerprint);
      v.ledger_gamma = g;
      if (d.pieces.empty() && baseline) v.ledger->set_total(0);
      if (v.next_fp && v.next_fp->gamma_crl_index == g) v.ledger->install_fingerprint(v.next_fp);
      v.next_fp = nullptr;
      v.backoff.reset();
    }
    if (!v.ledger->has_fingerprint() && cfg_.scheme == Scheme::VehicleCentric && carrier_now(v)) {
      // The vehicle's own pseudonym embeds this window's fingerprint.
      v.ledger->install_fingerprint(crl(g).fingerprint);
      note_completion(v);
    }
  }

  bool cognizant(Vehicle& v) {
    ensure_window(v);
    return v.ledger->complete() || crl(v.ledger_gamma).pieces.empty();
  }

  void note_completion(Vehicle& v, std::uint64_t at_ms = UINT64_MAX) {
    if (v.ledger->complete()) {
      // Ground truth the nodes never see: a completed ledger holds the PCA's pieces.
      const auto& genuine = crl(v.ledger_gamma).pieces;
      for (std::uint16_t i = 0; i < v.ledger->total(); ++i)
        if (i >= genuine.size() || v.ledger->piece(i)->digest != genuine[i].digest) count("forgeries_accepted");
    }
    if (v.record == kNone || v.ledger_gamma != v.entry_gamma) return;
    auto& rec = result_.vehicles[v.record];
    if (rec.complete_s) return;
    if (!(v.ledger->complete() || crl(v.ledger_gamma).pieces.empty())) return;
    rec.complete_s = (at_ms == UINT64_MAX ? now_ : at_ms) / 1000.0;
    count("vehicles_completed");
  }

  // ---- spatial index ----

  std::int64_t cell_key(Point p) const {
    auto cx = static_cast<std::int64_t>(std::floor(p.x / index_cell_));
    auto cy = static_cast<std::int64_t>(std::floor(p.y / index_cell_));
    return (cx << 32) ^ (cy & 0xffffffff);
  }

  void index_insert(std::uint32_t slot, Point p) { cells_[cell_key(p)].push_back(slot); }

  void rebuild_index() {
    for (auto& [k, v] : cells_) v.clear();
    for (std::uint32_t s = 0; s < vehicles_.size(); ++s)
      if (vehicles_[s].present) index_insert(s, position(vehicles_[s]));
  }

  /// Calls f(slot) for every present vehicle within radio range of p.
  template <typename F>
  void for_each_in_range(Point p, std::uint32_t exclude, F&& f) {
    if (mark_.size() < vehicles_.size()) mark_.resize(vehicles_.size(), 0);
    ++stamp_;
    const double r2 = cfg_.radio_range_m * cfg_.radio_range_m;
    auto cx = static_cast<std::int64_t>(std::floor(p.x / index_cell_));
    auto cy = static_cast<std::int64_t>(std::floor(p.y / index_cell_));
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        auto it = cells_.find(((cx + dx) << 32) ^ ((cy + dy) & 0xffffffff));
        if (it == cells_.end()) continue;
        for (std::uint32_t s : it->second) {
          if (s == exclude || mark_[s] == stamp_) continue;
          mark_[s] = stamp_;
          Vehicle& v = vehicles_[s];
          if (!v.present) continue;
          if (dist2(position(v), p) <= r2) f(s);
        }
      }
  }

  // ---- events ----

  void dispatch(const Event& e) {
    switch (e.type) {
      case Ev::Sample: return on_sample(e.a);
      case Ev::Depart: return on_depart(e.a, e.b);
      case Ev::Spawn: return spawn(e.a, e.b);
      case Ev::Beacon: return on_beacon(e.a, e.b);
      case Ev::RsuBeacon: return on_rsu_beacon(e.a);
      case Ev::Query: return on_query(e.a, e.b);
      case Ev::TxPiece: return on_tx_piece(e.a, e.b, e.c);
      case Ev::Fake: return on_fake(e.a, e.b);
      case Ev::Deliver: return on_deliver(e.a);
    }
  }

  void on_sample(std::uint32_t s) {
    rebuild_index();
    CognizantSample cs;
    cs.t_s = s;
    for (auto& v : vehicles_) {
      if (!v.present || v.attacker) continue;
      ++cs.present;
      if (cognizant(v)) ++cs.cognizant;
    }
    result_.cognizant.push_back(cs);
  }

  void on_depart(std::uint32_t slot, std::uint64_t id) {
    Vehicle& v = vehicles_[slot];
    if (!v.present || v.id != id) return;
    v.present = false;
    flush_tx(v, v.id);
    if (v.record != kNone) result_.vehicles[v.record].depart_s = now_ / 1000.0;
    count("vehicles_departed");
    if (!trace_) spawn(slot, next_id_++);
  }

  void on_beacon(std::uint32_t slot, std::uint64_t id) {
    Vehicle& v = vehicles_[slot];
    if (!v.present || v.id != id) return;
    push(now_ + 1000, Ev::Beacon, slot, id);
    ensure_window(v);
    const auto sec_in = static_cast<std::size_t>(abs_s(now_) % cfg_.pseudonym_lifetime_s);
    const std::uint64_t attachments = attach_per_second_[sec_in];
    std::uint64_t fp_bytes = 0;
    const bool carrier = cfg_.scheme == Scheme::VehicleCentric && carrier_now(v);
    if (carrier) fp_bytes = attachments * crl(v.ledger_gamma).fingerprint->filter.serialized_size();
    add_overhead(now_, sig_per_second_[sec_in], fp_bytes);
    if (!carrier || attachments == 0) return;

    auto fp = crl(v.ledger_gamma).fingerprint;
    Point p = position(v);
    for_each_in_range(p, slot, [&](std::uint32_t r) { receive_fingerprint(r, fp); });
  }

  void on_rsu_beacon(std::uint32_t ri) {
    Rsu& rsu = rsus_[ri];
    push(now_ + ms_ceil(cfg_.fingerprint_tx_s * 1000), Ev::RsuBeacon, ri, 0);
    if (cfg_.scheme == Scheme::Baseline) {
      // Signed notification of the current CRL and its piece count.
      const std::size_t bytes = 4 + 2 + node::kWireSignatureOverhead;
      if (!rsu.tx.try_consume(now_, bytes)) return;
      log_tx(rsu, kRsuIdBase + ri, bytes);
      add_overhead(now_, node::kWireSignatureOverhead, 0);
      auto& d = crl(gamma_at(now_));
      const auto total = static_cast<std::uint16_t>(d.pieces.size());
      for_each_in_range(rsu.p, kNone, [&](std::uint32_t s) {
        Vehicle& v = vehicles_[s];
        if (v.attacker) return;
        ensure_window(v);
        if (v.ledger->gamma() == d.gamma && !v.ledger->knows_total()) {
          v.ledger->set_total(total);
          count("notifications_received");
          note_completion(v);
        }
      });
      return;
    }
    const std::uint64_t abs_ms = cfg_.start_time_s * 1000ull + now_;
    std::uint32_t g = node::choose_fingerprint_window(abs_ms, tgrid_, rsu_rng_);
    auto fp = crl(g).fingerprint;
    const std::size_t bytes = fp->encoded_size();
    if (!rsu.tx.try_consume(now_, bytes)) return;
    log_tx(rsu, kRsuIdBase + ri, bytes);
    add_overhead(now_, kSignatureSize, fp->filter.serialized_size());
    for_each_in_range(rsu.p, kNone, [&](std::uint32_t s) { receive_fingerprint(s, fp); });
  }

  void receive_fingerprint(std::uint32_t slot, const std::shared_ptr<const vpki::SignedFingerprint>& fp) {
    Vehicle& v = vehicles_[slot];
    if (v.attacker) return;
    ensure_window(v);
    if (fp->gamma_crl_index == v.ledger_gamma) {
      if (v.ledger->has_fingerprint()) return;
      count("fingerprints_verified");
      std::uint64_t done = cpu(v, cfg_.verify_ms);
      v.ledger->install_fingerprint(fp);
      note_completion(v, done);
      schedule_query(slot, now_);
    } else if (fp->gamma_crl_index == v.ledger_gamma + 1 && !v.next_fp) {
      count("fingerprints_verified");
      cpu(v, cfg_.verify_ms);
      v.next_fp = fp;
    }
  }

  /// Charges modelled processing time; returns the completion time in ms.
  std::uint64_t cpu(Vehicle& v, double cost_ms) {
    std::uint64_t start = std::max(now_ * 1000, v.cpu_free_us);
    v.cpu_free_us = start + static_cast<std::uint64_t>(std::llround(cost_ms * 1000));
    return (v.cpu_free_us + 999) / 1000;
  }

  void schedule_query(std::uint32_t slot, std::uint64_t at) {
    Vehicle& v = vehicles_[slot];
    push(at, Ev::Query, slot, ++v.query_gen);
  }

  void on_query(std::uint32_t slot, std::uint64_t gen) {
    Vehicle& v = vehicles_[slot];
    if (!v.present || v.attacker || v.query_gen != gen) return;
    ensure_window(v);
    auto& d = crl(v.ledger_gamma);
    if (v.ledger->complete() || d.pieces.empty()) return;
    if (cfg_.inbound_limit && !v.inbound.can_send(now_, d.max_wire)) {
      schedule_query(slot, v.inbound.next_available_ms(now_, d.max_wire));
      return;
    }
    std::vector<std::uint16_t> wanted;
    if (v.ledger->knows_total()) wanted = v.ledger->missing();
    const bool carrier = cfg_.scheme == Scheme::VehicleCentric && carrier_now(v);
    std::size_t ps = plain_pseudonym_bytes_ + (carrier ? d.fingerprint->filter.serialized_size() : 0);
    const std::size_t qbytes = node::CrlQuery::wire_size(wanted.size(), ps);
    count("queries_sent");
    count("query_bytes", qbytes);
    add_overhead(now_, kSignatureSize + plain_pseudonym_bytes_, carrier ? ps - plain_pseudonym_bytes_ : 0);
    cpu(v, cfg_.sign_ms);
    schedule_query(slot, now_ + v.backoff.on_sent());

    const std::uint64_t respond_at = now_ + std::max<std::uint64_t>(1, query_ms_);
    const std::uint64_t gap = ms_ceil(cfg_.piece_tx_s * 1000);
    Point p = position(v);
    auto ready = [&](const std::optional<std::uint64_t>& last) { return !last || now_ >= *last + gap; };

    for (std::uint32_t ri = 0; ri < rsus_.size(); ++ri) {
      Rsu& rsu = rsus_[ri];
      if (dist2(rsu.p, p) > cfg_.radio_range_m * cfg_.radio_range_m) continue;
      if (!ready(rsu.last_piece_decision_ms)) continue;
      auto pick = node::choose_piece(*d.full, wanted, rsu_rng_);
      if (!pick || !rsu.tx.can_send(respond_at, d.pieces[*pick].wire_size)) continue;
      rsu.last_piece_decision_ms = now_;
      push(respond_at, Ev::TxPiece, ri, kRsuIdBase, *pick);
    }
    for_each_in_range(p, slot, [&](std::uint32_t r) {
      Vehicle& w = vehicles_[r];
      if (w.attacker) return;
      ensure_window(w);
      if (w.ledger_gamma != v.ledger_gamma || w.ledger->held_count() == 0) return;
      if (!ready(w.last_piece_decision_ms)) return;
      count("queries_verified");
      auto pick = node::choose_piece(*w.ledger, wanted, w.rng);
      if (!pick || !w.tx.can_send(respond_at, w.ledger->piece(*pick)->wire_size)) return;
      w.last_piece_decision_ms = now_;
      push(respond_at, Ev::TxPiece, r, w.id, *pick);
    });
  }

  void on_tx_piece(std::uint32_t who, std::uint64_t id, std::uint32_t index) {
    PieceHandle h;
    Point p;
    std::uint32_t exclude = kNone;
    if (id == kRsuIdBase) {
      Rsu& rsu = rsus_[who];
      auto& d = crl(gamma_at(now_));
      if (index >= d.pieces.size()) return;
      h = d.pieces[index];
      if (!rsu.tx.try_consume(now_, h.wire_size)) return;
      log_tx(rsu, kRsuIdBase + who, h.wire_size);
      p = rsu.p;
    } else {
      Vehicle& v = vehicles_[who];
      if (!v.present || v.id != id) return;
      ensure_window(v);
      const PieceHandle* held = v.ledger->piece(static_cast<std::uint16_t>(index));
      if (!held) return;
      h = *held;
      if (!v.tx.try_consume(now_, h.wire_size)) return;
      log_tx(v, v.id, h.wire_size);
      p = position(v);
      exclude = who;
    }
    count("pieces_sent");
    if (cfg_.scheme == Scheme::Baseline) add_overhead(now_, node::kWireSignatureOverhead, 0);
    broadcast(h, p, exclude, exclude == kNone ? kRsuIdBase + who : id);
  }

  void on_fake(std::uint32_t slot, std::uint64_t id) {
    Vehicle& v = vehicles_[slot];
    if (!v.present || v.id != id) return;
    push(now_ + ms_ceil(cfg_.fake_piece_tx_s * 1000), Ev::Fake, slot, id);
    auto& d = crl(gamma_at(now_));
    if (d.fakes.empty()) return;
    const auto& h = d.fakes[v.rng.below(d.fakes.size())];
    count("fakes_sent");
    broadcast(h, position(v), slot, v.id);
  }

  void broadcast(const PieceHandle& h, Point p, std::uint32_t exclude, std::uint64_t sender) {
    std::uint32_t bi;
    if (!free_broadcasts_.empty()) {
      bi = free_broadcasts_.back();
      free_broadcasts_.pop_back();
    } else {
      bi = static_cast<std::uint32_t>(broadcasts_.size());
      broadcasts_.emplace_back();
    }
    Broadcast& b = broadcasts_[bi];
    b.handle = h;
    b.sender = sender;
    b.sender_pseudonym = pseudonym_index();
    b.receivers.clear();
    for_each_in_range(p, exclude, [&](std::uint32_t s) { b.receivers.emplace_back(s, vehicles_[s].id); });
    const auto airtime = ms_ceil(static_cast<double>(h.wire_size) * 8.0 / cfg_.bitrate_bps * 1000.0);
    push(now_ + std::max<std::uint64_t>(1, airtime), Ev::Deliver, bi, 0);
  }

  void on_deliver(std::uint32_t bi) {
    Broadcast& b = broadcasts_[bi];
    const PieceHandle& h = b.handle;
    for (auto [slot, id] : b.receivers) {
      Vehicle& v = vehicles_[slot];
      if (!v.present || v.id != id || v.attacker) continue;
      ensure_window(v);
      if (v.ledger->complete() || !v.ledger->wants(h.gamma(), h.index(), h.total())) continue;
      const std::pair<std::uint64_t, std::uint64_t> who{b.sender, b.sender_pseudonym};
      if (std::find(v.blocked.begin(), v.blocked.end(), who) != v.blocked.end()) {
        count("blocked_sender_dropped");
        continue;
      }
      if (!v.ledger->knows_total() && v.ledger->mode() == PieceLedger::Mode::Fingerprint) {
        // Without a fingerprint the buffer is the only place the piece can go.
        std::size_t cap = std::min<std::size_t>(2 * std::size_t{h.total()}, PieceLedger::kBufferHardCap);
        if (v.ledger->buffered_count() >= cap) {
          count("buffer_full");
          continue;
        }
      }
      if (cfg_.inbound_limit && !v.inbound.try_consume(now_, h.wire_size)) {
        count("inbound_dropped");
        continue;
      }
      count("pieces_received");
      double cost = 0;
      if (v.ledger->mode() == PieceLedger::Mode::Signed) {
        cost = cfg_.verify_ms;
        count("signature_verifications");
      } else if (v.ledger->has_fingerprint()) {
        cost = cfg_.bf_test_ms;
        count("bf_tests");
      }
      std::uint64_t done = cost > 0 ? cpu(v, cost) : now_;
      switch (v.ledger->offer(h)) {
        case Verdict::Accepted:
          count("pieces_accepted");
          v.backoff.reset();
          note_completion(v, done);
          if (!v.ledger->complete()) schedule_query(slot, std::max(now_, done));
          break;
        case Verdict::Rejected:
          count("pieces_rejected");  // reported as misbehaviour
          std::erase_if(v.blocked, [&](const auto& e) { return e.second != b.sender_pseudonym; });
          v.blocked.push_back(who);
          break;
        case Verdict::Duplicate:
          count("duplicates");
          break;
        case Verdict::Buffered:
          count("pieces_buffered");
          break;
        case Verdict::BufferFull:
          count("buffer_full");
          break;
        case Verdict::Mismatch:
          count("header_mismatch");
          break;
      }
    }
    free_broadcasts_.push_back(bi);
  }

  void finish() {
    for (auto& v : vehicles_)
      if (v.present) flush_tx(v, v.id);
    for (std::uint32_t i = 0; i < rsus_.size(); ++i) flush_tx(rsus_[i], kRsuIdBase + i);
    std::sort(result_.crl_tx.begin(), result_.crl_tx.end(), [](const TxSecond& a, const TxSecond& b) {
      return a.second != b.second ? a.second < b.second : a.node < b.node;
    });
    const auto n_windows = (cfg_.sim_duration_s + kOverheadWindowS - 1) / kOverheadWindowS;
    overhead_.resize(std::max<std::size_t>(overhead_.size(), n_windows));
    for (std::size_t w = 0; w < overhead_.size(); ++w)
      result_.overhead.push_back({static_cast<std::uint32_t>(w * kOverheadWindowS), overhead_[w].first,
                                  overhead_[w].second});
    result_.pieces_per_crl = pieces_at_start_;
    result_.counters["rsus_placed"] = rsus_.size();
    result_.counters["pieces_per_crl"] = pieces_at_start_;
  }

  const ScenarioConfig& cfg_;
  vpki::TimeGrid tgrid_;
  Grid grid_;
  Rng rng_;
  Rng rsu_rng_;
  vpki::Pca pca_;
  node::BeaconPolicy policy_;
  double index_cell_;
  std::uint64_t query_ms_;

  std::vector<std::uint64_t> sig_per_second_;
  std::vector<std::uint64_t> attach_per_second_;
  std::size_t plain_pseudonym_bytes_ = 0;

  std::map<std::uint32_t, std::unique_ptr<CrlData>> crls_;
  std::vector<Vehicle> vehicles_;
  std::vector<bool> attacker_slot_;
  std::vector<Rsu> rsus_;
  std::unique_ptr<Trace> trace_;
  std::uint64_t next_id_ = 0;
  std::uint32_t pieces_at_start_ = 0;

  std::unordered_map<std::int64_t, std::vector<std::uint32_t>> cells_;
  std::vector<std::uint32_t> mark_;
  std::uint32_t stamp_ = 0;

  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t seq_ = 0;
  std::uint64_t now_ = 0;
  std::vector<Broadcast> broadcasts_;
  std::vector<std::uint32_t> free_broadcasts_;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> overhead_;

  SimResult result_;
};

}  // namespace

namespace {

std::optional<double> p95_from(const std::vector<VehicleRecord>& vehicles, double from_s) {
  std::vector<double> lat;
  for (const auto& v : vehicles)
    if (v.complete_s && v.enter_s >= from_s) lat.push_back(*v.complete_s - v.enter_s);
  if (lat.empty()) return std::nullopt;
  std::sort(lat.begin(), lat.end());
  auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(lat.size())));
  return lat[std::max<std::size_t>(rank, 1) - 1];
}

}  // namespace

std::optional<double> SimResult::p95_latency_s() const { return p95_from(vehicles, config.warmup_s); }

std::optional<double> SimResult::p95_latency_all_s() const { return p95_from(vehicles, 0); }

double SimResult::completed_fraction() const {
  if (vehicles.empty()) return 0;
  std::size_t done = 0;
  for (const auto& v : vehicles) done += v.complete_s ? 1 : 0;
  return static_cast<double>(done) / static_cast<double>(vehicles.size());
}

double SimResult::cognizant_fraction_at(std::uint32_t t_s) const {
  for (const auto& c : cognizant)
    if (c.t_s == t_s) return c.present ? static_cast<double>(c.cognizant) / c.present : 0.0;
  throw std::out_of_range("no cognizant sample at t=" + std::to_string(t_s));
}

std::uint64_t SimResult::total_overhead_bytes() const {
  std::uint64_t sum = 0;
  for (const auto& w : overhead) sum += w.bytes_signatures + w.bytes_fingerprints;
  return sum;
}

SimResult run(const ScenarioConfig& config) {
  config.validate();
  Simulator sim(config);
  return sim.run();
}

}  // namespace crlmesh::sim
