use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::{AttackCost, ScenarioConfig, SimError, SimulationReport, TimelineBin, MICROS};
use crate::costmodel::Scheduling;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

fn us(seconds: f64) -> u64 {
    (seconds * MICROS).round() as u64
}

fn secs(micros: u64) -> f64 {
    micros as f64 / MICROS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Source {
    // attacker traffic sorts ahead of benign traffic at equal times
    Attack,
    Filler,
    Benign,
}

impl Source {
    fn rng_domain(self) -> u64 {
        match self {
            Source::Attack => 0x6174_7461_636b,
            Source::Filler => 0x6669_6c6c_6572,
            Source::Benign => 0x6265_6e69_676e,
        }
    }
}

const CACHE_DOMAIN: u64 = 0x6361_6368_6500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fate {
    Pending,
    Answered,
    CacheHit,
    Dropped,
    Discarded,
    TimedOut,
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Benign(usize),
    Attack { downloaded: bool },
    Filler,
}

#[derive(Debug, Clone, Copy)]
struct Item {
    kind: Kind,
    arrival: u64,
    /// Occupies a slot in the OS buffer while queued.
    buffered: bool,
}

#[derive(Debug, Default)]
struct Thread {
    queue: VecDeque<Item>,
    serving: bool,
    downloads: usize,
}

impl Thread {
    fn pending(&self) -> usize {
        self.queue.len() + self.serving as usize + self.downloads
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    Done(usize),
    Resume(usize),
}

fn draw(seed: u64, domain: u64, id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ domain);
    rng.set_stream(id);
    rng
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    threads: Vec<Thread>,
    scheduling: Scheduling,
    round_robin: usize,
    buffer_len: usize,
    buffer_cap: Option<usize>,
    discard_older: Option<u64>,
    benign_cost: u64,
    attack_cost: u64,
    io_gap: u64,
    timeout: u64,
    events: BinaryHeap<Reverse<(u64, u64, Event)>>,
    seq: u64,
    benign: Vec<(u64, Fate)>,
    attack_busy: Vec<Vec<(u64, u64)>>,
    attack_served: u64,
    attack_dropped: u64,
    attack_discarded: u64,
}

impl Sim<'_> {
    fn push(&mut self, at: u64, e: Event) {
        self.seq += 1;
        self.events.push(Reverse((at, self.seq, e)));
    }

    fn pick_thread(&mut self, source: Source, id: u64) -> usize {
        let n = self.threads.len();
        match self.scheduling {
            Scheduling::Random => draw(self.cfg.seed, source.rng_domain(), id).gen_range(0..n),
            Scheduling::RoundRobin => {
                let t = self.round_robin % n;
                self.round_robin += 1;
                t
            }
            Scheduling::LoadAware => (0..n)
                .min_by_key(|&i| (self.threads[i].pending(), i))
                .expect("at least one thread"),
        }
    }

    fn arrive(&mut self, t: u64, source: Source, id: u64, cached_thread: bool) {
        let kind = match source {
            Source::Benign => {
                let idx = id as usize;
                let f = self.cfg.benign_cache_hit_fraction;
                if cached_thread && f > 0.0 && draw(self.cfg.seed, CACHE_DOMAIN, id).gen::<f64>() < f {
                    self.benign[idx].1 = Fate::CacheHit;
                    return;
                }
                Kind::Benign(idx)
            }
            Source::Attack => Kind::Attack { downloaded: false },
            Source::Filler => Kind::Filler,
        };
        let th = self.pick_thread(source, id);
        let item = Item {
            kind,
            arrival: t,
            buffered: false,
        };
        let thread = &self.threads[th];
        if !thread.serving && thread.queue.is_empty() {
            self.serve(th, t, item);
            self.dequeue(th, t);
        } else if self.buffer_cap.is_some_and(|cap| self.buffer_len >= cap) {
            match kind {
                Kind::Benign(i) => self.benign[i].1 = Fate::Dropped,
                Kind::Attack { .. } => self.attack_dropped += 1,
                Kind::Filler => {}
            }
        } else {
            self.buffer_len += 1;
            self.threads[th].queue.push_back(Item {
                buffered: true,
                ..item
            });
        }
    }

    /// Starts `item` on thread `th`. Returns whether the thread is now serving.
    fn serve(&mut self, th: usize, t: u64, item: Item) -> bool {
        let cost = match item.kind {
            Kind::Benign(i) => {
                let deadline = self.benign[i].0 + self.timeout;
                // an abandoned query is still resolved
                self.benign[i].1 = if t <= deadline {
                    Fate::Answered
                } else {
                    Fate::TimedOut
                };
                self.benign_cost
            }
            Kind::Filler => self.benign_cost,
            Kind::Attack { downloaded: false } if self.io_gap > 0 => {
                self.threads[th].downloads += 1;
                self.push(t + self.io_gap, Event::Resume(th));
                return false;
            }
            Kind::Attack { .. } => {
                self.attack_served += 1;
                self.attack_busy[th].push((t, t + self.attack_cost));
                self.attack_cost
            }
        };
        self.threads[th].serving = true;
        self.push(t + cost, Event::Done(th));
        true
    }

    /// Serves queued items on an idle thread until one occupies it.
    fn dequeue(&mut self, th: usize, t: u64) {
        while !self.threads[th].serving {
            let Some(item) = self.threads[th].queue.pop_front() else {
                return;
            };
            if item.buffered {
                self.buffer_len -= 1;
                if self.discard_older.is_some_and(|d| t - item.arrival > d) {
                    match item.kind {
                        Kind::Benign(i) => self.benign[i].1 = Fate::Discarded,
                        Kind::Attack { .. } => self.attack_discarded += 1,
                        Kind::Filler => {}
                    }
                    continue;
                }
            }
            self.serve(th, t, item);
        }
    }

    fn handle(&mut self, t: u64, e: Event) {
        match e {
            Event::Done(th) => {
                self.threads[th].serving = false;
                self.dequeue(th, t);
            }
            Event::Resume(th) => {
                self.threads[th].downloads -= 1;
                self.threads[th].queue.push_front(Item {
                    kind: Kind::Attack { downloaded: true },
                    arrival: t,
                    buffered: false,
                });
                self.dequeue(th, t);
            }
        }
    }
}

/// Times at which every thread is busy with attack work.
fn all_busy(per_thread: &[Vec<(u64, u64)>]) -> Vec<(u64, u64)> {
    let n = per_thread.len() as i64;
    let mut edges: Vec<(u64, i64)> = per_thread
        .iter()
        .flatten()
        .flat_map(|&(s, e)| [(s, 1), (e, -1)])
        .collect();
    // starts before ends at equal times, so back-to-back work stays one stall
    edges.sort_by_key(|&(t, d)| (t, -d));
    let mut out = Vec::new();
    let mut busy = 0i64;
    let mut since = None;
    for (t, d) in edges {
        busy += d;
        match since {
            None if busy >= n => since = Some(t),
            Some(s) if busy < n => {
                if t > s {
                    out.push((s, t));
                }
                since = None;
            }
            _ => {}
        }
    }
    out
}

/// Runs a scenario with a precomputed per-request attack cost, so repeated
/// runs over seeds validate the attack zone once.
pub fn run_scenario_with_cost(
    cfg: &ScenarioConfig,
    cost: Option<&AttackCost>,
) -> Result<SimulationReport, SimError> {
    cfg.validate()?;
    let profile = cfg.effective_profile()?;
    let n = profile.thread_count;
    let batches = cfg.attack_batches(n);
    if batches.iter().any(|b| b.count > 0) && cost.is_none() {
        return Err(SimError::Invalid("attack requests need an attack cost".into()));
    }

    let mut arrivals: Vec<(u64, Source, u64)> = Vec::new();
    let (mut attack_id, mut filler_id) = (0u64, 0u64);
    for b in &batches {
        let t = us(b.time);
        for _ in 0..b.count {
            arrivals.push((t, Source::Attack, attack_id));
            attack_id += 1;
        }
        for _ in 0..b.fillers {
            arrivals.push((t, Source::Filler, filler_id));
            filler_id += 1;
        }
    }
    let mut benign = Vec::new();
    if cfg.benign_rate > 0.0 {
        let mut i = 0u64;
        loop {
            let t = cfg.benign_start + i as f64 / cfg.benign_rate;
            if t >= cfg.duration {
                break;
            }
            arrivals.push((us(t), Source::Benign, i));
            benign.push((us(t), Fate::Pending));
            i += 1;
        }
    }
    arrivals.sort();

    let mut sim = Sim {
        cfg,
        threads: (0..n).map(|_| Thread::default()).collect(),
        scheduling: profile.scheduling,
        round_robin: 0,
        buffer_len: 0,
        buffer_cap: profile.os_buffer_capacity,
        discard_older: profile.discard_older_than.map(us),
        benign_cost: profile.benign_cost.round() as u64,
        attack_cost: cost.map_or(0, |c| us(c.stall_seconds)),
        io_gap: us(cfg.attack_io_gap),
        timeout: us(cfg.benign_timeout),
        events: BinaryHeap::new(),
        seq: 0,
        benign,
        attack_busy: vec![Vec::new(); n],
        attack_served: 0,
        attack_dropped: 0,
        attack_discarded: 0,
    };

    let end = us(cfg.duration + cfg.benign_timeout);
    let mut next = 0;
    loop {
        let arrival_t = arrivals.get(next).map(|a| a.0);
        let event_t = sim.events.peek().map(|Reverse((t, _, _))| *t);
        match (arrival_t, event_t) {
            // completions first, so a freed thread is idle for a same-time arrival
            (a, Some(e)) if e <= end && a.is_none_or(|a| e <= a) => {
                let Reverse((t, _, ev)) = sim.events.pop().expect("peeked");
                sim.handle(t, ev);
            }
            (Some(a), _) if a <= end => {
                let (t, source, id) = arrivals[next];
                next += 1;
                sim.arrive(t, source, id, profile.cached_answer_thread);
            }
            _ => break,
        }
    }

    // anything unsettled was still queued past its deadline
    for b in &mut sim.benign {
        if b.1 == Fate::Pending {
            b.1 = Fate::TimedOut;
        }
    }
    let count = |f: Fate| sim.benign.iter().filter(|b| b.1 == f).count() as u64;
    let benign_sent = sim.benign.len() as u64;
    let benign_answered = count(Fate::Answered) + count(Fate::CacheHit);
    let benign_lost = benign_sent - benign_answered;
    let (dropped, discarded, timed_out) =
        (count(Fate::Dropped), count(Fate::Discarded), count(Fate::TimedOut));

    let bin = 1.0;
    let bins = (cfg.duration / bin).ceil() as usize;
    let bin_us = us(bin);
    let mut timeline: Vec<TimelineBin> = (0..bins)
        .map(|i| TimelineBin {
            time: i as f64 * bin,
            sent: 0,
            answered: 0,
            lost: 0,
        })
        .collect();
    for &(t, fate) in &sim.benign {
        let b = &mut timeline[((t / bin_us) as usize).min(bins - 1)];
        b.sent += 1;
        if matches!(fate, Fate::Answered | Fate::CacheHit) {
            b.answered += 1;
        } else {
            b.lost += 1;
        }
    }
    let mut thread_busy = vec![vec![0.0; n]; bins];
    for (th, intervals) in sim.attack_busy.iter().enumerate() {
        for &(s, e) in intervals {
            let first = (s / bin_us) as usize;
            let last = (e.div_ceil(bin_us) as usize).min(bins);
            for (i, row) in thread_busy.iter_mut().enumerate().take(last).skip(first) {
                let (lo, hi) = (i as u64 * bin_us, (i as u64 + 1) * bin_us);
                let overlap = e.min(hi).saturating_sub(s.max(lo));
                row[th] += overlap as f64 / bin_us as f64;
            }
        }
    }

    let to_intervals = |v: &[(u64, u64)]| {
        v.iter()
            .map(|&(s, e)| Interval {
                start: secs(s),
                end: secs(e),
            })
            .collect::<Vec<_>>()
    };
    let stall = all_busy(&sim.attack_busy);
    Ok(SimulationReport {
        profile: profile.name.clone(),
        threads: n,
        benign_sent,
        benign_answered,
        benign_lost,
        loss_fraction: if benign_sent == 0 {
            0.0
        } else {
            benign_lost as f64 / benign_sent as f64
        },
        benign_dropped: dropped,
        benign_discarded: discarded,
        benign_timed_out: timed_out,
        benign_cache_hits: count(Fate::CacheHit),
        attack_sent: attack_id,
        attack_served: sim.attack_served,
        attack_dropped: sim.attack_dropped,
        attack_discarded: sim.attack_discarded,
        fillers_sent: filler_id,
        buffer_drops: dropped + sim.attack_dropped,
        attack_cost: cost.cloned(),
        attack_busy: sim.attack_busy.iter().map(|v| to_intervals(v)).collect(),
        stall_intervals: to_intervals(&stall),
        timeline_bin: bin,
        timeline,
        thread_busy,
        benign_log: sim
            .benign
            .iter()
            .map(|&(t, f)| (t, matches!(f, Fate::Answered | Fate::CacheHit)))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simharness::Batch;
    use crate::validator::{CostCounters, Reason, Status};

    fn cost(stall: f64) -> AttackCost {
        AttackCost {
            counters: CostCounters::default(),
            status: Status::Bogus,
            reason: Reason::AllSignaturesFailed,
            stall_seconds: stall,
        }
    }

    fn scenario(profile: &str, threads: usize, batches: &[(f64, u32)], duration: f64) -> ScenarioConfig {
        let mut c = ScenarioConfig::new(profile, duration);
        c.threads = Some(threads);
        c.attack = Some(crate::zonegen::AttackVectorSpec::sigjam(
            crate::wire::Cipher::EcdsaP256Sha256,
            1,
        ));
        c.schedule = batches
            .iter()
            .map(|&(time, count)| Batch {
                time,
                count,
                fillers: 0,
            })
            .collect();
        c
    }

    #[test]
    fn no_attack_no_loss() {
        let c = scenario("Unbound", 1, &[], 60.0);
        let r = run_scenario_with_cost(&c, None).unwrap();
        assert_eq!(r.benign_sent, 600);
        assert_eq!(r.benign_lost, 0);
        assert!(r.stall_intervals.is_empty());
    }

    #[test]
    fn single_thread_stall() {
        let c = scenario("Unbound", 1, &[(10.0, 1)], 200.0);
        let r = run_scenario_with_cost(&c, Some(&cost(100.0))).unwrap();
        assert_eq!(r.benign_sent, r.benign_answered + r.benign_lost);
        assert_eq!(r.stall_intervals, [Interval { start: 10.0, end: 110.0 }]);
        assert_eq!(r.loss_between(10.0, 105.0), Some(1.0));
        assert_eq!(r.loss_between(0.0, 10.0), Some(0.0));
        assert_eq!(r.loss_between(111.0, 200.0), Some(0.0));
        // the last five seconds of the stall are answered late but in time
        assert_eq!(r.loss_between(105.5, 110.0), Some(0.0));
    }

    #[test]
    fn buffer_overflow_drops() {
        let mut c = scenario("Unbound", 1, &[(0.0, 1)], 100.0);
        c.profile = crate::simharness::ProfileRef::Custom(Box::new({
            let mut p = crate::costmodel::builtin_profile("Unbound").unwrap();
            p.os_buffer_capacity = Some(10);
            p
        }));
        let r = run_scenario_with_cost(&c, Some(&cost(50.0))).unwrap();
        assert_eq!(r.benign_dropped, 500 - 10);
        assert_eq!(r.buffer_drops, r.benign_dropped);
    }

    #[test]
    fn discard_old_packets() {
        let c = scenario("PowerDNS", 1, &[(0.0, 1)], 30.0);
        let r = run_scenario_with_cost(&c, Some(&cost(20.0))).unwrap();
        // queued more than 2 s when the thread frees up at 20 s
        assert_eq!(r.benign_discarded, 180);
        assert_eq!(r.benign_lost, 180);
    }

    #[test]
    fn io_gap_lets_benign_through() {
        let mut c = scenario("Unbound", 1, &[(0.0, 1)], 30.0);
        c.attack_io_gap = 2.0;
        let r = run_scenario_with_cost(&c, Some(&cost(20.0))).unwrap();
        assert_eq!(r.loss_between(0.0, 2.0), Some(0.0));
        assert_eq!(r.stall_intervals[0].start, 2.0);
    }

    #[test]
    fn cached_thread_answers_hits() {
        let mut c = scenario("Akamai", 1, &[(0.0, 1)], 50.0);
        c.benign_cache_hit_fraction = 1.0;
        let r = run_scenario_with_cost(&c, Some(&cost(100.0))).unwrap();
        assert_eq!(r.benign_lost, 0);
        assert_eq!(r.benign_cache_hits, 500);
    }

    #[test]
    fn load_aware_spreads_attack() {
        let c = {
            let mut c = scenario("Akamai", 4, &[(0.0, 3)], 60.0);
            c.scheduling = Some(Scheduling::LoadAware);
            c
        };
        let r = run_scenario_with_cost(&c, Some(&cost(100.0))).unwrap();
        assert_eq!(r.attack_busy.iter().filter(|v| !v.is_empty()).count(), 3);
        assert_eq!(r.benign_lost, 0);
    }

    #[test]
    fn csv_header() {
        let c = scenario("Unbound", 2, &[], 3.0);
        let r = run_scenario_with_cost(&c, None).unwrap();
        let csv = r.timeline_csv();
        assert!(csv.starts_with("time,sent,answered,lost,busy_threads,thread_0_busy,thread_1_busy\n"));
        assert_eq!(csv.lines().count(), 4);
    }
}
