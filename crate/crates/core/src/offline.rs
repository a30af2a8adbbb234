//! Offline optimum: the most total length that can be delivered when every
//! arrival and error is known in advance.
//!
//! Transmissions must fit between consecutive errors. On the doubled axis
//! (see [`ErrorEvent::doubled`]) an error at point `d` closes the window at
//! `floor(d / 2)` and the next one opens at `ceil(d / 2)`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};

use thiserror::Error;

use crate::model::{
    corrupted_by_any, ErrorEvent, ExecutionTrace, InstanceParams, LengthClass, Length, Packet,
    PacketId, Time, TransmissionRecord,
};

pub const BRUTE_FORCE_MAX_PACKETS: usize = 12;
pub const BRUTE_FORCE_MAX_ERRORS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolverError {
    #[error("packet {id} has length {length}, outside the two length classes")]
    ForeignLength { id: PacketId, length: Length },
    #[error("instance too large for brute force: {packets} packets, {errors} errors (limits {BRUTE_FORCE_MAX_PACKETS} and {BRUTE_FORCE_MAX_ERRORS})")]
    Oversize { packets: usize, errors: usize },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("not a 3-Partition instance: {0}")]
    Malformed3Partition(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OfflineInstance {
    pub packets: Vec<Packet>,
    /// Strictly increasing by `(time, slot)`.
    pub errors: Vec<ErrorEvent>,
    pub horizon: Time,
}

impl OfflineInstance {
    /// Sorts and deduplicates `errors` and checks the remaining invariants.
    pub fn new(
        packets: Vec<Packet>,
        mut errors: Vec<ErrorEvent>,
        horizon: Time,
    ) -> Result<Self, SolverError> {
        errors.sort();
        errors.dedup();
        let mut seen = HashSet::with_capacity(packets.len());
        for p in &packets {
            if p.length == 0 {
                return Err(SolverError::InvalidInstance(format!("packet {} has length 0", p.id)));
            }
            if p.arrival_time > horizon {
                return Err(SolverError::InvalidInstance(format!(
                    "packet {} arrives at {} after the horizon {horizon}",
                    p.id, p.arrival_time
                )));
            }
            if !seen.insert(p.id) {
                return Err(SolverError::InvalidInstance(format!("duplicate packet id {}", p.id)));
            }
        }
        if let Some(e) = errors.last() {
            if e.time > horizon {
                return Err(SolverError::InvalidInstance(format!(
                    "error at {} after the horizon {horizon}",
                    e.time
                )));
            }
        }
        Ok(Self {
            packets,
            errors,
            horizon,
        })
    }

    /// The realized arrival and error patterns of an online run.
    pub fn from_trace(trace: &ExecutionTrace) -> Result<Self, SolverError> {
        Self::new(trace.arrivals.clone(), trace.errors.clone(), trace.horizon)
    }

    /// Maximal error-free intervals `[lo, hi]` inside `[0, horizon]`.
    pub fn windows(&self) -> Vec<(Time, Time)> {
        let mut out = Vec::with_capacity(self.errors.len() + 1);
        let mut lo = 0;
        for e in &self.errors {
            let d = e.doubled();
            let hi = (d / 2).min(self.horizon);
            if hi >= lo {
                out.push((lo, hi));
            }
            lo = d.div_ceil(2);
        }
        if lo <= self.horizon {
            out.push((lo, self.horizon));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptSchedule {
    pub max_total_length: Length,
    /// One optimal schedule, in start order. Every record is a success.
    pub schedule: Vec<TransmissionRecord>,
}

const ROOT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Node {
    parent: u32,
    long: bool,
    index: u32,
    start: Time,
}

/// A partial schedule: the first `a` short and first `b` long packets (in
/// arrival order) have been sent and the link is free from `time`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct State {
    a: u32,
    b: u32,
    time: Time,
    value: Length,
    node: u32,
    fresh: bool,
}

impl Ord for State {
    // Max-heap order: earliest time first, then higher value, more longs,
    // more shorts. A state that dominates another at equal time pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .cmp(&self.time)
            .then(self.value.cmp(&other.value))
            .then(self.b.cmp(&other.b))
            .then(self.a.cmp(&other.a))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Frontier<'a> {
    params: &'a InstanceParams,
    short_release: Vec<Time>,
    long_release: Vec<Time>,
    nodes: Vec<Node>,
    /// `(end of last transmission, value)` for every accepted state.
    marks: Vec<(Time, Length)>,
    best: (Length, u32),
}

impl<'a> Frontier<'a> {
    fn kappa(&self, s: &State) -> u64 {
        s.a as u64 + self.params.gamma_bar() * s.b as u64
    }

    fn push_child(
        &mut self,
        heap: &mut BinaryHeap<State>,
        s: &State,
        long: bool,
        hi: Time,
    ) {
        let (index, release, length) = if long {
            (s.b, &self.long_release, self.params.l_max())
        } else {
            (s.a, &self.short_release, self.params.l_min())
        };
        let Some(&rel) = release.get(index as usize) else {
            return;
        };
        let start = s.time.max(rel);
        if start + length > hi {
            return;
        }
        let node = self.nodes.len() as u32;
        self.nodes.push(Node {
            parent: s.node,
            long,
            index,
            start,
        });
        heap.push(State {
            a: s.a + u32::from(!long),
            b: s.b + u32::from(long),
            time: start + length,
            value: s.value + length,
            node,
            fresh: true,
        });
    }

    /// Explores one window and returns the surviving non-dominated states.
    fn window(&mut self, lo: Time, hi: Time, frontier: Vec<State>) -> Vec<State> {
        if hi < lo || hi - lo < self.params.l_min() {
            return frontier;
        }
        let mut heap: BinaryHeap<State> = frontier
            .into_iter()
            .map(|s| State {
                time: s.time.max(lo),
                fresh: false,
                ..s
            })
            .collect();
        // b ascending, kappa strictly descending.
        let mut stairs: BTreeMap<u32, (u64, State)> = BTreeMap::new();
        while let Some(s) = heap.pop() {
            let k = self.kappa(&s);
            if let Some((_, (kd, _))) = stairs.range(s.b..).next() {
                if *kd >= k {
                    continue;
                }
            }
            let doomed: Vec<u32> = stairs
                .range(..=s.b)
                .rev()
                .take_while(|(_, (kd, _))| *kd <= k)
                .map(|(b, _)| *b)
                .collect();
            for b in doomed {
                stairs.remove(&b);
            }
            stairs.insert(s.b, (k, s));
            if s.fresh {
                self.marks.push((s.time, s.value));
                if s.value > self.best.0 {
                    self.best = (s.value, s.node);
                }
            }
            self.push_child(&mut heap, &s, false, hi);
            if !self.params.single_length() {
                self.push_child(&mut heap, &s, true, hi);
            }
        }
        stairs.into_values().map(|(_, s)| s).collect()
    }
}

struct Classified {
    short: Vec<Packet>,
    long: Vec<Packet>,
}

fn classify(instance: &OfflineInstance, params: &InstanceParams) -> Result<Classified, SolverError> {
    let mut short = Vec::new();
    let mut long = Vec::new();
    for p in &instance.packets {
        match params.class_of(p.length) {
            Some(LengthClass::Short) => short.push(*p),
            Some(LengthClass::Long) => long.push(*p),
            None => {
                return Err(SolverError::ForeignLength {
                    id: p.id,
                    length: p.length,
                })
            }
        }
    }
    short.sort_by_key(|p| (p.arrival_time, p.id));
    long.sort_by_key(|p| (p.arrival_time, p.id));
    Ok(Classified { short, long })
}

fn solve<'a>(
    instance: &OfflineInstance,
    params: &'a InstanceParams,
    classified: &Classified,
) -> Frontier<'a> {
    let mut f = Frontier {
        params,
        short_release: classified.short.iter().map(|p| p.arrival_time).collect(),
        long_release: classified.long.iter().map(|p| p.arrival_time).collect(),
        nodes: Vec::new(),
        marks: vec![(0, 0)],
        best: (0, ROOT),
    };
    let mut frontier = vec![State {
        a: 0,
        b: 0,
        time: 0,
        value: 0,
        node: ROOT,
        fresh: false,
    }];
    for (lo, hi) in instance.windows() {
        frontier = f.window(lo, hi, frontier);
    }
    f
}

/// Exact optimum for instances whose lengths are `l_min` or `l_max`.
///
/// Within a class the k-th packet sent can be taken to be the k-th arrival,
/// so a partial schedule is summarized by `(a, b, time)`. Windows are swept
/// left to right; inside a window states are expanded in time order and a
/// state is dropped when an earlier-or-equal one has at least as many longs
/// and at least as large `a + gamma_bar·b`. The dropped state's completions
/// can always be replayed by the survivor, sending up to `gamma_bar` shorts
/// in the slot of each long it already holds.
pub fn exact_opt_two_lengths(
    instance: &OfflineInstance,
    params: &InstanceParams,
) -> Result<OptSchedule, SolverError> {
    let classified = classify(instance, params)?;
    let f = solve(instance, params, &classified);
    let mut schedule = Vec::new();
    let mut cursor = f.best.1;
    while cursor != ROOT {
        let n = f.nodes[cursor as usize];
        let class = if n.long { &classified.long } else { &classified.short };
        schedule.push(TransmissionRecord::success(&class[n.index as usize], n.start));
        cursor = n.parent;
    }
    schedule.reverse();
    Ok(OptSchedule {
        max_total_length: f.best.0,
        schedule,
    })
}

/// Optimal total length with every transmission finished by each `t` in
/// `times`. One solve serves all sample points.
pub fn opt_series(
    instance: &OfflineInstance,
    params: &InstanceParams,
    times: &[Time],
) -> Result<Vec<Length>, SolverError> {
    let classified = classify(instance, params)?;
    let mut marks = solve(instance, params, &classified).marks;
    marks.sort_unstable();
    let mut running = 0;
    for m in marks.iter_mut() {
        running = running.max(m.1);
        m.1 = running;
    }
    Ok(times
        .iter()
        .map(|&t| {
            let i = marks.partition_point(|m| m.0 <= t);
            if i == 0 {
                0
            } else {
                marks[i - 1].1
            }
        })
        .collect())
}

fn check_brute_force_limits(instance: &OfflineInstance) -> Result<(), SolverError> {
    if instance.packets.len() > BRUTE_FORCE_MAX_PACKETS || instance.errors.len() > BRUTE_FORCE_MAX_ERRORS {
        return Err(SolverError::Oversize {
            packets: instance.packets.len(),
            errors: instance.errors.len(),
        });
    }
    Ok(())
}

struct Brute<'a> {
    instance: &'a OfflineInstance,
    memo: HashMap<(u16, Time), Length>,
}

impl Brute<'_> {
    /// Earliest start at or after `from` for packet `i` that avoids every
    /// error and still finishes by the horizon.
    fn earliest_start(&self, i: usize, from: Time) -> Option<Time> {
        let p = &self.instance.packets[i];
        let mut s = from.max(p.arrival_time);
        loop {
            if s + p.length > self.instance.horizon {
                return None;
            }
            match self
                .instance
                .errors
                .iter()
                .find(|e| crate::model::error_corrupts(s, p.length, e))
            {
                Some(e) => s = e.next_start(),
                None => return Some(s),
            }
        }
    }

    fn best(&mut self, mask: u16, free: Time) -> Length {
        if let Some(&v) = self.memo.get(&(mask, free)) {
            return v;
        }
        let mut best = 0;
        for i in 0..self.instance.packets.len() {
            if mask & (1 << i) != 0 {
                continue;
            }
            if let Some(s) = self.earliest_start(i, free) {
                let len = self.instance.packets[i].length;
                best = best.max(len + self.best(mask | (1 << i), s + len));
            }
        }
        self.memo.insert((mask, free), best);
        best
    }
}

/// Exhaustive optimum for arbitrary lengths at desk scale.
///
/// Searches every order of every subset; each packet starts as early as
/// possible after the previous one, which loses nothing because the
/// remaining optimum only shrinks as the link frees later.
pub fn brute_force_opt(instance: &OfflineInstance) -> Result<Length, SolverError> {
    check_brute_force_limits(instance)?;
    let mut b = Brute {
        instance,
        memo: HashMap::new(),
    };
    Ok(b.best(0, 0))
}

/// [`brute_force_opt`] plus a witness schedule.
pub fn brute_force_schedule(instance: &OfflineInstance) -> Result<OptSchedule, SolverError> {
    check_brute_force_limits(instance)?;
    let mut b = Brute {
        instance,
        memo: HashMap::new(),
    };
    let total = b.best(0, 0);
    let mut schedule = Vec::new();
    let (mut mask, mut free, mut left) = (0u16, 0, total);
    while left > 0 {
        let step = (0..instance.packets.len())
            .filter(|&i| mask & (1 << i) == 0)
            .find_map(|i| {
                let s = b.earliest_start(i, free)?;
                let len = instance.packets[i].length;
                (len + b.best(mask | (1 << i), s + len) == left).then_some((i, s))
            })
            .expect("memoized optimum is reachable");
        let p = &instance.packets[step.0];
        schedule.push(TransmissionRecord::success(p, step.1));
        mask |= 1 << step.0;
        free = step.1 + p.length;
        left -= p.length;
    }
    Ok(OptSchedule {
        max_total_length: total,
        schedule,
    })
}

/// Maps a 3-Partition instance to a throughput instance: every element is a
/// packet of that length arriving at 0, errors at `B, 2B, ..., mB` and the
/// horizon at `mB`. The answer is yes iff the optimum equals `mB`.
pub fn reduce_3partition(elements: &[u64], bound: u64, m: usize) -> Result<OfflineInstance, SolverError> {
    if m == 0 {
        return Err(SolverError::Malformed3Partition("m must be positive".into()));
    }
    if elements.len() != 3 * m {
        return Err(SolverError::Malformed3Partition(format!(
            "{} elements, expected 3·m = {}",
            elements.len(),
            3 * m
        )));
    }
    let sum: u64 = elements.iter().sum();
    if sum != m as u64 * bound {
        return Err(SolverError::Malformed3Partition(format!(
            "elements sum to {sum}, expected m·B = {}",
            m as u64 * bound
        )));
    }
    if let Some(a) = elements.iter().find(|&&a| 4 * a <= bound || 2 * a >= bound) {
        return Err(SolverError::Malformed3Partition(format!(
            "element {a} is not strictly between B/4 and B/2"
        )));
    }
    let packets = elements
        .iter()
        .enumerate()
        .map(|(i, &a)| Packet::new(i as u64, a, 0))
        .collect();
    let errors = (1..=m as u64).map(|i| ErrorEvent::pre(i * bound)).collect();
    OfflineInstance::new(packets, errors, m as u64 * bound)
}

/// Checks that a candidate schedule is feasible for `instance`.
pub fn schedule_is_feasible(instance: &OfflineInstance, schedule: &[TransmissionRecord]) -> bool {
    let arrivals: HashMap<PacketId, &Packet> = instance.packets.iter().map(|p| (p.id, p)).collect();
    let mut used = HashSet::new();
    let mut free = 0;
    for r in schedule {
        let Some(p) = arrivals.get(&r.packet_id) else {
            return false;
        };
        if !used.insert(r.packet_id)
            || r.start < free
            || r.start < p.arrival_time
            || r.length != p.length
            || r.end != r.start + r.length
            || r.end > instance.horizon
            || corrupted_by_any(r.start, r.length, &instance.errors)
        {
            return false;
        }
        free = r.end;
    }
    true
}
