//! Audio view: a ranked risk-word histogram plus a storyline of when each
//! word is spoken.
//!
//! Time is cut into fixed slots. In every slot the active words are stacked
//! on tracks `0..k`; the storyline optimizer picks the stacking order of each
//! slot to reduce line crossings and wiggles between consecutive slots.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{AudioAnnotation, VideoRecord};
use crate::taxonomy::{RiskCategory, RiskTaxonomy, TaxonomyError};

const IMPROVEMENT: f64 = 1e-9;
/// Slots with at most this many words are searched exhaustively by the exact pass.
const EXACT_MAX_WORDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AudioSumConfig {
    /// Slot width in seconds.
    pub slot: f64,
    /// Weight of one wiggle relative to one crossing.
    pub lambda: f64,
}

impl Default for AudioSumConfig {
    fn default() -> Self {
        AudioSumConfig { slot: 30.0, lambda: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramEntry {
    pub word: String,
    pub category: RiskCategory,
    pub count: u64,
}

/// Words by descending total count, ties by word id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordHistogram {
    pub entries: Vec<HistogramEntry>,
}

impl WordHistogram {
    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.count).sum()
    }
}

pub fn build_histogram(
    audio: &[AudioAnnotation],
    taxonomy: &RiskTaxonomy,
) -> Result<WordHistogram, TaxonomyError> {
    let mut totals: BTreeMap<&str, u64> = BTreeMap::new();
    for clip in audio {
        for (word, &count) in &clip.word_counts {
            taxonomy.word_index(word)?;
            *totals.entry(word).or_default() += count as u64;
        }
    }
    let mut entries: Vec<HistogramEntry> = totals
        .into_iter()
        .filter(|&(_, c)| c > 0)
        .map(|(word, count)| HistogramEntry {
            word: word.to_string(),
            category: taxonomy.word_category(taxonomy.word_index(word).unwrap()),
            count,
        })
        .collect();
    entries.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.word.cmp(&b.word)));
    Ok(WordHistogram { entries })
}

/// A half-open time window `[t0, t1)` (the last slot is closed at the video end).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub t0: f64,
    pub t1: f64,
    /// Words spoken in some clip overlapping the slot.
    pub active: BTreeSet<String>,
    /// Word counts attributed to this slot, by descending count.
    pub cloud: Vec<(String, u32)>,
}

/// Tiles `[0, duration]` into slots and marks active words.
///
/// A clip's counts are split across the slots it overlaps in proportion to
/// the overlap (largest-remainder rounding), so cloud counts over all slots
/// add up to the histogram totals.
pub fn slotize(audio: &[AudioAnnotation], duration: f64, slot_duration: f64) -> Vec<Slot> {
    assert!(slot_duration > 0.0, "slot duration must be positive");
    let n = ((duration / slot_duration).ceil() as usize).max(1);
    let mut slots: Vec<Slot> = (0..n)
        .map(|k| Slot {
            t0: k as f64 * slot_duration,
            t1: if k + 1 == n { duration } else { (k + 1) as f64 * slot_duration },
            active: BTreeSet::new(),
            cloud: Vec::new(),
        })
        .collect();
    let mut clouds: Vec<BTreeMap<String, u32>> = vec![BTreeMap::new(); n];

    for clip in audio {
        let overlaps: Vec<(usize, f64)> = slots
            .iter()
            .enumerate()
            .filter(|(_, s)| clip.start_time < s.t1 && clip.end_time > s.t0)
            .map(|(k, s)| (k, clip.end_time.min(s.t1) - clip.start_time.max(s.t0)))
            .collect();
        let span: f64 = overlaps.iter().map(|(_, o)| o).sum();
        for (word, &count) in &clip.word_counts {
            if count == 0 {
                continue;
            }
            for &(k, _) in &overlaps {
                slots[k].active.insert(word.clone());
            }
            for (k, share) in apportion(count, &overlaps, span) {
                if share > 0 {
                    *clouds[k].entry(word.clone()).or_default() += share;
                }
            }
        }
    }
    for (slot, cloud) in slots.iter_mut().zip(clouds) {
        let mut entries: Vec<(String, u32)> = cloud.into_iter().collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        slot.cloud = entries;
    }
    slots
}

fn apportion(count: u32, overlaps: &[(usize, f64)], span: f64) -> Vec<(usize, u32)> {
    if overlaps.is_empty() || span <= 0.0 {
        return Vec::new();
    }
    let quotas: Vec<f64> = overlaps.iter().map(|(_, o)| count as f64 * o / span).collect();
    let mut shares: Vec<u32> = quotas.iter().map(|q| q.floor() as u32).collect();
    let assigned: u32 = shares.iter().sum();
    let mut by_remainder: Vec<usize> = (0..quotas.len()).collect();
    by_remainder.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in by_remainder.iter().take(count.saturating_sub(assigned) as usize) {
        shares[i] += 1;
    }
    overlaps.iter().map(|(k, _)| *k).zip(shares).collect()
}

/// Crossings and wiggles between consecutive slots.
///
/// `orders[s]` lists the word ids active in slot `s`, top track first. Only
/// words active in both slots of a pair contribute.
pub fn crossings_and_wiggles(orders: &[Vec<usize>], n_words: usize) -> (usize, usize) {
    let mut pos_a = vec![usize::MAX; n_words];
    let mut pos_b = vec![usize::MAX; n_words];
    let (mut crossings, mut wiggles) = (0, 0);
    for pair in orders.windows(2) {
        let (c, w) = boundary_cost(&pair[0], &pair[1], &mut pos_a, &mut pos_b);
        crossings += c;
        wiggles += w;
    }
    (crossings, wiggles)
}

fn boundary_cost(a: &[usize], b: &[usize], pos_a: &mut [usize], pos_b: &mut [usize]) -> (usize, usize) {
    for (p, &w) in a.iter().enumerate() {
        pos_a[w] = p;
    }
    for (p, &w) in b.iter().enumerate() {
        pos_b[w] = p;
    }
    let shared: Vec<usize> = a.iter().copied().filter(|&w| pos_b[w] != usize::MAX).collect();
    let wiggles = shared.iter().filter(|&&w| pos_a[w] != pos_b[w]).count();
    let mut crossings = 0;
    // `shared` is in slot-a order, so a crossing is an inversion of slot-b positions.
    for i in 0..shared.len() {
        for j in (i + 1)..shared.len() {
            if pos_b[shared[i]] > pos_b[shared[j]] {
                crossings += 1;
            }
        }
    }
    for &w in a {
        pos_a[w] = usize::MAX;
    }
    for &w in b {
        pos_b[w] = usize::MAX;
    }
    (crossings, wiggles)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorylineLayout {
    /// Word ids index into this list, ordered by first appearance.
    pub words: Vec<String>,
    /// Per slot, active word ids from track 0 upwards.
    pub orders: Vec<Vec<usize>>,
    pub crossings: usize,
    pub wiggles: usize,
    pub lambda: f64,
}

impl StorylineLayout {
    pub fn objective(&self) -> f64 {
        self.crossings as f64 + self.lambda * self.wiggles as f64
    }

    pub fn track(&self, slot: usize, word: usize) -> Option<usize> {
        self.orders[slot].iter().position(|&w| w == word)
    }

    /// `(slot, track)` points for every slot where the word is active.
    pub fn line(&self, word: usize) -> Vec<(usize, usize)> {
        (0..self.orders.len())
            .filter_map(|s| self.track(s, word).map(|t| (s, t)))
            .collect()
    }

    /// Maximal runs of consecutive active slots, each with its per-slot tracks.
    pub fn segments(&self, word: usize) -> Vec<(std::ops::Range<usize>, Vec<usize>)> {
        let mut out: Vec<(std::ops::Range<usize>, Vec<usize>)> = Vec::new();
        for (s, t) in self.line(word) {
            match out.last_mut() {
                Some((range, tracks)) if range.end == s => {
                    range.end = s + 1;
                    tracks.push(t);
                }
                _ => out.push((s..s + 1, vec![t])),
            }
        }
        out
    }
}

/// Word ids in first-appearance order and each slot's active ids in that order.
pub fn initial_orders(slots: &[Slot]) -> (Vec<String>, Vec<Vec<usize>>) {
    let mut words: Vec<String> = Vec::new();
    let mut ids: HashMap<&str, usize> = HashMap::new();
    for slot in slots {
        // BTreeSet iteration breaks first-appearance ties by word id.
        for w in &slot.active {
            if !ids.contains_key(w.as_str()) {
                ids.insert(w, words.len());
                words.push(w.clone());
            }
        }
    }
    let orders = slots
        .iter()
        .map(|slot| {
            let mut o: Vec<usize> = slot.active.iter().map(|w| ids[w.as_str()]).collect();
            o.sort_unstable();
            o
        })
        .collect();
    (words, orders)
}

struct Optimizer {
    orders: Vec<Vec<usize>>,
    n_words: usize,
    lambda: f64,
    pos_a: Vec<usize>,
    pos_b: Vec<usize>,
}

impl Optimizer {
    fn boundary(&mut self, s: usize) -> f64 {
        let (c, w) = boundary_cost(&self.orders[s], &self.orders[s + 1], &mut self.pos_a, &mut self.pos_b);
        c as f64 + self.lambda * w as f64
    }

    /// Cost of the boundaries touching slots `first..=last`.
    fn local(&mut self, first: usize, last: usize) -> f64 {
        let lo = first.saturating_sub(1);
        let hi = (last + 1).min(self.orders.len() - 1);
        (lo..hi).map(|s| self.boundary(s)).sum()
    }

    /// Replaces slot `s` with `candidate` if that lowers the objective.
    fn try_slot(&mut self, s: usize, candidate: Vec<usize>) -> bool {
        if candidate == self.orders[s] {
            return false;
        }
        let before = self.local(s, s);
        let old = std::mem::replace(&mut self.orders[s], candidate);
        if self.local(s, s) < before - IMPROVEMENT {
            true
        } else {
            self.orders[s] = old;
            false
        }
    }

    fn barycenter_order(&self, s: usize, use_left: bool, use_right: bool) -> Vec<usize> {
        let position = |slot: usize, w: usize| self.orders[slot].iter().position(|&x| x == w);
        let mut keyed: Vec<(f64, usize, usize)> = self.orders[s]
            .iter()
            .enumerate()
            .map(|(p, &w)| {
                let mut refs = Vec::new();
                if use_left && s > 0 {
                    refs.extend(position(s - 1, w));
                }
                if use_right && s + 1 < self.orders.len() {
                    refs.extend(position(s + 1, w));
                }
                let key = if refs.is_empty() {
                    p as f64
                } else {
                    refs.iter().sum::<usize>() as f64 / refs.len() as f64
                };
                (key, p, w)
            })
            .collect();
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        keyed.into_iter().map(|(_, _, w)| w).collect()
    }

    fn sweep(&mut self) -> bool {
        let n = self.orders.len();
        let mut improved = false;
        for s in 1..n {
            let cand = self.barycenter_order(s, true, false);
            improved |= self.try_slot(s, cand);
        }
        for s in (0..n.saturating_sub(1)).rev() {
            let cand = self.barycenter_order(s, false, true);
            improved |= self.try_slot(s, cand);
        }
        for s in 0..n {
            let cand = self.barycenter_order(s, true, true);
            improved |= self.try_slot(s, cand);
        }
        improved
    }

    /// One pass of local moves; returns whether anything improved.
    fn climb(&mut self) -> bool {
        let n = self.orders.len();
        let mut improved = false;
        for s in 0..n {
            let k = self.orders[s].len();
            // Move one word to another track within the slot.
            for from in 0..k {
                for to in 0..k {
                    if from == to {
                        continue;
                    }
                    let mut cand = self.orders[s].clone();
                    let w = cand.remove(from);
                    cand.insert(to, w);
                    improved |= self.try_slot(s, cand);
                }
            }
            // Swap an adjacent pair over a run of slots where the pair stays adjacent.
            for p in 0..k.saturating_sub(1) {
                let (u, v) = (self.orders[s][p], self.orders[s][p + 1]);
                let mut end = s;
                while end + 1 < n && adjacent_at(&self.orders[end + 1], u, v).is_some() {
                    end += 1;
                }
                for last in (s + 1)..=end {
                    improved |= self.try_block_swap(s, last, u, v);
                }
            }
        }
        improved
    }

    fn try_block_swap(&mut self, first: usize, last: usize, u: usize, v: usize) -> bool {
        if (first..=last).any(|s| adjacent_at(&self.orders[s], u, v).is_none()) {
            return false;
        }
        let before = self.local(first, last);
        let saved: Vec<Vec<usize>> = self.orders[first..=last].to_vec();
        for s in first..=last {
            let p = adjacent_at(&self.orders[s], u, v).unwrap();
            self.orders[s].swap(p, p + 1);
        }
        if self.local(first, last) < before - IMPROVEMENT {
            true
        } else {
            self.orders[first..=last].clone_from_slice(&saved);
            false
        }
    }
}

impl Optimizer {
    fn total(&mut self) -> f64 {
        (0..self.orders.len().saturating_sub(1)).map(|s| self.boundary(s)).sum()
    }

    /// Exact minimum over all orderings of the small slots, holding slots
    /// larger than [`EXACT_MAX_WORDS`] at their current order.
    fn exact_pass(&mut self) -> bool {
        let candidates: Vec<Vec<Vec<usize>>> = self
            .orders
            .iter()
            .map(|o| if o.len() <= EXACT_MAX_WORDS { permutations(o) } else { vec![o.clone()] })
            .collect();
        // best[c]: cheapest cost of slots 0..=s ending with candidate c of slot s.
        let mut best = vec![0.0; candidates[0].len()];
        let mut back: Vec<Vec<usize>> = Vec::with_capacity(candidates.len());
        for s in 1..candidates.len() {
            let mut next = Vec::with_capacity(candidates[s].len());
            let mut from = Vec::with_capacity(candidates[s].len());
            for cur in &candidates[s] {
                let mut choice = (f64::INFINITY, 0);
                for (p, prev) in candidates[s - 1].iter().enumerate() {
                    let (c, w) = boundary_cost(prev, cur, &mut self.pos_a, &mut self.pos_b);
                    let cost = best[p] + c as f64 + self.lambda * w as f64;
                    if cost < choice.0 {
                        choice = (cost, p);
                    }
                }
                next.push(choice.0);
                from.push(choice.1);
            }
            best = next;
            back.push(from);
        }
        let (mut at, optimum) = best
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &c)| if c < acc.1 { (i, c) } else { acc });
        if optimum >= self.total() - IMPROVEMENT {
            return false;
        }
        for s in (0..candidates.len()).rev() {
            self.orders[s] = candidates[s][at].clone();
            if s > 0 {
                at = back[s - 1][at];
            }
        }
        true
    }
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = items.to_vec();
    permute(&mut current, 0, &mut out);
    out
}

fn permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k + 1 >= items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, out);
        items.swap(k, i);
    }
}

fn adjacent_at(order: &[usize], u: usize, v: usize) -> Option<usize> {
    order.windows(2).position(|w| w[0] == u && w[1] == v)
}

/// Orders each slot's words to reduce `crossings + lambda * wiggles`.
///
/// Starts from first-appearance order, then alternates barycenter sweeps,
/// local moves (single-word reinsertion, adjacent swaps over runs of slots)
/// and an exact pass over the small slots until none of them improves. Only
/// strictly improving steps are taken, so the result is never worse than the
/// starting order.
pub fn layout_storyline(slots: &[Slot], lambda: f64) -> StorylineLayout {
    let (words, orders) = initial_orders(slots);
    let mut opt = Optimizer {
        orders,
        n_words: words.len(),
        lambda,
        pos_a: vec![usize::MAX; words.len()],
        pos_b: vec![usize::MAX; words.len()],
    };
    if opt.orders.len() > 1 {
        loop {
            while opt.sweep() {}
            if !opt.climb() && !opt.exact_pass() {
                break;
            }
        }
    }
    let (crossings, wiggles) = crossings_and_wiggles(&opt.orders, opt.n_words);
    StorylineLayout { words, orders: opt.orders, crossings, wiggles, lambda }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotView {
    pub t0: f64,
    pub t1: f64,
    pub cloud: Vec<(String, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineView {
    pub word: String,
    pub points: Vec<(usize, usize)>,
}

/// Wire form of the audio view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioLayout {
    pub histogram: Vec<HistogramEntry>,
    pub slots: Vec<SlotView>,
    pub lines: Vec<LineView>,
    pub crossings: usize,
    pub wiggles: usize,
}

pub fn build_audio_layout(
    video: &VideoRecord,
    taxonomy: &RiskTaxonomy,
    config: &AudioSumConfig,
) -> Result<AudioLayout, TaxonomyError> {
    let histogram = build_histogram(&video.audio, taxonomy)?;
    let slots = slotize(&video.audio, video.duration, config.slot);
    let story = layout_storyline(&slots, config.lambda);
    let lines = (0..story.words.len())
        .map(|w| LineView { word: story.words[w].clone(), points: story.line(w) })
        .collect();
    Ok(AudioLayout {
        histogram: histogram.entries,
        slots: slots
            .into_iter()
            .map(|s| SlotView { t0: s.t0, t1: s.t1, cloud: s.cloud })
            .collect(),
        lines,
        crossings: story.crossings,
        wiggles: story.wiggles,
    })
}
