//! Candidate enumeration and the lexicographic choice of the best channel.
//!
//! Candidates are ranked by, in order: highest CSV, fewest samples at that minimum,
//! highest mean depth, and finally the lowest (entry, middle, exit) index tuple so that
//! the winner never depends on arrival order. The key is a total order, so selection is
//! a single running-maximum pass and per-worker partial results merge associatively.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::arc::{arc_through_points, straight_through_points, Channel, COINCIDENCE_TOLERANCE};
use crate::error::{Error, Result};
use crate::scoring::ScoreSummary;
use crate::seeding::SeedLattices;

/// Position of a candidate in the cartesian product of seed sets. `middle` is absent for
/// straight-mode candidates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CandidateIndex {
    pub entry: usize,
    pub middle: Option<usize>,
    pub exit: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateRef {
    pub index: CandidateIndex,
    pub channel: Channel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredCandidate {
    pub candidate: CandidateRef,
    pub summary: ScoreSummary,
}

impl ScoredCandidate {
    /// Total order of the selection key; `Greater` means `self` is the better channel.
    pub fn cmp_key(&self, other: &Self) -> Ordering {
        compare_level(&self.summary, &other.summary, 3)
            .then_with(|| other.candidate.index.cmp(&self.candidate.index))
    }
}

/// Compares the first `levels` key components (csv, −min_count, mean).
fn compare_level(a: &ScoreSummary, b: &ScoreSummary, levels: usize) -> Ordering {
    let mut ord = a.csv.cmp(&b.csv);
    if levels >= 2 {
        ord = ord.then_with(|| b.min_count.cmp(&a.min_count));
    }
    if levels >= 3 {
        ord = ord.then_with(|| a.cmp_mean(b));
    }
    ord
}

/// How many candidates entered selection and survived each filter stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    /// Candidates built from the seed sets.
    pub enumerated: usize,
    /// Triples or pairs skipped because two points coincide.
    pub skipped_coincident: usize,
    /// Candidates outside the optional radius limits.
    pub rejected_radius: usize,
    /// Candidates with every sample inside the bone.
    pub feasible: usize,
    /// Feasible candidates with csv at or above the cutoff.
    pub eligible: usize,
    /// Survivors of the highest-CSV filter.
    pub max_csv: usize,
    /// Survivors of the fewest-minima filter.
    pub min_count: usize,
    /// Survivors of the highest-mean filter.
    pub max_mean: usize,
    /// Survivors of the index tie-break (1 whenever a channel is selected).
    pub tie_break: usize,
}

/// Streaming selector; feed candidates with [`push`](Self::push) or combine partial
/// selectors with [`merge`](Self::merge).
#[derive(Clone, Debug)]
pub struct Selector {
    min_csv: i32,
    counts: StageCounts,
    best: Option<ScoredCandidate>,
}

impl Selector {
    pub fn new(min_csv: i32) -> Self {
        Self {
            min_csv,
            counts: StageCounts::default(),
            best: None,
        }
    }

    pub fn counts(&self) -> &StageCounts {
        &self.counts
    }

    pub fn best(&self) -> Option<&ScoredCandidate> {
        self.best.as_ref()
    }

    pub fn record_skipped(&mut self, n: usize) {
        self.counts.skipped_coincident += n;
    }

    pub fn record_radius_rejection(&mut self) {
        self.counts.enumerated += 1;
        self.counts.rejected_radius += 1;
    }

    pub fn push(&mut self, candidate: ScoredCandidate) {
        self.counts.enumerated += 1;
        if !candidate.summary.feasible() {
            return;
        }
        self.counts.feasible += 1;
        if candidate.summary.csv < self.min_csv {
            return;
        }
        self.counts.eligible += 1;
        let single = Selector {
            min_csv: self.min_csv,
            counts: StageCounts {
                max_csv: 1,
                min_count: 1,
                max_mean: 1,
                tie_break: 1,
                ..StageCounts::default()
            },
            best: Some(candidate),
        };
        self.merge_best(single);
    }

    /// Combines two partial selections over disjoint candidate sets.
    pub fn merge(mut self, other: Selector) -> Selector {
        let c = &mut self.counts;
        let o = &other.counts;
        c.enumerated += o.enumerated;
        c.skipped_coincident += o.skipped_coincident;
        c.rejected_radius += o.rejected_radius;
        c.feasible += o.feasible;
        c.eligible += o.eligible;
        self.merge_best(other);
        self
    }

    fn merge_best(&mut self, other: Selector) {
        let Some(theirs) = other.best else {
            return;
        };
        let Some(ours) = self.best.as_ref() else {
            self.best = Some(theirs);
            self.counts.max_csv = other.counts.max_csv;
            self.counts.min_count = other.counts.min_count;
            self.counts.max_mean = other.counts.max_mean;
            self.counts.tie_break = other.counts.tie_break;
            return;
        };
        let ours_counts = [self.counts.max_csv, self.counts.min_count, self.counts.max_mean];
        let theirs_counts = [other.counts.max_csv, other.counts.min_count, other.counts.max_mean];
        let mut merged = [0usize; 3];
        let mut winner_is_theirs = None;
        for level in 0..3 {
            match compare_level(&ours.summary, &theirs.summary, level + 1) {
                Ordering::Greater => {
                    merged[level..].copy_from_slice(&ours_counts[level..]);
                    winner_is_theirs = Some(false);
                    break;
                }
                Ordering::Less => {
                    merged[level..].copy_from_slice(&theirs_counts[level..]);
                    winner_is_theirs = Some(true);
                    break;
                }
                Ordering::Equal => merged[level] = ours_counts[level] + theirs_counts[level],
            }
        }
        let take_theirs = winner_is_theirs
            .unwrap_or_else(|| theirs.candidate.index < ours.candidate.index);
        self.counts.max_csv = merged[0];
        self.counts.min_count = merged[1];
        self.counts.max_mean = merged[2];
        self.counts.tie_break = 1;
        if take_theirs {
            self.best = Some(theirs);
        }
    }

    /// The winner, or [`Error::NoViableChannel`] when no candidate reached the cutoff.
    pub fn finish(self) -> Result<Selection> {
        match self.best {
            Some(best) => Ok(Selection {
                best,
                counts: self.counts,
            }),
            None => Err(Error::NoViableChannel),
        }
    }

    /// Like [`finish`](Self::finish) but keeps the counts when nothing was selected.
    pub fn into_parts(self) -> (Option<ScoredCandidate>, StageCounts) {
        (self.best, self.counts)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub best: ScoredCandidate,
    pub counts: StageCounts,
}

/// Picks the best candidate with csv ≥ `min_csv`.
pub fn select_best(candidates: impl IntoIterator<Item = ScoredCandidate>, min_csv: i32) -> Result<Selection> {
    let mut selector = Selector::new(min_csv);
    for c in candidates {
        selector.push(c);
    }
    selector.finish()
}

fn check_nonempty(lattices: &SeedLattices, with_middle: bool) -> Result<()> {
    if lattices.entry.is_empty() {
        return Err(Error::NoSeedPoints("entry"));
    }
    if with_middle && lattices.middle.is_empty() {
        return Err(Error::NoSeedPoints("middle"));
    }
    if lattices.exit.is_empty() {
        return Err(Error::NoSeedPoints("exit"));
    }
    Ok(())
}

/// The arc candidate for one (entry, middle, exit) triple; `None` if points coincide.
pub fn arc_candidate(lattices: &SeedLattices, entry: usize, middle: usize, exit: usize) -> Option<CandidateRef> {
    let channel = arc_through_points(
        lattices.entry[entry].position,
        lattices.middle[middle].position,
        lattices.exit[exit].position,
    )
    .ok()?;
    Some(CandidateRef {
        index: CandidateIndex {
            entry,
            middle: Some(middle),
            exit,
        },
        channel,
    })
}

/// The straight candidate for one (entry, exit) pair; `None` if the points coincide.
pub fn straight_candidate(lattices: &SeedLattices, entry: usize, exit: usize) -> Option<CandidateRef> {
    let channel = straight_through_points(lattices.entry[entry].position, lattices.exit[exit].position).ok()?;
    Some(CandidateRef {
        index: CandidateIndex {
            entry,
            middle: None,
            exit,
        },
        channel,
    })
}

/// Every arc triple in entry-major, then middle, then exit order.
pub fn enumerate_arcs(lattices: &SeedLattices) -> Result<ArcCandidates<'_>> {
    check_nonempty(lattices, true)?;
    Ok(ArcCandidates {
        lattices,
        cursor: [0, 0, 0],
        skipped: 0,
    })
}

pub struct ArcCandidates<'a> {
    lattices: &'a SeedLattices,
    cursor: [usize; 3],
    skipped: usize,
}

impl ArcCandidates<'_> {
    /// Triples skipped so far because two of their points coincide.
    pub fn skipped(&self) -> usize {
        self.skipped
    }
}

impl Iterator for ArcCandidates<'_> {
    type Item = CandidateRef;

    fn next(&mut self) -> Option<CandidateRef> {
        let (ne, nm, nx) = (
            self.lattices.entry.len(),
            self.lattices.middle.len(),
            self.lattices.exit.len(),
        );
        loop {
            let [e, m, x] = self.cursor;
            if e >= ne {
                return None;
            }
            self.cursor = if x + 1 < nx {
                [e, m, x + 1]
            } else if m + 1 < nm {
                [e, m + 1, 0]
            } else {
                [e + 1, 0, 0]
            };
            match arc_candidate(self.lattices, e, m, x) {
                Some(c) => return Some(c),
                None => self.skipped += 1,
            }
        }
    }
}

/// Every (entry, exit) pair as a straight channel, entry-major. The middle set is unused.
pub fn enumerate_straights(lattices: &SeedLattices) -> Result<StraightCandidates<'_>> {
    check_nonempty(lattices, false)?;
    let any_pair = lattices.entry.iter().any(|e| {
        lattices
            .exit
            .iter()
            .any(|x| (e.position - x.position).norm() > COINCIDENCE_TOLERANCE)
    });
    if !any_pair {
        return Err(Error::NoStraightCandidates);
    }
    Ok(StraightCandidates {
        lattices,
        cursor: [0, 0],
        skipped: 0,
    })
}

pub struct StraightCandidates<'a> {
    lattices: &'a SeedLattices,
    cursor: [usize; 2],
    skipped: usize,
}

impl StraightCandidates<'_> {
    pub fn skipped(&self) -> usize {
        self.skipped
    }
}

impl Iterator for StraightCandidates<'_> {
    type Item = CandidateRef;

    fn next(&mut self) -> Option<CandidateRef> {
        let nx = self.lattices.exit.len();
        loop {
            let [e, x] = self.cursor;
            if e >= self.lattices.entry.len() {
                return None;
            }
            self.cursor = if x + 1 < nx { [e, x + 1] } else { [e + 1, 0] };
            match straight_candidate(self.lattices, e, x) {
                Some(c) => return Some(c),
                None => self.skipped += 1,
            }
        }
    }
}
