//! Simple temporal network over integer ticks, with contingent-link bookkeeping.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::relation::{PointKind, Primitive, PrimitiveKind, Relation, RelationError};
use crate::time::{Bound, TimeValue};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PointId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkId(pub usize);

pub const ORIGIN: PointId = PointId(0);

const INF: i64 = i64::MAX / 4;

fn add(a: i64, b: i64) -> i64 {
    if a >= INF || b >= INF {
        INF
    } else {
        a + b
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetworkError {
    #[error("unknown time point {0}")]
    UnknownPoint(usize),
    #[error("unknown contingent link {0}")]
    UnknownLink(usize),
    #[error("contingent bounds must satisfy 0 < dmin <= dmax < +INF, got [{0}, {1}]")]
    BadContingent(TimeValue, TimeValue),
    #[error("network has unpropagated changes")]
    Stale,
    #[error("network is inconsistent")]
    Inconsistent,
    #[error(transparent)]
    Relation(#[from] RelationError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingentLink {
    pub start: PointId,
    pub end: PointId,
    pub dmin: u64,
    pub dmax: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Cache {
    Consistent,
    Inconsistent,
}

/// Distance-graph STN. `d(a, b)` is the tightest upper bound on `t_b − t_a`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemporalNetwork {
    edges: BTreeMap<(usize, usize), i64>,
    contingents: Vec<ContingentLink>,
    dist: Vec<Vec<i64>>,
    cache: Cache,
    pending: Vec<(usize, usize, i64)>,
}

impl Default for TemporalNetwork {
    fn default() -> Self {
        Self::new()
    }
}

impl TemporalNetwork {
    pub fn new() -> TemporalNetwork {
        TemporalNetwork {
            edges: BTreeMap::new(),
            contingents: Vec::new(),
            dist: vec![vec![0]],
            cache: Cache::Consistent,
            pending: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.len() == 1
    }

    /// Fresh point constrained only by `t ≥ origin`.
    pub fn add_time_point(&mut self) -> PointId {
        let p = self.dist.len();
        for row in self.dist.iter_mut() {
            row.push(INF);
        }
        let mut row = self.dist[0].clone();
        row[p] = 0;
        self.dist.push(row);
        self.edges.insert((p, 0), 0);
        PointId(p)
    }

    fn check_point(&self, p: PointId) -> Result<(), NetworkError> {
        if p.0 < self.dist.len() {
            Ok(())
        } else {
            Err(NetworkError::UnknownPoint(p.0))
        }
    }

    fn add_edge(&mut self, a: usize, b: usize, w: i64) {
        let e = self.edges.entry((a, b)).or_insert(INF);
        if w < *e {
            *e = w;
            self.pending.push((a, b, w));
        }
    }

    /// Records `b − a ∈ bound`; repeated constraints on a pair intersect.
    pub fn add_requirement(&mut self, a: PointId, b: PointId, bound: Bound) -> Result<(), NetworkError> {
        self.check_point(a)?;
        self.check_point(b)?;
        if let Some(ub) = bound.ub.as_weight() {
            self.add_edge(a.0, b.0, ub);
        }
        self.add_edge(b.0, a.0, -(bound.lb.ticks() as i64));
        Ok(())
    }

    /// Records `lo ≤ t_b − t_a ≤ hi` for signed bounds; `None` leaves a side open.
    pub fn add_difference(
        &mut self,
        a: PointId,
        b: PointId,
        lo: Option<i64>,
        hi: Option<i64>,
    ) -> Result<(), NetworkError> {
        self.check_point(a)?;
        self.check_point(b)?;
        if let Some(h) = hi {
            self.add_edge(a.0, b.0, h);
        }
        if let Some(l) = lo {
            self.add_edge(b.0, a.0, -l);
        }
        Ok(())
    }

    /// Posts the primitive expansion of `r` between intervals `a` and `b` given as
    /// `(start, end)` point pairs; `b` is ignored by point-anchored kinds.
    pub fn post_relation(
        &mut self,
        r: &Relation,
        a: (PointId, PointId),
        b: (PointId, PointId),
    ) -> Result<(), NetworkError> {
        for p in r.expand()? {
            match p {
                Primitive::Pair { kind, bound, swapped } => {
                    let (x, y) = if swapped { (b, a) } else { (a, b) };
                    let (from, to) = match kind {
                        PrimitiveKind::StartBeforeStart => (x.0, y.0),
                        PrimitiveKind::EndBeforeEnd => (x.1, y.1),
                        PrimitiveKind::StartBeforeEnd => (x.0, y.1),
                        PrimitiveKind::EndBeforeStart => (x.1, y.0),
                    };
                    self.add_requirement(from, to, bound)?;
                }
                Primitive::Point { kind, bound, anchor } => {
                    let p = match kind {
                        PointKind::StartsBefore => a.0,
                        PointKind::EndsBefore => a.1,
                    };
                    // l ≤ t − p ≤ u  ⇔  t − u ≤ p ≤ t − l
                    let t = anchor as i64;
                    let lo = bound.ub.as_weight().map(|u| t - u);
                    self.add_difference(ORIGIN, p, lo, Some(t - bound.lb.ticks() as i64))?;
                }
            }
        }
        Ok(())
    }

    /// Registers an uncontrollable duration and posts `e − s ∈ [dmin, dmax]`.
    pub fn mark_contingent(
        &mut self,
        s: PointId,
        e: PointId,
        dmin: TimeValue,
        dmax: TimeValue,
    ) -> Result<LinkId, NetworkError> {
        self.check_point(s)?;
        self.check_point(e)?;
        let (Some(lo), Some(hi)) = (dmin.get(), dmax.get()) else {
            return Err(NetworkError::BadContingent(dmin, dmax));
        };
        if lo == 0 || lo > hi {
            return Err(NetworkError::BadContingent(dmin, dmax));
        }
        self.add_requirement(s, e, Bound::closed(lo, hi))?;
        self.contingents.push(ContingentLink { start: s, end: e, dmin: lo, dmax: hi });
        Ok(LinkId(self.contingents.len() - 1))
    }

    pub fn contingent_links(&self) -> &[ContingentLink] {
        &self.contingents
    }

    pub fn is_stale(&self) -> bool {
        !self.pending.is_empty()
    }

    /// Brings the distance matrix up to date; `false` iff a negative cycle exists.
    pub fn propagate(&mut self) -> bool {
        if self.cache == Cache::Inconsistent {
            self.pending.clear();
            return false;
        }
        let pending = std::mem::take(&mut self.pending);
        for (u, v, w) in pending {
            if !self.relax_edge(u, v, w) {
                self.cache = Cache::Inconsistent;
                return false;
            }
        }
        true
    }

    /// Incremental all-pairs repair after tightening edge `u → v` to `w`.
    fn relax_edge(&mut self, u: usize, v: usize, w: i64) -> bool {
        if add(self.dist[v][u], w) < 0 {
            return false;
        }
        if w >= self.dist[u][v] {
            return true;
        }
        let n = self.dist.len();
        let to_u: Vec<i64> = (0..n).map(|i| self.dist[i][u]).collect();
        let from_v = self.dist[v].clone();
        for (i, &iu) in to_u.iter().enumerate() {
            if iu >= INF {
                continue;
            }
            let base = iu + w;
            let row = &mut self.dist[i];
            for (j, &vj) in from_v.iter().enumerate() {
                if vj < INF && base + vj < row[j] {
                    row[j] = base + vj;
                }
            }
        }
        true
    }

    /// Full Floyd–Warshall recomputation from the recorded edges.
    pub fn propagate_full(&mut self) -> bool {
        self.pending.clear();
        let n = self.dist.len();
        let mut d = vec![vec![INF; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0;
        }
        for (&(a, b), &w) in &self.edges {
            if w < d[a][b] {
                d[a][b] = w;
            }
        }
        for k in 0..n {
            let dk = d[k].clone();
            for row in d.iter_mut() {
                let ik = row[k];
                if ik >= INF {
                    continue;
                }
                for (j, &kj) in dk.iter().enumerate() {
                    let s = add(ik, kj);
                    if s < row[j] {
                        row[j] = s;
                    }
                }
            }
        }
        let consistent = (0..n).all(|i| d[i][i] >= 0);
        self.dist = d;
        self.cache = if consistent { Cache::Consistent } else { Cache::Inconsistent };
        consistent
    }

    pub fn is_consistent(&self) -> bool {
        self.cache == Cache::Consistent
    }

    fn ready(&self) -> Result<(), NetworkError> {
        if self.is_stale() {
            Err(NetworkError::Stale)
        } else if self.cache == Cache::Inconsistent {
            Err(NetworkError::Inconsistent)
        } else {
            Ok(())
        }
    }

    /// Tightest upper bound on `t_b − t_a`; `None` when unbounded.
    pub fn distance(&self, a: PointId, b: PointId) -> Result<Option<i64>, NetworkError> {
        self.ready()?;
        self.check_point(a)?;
        self.check_point(b)?;
        let d = self.dist[a.0][b.0];
        Ok((d < INF).then_some(d))
    }

    /// Feasible range of `t_b − t_a` as `(min, max)`; `max` is `None` when unbounded.
    pub fn interval(&self, a: PointId, b: PointId) -> Result<(i64, Option<i64>), NetworkError> {
        let hi = self.distance(a, b)?;
        let lo = match self.distance(b, a)? {
            Some(d) => -d,
            None => i64::MIN,
        };
        Ok((lo, hi))
    }

    /// Window of `t_p` relative to the origin.
    pub fn bounds(&self, p: PointId) -> Result<Bound, NetworkError> {
        let (lo, hi) = self.interval(ORIGIN, p)?;
        let ub = match hi {
            Some(h) => TimeValue::finite(h as u64),
            None => TimeValue::INFINITY,
        };
        Ok(Bound { lb: TimeValue::finite(lo.max(0) as u64), ub })
    }

    /// Implied duration window between two points (`b − a`), clamped at zero.
    pub fn duration_bounds(&self, a: PointId, b: PointId) -> Result<Bound, NetworkError> {
        let (lo, hi) = self.interval(a, b)?;
        let ub = match hi {
            Some(h) => TimeValue::finite(h.max(0) as u64),
            None => TimeValue::INFINITY,
        };
        Ok(Bound { lb: TimeValue::finite(lo.max(0) as u64), ub })
    }

    /// Whether the minimal network narrows the link's duration below `[dmin, dmax]`.
    pub fn squeezed(&self, link: LinkId) -> Result<bool, NetworkError> {
        let l = self.contingents.get(link.0).ok_or(NetworkError::UnknownLink(link.0))?;
        let (lo, hi) = self.interval(l.start, l.end)?;
        Ok(lo > l.dmin as i64 || hi.is_some_and(|h| h < l.dmax as i64))
    }

    /// Requirement edges as `(from, to, weight)`, for diagnostics and tests.
    pub fn edges(&self) -> impl Iterator<Item = (PointId, PointId, i64)> + '_ {
        self.edges.iter().map(|(&(a, b), &w)| (PointId(a), PointId(b), w))
    }
}
