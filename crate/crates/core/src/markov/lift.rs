use ndarray::{s, Array1, Array2, ArrayView1};

use super::{Mobility, TransitionMatrix};
use crate::error::{Error, Result};
use crate::event::{Event, EventKind, Region};

/// Block layout of a lifted `2m x 2m` transition. Index `[0, m)` is the world
/// where the event is false, `[m, 2m)` the world where it is true.
#[derive(Debug, Clone, Copy)]
pub enum LiftBlock<'a> {
    /// `diag(M, M)`.
    Diagonal,
    /// `[[M - M s^D, M s^D], [0, M]]`: moves every transition landing in the
    /// region into the true world and keeps it there.
    Split(&'a Region),
    /// `[[M, 0], [M - M s^D, M s^D]]`: true-world mass survives only by
    /// landing in the region.
    Filter(&'a Region),
}

/// The two-world transition for one step. `base == None` stands for the
/// identity, used for the zero-step split applied to `[pi, 0]` when the
/// event starts at time 1.
#[derive(Debug, Clone, Copy)]
pub struct LiftedTransition<'a> {
    base: Option<&'a TransitionMatrix>,
    block: LiftBlock<'a>,
    m: usize,
}

/// Lift for the transition from `t` to `t + 1` (`t >= 1`), using the region
/// active at the arrival time `t + 1`.
pub fn lift_transition<'a>(mobility: &'a Mobility, event: &'a Event, t: u32) -> Result<LiftedTransition<'a>> {
    if t == 0 {
        return Err(Error::InvalidEvent("transitions are indexed from t = 1".into()));
    }
    lift_at(mobility, event, t)
}

/// Zero-step lift applied to `[pi, 0]` before the first emission: a split on
/// the first region when the event starts at time 1, identity otherwise.
pub fn initial_lift(event: &Event) -> LiftedTransition<'_> {
    let block = if event.start() == 1 {
        LiftBlock::Split(&event.regions()[0])
    } else {
        LiftBlock::Diagonal
    };
    LiftedTransition {
        base: None,
        block,
        m: event.m(),
    }
}

/// Like [`lift_transition`] but maps `t = 0` to [`initial_lift`].
pub fn lift_at<'a>(mobility: &'a Mobility, event: &'a Event, t: u32) -> Result<LiftedTransition<'a>> {
    if mobility.m() != event.m() {
        return Err(Error::DimensionMismatch {
            expected: mobility.m(),
            found: event.m(),
        });
    }
    if t == 0 {
        return Ok(initial_lift(event));
    }
    let base = mobility.at(t)?;
    let (start, end) = (event.start(), event.end());
    let arrival = event.region_at(t + 1);
    let block = match (event.kind(), arrival) {
        (_, Some(r)) if t + 1 == start => LiftBlock::Split(r),
        (EventKind::Presence, Some(r)) if t < end => LiftBlock::Split(r),
        (EventKind::Pattern, Some(r)) if t < end => LiftBlock::Filter(r),
        _ => LiftBlock::Diagonal,
    };
    Ok(LiftedTransition {
        base: Some(base),
        block,
        m: base.m(),
    })
}

impl<'a> LiftedTransition<'a> {
    pub fn block(&self) -> LiftBlock<'a> {
        self.block
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// The base transition, or `None` for the identity.
    pub fn base(&self) -> Option<&'a TransitionMatrix> {
        self.base
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.block, LiftBlock::Diagonal)
    }

    fn base_col(&self, x: ArrayView1<f64>) -> Array1<f64> {
        match self.base {
            Some(b) => b.mul_col(x),
            None => x.to_owned(),
        }
    }

    fn base_row(&self, x: ArrayView1<f64>) -> Array1<f64> {
        match self.base {
            Some(b) => b.mul_row(x),
            None => x.to_owned(),
        }
    }

    /// `L x` for a column vector of length `2m`.
    pub fn apply_col(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let m = self.m;
        let (xf, xt) = (x.slice(s![..m]), x.slice(s![m..]));
        let mixed = |r: &Region| Array1::from_shape_fn(m, |i| if r.contains(i) { xt[i] } else { xf[i] });
        let (top, bottom) = match self.block {
            LiftBlock::Diagonal => (self.base_col(xf), self.base_col(xt)),
            LiftBlock::Split(r) => (self.base_col(mixed(r).view()), self.base_col(xt)),
            LiftBlock::Filter(r) => (self.base_col(xf), self.base_col(mixed(r).view())),
        };
        concat(top, bottom)
    }

    /// `x L` for a row vector of length `2m`.
    pub fn apply_row(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let m = self.m;
        let (xf, xt) = (x.slice(s![..m]), x.slice(s![m..]));
        match self.block {
            LiftBlock::Diagonal => concat(self.base_row(xf), self.base_row(xt)),
            LiftBlock::Split(r) => {
                let f = self.base_row(xf);
                let mut t = self.base_row(xt);
                let mut out_f = f.clone();
                for i in r.cells() {
                    t[i] += f[i];
                    out_f[i] = 0.0;
                }
                concat(out_f, t)
            }
            LiftBlock::Filter(r) => {
                let mut f = self.base_row(xf);
                let mut t = self.base_row(xt);
                for i in 0..m {
                    if !r.contains(i) {
                        f[i] += t[i];
                        t[i] = 0.0;
                    }
                }
                concat(f, t)
            }
        }
    }

    /// Materializes the full `2m x 2m` matrix.
    pub fn dense(&self) -> Array2<f64> {
        let m = self.m;
        let base: Array2<f64> = match self.base {
            Some(b) => b.view().to_owned(),
            None => Array2::eye(m),
        };
        let mut out = Array2::zeros((2 * m, 2 * m));
        let masked = |r: &Region, keep_inside: bool| {
            let mut a = base.clone();
            for j in 0..m {
                if r.contains(j) != keep_inside {
                    a.column_mut(j).fill(0.0);
                }
            }
            a
        };
        match self.block {
            LiftBlock::Diagonal => {
                out.slice_mut(s![..m, ..m]).assign(&base);
                out.slice_mut(s![m.., m..]).assign(&base);
            }
            LiftBlock::Split(r) => {
                out.slice_mut(s![..m, ..m]).assign(&masked(r, false));
                out.slice_mut(s![..m, m..]).assign(&masked(r, true));
                out.slice_mut(s![m.., m..]).assign(&base);
            }
            LiftBlock::Filter(r) => {
                out.slice_mut(s![..m, ..m]).assign(&base);
                out.slice_mut(s![m.., ..m]).assign(&masked(r, false));
                out.slice_mut(s![m.., m..]).assign(&masked(r, true));
            }
        }
        out
    }
}

fn concat(a: Array1<f64>, b: Array1<f64>) -> Array1<f64> {
    let mut v = a.into_raw_vec_and_offset().0;
    v.extend(b.iter());
    Array1::from(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::Region;

    fn example_m() -> Mobility {
        TransitionMatrix::from_rows(&[vec![0.1, 0.2, 0.7], vec![0.4, 0.1, 0.5], vec![0.0, 0.1, 0.9]])
            .unwrap()
            .into()
    }

    #[test]
    fn windows_follow_event_kind() {
        let mob = example_m();
        let r = Region::from_mask(vec![true, true, false]).unwrap();
        let presence = Event::presence(r.clone(), 3, 5).unwrap();
        let pattern = Event::pattern(vec![r.clone(), r.clone(), r], 3).unwrap();
        let kinds = |e: &Event| {
            (1..=6)
                .map(|t| match lift_transition(&mob, e, t).unwrap().block() {
                    LiftBlock::Diagonal => 'D',
                    LiftBlock::Split(_) => 'S',
                    LiftBlock::Filter(_) => 'F',
                })
                .collect::<String>()
        };
        assert_eq!(kinds(&presence), "DSSSDD");
        assert_eq!(kinds(&pattern), "DSFFDD");
        assert!(lift_transition(&mob, &presence, 0).is_err());
    }

    #[test]
    fn full_region_presence_lift() {
        let mob = example_m();
        let e = Event::presence(Region::full(3), 2, 3).unwrap();
        let d = lift_transition(&mob, &e, 2).unwrap().dense();
        let m = mob.at(1).unwrap().view().to_owned();
        assert!(d.slice(s![.., ..3]).iter().all(|&x| x == 0.0));
        assert_eq!(d.slice(s![..3, 3..]), m);
        assert_eq!(d.slice(s![3.., 3..]), m);
    }

    #[test]
    fn structured_products_match_dense() {
        let mob = example_m();
        let r1 = Region::from_mask(vec![true, false, true]).unwrap();
        let r2 = Region::from_mask(vec![false, true, false]).unwrap();
        let events = [
            Event::new(EventKind::Presence, vec![r1.clone(), r2.clone()], &[1, 2]).unwrap(),
            Event::new(EventKind::Pattern, vec![r1.clone(), r2.clone(), r1], &[2, 3, 4]).unwrap(),
        ];
        let x = Array1::from(vec![0.3, -1.0, 2.0, 0.7, 1.5, -0.2]);
        for e in &events {
            for t in 0..6 {
                let l = lift_at(&mob, e, t).unwrap();
                let d = l.dense();
                let col = l.apply_col(x.view());
                let row = l.apply_row(x.view());
                let want_col = d.dot(&x);
                let want_row = x.dot(&d);
                for i in 0..6 {
                    assert!((col[i] - want_col[i]).abs() < 1e-12);
                    assert!((row[i] - want_row[i]).abs() < 1e-12);
                }
            }
        }
    }
}
