//! Unimodality of cyclic sequences.

use serde::Serialize;

use crate::error::{Error, Result};

/// Differences at most this large (in absolute value) count as ties.
pub const DEFAULT_TIE_TOLERANCE: f64 = 1e-12;

/// Cyclic index range `start..=end`, possibly wrapping past the last index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CyclicRange {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct UnimodalityVerdict {
    pub unimodal: bool,
    /// From the last index of the minimum plateau to the first index of the maximum plateau.
    pub rise_arc: Option<CyclicRange>,
    /// From the last index of the maximum plateau to the first index of the minimum plateau.
    pub fall_arc: Option<CyclicRange>,
    pub direction_changes: usize,
}

/// Counts cyclic sign changes of consecutive differences after merging ties;
/// the sequence is unimodal iff there are exactly two.
pub fn unimodality_check(values: &[f64], tol: f64) -> Result<UnimodalityVerdict> {
    let n = values.len();
    if n < 3 {
        return Err(Error::invalid(format!(
            "unimodality needs at least 3 values, got {n}"
        )));
    }
    if !(tol >= 0.0) {
        return Err(Error::invalid("tie tolerance must be nonnegative"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("sequence contains non-finite values"));
    }
    // (index of the edge's first value, sign)
    let signs: Vec<(usize, i8)> = (0..n)
        .filter_map(|k| {
            let d = values[(k + 1) % n] - values[k];
            if d > tol {
                Some((k, 1))
            } else if d < -tol {
                Some((k, -1))
            } else {
                None
            }
        })
        .collect();
    if signs.is_empty() {
        return Err(Error::invalid(
            "sequence is constant up to the tie tolerance",
        ));
    }
    let m = signs.len();
    let mut changes = 0;
    let (mut rise_start, mut fall_start) = (None, None);
    for i in 0..m {
        let (prev, cur) = (signs[(i + m - 1) % m], signs[i]);
        if prev.1 != cur.1 {
            changes += 1;
            if cur.1 > 0 {
                rise_start = Some(cur.0);
            } else {
                fall_start = Some(cur.0);
            }
        }
    }
    let (rise_arc, fall_arc) = match (changes, rise_start, fall_start) {
        (2, Some(r), Some(f)) => (
            Some(CyclicRange { start: r, end: f }),
            Some(CyclicRange { start: f, end: r }),
        ),
        _ => (None, None),
    };
    Ok(UnimodalityVerdict {
        unimodal: changes == 2,
        rise_arc,
        fall_arc,
        direction_changes: changes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    fn samples(f: impl Fn(f64) -> f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| f(TAU * k as f64 / n as f64)).collect()
    }

    #[test]
    fn cosine_is_unimodal() {
        let v = unimodality_check(&samples(f64::cos, 64), DEFAULT_TIE_TOLERANCE).unwrap();
        assert!(v.unimodal);
        assert_eq!(v.direction_changes, 2);
        assert_eq!(v.rise_arc, Some(CyclicRange { start: 32, end: 0 }));
        assert_eq!(v.fall_arc, Some(CyclicRange { start: 0, end: 32 }));
    }

    #[test]
    fn double_cosine_is_not() {
        let v =
            unimodality_check(&samples(|t| (2.0 * t).cos(), 64), DEFAULT_TIE_TOLERANCE).unwrap();
        assert!(!v.unimodal);
        assert_eq!(v.direction_changes, 4);
        assert!(v.rise_arc.is_none());
    }

    #[test]
    fn plateaus_are_merged() {
        let v = unimodality_check(&[0.0, 1.0, 1.0, 0.0], DEFAULT_TIE_TOLERANCE).unwrap();
        assert!(v.unimodal);
        assert_eq!(v.rise_arc, Some(CyclicRange { start: 0, end: 2 }));
        assert_eq!(v.fall_arc, Some(CyclicRange { start: 2, end: 0 }));
    }

    #[test]
    fn ties_within_tolerance() {
        let v = [0.0, 1.0, 1.0 - 1e-14, 1.0, 0.0];
        assert!(
            unimodality_check(&v, DEFAULT_TIE_TOLERANCE)
                .unwrap()
                .unimodal
        );
        assert!(!unimodality_check(&v, 0.0).unwrap().unimodal);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(unimodality_check(&[1.0, 1.0, 1.0], DEFAULT_TIE_TOLERANCE).is_err());
        assert!(unimodality_check(&[1.0, 2.0], DEFAULT_TIE_TOLERANCE).is_err());
        assert!(unimodality_check(&[1.0, f64::NAN, 0.0], DEFAULT_TIE_TOLERANCE).is_err());
    }

    proptest! {
        #[test]
        fn invariant_under_rotation_and_shift(
            values in prop::collection::vec(-10.0f64..10.0, 3..40),
            shift in 0usize..40,
            c in -100.0f64..100.0,
        ) {
            prop_assume!(values.iter().any(|&v| (v - values[0]).abs() > 1e-6));
            let base = unimodality_check(&values, 0.0).unwrap();
            let mut rotated = values.clone();
            rotated.rotate_left(shift % values.len());
            let r = unimodality_check(&rotated, 0.0).unwrap();
            prop_assert_eq!(base.unimodal, r.unimodal);
            prop_assert_eq!(base.direction_changes, r.direction_changes);
            // integer-valued shift keeps differences exact
            let shifted: Vec<f64> = values.iter().map(|v| v + c.round()).collect();
            let s = unimodality_check(&shifted, 1e-9).unwrap();
            prop_assert_eq!(unimodality_check(&values, 1e-9).unwrap().direction_changes, s.direction_changes);
        }

        #[test]
        fn changes_are_even(values in prop::collection::vec(-10.0f64..10.0, 3..40)) {
            prop_assume!(values.iter().any(|&v| v != values[0]));
            let v = unimodality_check(&values, 0.0).unwrap();
            prop_assert_eq!(v.direction_changes % 2, 0);
            prop_assert!(v.direction_changes >= 2);
        }
    }
}
