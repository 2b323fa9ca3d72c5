use alloc::format;

use super::{State, Vec5};
use crate::error::{Error, Result};

/// Signed permutation applied to the coordinates when the legs swap roles.
///
/// Coordinate `i` of the relabeled state is `sign[i] * old[source[i]]`,
/// plus `q1_offset` on the torso coordinate position only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelabelMap {
    source: [usize; 5],
    sign: [f64; 5],
    q1_offset: f64,
}

impl RelabelMap {
    pub fn new(source: [usize; 5], sign: [f64; 5], q1_offset: f64) -> Result<Self> {
        let mut seen = [false; 5];
        for &s in &source {
            if s >= 5 || seen[s] {
                return Err(Error::InvalidMap(format!(
                    "source indices {source:?} are not a permutation"
                )));
            }
            seen[s] = true;
        }
        if sign.iter().any(|s| *s != 1.0 && *s != -1.0) {
            return Err(Error::InvalidMap(format!("signs {sign:?} must be ±1")));
        }
        if !q1_offset.is_finite() {
            return Err(Error::InvalidMap("q1 offset must be finite".into()));
        }
        Ok(Self {
            source,
            sign,
            q1_offset,
        })
    }

    /// Leg exchange for the anatomical convention of this crate: the torso
    /// angle is absolute and passes through, hips and knees swap.
    pub fn leg_swap() -> Self {
        Self {
            source: [0, 3, 4, 1, 2],
            sign: [1.0; 5],
            q1_offset: 0.0,
        }
    }

    pub fn identity() -> Self {
        Self {
            source: [0, 1, 2, 3, 4],
            sign: [1.0; 5],
            q1_offset: 0.0,
        }
    }

    pub fn source(&self) -> [usize; 5] {
        self.source
    }

    pub fn sign(&self) -> [f64; 5] {
        self.sign
    }

    pub fn q1_offset(&self) -> f64 {
        self.q1_offset
    }

    fn apply_linear(&self, v: &Vec5) -> Vec5 {
        Vec5::from_fn(|i, _| self.sign[i] * v[self.source[i]])
    }

    /// Linear part of the map as a matrix.
    pub fn matrix(&self) -> nalgebra::SMatrix<f64, 5, 5> {
        let mut m = nalgebra::SMatrix::<f64, 5, 5>::zeros();
        for i in 0..5 {
            m[(i, self.source[i])] = self.sign[i];
        }
        m
    }
}

impl Default for RelabelMap {
    fn default() -> Self {
        Self::leg_swap()
    }
}

pub fn relabel(state: &State, map: &RelabelMap) -> State {
    let mut q = map.apply_linear(&state.q);
    q[0] += map.q1_offset;
    State {
        q,
        qd: map.apply_linear(&state.qd),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_velocity_stays_zero() {
        let s = State::at_rest(Vec5::new(0.1, 0.2, 0.3, 0.4, 0.5));
        assert_eq!(relabel(&s, &RelabelMap::default()).qd, Vec5::zeros());
    }

    #[test]
    fn identity_is_noop() {
        let s = State::new(
            Vec5::new(0.1, 0.2, 0.3, 0.4, 0.5),
            Vec5::new(1.0, 2.0, 3.0, 4.0, 5.0),
        );
        assert_eq!(relabel(&s, &RelabelMap::identity()), s);
    }

    #[test]
    fn leg_swap_is_involution() {
        let s = State::new(
            Vec5::new(0.1, 0.2, 0.3, 0.4, 0.5),
            Vec5::new(1.0, 2.0, 3.0, 4.0, 5.0),
        );
        let m = RelabelMap::leg_swap();
        let once = relabel(&s, &m);
        assert_eq!(once.q, Vec5::new(0.1, 0.4, 0.5, 0.2, 0.3));
        assert_eq!(relabel(&once, &m), s);
    }

    #[test]
    fn signed_map_links_default_boundary_rows() {
        // q2<->q5 unchanged in sign, q3<->q4 with a sign flip, torso corrected.
        let final_row = Vec5::new(0.1964, 0.0, 0.0219, 1.2267, 1.3140);
        let initial_row = Vec5::new(0.2618, 1.3140, -1.2267, -0.0219, 0.0);
        let map = RelabelMap::new(
            [0, 4, 3, 2, 1],
            [1.0, 1.0, -1.0, -1.0, 1.0],
            0.2618 - 0.1964,
        )
        .unwrap();
        let out = relabel(&State::at_rest(final_row), &map);
        assert_abs_diff_eq!(out.q, initial_row, epsilon = 1e-12);
    }

    #[test]
    fn rejects_non_permutations() {
        assert!(RelabelMap::new([0, 0, 2, 3, 4], [1.0; 5], 0.0).is_err());
        assert!(RelabelMap::new([0, 1, 2, 3, 5], [1.0; 5], 0.0).is_err());
        assert!(RelabelMap::new([0, 1, 2, 3, 4], [1.0, 2.0, 1.0, 1.0, 1.0], 0.0).is_err());
    }
}
