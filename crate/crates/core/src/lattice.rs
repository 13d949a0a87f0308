//! Hypercubic box `[1, L]^d` with free boundaries and its nearest-neighbour bonds.
//!
//! Sites are indexed densely in row-major order: the last coordinate varies
//! fastest. Bonds are stored as `(x, y)` with `x < y`, sorted lexicographically.

use crate::error::{Error, Result};

/// Largest box that can be indexed densely.
pub const MAX_SITES: usize = 1 << 26;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeGeometry {
    dim: usize,
    side: usize,
    site_count: usize,
    bonds: Vec<(usize, usize)>,
    adj_offsets: Vec<usize>,
    adj: Vec<(usize, usize)>,
}

impl LatticeGeometry {
    /// Builds `Λ_L` for dimension `dim` and linear size `side`.
    pub fn new(dim: usize, side: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("lattice.d", "dimension must be at least 1"));
        }
        if side == 0 {
            return Err(Error::invalid(
                "lattice.L",
                "linear size must be at least 1",
            ));
        }
        let mut site_count: usize = 1;
        for _ in 0..dim {
            site_count = site_count
                .checked_mul(side)
                .filter(|&n| n <= MAX_SITES)
                .ok_or(Error::CapExceeded {
                    what: "lattice site count",
                    value: side.saturating_pow(dim.min(u32::MAX as usize) as u32),
                    cap: MAX_SITES,
                })?;
        }

        let mut bonds = Vec::with_capacity(dim * site_count);
        let mut coords = vec![0usize; dim];
        for x in 0..site_count {
            decode_into(x, side, &mut coords);
            let mut stride = 1;
            for axis in (0..dim).rev() {
                if coords[axis] + 1 < side {
                    bonds.push((x, x + stride));
                }
                stride *= side;
            }
        }
        bonds.sort_unstable();

        let mut geom = LatticeGeometry {
            dim,
            side,
            site_count,
            bonds,
            adj_offsets: Vec::new(),
            adj: Vec::new(),
        };
        geom.build_adjacency();
        Ok(geom)
    }

    fn build_adjacency(&mut self) {
        let mut degree = vec![0usize; self.site_count];
        for &(x, y) in &self.bonds {
            degree[x] += 1;
            degree[y] += 1;
        }
        let mut offsets = Vec::with_capacity(self.site_count + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets.clone();
        let mut adj = vec![(0, 0); offsets[self.site_count]];
        for (b, &(x, y)) in self.bonds.iter().enumerate() {
            adj[fill[x]] = (y, b);
            fill[x] += 1;
            adj[fill[y]] = (x, b);
            fill[y] += 1;
        }
        self.adj_offsets = offsets;
        self.adj = adj;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// `|Λ_L| = L^d`.
    pub fn site_count(&self) -> usize {
        self.site_count
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn bonds(&self) -> &[(usize, usize)] {
        &self.bonds
    }

    /// Neighbours of `x` as `(site, bond index)` pairs.
    pub fn neighbors(&self, x: usize) -> &[(usize, usize)] {
        &self.adj[self.adj_offsets[x]..self.adj_offsets[x + 1]]
    }

    pub fn coords(&self, x: usize) -> Vec<usize> {
        let mut c = vec![0; self.dim];
        decode_into(x, self.side, &mut c);
        c
    }

    pub fn index(&self, coords: &[usize]) -> Option<usize> {
        if coords.len() != self.dim || coords.iter().any(|&c| c >= self.side) {
            return None;
        }
        Some(coords.iter().fold(0, |acc, &c| acc * self.side + c))
    }
}

fn decode_into(mut x: usize, side: usize, out: &mut [usize]) {
    for c in out.iter_mut().rev() {
        *c = x % side;
        x /= side;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_counts() {
        for (d, l, sites, bonds) in [(1, 3, 3, 2), (2, 2, 4, 4), (3, 2, 8, 12), (1, 1, 1, 0)] {
            let g = LatticeGeometry::new(d, l).unwrap();
            assert_eq!(g.site_count(), sites);
            assert_eq!(g.bond_count(), bonds);
        }
    }

    #[test]
    fn rejects_degenerate_and_overflow() {
        assert!(matches!(
            LatticeGeometry::new(0, 3),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            LatticeGeometry::new(2, 0),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            LatticeGeometry::new(64, 2),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn coordinate_round_trip() {
        let g = LatticeGeometry::new(3, 4).unwrap();
        for x in 0..g.site_count() {
            assert_eq!(g.index(&g.coords(x)), Some(x));
        }
        assert_eq!(g.index(&[0, 0, 4]), None);
        assert_eq!(g.coords(1), vec![0, 0, 1]);
    }

    #[test]
    fn adjacency_matches_bonds() {
        let g = LatticeGeometry::new(2, 3).unwrap();
        let center = g.index(&[1, 1]).unwrap();
        assert_eq!(g.neighbors(center).len(), 4);
        assert_eq!(g.neighbors(0).len(), 2);
        for x in 0..g.site_count() {
            for &(y, b) in g.neighbors(x) {
                let (a, c) = g.bonds()[b];
                assert!((a, c) == (x.min(y), x.max(y)));
            }
        }
    }

    proptest! {
        #[test]
        fn count_formulas(d in 1usize..5, l in 1usize..7) {
            let g = LatticeGeometry::new(d, l).unwrap();
            prop_assert_eq!(g.site_count(), l.pow(d as u32));
            prop_assert_eq!(g.bond_count(), d * l.pow(d as u32 - 1) * (l - 1));
            prop_assert!(g.bond_count() <= d * g.site_count());

            let mut seen = std::collections::BTreeSet::new();
            for &(x, y) in g.bonds() {
                prop_assert!(x < y && y < g.site_count());
                let (cx, cy) = (g.coords(x), g.coords(y));
                let dist2: usize = cx.iter().zip(&cy).map(|(a, b)| a.abs_diff(*b).pow(2)).sum();
                prop_assert_eq!(dist2, 1);
                prop_assert!(seen.insert((x, y)));
            }
            let sorted = g.bonds().windows(2).all(|w| w[0] < w[1]);
            prop_assert!(sorted);
        }

        #[test]
        fn bonds_invariant_under_axis_permutation(d in 1usize..4, l in 1usize..5, rot in 0usize..4) {
            let g = LatticeGeometry::new(d, l).unwrap();
            let perm: Vec<usize> = (0..d).map(|k| (k + rot) % d).collect();
            let mut permuted: Vec<(usize, usize)> = g
                .bonds()
                .iter()
                .map(|&(x, y)| {
                    let p = |s: usize| {
                        let c = g.coords(s);
                        let pc: Vec<usize> = perm.iter().map(|&k| c[k]).collect();
                        g.index(&pc).unwrap()
                    };
                    let (a, b) = (p(x), p(y));
                    (a.min(b), a.max(b))
                })
                .collect();
            permuted.sort_unstable();
            prop_assert_eq!(permuted, g.bonds().to_vec());
        }
    }
}
