//! A field on a lattice box together with the rules that turn `ħ` into a grid,
//! plus the eigenpairs solved per ladder rung.

use serde::{Deserialize, Serialize};

use crate::field::{Domain, FieldSpec};
use crate::lattice::{GridSpec, LatticeOperator};
use crate::spectral::{eigs_window, EigenWindowResult, EigsOptions};
use crate::{par, Error, Result};

/// Lattice spacing `h = h0·ħ^power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRule {
    pub h0: f64,
    pub power: f64,
}

impl GridRule {
    pub fn spacing(&self, hbar: f64) -> f64 {
        self.h0 * hbar.powf(self.power)
    }
}

/// A field on its lattice box and on the box doubled about the same center.
/// Both carry the same gauge, so the two operators differ only in extent.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub field: FieldSpec,
    pub doubled: FieldSpec,
    pub rule: GridRule,
    pub node_cap: usize,
    pub eigs: EigsOptions,
}

/// Eigenpairs of one ladder rung.
#[derive(Debug, Clone)]
pub struct Rung {
    pub hbar: f64,
    pub op: LatticeOperator,
    pub ew: EigenWindowResult,
}

/// Box with every half-width doubled about the same center.
pub fn doubled_domain(d: &Domain) -> Domain {
    let c = d.center();
    Domain {
        lo: d.lo.iter().zip(&c).map(|(l, c)| c - 2.0 * (c - l)).collect(),
        hi: d.hi.iter().zip(&c).map(|(h, c)| c + 2.0 * (h - c)).collect(),
    }
}

impl Scenario {
    pub fn new(field: FieldSpec, rule: GridRule, node_cap: usize, eigs: EigsOptions) -> Result<Self> {
        if !(rule.h0 > 0.0) || !rule.power.is_finite() {
            return Err(Error::InvalidArgument(format!("bad grid rule {rule:?}")));
        }
        let doubled = field.with_domain(doubled_domain(&field.domain))?;
        Ok(Self {
            field,
            doubled,
            rule,
            node_cap,
            eigs,
        })
    }

    pub fn grid(&self, hbar: f64) -> Result<GridSpec> {
        GridSpec::with_spacing(&self.field.domain, self.rule.spacing(hbar), self.node_cap)
    }

    /// Grid on the doubled box with exactly the spacing of [`Self::grid`].
    pub fn doubled_grid(&self, hbar: f64) -> Result<GridSpec> {
        let g = self.grid(hbar)?;
        let n = g.n.iter().map(|k| 2 * k + 1).collect();
        GridSpec::new(&self.doubled.domain, n, self.node_cap)
    }

    pub fn operator(&self, hbar: f64) -> Result<LatticeOperator> {
        LatticeOperator::assemble(&self.field, &self.grid(hbar)?, hbar)
    }

    pub fn doubled_operator(&self, hbar: f64) -> Result<LatticeOperator> {
        LatticeOperator::assemble(&self.doubled, &self.doubled_grid(hbar)?, hbar)
    }

    pub fn solve(&self, hbar: f64, window: (f64, f64)) -> Result<Rung> {
        let op = self.operator(hbar)?;
        let ew = eigs_window(&op, window, &self.eigs)?;
        Ok(Rung { hbar, op, ew })
    }

    /// Eigenpairs on the doubled box.
    pub fn solve_doubled(&self, hbar: f64, window: (f64, f64)) -> Result<Rung> {
        let op = self.doubled_operator(hbar)?;
        let ew = eigs_window(&op, window, &self.eigs)?;
        Ok(Rung { hbar, op, ew })
    }

    /// Solves every rung; rungs run as independent jobs and come back in
    /// ladder order.
    pub fn solve_ladder(&self, ladder: &[f64], window: (f64, f64)) -> Result<Vec<Rung>> {
        par::map_slice(ladder, |&hbar| self.solve(hbar, window))
            .into_iter()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{MagneticFamily, PotentialFamily};
    use crate::lattice::DEFAULT_NODE_CAP;

    #[test]
    fn doubled_grid_shares_nodes() {
        let fs = FieldSpec::new(
            MagneticFamily::RadialWell {
                b0: 1.0,
                b2: 1.0,
                center: vec![0.5, 0.0],
            },
            PotentialFamily::Zero,
            None,
            Domain::new(vec![-0.5, -1.0], vec![1.5, 1.0]).unwrap(),
            None,
        )
        .unwrap();
        let sc = Scenario::new(
            fs,
            GridRule { h0: 0.5, power: 1.0 },
            DEFAULT_NODE_CAP,
            EigsOptions::default(),
        )
        .unwrap();
        assert_eq!(sc.doubled.domain.lo, vec![-1.5, -2.0]);
        assert_eq!(sc.doubled.domain.hi, vec![2.5, 2.0]);
        let (g, g2) = (sc.grid(0.1).unwrap(), sc.doubled_grid(0.1).unwrap());
        assert_eq!(g.h, g2.h);
        // every node of the small box is a node of the doubled box
        for i in [0, g.len() / 3, g.len() - 1] {
            let x = g.coord(i);
            let y = g2.coord(g2.nearest_node(&x));
            assert!(x.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-12));
        }
        // the operators agree on the shared nodes
        let (a, b) = (sc.operator(0.1).unwrap(), sc.doubled_operator(0.1).unwrap());
        let i = g.len() / 2 + 3;
        let j = g2.nearest_node(&g.coord(i));
        assert!((a.diagonal()[i] - b.diagonal()[j]).abs() < 1e-12);
        assert!((a.get(i, i + 1) - b.get(j, j + 1)).norm() < 1e-12);
    }
}
