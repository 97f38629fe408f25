//! DC analysis of crossbar tiles: nodal system construction, the iterative
//! solver, a dense reference solver, power accounting and the ideal
//! (parasitic-free) analytic path.

pub mod exact;
mod ideal;
mod network;
mod sparse;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ideal::{ideal_mvm, ideal_mvm_accumulate, ideal_power, OutputCurrents, PairAccumulator, PairMatrix};
pub use network::{build_network, CellMatrix, Element, ElementKind, Layout, NodalSystem, Terminal, TileNetwork};
pub use sparse::{CsrMatrix, LinePreconditioner};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
/// Iteration budget per unknown when no explicit limit is given.
pub const MAX_ITER_PER_UNKNOWN: usize = 20;
/// Largest system [`dense_solve_oracle`] accepts.
pub const DENSE_ORACLE_LIMIT: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    /// Diagonal scaling.
    Jacobi,
    /// Exact tridiagonal solve along every row and column wire.
    Line,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Relative residual `||b - Ax|| / ||b||` to reach.
    pub tolerance: f64,
    /// Iteration cap; `None` means `20 * unknowns`.
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_iter: None,
            preconditioner: Preconditioner::Line,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TileSolution {
    /// Voltage of every unknown node.
    pub voltages: Vec<f64>,
    /// Current into ground at each physical column foot.
    pub foot_currents: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate-gradient DC solve with default preconditioning.
pub fn solve_dc(system: &NodalSystem, tolerance: f64, max_iter: usize) -> Result<TileSolution> {
    solve_dc_with(
        system,
        &SolverOptions {
            tolerance,
            max_iter: Some(max_iter),
            ..SolverOptions::default()
        },
    )
}

pub fn solve_dc_with(system: &NodalSystem, options: &SolverOptions) -> Result<TileSolution> {
    let n = system.unknowns();
    let a = system.matrix();
    let b = system.rhs();
    let max_iter = options.max_iter.unwrap_or(MAX_ITER_PER_UNKNOWN * n.max(1));
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(finish(system, x, 0, 0.0));
    }
    let precond = system.network().preconditioner(options.preconditioner);

    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    let mut relative = 1.0;
    // Outer loop restarts from the true residual if the recursive one drifted.
    loop {
        precond.apply(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while iterations < max_iter {
            a.mul_vec(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap.is_nan() || pap <= 0.0 {
                return Err(Error::NotPositiveDefinite);
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            iterations += 1;
            relative = norm(&r) / b_norm;
            if relative <= options.tolerance {
                break;
            }
            precond.apply(&r, &mut z);
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        a.mul_vec(&x, &mut ap);
        for i in 0..n {
            r[i] = b[i] - ap[i];
        }
        let true_relative = norm(&r) / b_norm;
        if true_relative <= options.tolerance {
            return Ok(finish(system, x, iterations, true_relative));
        }
        if iterations >= max_iter {
            return Err(Error::Divergence {
                iterations,
                residual: true_relative.max(relative),
            });
        }
    }
}

fn finish(system: &NodalSystem, voltages: Vec<f64>, iterations: usize, residual: f64) -> TileSolution {
    TileSolution {
        foot_currents: system.foot_currents(&voltages),
        voltages,
        converged: true,
        iterations,
        residual,
    }
}

/// Direct dense Cholesky solve. Test oracle for small systems only.
pub fn dense_solve_oracle(system: &NodalSystem) -> Result<TileSolution> {
    let n = system.unknowns();
    if n > DENSE_ORACLE_LIMIT {
        return Err(Error::TooLarge {
            unknowns: n,
            limit: DENSE_ORACLE_LIMIT,
        });
    }
    let dense = system.matrix().to_dense();
    let a = nalgebra::DMatrix::from_fn(n, n, |r, c| dense[r][c]);
    let b = nalgebra::DVector::from_column_slice(system.rhs());
    let chol = a.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let x = chol.solve(&b);
    let residual = {
        let r = &b - &a * &x;
        let bn = b.norm();
        if bn == 0.0 {
            0.0
        } else {
            r.norm() / bn
        }
    };
    Ok(TileSolution {
        foot_currents: system.foot_currents(x.as_slice()),
        voltages: x.as_slice().to_vec(),
        converged: true,
        iterations: 1,
        residual,
    })
}

/// Power dissipated in every wire segment, cell and sense resistor.
pub fn crossbar_power(system: &NodalSystem, solution: &TileSolution) -> Result<f64> {
    if !solution.converged || solution.voltages.len() != system.unknowns() {
        return Err(Error::Unconverged);
    }
    Ok(system.dissipated_power(&solution.voltages))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tech::{BitcellType, FabricConfig, TechnologyProfile};

    fn single_cell(parasitics: bool, r_sense: f64) -> NodalSystem {
        let mut tech = TechnologyProfile::mram();
        tech.r_sense = r_sense;
        tech.r_wire_seg = 1.0;
        let fabric = FabricConfig::new(1, 2, tech, BitcellType::ZeroT1R, parasitics).unwrap();
        let cells = CellMatrix::from_fn(1, 1, |_, _| 1.0 / 3e3);
        build_network(&cells, &fabric, &[0.8]).unwrap()
    }

    #[test]
    fn series_loop_with_parasitics() {
        let sys = single_cell(true, 10.0);
        let sol = solve_dc(&sys, 1e-9, 100).unwrap();
        let expected = 0.8 / 3012.0;
        assert!((sol.foot_currents[0] - expected).abs() < 1e-9 * expected);
        assert!((sol.foot_currents[0] - 265.60e-6).abs() < 0.01e-6);
        let p = crossbar_power(&sys, &sol).unwrap();
        assert!((p - 0.64 / 3012.0).abs() < 1e-9 * p);
        assert!((p - 212.48e-6).abs() < 0.01e-6);

        let dense = dense_solve_oracle(&sys).unwrap();
        assert!((dense.foot_currents[0] - expected).abs() <= 1e-15 * expected);
    }

    #[test]
    fn series_loop_without_parasitics() {
        let sol = solve_dc(&single_cell(false, 10.0), 1e-9, 100).unwrap();
        assert!((sol.foot_currents[0] - 0.8 / 3010.0).abs() < 1e-9 * sol.foot_currents[0]);
        assert!((sol.foot_currents[0] - 265.78e-6).abs() < 0.01e-6);
        let sol = solve_dc(&single_cell(false, 0.0), 1e-9, 100).unwrap();
        assert_eq!(sol.foot_currents[0], 0.8 / 3000.0);
        assert!((sol.foot_currents[0] - 266.67e-6).abs() < 0.01e-6);
    }

    #[test]
    fn homogeneous_system() {
        let tech = TechnologyProfile::cbram();
        let fabric = FabricConfig::new(8, 8, tech, BitcellType::OneT1R, true).unwrap();
        let cells = CellMatrix::from_fn(5, 6, |i, j| 1e-5 * (1 + i + j) as f64);
        let sys = build_network(&cells, &fabric, &[0.0; 5]).unwrap();
        let sol = solve_dc(&sys, 1e-9, 1000).unwrap();
        assert!(sol.voltages.iter().all(|&v| v == 0.0));
        assert!(sol.foot_currents.iter().all(|&i| i == 0.0));
        assert_eq!(crossbar_power(&sys, &sol).unwrap(), 0.0);
    }

    #[test]
    fn divergence_is_reported() {
        let fabric = FabricConfig::new(8, 8, TechnologyProfile::mram(), BitcellType::OneT1R, true).unwrap();
        let cells = CellMatrix::from_fn(8, 8, |_, _| 1e-4);
        let sys = build_network(&cells, &fabric, &[0.8; 8]).unwrap();
        let err = solve_dc_with(
            &sys,
            &SolverOptions {
                tolerance: 1e-14,
                max_iter: Some(1),
                preconditioner: Preconditioner::Jacobi,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Divergence { iterations: 1, residual } if residual > 1e-14));
        assert!(err.is_numerical());
    }

    #[test]
    fn power_requires_converged_solution() {
        let sys = single_cell(true, 10.0);
        let mut sol = solve_dc(&sys, 1e-9, 100).unwrap();
        sol.converged = false;
        assert!(matches!(crossbar_power(&sys, &sol), Err(Error::Unconverged)));
    }

    #[test]
    fn oracle_size_limit() {
        let fabric = FabricConfig::new(16, 16, TechnologyProfile::mram(), BitcellType::OneT1R, true).unwrap();
        let cells = CellMatrix::from_fn(16, 17, |_, _| 1e-4);
        let sys = build_network(&cells, &fabric, &[0.8; 16]).unwrap();
        assert!(matches!(dense_solve_oracle(&sys), Err(Error::TooLarge { unknowns: 544, .. })));
    }

    #[test]
    fn jacobi_and_line_agree() {
        let fabric = FabricConfig::new(8, 8, TechnologyProfile::mram(), BitcellType::OneT1R, true).unwrap();
        let cells = CellMatrix::from_fn(6, 8, |i, j| if (i * 3 + j) % 4 == 0 { 2e-4 } else { 9e-5 });
        let sys = build_network(&cells, &fabric, &[0.8, 0.0, 0.8, 0.8, 0.0, 0.8]).unwrap();
        let line = solve_dc(&sys, 1e-12, 10_000).unwrap();
        let jac = solve_dc_with(
            &sys,
            &SolverOptions {
                tolerance: 1e-12,
                max_iter: None,
                preconditioner: Preconditioner::Jacobi,
            },
        )
        .unwrap();
        assert!(line.iterations < jac.iterations);
        for (a, b) in line.foot_currents.iter().zip(&jac.foot_currents) {
            assert!((a - b).abs() <= 1e-9 * a.abs());
        }
    }
}
