//! Reachability between feasible encodings under mixer-only circuits.

use std::f64::consts::FRAC_PI_4;
use std::io::Write;

use serde::Serialize;

use crate::circuit::{MixerCircuit, StateVector};
use crate::encoding::QubitLayout;
use crate::error::{QbError, Result};
use crate::parallel::Parallelism;

pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_ENCODING_CAP: usize = 512;

/// `β = iπ/4` for `i = 1..=7`, shared by every layer.
pub fn beta_grid() -> Vec<f64> {
    (1..=7).map(|i| i as f64 * FRAC_PI_4).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixabilityMatrix {
    pub p: usize,
    pub epsilon: f64,
    pub betas: Vec<f64>,
    /// Feasible basis indices, grouped by decoded portfolio.
    pub encodings: Vec<usize>,
    /// Decoded portfolio of each encoding.
    pub portfolios: Vec<Vec<u64>>,
    /// Start offset of every portfolio group in `encodings`.
    pub group_starts: Vec<usize>,
    /// `amplitude[φ][ψ]`: largest `|⟨φ|U(β)|ψ⟩|` over the grid.
    pub amplitude: Vec<Vec<f64>>,
}

impl MixabilityMatrix {
    pub fn dim(&self) -> usize {
        self.encodings.len()
    }

    pub fn reachable(&self, row: usize, col: usize) -> bool {
        self.amplitude[row][col] > self.epsilon
    }

    pub fn count_reachable(&self) -> usize {
        (0..self.dim()).map(|r| (0..self.dim()).filter(|&c| self.reachable(r, c)).count()).sum()
    }

    pub fn all_reachable(&self) -> bool {
        self.count_reachable() == self.dim() * self.dim()
    }

    /// Binary greymap: reachable entries black, the rest white.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.dim();
        write!(w, "P5\n# p={} epsilon={}\n{n} {n}\n255\n", self.p, self.epsilon)?;
        let mut row = vec![0u8; n];
        for r in 0..n {
            for (c, px) in row.iter_mut().enumerate() {
                *px = if self.reachable(r, c) { 0 } else { 255 };
            }
            w.write_all(&row)?;
        }
        Ok(())
    }

    /// One line per encoding: index, bitstring, portfolio and a 0/1 column per
    /// source encoding.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let n = self.dim();
        let mut header = vec!["row".to_string(), "basis".to_string(), "portfolio".to_string()];
        header.extend((0..n).map(|c| c.to_string()));
        wr.write_record(&header)?;
        for r in 0..n {
            let mut rec = vec![r.to_string(), self.encodings[r].to_string(), portfolio_label(&self.portfolios[r])];
            rec.extend((0..n).map(|c| if self.reachable(r, c) { "1" } else { "0" }.to_string()));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn portfolio_label(y: &[u64]) -> String {
    y.iter().map(u64::to_string).collect::<Vec<_>>().join(" ")
}

/// `(encodings, portfolios, group_starts)`.
pub type Grouping = (Vec<usize>, Vec<Vec<u64>>, Vec<usize>);

/// Feasible encodings sorted by decoded portfolio (lexicographic), then basis
/// index, with group boundaries.
pub fn grouped_encodings(layout: &QubitLayout, sum: u64, cap: usize) -> Result<Grouping> {
    let encodings = layout.enumerate_encodings(sum)?;
    if encodings.len() > cap {
        return Err(QbError::CapExceeded { size: encodings.len() as f64, cap: cap as f64 });
    }
    let mut rows: Vec<(Vec<u64>, usize)> =
        encodings.into_iter().map(|b| layout.decode(b).map(|y| (y, b))).collect::<Result<_>>()?;
    rows.sort();
    let mut starts = Vec::new();
    for k in 0..rows.len() {
        if k == 0 || rows[k].0 != rows[k - 1].0 {
            starts.push(k);
        }
    }
    let (portfolios, encodings) = rows.into_iter().unzip();
    Ok((encodings, portfolios, starts))
}

pub fn mixability_matrix(layout: &QubitLayout, sum: u64, p: usize, epsilon: f64, par: Parallelism) -> Result<MixabilityMatrix> {
    mixability_matrix_capped(layout, sum, p, epsilon, DEFAULT_ENCODING_CAP, par)
}

pub fn mixability_matrix_capped(
    layout: &QubitLayout,
    sum: u64,
    p: usize,
    epsilon: f64,
    cap: usize,
    par: Parallelism,
) -> Result<MixabilityMatrix> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(QbError::Config(format!("epsilon must lie in [0, 1), got {epsilon}")));
    }
    let (encodings, portfolios, group_starts) = grouped_encodings(layout, sum, cap)?;
    let mixer = MixerCircuit::new(layout)?;
    let betas = beta_grid();
    let n = layout.n_qubits();
    // columns are independent; each runs its gates sequentially
    let columns: Vec<Result<Vec<f64>>> = par.map_indexed(encodings.len(), |c| {
        let mut best = vec![0.0f64; encodings.len()];
        if p == 0 {
            best[c] = 1.0;
            return Ok(best);
        }
        for &beta in &betas {
            let mut state = StateVector::basis(n, encodings[c])?;
            for _ in 0..p {
                mixer.apply(&mut state, beta, Parallelism::Sequential)?;
            }
            for (r, &e) in encodings.iter().enumerate() {
                best[r] = best[r].max(state.amplitude(e).norm());
            }
        }
        Ok(best)
    });
    let columns: Vec<Vec<f64>> = columns.into_iter().collect::<Result<_>>()?;
    let amplitude = (0..encodings.len()).map(|r| columns.iter().map(|col| col[r]).collect()).collect();
    Ok(MixabilityMatrix { p, epsilon, betas, encodings, portfolios, group_starts, amplitude })
}

/// `(|⟨φ|U(β)^p|ψ⟩|, |⟨ψ|(U(β)†)^p|φ⟩|)`; unitarity makes them equal.
pub fn reciprocity_pair(mixer: &MixerCircuit, psi: usize, phi: usize, beta: f64, p: usize) -> Result<(f64, f64)> {
    let n = mixer.n_qubits();
    let mut fwd = StateVector::basis(n, psi)?;
    let mut back = StateVector::basis(n, phi)?;
    for _ in 0..p {
        mixer.apply(&mut fwd, beta, Parallelism::Sequential)?;
        mixer.apply_adjoint(&mut back, beta, Parallelism::Sequential)?;
    }
    Ok((fwd.amplitude(phi).norm(), back.amplitude(psi).norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::build_layout;

    #[test]
    fn depth_zero_is_identity() {
        let layout = build_layout(&[3, 2]);
        let m = mixability_matrix(&layout, 3, 0, 1e-3, Parallelism::Sequential).unwrap();
        for r in 0..m.dim() {
            for c in 0..m.dim() {
                assert_eq!(m.reachable(r, c), r == c);
            }
        }
    }

    #[test]
    fn groups_are_contiguous() {
        let layout = build_layout(&[4, 4]);
        let m = mixability_matrix(&layout, 4, 1, 1e-3, Parallelism::Sequential).unwrap();
        assert_eq!(m.group_starts.len(), 5);
        for g in 0..m.group_starts.len() {
            let end = m.group_starts.get(g + 1).copied().unwrap_or(m.dim());
            let y = &m.portfolios[m.group_starts[g]];
            assert!(m.portfolios[m.group_starts[g]..end].iter().all(|v| v == y));
        }
    }

    #[test]
    fn cap_is_enforced() {
        let layout = build_layout(&[20, 20]);
        assert!(matches!(
            mixability_matrix_capped(&layout, 20, 1, 1e-3, 10, Parallelism::Sequential),
            Err(QbError::CapExceeded { .. })
        ));
    }

    #[test]
    fn pgm_layout() {
        let layout = build_layout(&[2, 2]);
        let m = mixability_matrix(&layout, 2, 0, 1e-3, Parallelism::Sequential).unwrap();
        let mut buf = Vec::new();
        m.write_pgm(&mut buf).unwrap();
        let n = m.dim();
        let header = format!("P5\n# p=0 epsilon=0.001\n{n} {n}\n255\n");
        assert!(buf.starts_with(header.as_bytes()));
        let px = &buf[header.len()..];
        assert_eq!(px.len(), n * n);
        assert_eq!(px[0], 0);
        assert_eq!(px[1], 255);
    }
}
