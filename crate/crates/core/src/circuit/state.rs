use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{QbError, Result};
use crate::parallel::Parallelism;

/// Allowed deviation of the squared norm from one.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Smallest block handed to a worker by the gate kernels.
const KERNEL_CHUNK: usize = 1 << 13;

/// Dense register of `2^n` amplitudes; basis index bit `m` is qubit `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0).expect("index 0 always valid")
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(QbError::BasisOutOfRange { index, n_qubits });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Wrap raw amplitudes; the length must be a power of two and the norm one.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if !amps.len().is_power_of_two() {
            return Err(QbError::InvalidGate(format!("{} amplitudes is not a power of two", amps.len())));
        }
        let s = Self { n_qubits: amps.len().trailing_zeros() as usize, amps };
        s.check_norm()?;
        Ok(s)
    }

    /// Reset to a basis state without reallocating.
    pub fn set_basis(&mut self, index: usize) -> Result<()> {
        if index >= self.amps.len() {
            return Err(QbError::BasisOutOfRange { index, n_qubits: self.n_qubits });
        }
        self.amps.fill(Complex64::new(0.0, 0.0));
        self.amps[index] = Complex64::new(1.0, 0.0);
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        Parallelism::Sequential.sum_by(&self.amps, |a| a.norm_sqr())
    }

    /// Error if the norm drifted beyond [`NORM_TOLERANCE`]; never renormalises.
    pub fn check_norm(&self) -> Result<()> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(QbError::NormDrift(n));
        }
        Ok(())
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(QbError::QubitOutOfRange { qubit: q, n_qubits: self.n_qubits });
        }
        Ok(())
    }

    /// `exp(-iβ(X_aX_b + Y_aY_b))`: rotates each `|0_a1_b⟩, |1_a0_b⟩` pair by
    /// `[[cos 2β, -i sin 2β], [-i sin 2β, cos 2β]]`.
    pub fn apply_xy(&mut self, a: usize, b: usize, beta: f64, par: Parallelism) -> Result<()> {
        self.check_qubit(a)?;
        self.check_qubit(b)?;
        if a == b {
            return Err(QbError::InvalidGate(format!("XY gate needs two distinct qubits, got {a} twice")));
        }
        let (c, s) = ((2.0 * beta).cos(), (2.0 * beta).sin());
        let (ma, mb) = (1usize << a, 1usize << b);
        let pos = [a.min(b), a.max(b)];
        self.pair_rotation(&pos, mb, ma, c, s, par);
        Ok(())
    }

    /// `exp(-iβ(-X_iY_jY_k + X_iX_jX_k + Y_iX_jY_k + Y_iY_jX_k))` with
    /// `i = big`: rotates each `|1_big 0 0⟩, |0_big 1 1⟩` pair by angle `4β`
    /// and leaves every other basis state untouched.
    pub fn apply_xyy(&mut self, big: usize, s1: usize, s2: usize, beta: f64, par: Parallelism) -> Result<()> {
        for q in [big, s1, s2] {
            self.check_qubit(q)?;
        }
        if big == s1 || big == s2 || s1 == s2 {
            return Err(QbError::InvalidGate(format!("XYY gate needs three distinct qubits, got ({big},{s1},{s2})")));
        }
        let (c, s) = ((4.0 * beta).cos(), (4.0 * beta).sin());
        let mut pos = [big, s1, s2];
        pos.sort_unstable();
        self.pair_rotation(&pos, 1 << big, (1 << s1) | (1 << s2), c, s, par);
        Ok(())
    }

    /// Rotate every pair `(base|lo_mask, base|hi_mask)` where `base` has zeros
    /// at `pos` by `[[c, -is], [-is, c]]`.
    fn pair_rotation(&mut self, pos: &[usize], hi_mask: usize, lo_mask: usize, c: f64, s: f64, par: Parallelism) {
        let top = *pos.last().expect("at least one operand");
        // blocks of 2^(top+1) amplitudes are closed under the gate
        let block = (1usize << (top + 1)).max(KERNEL_CHUNK).min(self.amps.len());
        let per_block = block >> pos.len();
        let ms = Complex64::new(0.0, -s);
        let fixed = pos.iter().fold(0usize, |m, &p| m | (1 << p));
        par.for_each_chunk_mut(&mut self.amps, block, |_, chunk| {
            let mut base = 0usize;
            for _ in 0..per_block {
                let (i, j) = (base | hi_mask, base | lo_mask);
                let (x, y) = (chunk[i], chunk[j]);
                chunk[i] = x * c + y * ms;
                chunk[j] = x * ms + y * c;
                // next index with zeros at every operand position
                base = ((base | fixed) + 1) & !fixed;
            }
        });
    }

    /// Multiply amplitude `z` by `phases[classes[z]]`.
    pub(crate) fn apply_class_phases(&mut self, classes: &[u32], phases: &[Complex64], par: Parallelism) {
        par.zip_chunks_mut(&mut self.amps, classes, KERNEL_CHUNK, |amps, cls| {
            for (a, &c) in amps.iter_mut().zip(cls) {
                *a *= phases[c as usize];
            }
        });
    }

    /// Write amplitudes as little-endian `(re, im)` f64 pairs in index order.
    pub fn write_le<W: Write>(&self, mut w: W) -> Result<()> {
        for a in &self.amps {
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_le<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() % 16 != 0 {
            return Err(QbError::InvalidGate(format!("state dump of {} bytes is not a whole number of amplitudes", bytes.len())));
        }
        let amps = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                Complex64::new(re, im)
            })
            .collect();
        Self::from_amplitudes(amps)
    }
}
