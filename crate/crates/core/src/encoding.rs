//! Quasi-binary encoding of bounded integers.
//!
//! A variable with range `R` gets `n = ⌊log₂(R+1)⌋` power levels; level `j`
//! (value `2^(j-1)`) carries `bin_j(R - 2^n + 1) + 1` qubits, so all-ones
//! decodes to exactly `R` and every bitstring decodes into `0..=R`.
//!
//! The XYY mixer moves weight between one `2^j` qubit and two `2^(j-1)`
//! qubits, which requires at least two qubits at every level below the global
//! top. [`build_layout`] enforces that by splitting higher qubits, walking the
//! levels from the bottom up so a split never undoes an earlier level.
//!
//! Global qubit order: assets in input order, powers ascending within an
//! asset, duplicates adjacent. Qubit `m` is bit `m` of the basis index.

use serde::{Deserialize, Serialize};

use crate::error::{QbError, Result};

/// Default cap on the qubit count for bitstring enumeration.
pub const DEFAULT_ENCODING_QUBIT_CAP: usize = 26;

/// Multiplicities `l_{i,j}` (index `j-1`) of the unsplit quasi-binary encoding.
pub fn quasi_binary_multiplicities(range: u64) -> Vec<usize> {
    if range == 0 {
        return Vec::new();
    }
    let levels = (range + 1).ilog2();
    let excess = range + 1 - (1u64 << levels);
    (0..levels).map(|j| ((excess >> j) & 1) as usize + 1).collect()
}

/// Qubit values of the unsplit encoding, ascending.
pub fn quasi_binary_values(range: u64) -> Vec<u64> {
    quasi_binary_multiplicities(range)
        .iter()
        .enumerate()
        .flat_map(|(j, &l)| std::iter::repeat_n(1u64 << j, l))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitLayout {
    /// `r(m)`, the integer carried by qubit `m`.
    pub values: Vec<u64>,
    /// Owning variable of qubit `m`.
    pub assets: Vec<usize>,
    /// Maximum encodable value per variable.
    pub ranges: Vec<u64>,
    /// `groups[j]` lists the qubits worth `2^j`, in global order.
    pub groups: Vec<Vec<usize>>,
    /// Per variable, `(j, multiplicity)` for every occupied level `j`.
    pub per_asset: Vec<Vec<(u32, usize)>>,
}

impl QubitLayout {
    /// Lay out explicit per-variable level multiplicities (`counts[i][j]`
    /// qubits of value `2^j` for variable `i`).
    pub fn from_level_counts(counts: &[Vec<usize>]) -> Self {
        let mut values = Vec::new();
        let mut assets = Vec::new();
        for (i, levels) in counts.iter().enumerate() {
            for (j, &l) in levels.iter().enumerate() {
                for _ in 0..l {
                    values.push(1u64 << j);
                    assets.push(i);
                }
            }
        }
        Self::assemble(values, assets, counts.len())
    }

    /// Arbitrary qubit list; values must be powers of two.
    pub fn from_qubits(values: Vec<u64>, assets: Vec<usize>) -> Result<Self> {
        if values.len() != assets.len() {
            return Err(QbError::DimensionMismatch { expected: values.len(), got: assets.len() });
        }
        if let Some(v) = values.iter().find(|v| !v.is_power_of_two()) {
            return Err(QbError::InvalidModel(format!("qubit value {v} is not a power of two")));
        }
        let n_assets = assets.iter().map(|a| a + 1).max().unwrap_or(0);
        Ok(Self::assemble(values, assets, n_assets))
    }

    fn assemble(values: Vec<u64>, assets: Vec<usize>, n_assets: usize) -> Self {
        let mut ranges = vec![0u64; n_assets];
        for (v, a) in values.iter().zip(&assets) {
            ranges[*a] += v;
        }
        let top = values.iter().map(|v| v.ilog2() as usize + 1).max().unwrap_or(0);
        let mut groups = vec![Vec::new(); top];
        for (m, v) in values.iter().enumerate() {
            groups[v.ilog2() as usize].push(m);
        }
        let mut per_asset = vec![Vec::new(); n_assets];
        for (i, slot) in per_asset.iter_mut().enumerate() {
            for j in 0..top {
                let l = values
                    .iter()
                    .zip(&assets)
                    .filter(|(v, a)| **a == i && v.ilog2() as usize == j)
                    .count();
                if l > 0 {
                    slot.push((j as u32, l));
                }
            }
        }
        Self { values, assets, ranges, groups, per_asset }
    }

    pub fn n_qubits(&self) -> usize {
        self.values.len()
    }

    pub fn n_assets(&self) -> usize {
        self.ranges.len()
    }

    /// Highest occupied level `J` (value `2^J`), `None` for an empty layout.
    pub fn top_level(&self) -> Option<usize> {
        self.groups.len().checked_sub(1)
    }

    /// Qubit indices owned by variable `asset`, in global order.
    pub fn asset_qubits(&self, asset: usize) -> Vec<usize> {
        (0..self.n_qubits()).filter(|&m| self.assets[m] == asset).collect()
    }

    /// Every level strictly below the top holds at least two qubits.
    pub fn satisfies_split_rule(&self) -> bool {
        match self.top_level() {
            None => true,
            Some(top) => self.groups[..top].iter().all(|g| g.len() >= 2),
        }
    }

    /// Decode a basis index into per-variable values.
    pub fn decode(&self, bits: usize) -> Result<Vec<u64>> {
        let n = self.n_qubits();
        if n < usize::BITS as usize && bits >> n != 0 {
            return Err(QbError::BasisOutOfRange { index: bits, n_qubits: n });
        }
        Ok(self.decode_unchecked(bits))
    }

    pub(crate) fn decode_unchecked(&self, bits: usize) -> Vec<u64> {
        let mut y = vec![0u64; self.n_assets()];
        let mut rest = bits;
        while rest != 0 {
            let m = rest.trailing_zeros() as usize;
            y[self.assets[m]] += self.values[m];
            rest &= rest - 1;
        }
        y
    }

    /// `Σ r(m)·bit_m`, the quantity every mixer gate conserves.
    pub fn weighted_sum(&self, bits: usize) -> u64 {
        let mut s = 0;
        let mut rest = bits;
        while rest != 0 {
            let m = rest.trailing_zeros() as usize;
            s += self.values[m];
            rest &= rest - 1;
        }
        s
    }

    /// Canonical basis index encoding `y`.
    ///
    /// Within each variable qubits are filled greedily from the largest
    /// value down, first copy before duplicates. For an unsplit layout and
    /// `y < 2^n` this is the plain binary expansion on the first copies.
    pub fn encode_canonical(&self, y: &[u64]) -> Result<usize> {
        if y.len() != self.n_assets() {
            return Err(QbError::DimensionMismatch { expected: self.n_assets(), got: y.len() });
        }
        let mut bits = 0usize;
        for (i, &target) in y.iter().enumerate() {
            if target > self.ranges[i] {
                return Err(QbError::OutOfRange { asset: i, value: target, range: self.ranges[i] });
            }
            let mut qubits = self.asset_qubits(i);
            // stable sort keeps first copies ahead of duplicates
            qubits.sort_by(|a, b| self.values[*b].cmp(&self.values[*a]));
            let mut left = target;
            for m in qubits {
                if self.values[m] <= left {
                    left -= self.values[m];
                    bits |= 1 << m;
                }
            }
            debug_assert_eq!(left, 0, "layout for asset {i} is not complete");
        }
        Ok(bits)
    }

    /// All basis indices whose decoded values sum to `sum`, ascending.
    pub fn enumerate_encodings(&self, sum: u64) -> Result<Vec<usize>> {
        self.enumerate_encodings_capped(sum, DEFAULT_ENCODING_QUBIT_CAP)
    }

    pub fn enumerate_encodings_capped(&self, sum: u64, cap: usize) -> Result<Vec<usize>> {
        let n = self.n_qubits();
        if n > cap {
            return Err(QbError::CapExceeded { size: n as f64, cap: cap as f64 });
        }
        // local patterns per variable with their decoded value
        let locals: Vec<Vec<(usize, u64)>> = (0..self.n_assets())
            .map(|i| {
                let qs = self.asset_qubits(i);
                (0..1usize << qs.len())
                    .map(|pat| {
                        let mut bits = 0usize;
                        let mut val = 0u64;
                        for (k, &m) in qs.iter().enumerate() {
                            if pat >> k & 1 == 1 {
                                bits |= 1 << m;
                                val += self.values[m];
                            }
                        }
                        (bits, val)
                    })
                    .collect()
            })
            .collect();
        let mut suffix = vec![0u64; self.n_assets() + 1];
        for i in (0..self.n_assets()).rev() {
            suffix[i] = suffix[i + 1] + self.ranges[i];
        }
        let mut out = Vec::new();
        fn walk(
            locals: &[Vec<(usize, u64)>],
            suffix: &[u64],
            i: usize,
            bits: usize,
            left: u64,
            out: &mut Vec<usize>,
        ) {
            if i == locals.len() {
                if left == 0 {
                    out.push(bits);
                }
                return;
            }
            for &(b, v) in &locals[i] {
                if v <= left && left - v <= suffix[i + 1] {
                    walk(locals, suffix, i + 1, bits | b, left - v, out);
                }
            }
        }
        walk(&locals, &suffix, 0, 0, sum, &mut out);
        out.sort_unstable();
        Ok(out)
    }

    pub fn qubit_counts(&self) -> QubitCounts {
        let mut per_asset = vec![0usize; self.n_assets()];
        for &a in &self.assets {
            per_asset[a] += 1;
        }
        QubitCounts { total: self.n_qubits(), per_asset }
    }

    /// Number of bitstrings of variable `asset` decoding to `value`.
    pub fn encoding_multiplicity(&self, asset: usize, value: u64) -> u64 {
        let mut ways = vec![0u64; self.ranges[asset] as usize + 1];
        ways[0] = 1;
        for m in self.asset_qubits(asset) {
            let v = self.values[m] as usize;
            for s in (v..ways.len()).rev() {
                ways[s] += ways[s - v];
            }
        }
        ways.get(value as usize).copied().unwrap_or(0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&LayoutDump::from(self))?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitCounts {
    pub per_asset: Vec<usize>,
    pub total: usize,
}

#[derive(Debug, Serialize)]
struct LayoutDump<'a> {
    n_qubits: usize,
    ranges: &'a [u64],
    qubits: Vec<QubitDump>,
    groups: Vec<GroupDump<'a>>,
    per_asset: &'a [Vec<(u32, usize)>],
    counts: QubitCounts,
}

#[derive(Debug, Serialize)]
struct QubitDump {
    index: usize,
    value: u64,
    asset: usize,
}

#[derive(Debug, Serialize)]
struct GroupDump<'a> {
    value: u64,
    qubits: &'a [usize],
}

impl<'a> From<&'a QubitLayout> for LayoutDump<'a> {
    fn from(l: &'a QubitLayout) -> Self {
        LayoutDump {
            n_qubits: l.n_qubits(),
            ranges: &l.ranges,
            qubits: (0..l.n_qubits())
                .map(|m| QubitDump { index: m, value: l.values[m], asset: l.assets[m] })
                .collect(),
            groups: l
                .groups
                .iter()
                .enumerate()
                .map(|(j, g)| GroupDump { value: 1 << j, qubits: g })
                .collect(),
            per_asset: &l.per_asset,
            counts: l.qubit_counts(),
        }
    }
}

/// Quasi-binary layout for `ranges` with the mixer split rule applied.
///
/// For each level `j` from the bottom up to just below the global top, while
/// fewer than two qubits are worth `2^j`, one `2^(j+1)` qubit is split into
/// two `2^j` qubits. The donor is the variable with the largest range that
/// still owns such a qubit (lowest index on ties).
pub fn build_layout(ranges: &[u64]) -> QubitLayout {
    let mut counts: Vec<Vec<usize>> = ranges.iter().map(|&r| quasi_binary_multiplicities(r)).collect();
    let top = counts.iter().map(Vec::len).max().unwrap_or(0);
    for level in 0..top.saturating_sub(1) {
        loop {
            let have: usize = counts.iter().map(|c| c.get(level).copied().unwrap_or(0)).sum();
            if have >= 2 {
                break;
            }
            let donor = (0..counts.len())
                .filter(|&i| counts[i].get(level + 1).copied().unwrap_or(0) > 0)
                .max_by(|&a, &b| ranges[a].cmp(&ranges[b]).then(b.cmp(&a)));
            let Some(i) = donor else { break };
            counts[i][level + 1] -= 1;
            counts[i][level] += 2;
            while counts[i].last() == Some(&0) {
                counts[i].pop();
            }
        }
    }
    QubitLayout::from_level_counts(&counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_unsplit() {
        assert_eq!(quasi_binary_multiplicities(17), vec![1, 2, 1, 1]);
        assert_eq!(quasi_binary_values(17), vec![1, 2, 2, 4, 8]);
    }

    #[test]
    fn zero_range_has_no_qubits() {
        let l = build_layout(&[0]);
        assert_eq!(l.n_qubits(), 0);
        assert_eq!(l.decode(0).unwrap(), vec![0]);
        assert_eq!(l.encode_canonical(&[0]).unwrap(), 0);
    }

    #[test]
    fn instance_one_layout() {
        let l = build_layout(&[4; 6]);
        assert_eq!(l.n_qubits(), 18);
        for i in 0..6 {
            let v: Vec<u64> = l.asset_qubits(i).iter().map(|&m| l.values[m]).collect();
            assert_eq!(v, vec![1, 1, 2]);
        }
        assert_eq!(l.groups[0].len(), 12);
        assert_eq!(l.groups[1].len(), 6);
    }

    #[test]
    fn twenty_twenty_layout() {
        let l = build_layout(&[20, 20]);
        assert_eq!(l.n_qubits(), 12);
        for i in 0..2 {
            let v: Vec<u64> = l.asset_qubits(i).iter().map(|&m| l.values[m]).collect();
            assert_eq!(v, vec![1, 1, 2, 4, 4, 8]);
        }
    }

    #[test]
    fn split_rule_on_lonely_levels() {
        let l = build_layout(&[17]);
        assert!(l.satisfies_split_rule());
        assert_eq!(l.ranges, vec![17]);
        assert_eq!(l.values, vec![1, 1, 1, 2, 2, 2, 4, 4]);
        // donor preference: the larger range gives up its qubit
        let l = build_layout(&[3, 7]);
        assert!(l.satisfies_split_rule());
        assert_eq!(l.ranges, vec![3, 7]);
    }

    #[test]
    fn pure_binary_before_split() {
        for m in 1..10u32 {
            let r = (1u64 << m) - 1;
            assert_eq!(quasi_binary_values(r).len(), m as usize);
        }
    }

    #[test]
    fn thousand_needs_fifteen() {
        let l = build_layout(&[1000; 6]);
        assert_eq!(l.qubit_counts().per_asset, vec![15; 6]);
    }

    #[test]
    fn decode_extremes() {
        let l = QubitLayout::from_level_counts(&[quasi_binary_multiplicities(17)]);
        assert_eq!(l.decode(0).unwrap(), vec![0]);
        assert_eq!(l.decode(0b11111).unwrap(), vec![17]);
        for w in 0..32 {
            assert!(l.decode(w).unwrap()[0] <= 17);
        }
        assert!(l.decode(32).is_err());
        assert_eq!(l.encode_canonical(&[17]).unwrap(), 0b11111);
        assert!(l.encode_canonical(&[18]).is_err());
    }

    #[test]
    fn canonical_round_trip_exhaustive() {
        for r in 0..=64u64 {
            for layout in [QubitLayout::from_level_counts(&[quasi_binary_multiplicities(r)]), build_layout(&[r])] {
                for y in 0..=r {
                    let bits = layout.encode_canonical(&[y]).unwrap();
                    assert_eq!(layout.decode(bits).unwrap(), vec![y], "R={r} y={y}");
                }
            }
        }
    }

    #[test]
    fn canonical_is_binary_below_power() {
        let l = QubitLayout::from_level_counts(&[quasi_binary_multiplicities(17)]);
        // qubits: 0→1, 1→2, 2→2, 3→4, 4→8; first copies are 0,1,3,4
        assert_eq!(l.encode_canonical(&[5]).unwrap(), 0b01001);
        assert_eq!(l.encode_canonical(&[15]).unwrap(), 0b11011);
    }

    #[test]
    fn twenty_twenty_encodings() {
        let l = build_layout(&[20, 20]);
        let enc = l.enumerate_encodings(20).unwrap();
        assert_eq!(enc.len(), 220);
        let mut ys: Vec<_> = enc.iter().map(|&b| l.decode(b).unwrap()).collect();
        ys.dedup();
        ys.sort();
        ys.dedup();
        assert_eq!(ys.len(), 21);
        assert!(enc.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(l.enumerate_encodings(40).unwrap(), vec![(1 << 12) - 1]);
    }

    #[test]
    fn encoding_multiplicity_matches_enumeration() {
        use crate::problem::enumerate_feasible_capped;
        let l = build_layout(&[4; 6]);
        let enc = l.enumerate_encodings(14).unwrap();
        let expected: u64 = enumerate_feasible_capped(&[4; 6], 14, 1e8)
            .unwrap()
            .map(|y| (0..6).map(|i| l.encoding_multiplicity(i, y[i])).product::<u64>())
            .sum();
        assert_eq!(enc.len() as u64, expected);
    }

    #[test]
    fn multiplicity_brute_force_small() {
        for ranges in [vec![5u64, 3], vec![9, 2, 1], vec![6, 6]] {
            let l = build_layout(&ranges);
            assert!(l.n_qubits() <= 14);
            let mut counts = std::collections::HashMap::new();
            for b in 0..1usize << l.n_qubits() {
                *counts.entry(l.decode(b).unwrap()).or_insert(0u64) += 1;
            }
            for (y, c) in counts {
                let prod: u64 = y.iter().enumerate().map(|(i, &v)| l.encoding_multiplicity(i, v)).product();
                assert_eq!(prod, c, "{ranges:?} {y:?}");
            }
        }
    }

    #[test]
    fn cap_enforced() {
        let l = build_layout(&[1000; 3]);
        assert!(matches!(l.enumerate_encodings_capped(10, 20), Err(QbError::CapExceeded { .. })));
    }

    #[test]
    fn layout_json_dump() {
        let v: serde_json::Value = serde_json::from_str(&build_layout(&[4, 4]).to_json().unwrap()).unwrap();
        assert_eq!(v["n_qubits"], 6);
        assert_eq!(v["qubits"][2]["value"], 2);
        assert_eq!(v["groups"][0]["qubits"].as_array().unwrap().len(), 4);
    }
}
