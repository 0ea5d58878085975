use proptest::prelude::*;

use qbqaoa::analysis::reciprocity_pair;
use qbqaoa::circuit::{MixerCircuit, StateVector};
use qbqaoa::encoding::build_layout;
use qbqaoa::parallel::Parallelism;
use qbqaoa::problem::IntegerModel;
use qbqaoa::qaoa::{QaoaParams, QaoaProblem};

fn small_ranges() -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(0u64..=9, 1..=3).prop_filter("at most 14 qubits", |r| build_layout(r).n_qubits() <= 14)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_bitstring_decodes_in_range(ranges in small_ranges()) {
        let layout = build_layout(&ranges);
        for bits in 0..1usize << layout.n_qubits() {
            let y = layout.decode(bits).unwrap();
            prop_assert!(y.iter().zip(&ranges).all(|(v, r)| v <= r));
        }
    }

    #[test]
    fn canonical_round_trip(r in 0u64..=64) {
        let layout = build_layout(&[r]);
        for y in 0..=r {
            let bits = layout.encode_canonical(&[y]).unwrap();
            prop_assert_eq!(layout.decode(bits).unwrap(), vec![y]);
        }
    }

    #[test]
    fn split_rule_holds(ranges in prop::collection::vec(0u64..=200, 1..=6)) {
        let layout = build_layout(&ranges);
        prop_assert!(layout.satisfies_split_rule());
        for (i, &r) in ranges.iter().enumerate() {
            let max: u64 = layout.asset_qubits(i).iter().map(|&m| layout.values[m]).sum();
            prop_assert_eq!(max, r);
        }
    }

    #[test]
    fn mixer_conserves_sum_exactly(ranges in small_ranges(), beta in -3.2f64..3.2, layers in 1usize..4) {
        let layout = build_layout(&ranges);
        let total: u64 = ranges.iter().sum();
        let sum = total / 2;
        let encodings = layout.enumerate_encodings(sum).unwrap();
        let mixer = MixerCircuit::new(&layout).unwrap();
        let mut state = StateVector::basis(layout.n_qubits(), encodings[encodings.len() / 2]).unwrap();
        for _ in 0..layers {
            mixer.apply(&mut state, beta, Parallelism::Sequential).unwrap();
        }
        for (z, a) in state.amplitudes().iter().enumerate() {
            if layout.weighted_sum(z) != sum {
                prop_assert_eq!(a.norm_sqr(), 0.0);
            }
        }
    }

    #[test]
    fn stage_depths_are_bounded(ranges in prop::collection::vec(1u64..=300, 1..=6)) {
        let layout = build_layout(&ranges);
        let mixer = MixerCircuit::new(&layout).unwrap();
        let g = &layout.groups;
        for j in 0..g.len() {
            prop_assert!(mixer.xy_stage_depth(j) <= 3);
            if j >= 1 && !g[j].is_empty() && g[j - 1].len() >= 2 {
                let bound = g[j - 1].len().div_ceil(g[j].len()).max(3) + 3;
                prop_assert!(mixer.xyy_stage_depth(j) <= bound, "level {} depth {} bound {}", j, mixer.xyy_stage_depth(j), bound);
            }
        }
    }

    #[test]
    fn adjoint_reciprocity(beta in -3.2f64..3.2, p in 1usize..4, a in 0usize..100, b in 0usize..100) {
        let layout = build_layout(&[5, 4]);
        let mixer = MixerCircuit::new(&layout).unwrap();
        let enc = layout.enumerate_encodings(5).unwrap();
        let (psi, phi) = (enc[a % enc.len()], enc[b % enc.len()]);
        let (fwd, back) = reciprocity_pair(&mixer, psi, phi, beta, p).unwrap();
        prop_assert!((fwd - back).abs() < 1e-12);
    }
}

#[test]
fn parallel_and_sequential_evolutions_match_bitwise() {
    let n = 6;
    let sigma = (0..n).map(|i| (0..n).map(|j| if i == j { 0.8 } else { 0.1 * ((i + j) % 3) as f64 }).collect()).collect();
    let mu = (0..n).map(|i| -0.05 * i as f64).collect();
    let model = IntegerModel::new(sigma, mu, vec![-2; n], vec![2; n], 2).unwrap();
    let params = QaoaParams::linear(3, 0.9, 0.6).unwrap();
    let seq = QaoaProblem::new(model.clone(), 1.0).unwrap().with_parallelism(Parallelism::Sequential);
    let par = QaoaProblem::new(model, 1.0).unwrap().with_parallelism(Parallelism::Parallel);
    assert!(seq.n_qubits() >= 18);
    let a = seq.evolve(&params).unwrap();
    let b = par.evolve(&params).unwrap();
    assert_eq!(a.amplitudes(), b.amplitudes());
    assert_eq!(seq.diag.expectation(&a).to_bits(), par.diag.expectation(&b).to_bits());
}
